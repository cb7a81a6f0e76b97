#include "palmlab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include <Eigen/Dense>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include "palmlab/error.hpp"

namespace palmlab {

void Moments::add(double x) {
  if (!std::isfinite(x)) throw UsageError("non-finite value added to Moments");
  const auto q = static_cast<__int128>(std::llround(std::ldexp(x, kFracBits)));
  ++n_;
  sum_ += q;
  sumsq_ += q * q;
}

Moments& Moments::merge(const Moments& other) noexcept {
  n_ += other.n_;
  sum_ += other.sum_;
  sumsq_ += other.sumsq_;
  return *this;
}

double Moments::mean() const noexcept {
  if (n_ == 0) return 0.0;
  return std::ldexp(static_cast<double>(static_cast<long double>(sum_) / n_), -kFracBits);
}

double Moments::variance() const noexcept {
  if (n_ < 2) return 0.0;
  const long double s = static_cast<long double>(sum_);
  const long double ss = static_cast<long double>(sumsq_);
  long double centered = ss - s * s / n_;
  if (centered < 0) centered = 0;
  return std::ldexp(static_cast<double>(centered / (n_ - 1)), -2 * kFracBits);
}

double Moments::std_error() const noexcept {
  return n_ < 2 ? 0.0 : std::sqrt(variance() / static_cast<double>(n_));
}

double standardized(double estimate, double reference, double se) noexcept {
  const double diff = estimate - reference;
  if (se > 0.0) return diff / se;
  if (diff == 0.0) return 0.0;
  return diff > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
}

StatReport StatReport::from_moments(std::string experiment, std::string statistic, const Moments& m,
                                    std::optional<double> reference, double threshold) {
  StatReport r = from_estimate(std::move(experiment), std::move(statistic), m.mean(), m.std_error(), m.count(),
                               reference, threshold);
  r.moments = m;
  return r;
}

StatReport StatReport::from_estimate(std::string experiment, std::string statistic, double estimate,
                                     double std_error, std::int64_t n, std::optional<double> reference,
                                     double threshold) {
  StatReport r;
  r.experiment = std::move(experiment);
  r.statistic = std::move(statistic);
  r.estimate = estimate;
  r.std_error = std_error;
  r.n = n;
  r.reference = reference;
  r.threshold = threshold;
  if (reference) {
    r.z = standardized(estimate, *reference, std_error);
    r.pass = std::abs(r.z) <= threshold;
  }
  return r;
}

StatReport StatReport::from_pvalue(std::string experiment, std::string statistic, double pvalue, double alpha,
                                   std::int64_t n) {
  StatReport r;
  r.experiment = std::move(experiment);
  r.statistic = std::move(statistic);
  r.estimate = pvalue;
  r.n = n;
  r.pass = pvalue >= alpha;
  r.note = "p-value vs alpha=" + std::to_string(alpha);
  return r;
}

StatReport StatReport::exact(std::string experiment, std::string statistic, bool ok, std::int64_t n,
                             std::string note) {
  StatReport r;
  r.experiment = std::move(experiment);
  r.statistic = std::move(statistic);
  r.estimate = ok ? 1.0 : 0.0;
  r.n = n;
  r.pass = ok;
  r.note = std::move(note);
  return r;
}

std::string StatReport::csv_header() { return "experiment,statistic,estimate,stderr,n,reference,z,pass"; }

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

}  // namespace

std::string StatReport::csv_row() const {
  char buf[256];
  char ref[64] = "none";
  if (reference) std::snprintf(ref, sizeof ref, "%.12g", *reference);
  std::snprintf(buf, sizeof buf, ",%.12g,%.12g,%lld,%s,%.6g,%s", estimate, std_error, static_cast<long long>(n), ref, z,
                pass ? "true" : "false");
  return csv_field(experiment) + "," + csv_field(statistic) + buf;
}

StatReport merge(const StatReport& a, const StatReport& b) {
  if (!a.moments || !b.moments) throw UsageError("only mean-type reports can be merged");
  if (a.experiment != b.experiment || a.statistic != b.statistic || a.reference != b.reference) {
    throw UsageError("merging reports of different statistics");
  }
  Moments m = *a.moments;
  m.merge(*b.moments);
  return StatReport::from_moments(a.experiment, a.statistic, m, a.reference, a.threshold);
}

MeanSe mean_se(std::span<const double> values) {
  Moments m;
  for (double v : values) m.add(v);
  return {m.mean(), m.std_error(), values.size()};
}

double kolmogorov_sf(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 1.18) {
    // Q = 1 - sqrt(2 pi)/lambda * sum exp(-(2k-1)^2 pi^2 / (8 lambda^2))
    const double c = std::numbers::pi * std::numbers::pi / (8.0 * lambda * lambda);
    double s = 0.0;
    for (int k = 1; k <= 8; ++k) s += std::exp(-(2.0 * k - 1) * (2.0 * k - 1) * c);
    return std::clamp(1.0 - std::sqrt(2.0 * std::numbers::pi) / lambda * s, 0.0, 1.0);
  }
  double s = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    s += (k % 2 == 1 ? term : -term);
    if (term < 1e-16) break;
  }
  return std::clamp(2.0 * s, 0.0, 1.0);
}

TestResult two_sample_ks(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw InsufficientData("KS needs two non-empty samples");
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  const double na = static_cast<double>(x.size()), nb = static_cast<double>(y.size());
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    d = std::max(d, std::abs(i / na - j / nb));
  }
  const double ne = na * nb / (na + nb);
  const double sq = std::sqrt(ne);
  return {d, 0.0, kolmogorov_sf((sq + 0.12 + 0.11 / sq) * d)};
}

TestResult ks_one_sample(std::span<const double> values, const std::function<double(double)>& cdf) {
  if (values.empty()) throw InsufficientData("KS needs a non-empty sample");
  std::vector<double> x(values.begin(), values.end());
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = cdf(x[i]);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  const double sq = std::sqrt(n);
  return {d, 0.0, kolmogorov_sf((sq + 0.12 + 0.11 / sq) * d)};
}

double chi2_sf(double x, double df) {
  if (df <= 0) return 1.0;
  if (x <= 0) return 1.0;
  return boost::math::cdf(boost::math::complement(boost::math::chi_squared_distribution<double>(df), x));
}

double normal_quantile(double p) { return boost::math::quantile(boost::math::normal_distribution<double>(), p); }

TestResult chi_square_gof(std::span<const double> observed, std::span<const double> expected, int fitted) {
  if (observed.size() != expected.size()) throw UsageError("observed/expected length mismatch");
  double total = 0.0;
  for (double o : observed) total += o;
  if (total < 30) throw InsufficientData("chi-square GOF needs at least 30 observations");
  std::vector<double> obs, exp;
  double o_acc = 0.0, e_acc = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    o_acc += observed[i];
    e_acc += expected[i];
    if (e_acc >= 5.0) {
      obs.push_back(o_acc);
      exp.push_back(e_acc);
      o_acc = e_acc = 0.0;
    }
  }
  if (e_acc > 0.0 || o_acc > 0.0) {
    if (exp.empty()) {
      obs.push_back(o_acc);
      exp.push_back(e_acc);
    } else {
      obs.back() += o_acc;
      exp.back() += e_acc;
    }
  }
  const int df = static_cast<int>(obs.size()) - 1 - fitted;
  if (obs.size() < 2 || df < 1) throw InsufficientData("fewer than two chi-square cells with expected count >= 5");
  double stat = 0.0;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const double diff = obs[i] - exp[i];
    stat += diff * diff / exp[i];
  }
  return {stat, static_cast<double>(df), chi2_sf(stat, df)};
}

TestResult poisson_dispersion(std::span<const double> counts) {
  if (counts.size() < 30) throw InsufficientData("dispersion test needs at least 30 counts");
  const MeanSe ms = mean_se(counts);
  const double df = static_cast<double>(counts.size() - 1);
  if (ms.mean <= 0.0) return {0.0, df, 1.0};
  double stat = 0.0;
  for (double c : counts) stat += (c - ms.mean) * (c - ms.mean);
  stat /= ms.mean;
  // Two-sided: both over- and under-dispersion reject.
  const double upper = chi2_sf(stat, df);
  const double p = 2.0 * std::min(upper, 1.0 - upper);
  return {stat, df, std::min(p, 1.0)};
}

MeanSe clustered_ratio(std::span<const double> y, std::span<const double> w) {
  if (y.size() != w.size()) throw UsageError("clustered_ratio length mismatch");
  const std::size_t m = y.size();
  double sy = 0.0, sw = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    sy += y[i];
    sw += w[i];
  }
  if (sw <= 0.0) return {0.0, 0.0, m};
  const double r = sy / sw;
  if (m < 2) return {r, 0.0, m};
  double ss = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double z = y[i] - r * w[i];
    ss += z * z;
  }
  const double var = ss * (static_cast<double>(m) / (m - 1)) / (sw * sw);
  return {r, std::sqrt(var), m};
}

void ClusterHistogram::add_cluster(const std::vector<int>& bin_of_each_observation) {
  std::vector<double> c(bins, 0.0);
  for (int b : bin_of_each_observation) {
    if (b < 0 || static_cast<std::size_t>(b) >= bins) throw UsageError("bin index out of range");
    c[b] += 1.0;
  }
  counts.push_back(std::move(c));
}

double ClusterHistogram::total(std::size_t bin) const {
  double t = 0.0;
  for (const auto& c : counts) t += c[bin];
  return t;
}

namespace {

// Bin groups in which the smaller sample expects at least min_count observations
// under the pooled proportions.
std::vector<std::size_t> merge_plan(const ClusterHistogram& a, const ClusterHistogram& b, double min_count, double na,
                                    double nb, std::size_t& groups) {
  std::vector<std::size_t> group_of(a.bins, 0);
  const double scale = std::min(na, nb) / (na + nb);
  std::size_t g = 0;
  double pooled = 0.0;
  for (std::size_t k = 0; k < a.bins; ++k) {
    pooled += a.total(k) + b.total(k);
    group_of[k] = g;
    if (pooled * scale >= min_count) {
      ++g;
      pooled = 0.0;
    }
  }
  if (g == 0) {
    g = 1;
  } else {
    // Trailing sparse (or empty) bins join the last complete group.
    for (std::size_t k = 0; k < a.bins; ++k) {
      if (group_of[k] == g) group_of[k] = g - 1;
    }
  }
  groups = g;
  return group_of;
}

struct BinEstimate {
  Eigen::VectorXd p;
  Eigen::MatrixXd cov;
};

Eigen::MatrixXd grouped(const ClusterHistogram& h, const std::vector<std::size_t>& group_of, std::size_t groups) {
  const std::size_t m = h.counts.size();
  Eigen::MatrixXd y = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(groups));
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t k = 0; k < h.bins; ++k) y(i, group_of[k]) += h.counts[i][k];
  }
  return y;
}

// Ratio estimate of the bin proportions with a cluster-robust covariance whose
// residuals are centred at `centre` (the pooled proportions under the null).
BinEstimate estimate_bins(const Eigen::MatrixXd& y, const Eigen::VectorXd& centre) {
  const auto m = static_cast<double>(y.rows());
  const Eigen::VectorXd w = y.rowwise().sum();
  const double sw = w.sum();
  BinEstimate e;
  e.p = y.colwise().sum().transpose() / sw;
  const Eigen::MatrixXd z = y - w * centre.transpose();
  const double c = m > 1 ? m / (m - 1) : 1.0;
  e.cov = c * (z.transpose() * z) / (sw * sw);
  return e;
}

}  // namespace

TestResult clustered_homogeneity(const ClusterHistogram& a, const ClusterHistogram& b, double min_count) {
  if (a.bins != b.bins || a.bins == 0) throw UsageError("histograms must share a non-empty binning");
  double na = 0.0, nb = 0.0;
  for (std::size_t k = 0; k < a.bins; ++k) {
    na += a.total(k);
    nb += b.total(k);
  }
  if (na < 1.0 || nb < 1.0 || a.counts.size() < 2 || b.counts.size() < 2) {
    throw InsufficientData("homogeneity test needs observations in both samples");
  }
  std::size_t groups = 0;
  const auto group_of = merge_plan(a, b, min_count, na, nb, groups);
  if (groups < 2) return {0.0, 0.0, 1.0};
  const Eigen::MatrixXd ya = grouped(a, group_of, groups);
  const Eigen::MatrixXd yb = grouped(b, group_of, groups);
  const Eigen::VectorXd pooled = (ya.colwise().sum() + yb.colwise().sum()).transpose() / (na + nb);
  const BinEstimate ea = estimate_bins(ya, pooled);
  const BinEstimate eb = estimate_bins(yb, pooled);
  const Eigen::VectorXd d = ea.p - eb.p;
  const Eigen::MatrixXd s = ea.cov + eb.cov;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s);
  const Eigen::VectorXd& lambda = eig.eigenvalues();
  const double top = lambda.maxCoeff();
  double stat = 0.0;
  int df = 0;
  for (Eigen::Index k = 0; k < lambda.size(); ++k) {
    if (lambda(k) > 1e-10 * top && lambda(k) > 0.0) {
      const double proj = eig.eigenvectors().col(k).dot(d);
      stat += proj * proj / lambda(k);
      ++df;
    }
  }
  if (df == 0) {
    // Both samples degenerate: identical point masses agree, different ones cannot.
    const bool same = d.cwiseAbs().maxCoeff() < 1e-12;
    return {same ? 0.0 : std::numeric_limits<double>::infinity(), 0.0, same ? 1.0 : 0.0};
  }
  return {stat, static_cast<double>(df), chi2_sf(stat, df)};
}

}  // namespace palmlab
