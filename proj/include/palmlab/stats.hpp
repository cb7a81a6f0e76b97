#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace palmlab {

/// Exact running moments. Values are quantized to 2^-32 and summed in 128-bit
/// integers, so merging is associative and commutative bit for bit.
class Moments {
 public:
  static constexpr int kFracBits = 32;

  void add(double x);
  Moments& merge(const Moments& other) noexcept;

  std::int64_t count() const noexcept { return n_; }
  double mean() const noexcept;
  /// Unbiased sample variance; 0 for fewer than two values.
  double variance() const noexcept;
  double std_error() const noexcept;

  friend bool operator==(const Moments&, const Moments&) = default;

 private:
  std::int64_t n_ = 0;
  __int128 sum_ = 0;
  __int128 sumsq_ = 0;
};

/// One named estimate. Mean-type reports carry their Moments and can be merged;
/// test-type reports carry a p-value and have no reference.
struct StatReport {
  std::string experiment;
  std::string statistic;
  double estimate = 0.0;
  double std_error = 0.0;
  std::int64_t n = 0;
  std::optional<double> reference;
  double z = 0.0;
  bool pass = true;
  double threshold = 3.0;
  std::optional<Moments> moments;
  std::string note;

  /// Estimate/SE from moments; pass iff |z| <= threshold when a reference exists.
  static StatReport from_moments(std::string experiment, std::string statistic, const Moments& m,
                                 std::optional<double> reference, double threshold = 3.0);
  static StatReport from_estimate(std::string experiment, std::string statistic, double estimate, double std_error,
                                  std::int64_t n, std::optional<double> reference, double threshold = 3.0);
  /// Hypothesis-test report: estimate = p-value, pass iff p >= alpha.
  static StatReport from_pvalue(std::string experiment, std::string statistic, double pvalue, double alpha,
                                std::int64_t n);
  /// Deterministic pass/fail with no sampling error.
  static StatReport exact(std::string experiment, std::string statistic, bool ok, std::int64_t n,
                          std::string note = {});

  static std::string csv_header();
  std::string csv_row() const;
};

/// Pooled merge of two mean-type reports with the same name and reference.
StatReport merge(const StatReport& a, const StatReport& b);

/// z = (estimate - reference) / se with the 0/0 -> 0 convention.
double standardized(double estimate, double reference, double se) noexcept;

struct MeanSe {
  double mean;
  double std_error;
  std::size_t n;
};
MeanSe mean_se(std::span<const double> values);

struct TestResult {
  double statistic;
  double df;
  double pvalue;
};

/// Two-sample Kolmogorov-Smirnov with the asymptotic Kolmogorov p-value.
TestResult two_sample_ks(std::span<const double> a, std::span<const double> b);
/// One-sample KS against a continuous CDF.
TestResult ks_one_sample(std::span<const double> values, const std::function<double(double)>& cdf);
/// Survival function of the Kolmogorov distribution.
double kolmogorov_sf(double lambda);

/// Pearson goodness of fit. Adjacent cells are pooled from the tails until every
/// expected count is >= 5; throws InsufficientData when the total is < 30 or
/// fewer than two cells survive. `fitted` parameters reduce the degrees of freedom.
TestResult chi_square_gof(std::span<const double> observed, std::span<const double> expected, int fitted = 0);

/// Index-of-dispersion test for Poisson counts: statistic sum (x - mean)^2 / mean ~ chi2(n - 1).
/// `df` reports the dispersion ratio in `statistic / df`.
TestResult poisson_dispersion(std::span<const double> counts);

double chi2_sf(double x, double df);
double normal_quantile(double p);

/// Ratio-of-sums estimator r = sum(y) / sum(w) over independent clusters, with the
/// delta-method (cluster-robust) standard error.
MeanSe clustered_ratio(std::span<const double> y, std::span<const double> w);

/// Per-cluster histogram: counts[i][k] = observations of cluster i in bin k.
struct ClusterHistogram {
  std::size_t bins = 0;
  std::vector<std::vector<double>> counts;

  void add_cluster(const std::vector<int>& bin_of_each_observation);
  double total(std::size_t bin) const;
};

/// Cluster-robust Wald test that two samples share the same bin probabilities.
/// Adjacent bins are merged until the smaller sample expects min_count observations
/// in each; when everything collapses into one bin the samples agree (p = 1).
/// Residuals are centred at the pooled proportions, so bins one sample never
/// visits still carry variance.
/// Throws InsufficientData when either sample has fewer than two clusters.
TestResult clustered_homogeneity(const ClusterHistogram& a, const ClusterHistogram& b, double min_count = 5.0);

}  // namespace palmlab
