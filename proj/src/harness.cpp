#include "palmlab/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <boost/math/distributions/poisson.hpp>
#include <json.hpp>

#include "palmlab/allocation.hpp"
#include "palmlab/clumping.hpp"

namespace palmlab {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

constexpr double kPi = 3.14159265358979323846;

double ball_volume(int d, double r) {
  switch (d) {
    case 1: return 2.0 * r;
    case 2: return kPi * r * r;
    default: return 4.0 / 3.0 * kPi * r * r * r;
  }
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

// Strict JSON reading.

[[noreturn]] void bad(const std::string& path, const std::string& what) { throw ConfigError(path + ": " + what); }

void allow_keys(const json& j, const std::string& path, std::initializer_list<const char*> keys) {
  if (!j.is_object()) bad(path, "expected an object");
  for (const auto& [k, v] : j.items()) {
    (void)v;
    if (std::find_if(keys.begin(), keys.end(), [&](const char* a) { return k == a; }) == keys.end()) {
      bad(path.empty() ? k : path + "." + k, "unknown field");
    }
  }
}

void read(const json& j, const std::string& path, double& out) {
  if (!j.is_number()) bad(path, "expected a number");
  out = j.get<double>();
  if (!std::isfinite(out)) bad(path, "expected a finite number");
}

void read(const json& j, const std::string& path, int& out) {
  if (!j.is_number_integer()) bad(path, "expected an integer");
  const auto v = j.get<std::int64_t>();
  if (v < -1000000000 || v > 1000000000) bad(path, "integer out of range");
  out = static_cast<int>(v);
}

void read(const json& j, const std::string& path, std::string& out) {
  if (!j.is_string()) bad(path, "expected a string");
  out = j.get<std::string>();
}

void read(const json& j, const std::string& path, bool& out) {
  if (!j.is_boolean()) bad(path, "expected true or false");
  out = j.get<bool>();
}

void read(const json& j, const std::string& path, std::uint64_t& out) {
  if (j.is_number_unsigned()) {
    out = j.get<std::uint64_t>();
  } else if (j.is_number_integer() && j.get<std::int64_t>() >= 0) {
    out = static_cast<std::uint64_t>(j.get<std::int64_t>());
  } else {
    bad(path, "expected a non-negative integer");
  }
}

void read(const json& j, const std::string& path, std::vector<double>& out) {
  if (!j.is_array()) bad(path, "expected an array of numbers");
  out.clear();
  for (std::size_t i = 0; i < j.size(); ++i) {
    double v;
    read(j[i], path + "[" + std::to_string(i) + "]", v);
    out.push_back(v);
  }
}

void read(const json& j, const std::string& path, std::array<double, 2>& out) {
  std::vector<double> v;
  read(j, path, v);
  if (v.size() != 2) bad(path, "expected two numbers");
  out = {v[0], v[1]};
}

void read(const json& j, const std::string& path, std::vector<std::vector<double>>& out) {
  if (!j.is_array()) bad(path, "expected an array of points");
  out.clear();
  for (std::size_t i = 0; i < j.size(); ++i) {
    std::vector<double> v;
    read(j[i], path + "[" + std::to_string(i) + "]", v);
    out.push_back(std::move(v));
  }
}

template <class T>
void field(const json& j, const std::string& path, const char* key, T& out) {
  if (j.contains(key)) read(j.at(key), path + "." + key, out);
}

std::pair<std::size_t, std::size_t> line_column(std::string_view text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  const std::size_t end = std::min(text.size(), byte > 0 ? byte - 1 : 0);
  for (std::size_t i = 0; i < end; ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

bool is_one_of(const std::string& s, std::initializer_list<const char*> options) {
  return std::any_of(options.begin(), options.end(), [&](const char* o) { return s == o; });
}

CarrierGroup torus_of(const ExperimentConfig& cfg) {
  if (cfg.group.kind != "torus") throw ConfigError("group.kind: " + cfg.experiment.name + " runs on the torus");
  try {
    return CarrierGroup::flat_torus(cfg.group.d, cfg.group.L);
  } catch (const UsageError& e) {
    throw ConfigError(std::string("group: ") + e.what());
  }
}

std::vector<GroupPoint> points_of(const CarrierGroup& g, const std::vector<std::vector<double>>& F,
                                  const std::string& path) {
  std::vector<GroupPoint> out;
  for (const auto& f : F) {
    if (static_cast<int>(f.size()) != g.dim()) bad(path, "every element needs " + std::to_string(g.dim()) + " coordinates");
    out.push_back(g.point(std::span<const double>(f.data(), f.size())));
  }
  return out;
}

std::vector<std::vector<double>> default_F(int d) {
  std::vector<double> zero(d, 0.0), step(d, 0.0);
  step[0] = 0.2;
  return {zero, step};
}

// Experiment bodies.

using Reports = std::vector<StatReport>;
using Files = std::vector<std::pair<std::string, std::string>>;

void append(Reports& to, Reports from) {
  for (auto& r : from) to.push_back(std::move(r));
}

Configuration first_sample(const ProcessModel& model, std::uint64_t seed, std::string_view stream) {
  Rng rng = make_rng(derive_seed(seed, fnv1a64(stream), 0));
  return model.sample(rng);
}

std::string sample_dump(const ProcessModel& model, const CheckOptions& o, std::size_t n) {
  const auto cs = run_trials<Configuration>(o.seed, "dump", n, o.threads,
                                            [&](std::size_t, Rng& rng) { return model.sample(rng); });
  std::string out;
  for (const auto& c : cs) out += to_jsonl(c) + "\n";
  return out;
}

Reports run_sample(const ExperimentConfig& cfg, const ProcessModel& model, const CheckOptions& o, Files& files) {
  const bool marked = cfg.process.kind == "marked";
  const MarkSpace space = cfg.process.marks == "unit" ? MarkSpace::unit_interval() : MarkSpace::alphabet(2);
  struct Out {
    Configuration c;
    std::string line;
  };
  const auto outs = run_trials<Out>(o.seed, "sample", o.trials, o.threads, [&](std::size_t, Rng& rng) {
    Out out{model.sample(rng), {}};
    out.line = marked ? to_jsonl(attach_iid_marks(out.c, space, rng)) : to_jsonl(out.c);
    return out;
  });
  std::vector<Configuration> cs;
  std::string dump;
  for (const auto& x : outs) {
    cs.push_back(x.c);
    dump += x.line + "\n";
  }
  files.emplace_back("samples.jsonl", std::move(dump));
  StatReport r = estimate_intensity(cs, Window::full(model.carrier), model.intensity);
  r.experiment = "sample:" + model.name;
  return {r};
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const auto n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return saa > 0 && sbb > 0 ? sab / std::sqrt(saa * sbb) : 0.0;
}

Reports run_palm_calculus(const ExperimentConfig& cfg, const ProcessModel& model, const CheckOptions& o) {
  const CarrierGroup g = torus_of(cfg);
  const double delta = cfg.experiment.delta;
  Reports r = check_palm_thinning(model, delta_isolation(delta), "delta_isolation(" + fmt(delta) + ")", o);

  CheckOptions oc = o;
  oc.trials = std::max<std::size_t>(1, o.trials / 25);
  const LocalMap colour{delta, MarkSpace::alphabet(2),
                        [](const RootedConfiguration& rc) { return rc.size() == 1 ? 1.0 : 0.0; }};
  r.push_back(check_palm_colouring(model, colour, "delta_isolation(" + fmt(delta) + ")", oc));

  const ProcessModel base = cfg.process.kind == "thinned" && cfg.process.thinning == "delta"
                                ? model
                                : delta_thinned_poisson_model(g, cfg.process.intensity, delta);
  append(r, check_palm_thickening(base, points_of(g, cfg.experiment.F, "experiment.F"), o));
  return r;
}

Reports run_thickening(const ExperimentConfig& cfg, const ProcessModel& model, const CheckOptions& o) {
  const CarrierGroup g = torus_of(cfg);
  const double delta = cfg.experiment.delta;
  const ProcessModel base = cfg.process.kind == "thinned" && cfg.process.thinning == "delta"
                                ? model
                                : delta_thinned_poisson_model(g, cfg.process.intensity, delta);
  const auto F = points_of(g, cfg.experiment.F, "experiment.F");
  const ProcessModel thick = thickened_model(base, F);
  const auto samples = run_trials<Configuration>(o.seed, "thickening-intensity", o.trials, o.threads,
                                                 [&](std::size_t, Rng& rng) { return thick.sample(rng); });
  Reports r;
  StatReport in = estimate_intensity(samples, Window::full(g), thick.intensity);
  in.experiment = "thickening-intensity:" + thick.name;
  r.push_back(in);
  append(r, check_palm_thickening(base, F, o));
  return r;
}

Reports run_alloc(const ExperimentConfig& cfg, const ProcessModel& model, const CheckOptions& o, Files& files) {
  const AllocationCheck ac{cfg.experiment.epsilon, cfg.experiment.max_rounds, true};
  Reports r = check_allocation(model, ac, o);
  const Configuration c = first_sample(model, o.seed, "allocation");
  if (!c.empty()) {
    const double h = o.grid > 0.0 ? o.grid : model.carrier.side() / 512.0;
    const Allocation a = balanced_allocation(c, h, ac.epsilon, ac.max_rounds);
    if (model.carrier.dim() == 2) files.emplace_back("allocation.pgm", owner_pgm(a.owner, a.cells_per_side));
    ojson side;
    side["carrier"] = ojson::parse(carrier_json(c.carrier()));
    side["h"] = h;
    side["cells_per_side"] = a.cells_per_side;
    side["capacity"] = a.capacity;
    side["converged"] = a.converged;
    side["rounds"] = a.rounds;
    side["unclaimed_cells"] = a.unclaimed_cells();
    ojson pts = ojson::array();
    const auto vol = a.volumes();
    for (std::size_t i = 0; i < c.size(); ++i) {
      ojson p;
      p["coords"] = std::vector<double>(c[i].x.begin(), c[i].x.begin() + c[i].dim);
      p["volume"] = vol[i];
      pts.push_back(std::move(p));
    }
    side["points"] = std::move(pts);
    files.emplace_back("allocation.json", side.dump(2) + "\n");
  }
  return r;
}

Reports run_clump(const ExperimentConfig& cfg, const ProcessModel& model, const CheckOptions& o, Files& files,
                  bool line) {
  Reports r = check_clumpings(model, cfg.experiment.max_levels, o);
  const Configuration c = first_sample(model, o.seed, "clumping");
  if (!c.empty()) {
    const ClumpingSequence s = build_clumping(c, cfg.experiment.max_levels);
    if (line) {
      if (s.class_count(s.levels.size() - 1) == 1) files.emplace_back("zline.jsonl", to_jsonl(z_line_factor(s)) + "\n");
    } else {
      files.emplace_back("clumping.json", clumping_json(s) + "\n");
    }
  }
  return r;
}

Reports run_encode(const ExperimentConfig& cfg, const ProcessModel& model, const CheckOptions& o, Files& files) {
  const double delta = cfg.experiment.delta;
  StatReport r = check_mark_encoding(model, delta, o);
  Rng rng = make_rng(derive_seed(o.seed, fnv1a64("encode-marks"), 0));
  const Configuration c = delta_thinning(model.sample(rng), delta);
  const MarkedConfiguration mc = attach_iid_marks(c, MarkSpace::alphabet(2), rng);
  files.emplace_back("marked.jsonl", to_jsonl(mc) + "\n");
  files.emplace_back("encoded.jsonl", to_jsonl(local_encode_marks(mc, delta)) + "\n");
  return {r};
}

Reports dispatch(const ExperimentConfig& cfg, const CheckOptions& o, Files& files) {
  const std::string& name = cfg.experiment.name;
  if (name == "verify-nonunimodular") {
    if (cfg.group.kind != "affine") throw ConfigError("group.kind: verify-nonunimodular runs on the affine group");
    NonUnimodularParams p;
    p.intensity = cfg.process.intensity;
    p.u_lo = cfg.experiment.u_lo;
    p.u_hi = cfg.experiment.u_hi;
    p.f = cfg.experiment.f;
    p.control_side = cfg.group.L;
    return check_nonunimodular_thickening(p, o);
  }
  const ProcessModel model = make_process(cfg);
  Reports r;
  if (name == "sample") return run_sample(cfg, model, o, files);
  if (name == "verify-poisson") {
    r = check_poisson_law(model, o);
  } else if (name == "verify-mecke") {
    r = check_mecke_slivnyak(model, o);
    if (cfg.process.kind == "poisson" || cfg.process.kind == "marked") {
      CheckOptions ov = o;
      ov.r_obs = 0.5;
      const PalmSampleSet ps = palm_samples(model, ov);
      const double t = cfg.process.intensity;
      r.push_back(palm_probability(ps, [](const RootedConfiguration& rc) { return rc.size() == 1; }, "void_r=0.5",
                                   std::exp(-t * ball_volume(model.carrier.dim(), 0.5)), o.threshold));
    }
  } else if (name == "verify-clmm") {
    const CarrierGroup& g = model.carrier;
    std::vector<double> lo(g.dim(), g.side() / 5.0), hi(g.dim(), 2.0 * g.side() / 5.0);
    const Window U = Window::box(g, lo, hi);
    auto one = [](const GroupPoint&) { return 1.0; };
    append(r, check_clmm(model, ClmmFunction{"1_U", U, 0.0, one, [](const RootedConfiguration&) { return 1.0; }, {}},
                         o));
    append(r, check_clmm(model,
                         ClmmFunction{"1_U*void(0.5)", U, 0.5, one,
                                      [](const RootedConfiguration& rc) { return rc.size() == 1 ? 1.0 : 0.0; }, {}},
                         o));
  } else if (name == "verify-mtp") {
    r = check_mtp(model, nearest_neighbour_transport(o.r_obs), o);
  } else if (name == "verify-degrees") {
    r = check_degree_balance(model, nearest_neighbor_digraph, "nearest_neighbor", o);
    const double R = cfg.experiment.R;
    append(r, check_degree_balance(model, [R](const Configuration& c) { return distance_R_graph(c, R); },
                                   "distance_R=" + fmt(R), o));
  } else if (name == "verify-thinning") {
    r = check_thinning_intensity(poisson_model(model.carrier, cfg.process.intensity), cfg.experiment.p,
                                 cfg.experiment.delta, o);
  } else if (name == "verify-thickening") {
    r = run_thickening(cfg, model, o);
  } else if (name == "verify-palm-calculus") {
    r = run_palm_calculus(cfg, model, o);
  } else if (name == "alloc") {
    r = run_alloc(cfg, model, o, files);
  } else if (name == "extra-head") {
    const bool adjoined = cfg.process.kind == "poisson" || cfg.process.kind == "marked";
    r = check_extra_head(model, AllocationCheck{cfg.experiment.epsilon, cfg.experiment.max_rounds, adjoined}, o);
  } else if (name == "voronoi-volume") {
    r.push_back(check_voronoi_palm_volume(model, o));
  } else if (name == "clump") {
    r = run_clump(cfg, model, o, files, false);
  } else if (name == "zline") {
    r = run_clump(cfg, model, o, files, true);
  } else if (name == "encode-marks") {
    r = run_encode(cfg, model, o, files);
  } else {
    throw ConfigError("experiment.name: unknown experiment '" + name + "'");
  }
  if (cfg.output.dumps) files.emplace_back("samples.jsonl", sample_dump(model, o, std::min<std::size_t>(o.trials, 10)));
  return r;
}

ojson report_json(const StatReport& r) {
  ojson j;
  j["experiment"] = r.experiment;
  j["statistic"] = r.statistic;
  j["estimate"] = r.estimate;
  j["stderr"] = r.std_error;
  j["n"] = r.n;
  j["reference"] = r.reference ? ojson(*r.reference) : ojson(nullptr);
  j["z"] = r.z;
  j["pass"] = r.pass;
  if (!r.note.empty()) j["note"] = r.note;
  return j;
}

void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw UsageError("cannot write " + p.string());
  f << content;
  if (!f) throw UsageError("failed writing " + p.string());
}

}  // namespace

const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{
      "sample",         "verify-poisson",   "verify-mecke",         "verify-clmm",
      "verify-mtp",     "verify-degrees",   "verify-thinning",      "verify-thickening",
      "verify-nonunimodular", "verify-palm-calculus", "alloc", "extra-head",
      "voronoi-volume", "clump",            "zline",                "encode-marks"};
  return names;
}

ExperimentConfig default_config(const std::string& experiment, bool paper_scale) {
  const auto& names = experiment_names();
  if (std::find(names.begin(), names.end(), experiment) == names.end()) {
    throw ConfigError("unknown experiment '" + experiment + "'");
  }
  ExperimentConfig cfg;
  cfg.experiment.name = experiment;
  cfg.experiment.F = default_F(cfg.group.d);
  static const std::map<std::string, std::pair<std::size_t, std::size_t>> trials{
      {"sample", {10, 10}},          {"alloc", {1000, 1000}},       {"extra-head", {1000, 10000}},
      {"voronoi-volume", {1000, 10000}}, {"clump", {1000, 1000}},  {"zline", {1000, 1000}},
      {"encode-marks", {1000, 1000}}};
  if (auto it = trials.find(experiment); it != trials.end()) {
    cfg.trials = paper_scale ? it->second.second : it->second.first;
  }
  if (experiment == "verify-nonunimodular") {
    cfg.group.kind = "affine";
    cfg.process.intensity = 20.0;
  }
  return cfg;
}

ExperimentConfig parse_config(std::string_view text, ExperimentConfig cfg) {
  json j;
  try {
    j = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    const auto [line, col] = line_column(text, e.byte);
    std::string what = e.what();
    if (auto p = what.find("] "); p != std::string::npos) what = what.substr(p + 2);
    if (what.rfind("parse error at line", 0) == 0) {
      if (auto p = what.find(": "); p != std::string::npos) what = what.substr(p + 2);
    }
    throw ConfigError("line " + std::to_string(line) + ", column " + std::to_string(col) + ": " + what);
  }
  allow_keys(j, "", {"group", "process", "experiment", "trials", "seed", "output"});
  if (j.contains("group")) {
    const json& g = j.at("group");
    allow_keys(g, "group", {"kind", "d", "L"});
    const int old_d = cfg.group.d;
    field(g, "group", "kind", cfg.group.kind);
    field(g, "group", "d", cfg.group.d);
    field(g, "group", "L", cfg.group.L);
    if (cfg.group.d != old_d && cfg.group.d >= 1 && cfg.group.d <= 3) cfg.experiment.F = default_F(cfg.group.d);
  }
  if (j.contains("process")) {
    const json& p = j.at("process");
    allow_keys(p, "process", {"kind", "intensity", "spacing", "thinning", "delta", "p", "F", "marks"});
    field(p, "process", "kind", cfg.process.kind);
    field(p, "process", "intensity", cfg.process.intensity);
    field(p, "process", "spacing", cfg.process.spacing);
    field(p, "process", "thinning", cfg.process.thinning);
    field(p, "process", "delta", cfg.process.delta);
    field(p, "process", "p", cfg.process.p);
    field(p, "process", "F", cfg.process.F);
    field(p, "process", "marks", cfg.process.marks);
  }
  if (j.contains("experiment")) {
    const json& e = j.at("experiment");
    allow_keys(e, "experiment", {"name", "R", "delta", "p", "F", "h", "epsilon", "max_rounds", "r_obs", "margin",
                                 "radii", "alpha", "threshold", "max_levels", "u_lo", "u_hi", "f"});
    std::string name = cfg.experiment.name;
    field(e, "experiment", "name", name);
    if (!cfg.experiment.name.empty() && name != cfg.experiment.name) {
      bad("experiment.name", "'" + name + "' does not match the subcommand '" + cfg.experiment.name + "'");
    }
    cfg.experiment.name = name;
    field(e, "experiment", "R", cfg.experiment.R);
    field(e, "experiment", "delta", cfg.experiment.delta);
    field(e, "experiment", "p", cfg.experiment.p);
    field(e, "experiment", "F", cfg.experiment.F);
    field(e, "experiment", "h", cfg.experiment.h);
    field(e, "experiment", "epsilon", cfg.experiment.epsilon);
    field(e, "experiment", "max_rounds", cfg.experiment.max_rounds);
    field(e, "experiment", "r_obs", cfg.experiment.r_obs);
    field(e, "experiment", "margin", cfg.experiment.margin);
    field(e, "experiment", "radii", cfg.experiment.radii);
    field(e, "experiment", "alpha", cfg.experiment.alpha);
    field(e, "experiment", "threshold", cfg.experiment.threshold);
    field(e, "experiment", "max_levels", cfg.experiment.max_levels);
    field(e, "experiment", "u_lo", cfg.experiment.u_lo);
    field(e, "experiment", "u_hi", cfg.experiment.u_hi);
    field(e, "experiment", "f", cfg.experiment.f);
  }
  if (j.contains("trials")) {
    std::uint64_t t;
    read(j.at("trials"), "trials", t);
    cfg.trials = t;
  }
  if (j.contains("seed")) read(j.at("seed"), "seed", cfg.seed);
  if (j.contains("output")) {
    const json& o = j.at("output");
    allow_keys(o, "output", {"dir", "dumps"});
    field(o, "output", "dir", cfg.output.dir);
    field(o, "output", "dumps", cfg.output.dumps);
  }
  validate(cfg);
  return cfg;
}

ExperimentConfig load_config(const std::string& path, ExperimentConfig base) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError(path + ": cannot open");
  std::stringstream ss;
  ss << f.rdbuf();
  try {
    return parse_config(ss.str(), std::move(base));
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void validate(const ExperimentConfig& cfg) {
  const auto& e = cfg.experiment;
  const auto& p = cfg.process;
  const auto& names = experiment_names();
  if (std::find(names.begin(), names.end(), e.name) == names.end()) bad("experiment.name", "unknown experiment");
  if (!is_one_of(cfg.group.kind, {"torus", "affine"})) bad("group.kind", "expected torus or affine");
  if (!is_one_of(p.kind, {"poisson", "lattice", "thinned", "thickened", "marked"})) {
    bad("process.kind", "expected poisson, lattice, thinned, thickened or marked");
  }
  if (!is_one_of(p.thinning, {"delta", "independent"})) bad("process.thinning", "expected delta or independent");
  if (!is_one_of(p.marks, {"binary", "unit"})) bad("process.marks", "expected binary or unit");
  if (cfg.trials < 1) bad("trials", "must be at least 1");
  if (!(p.intensity >= 0.0)) bad("process.intensity", "must be non-negative");
  if (!(p.p >= 0.0 && p.p <= 1.0)) bad("process.p", "must lie in [0, 1]");
  if (!(e.p >= 0.0 && e.p <= 1.0)) bad("experiment.p", "must lie in [0, 1]");
  if (!(e.alpha > 0.0 && e.alpha < 1.0)) bad("experiment.alpha", "must lie in (0, 1)");
  if (!(e.threshold > 0.0)) bad("experiment.threshold", "must be positive");
  if (!(e.epsilon > 0.0)) bad("experiment.epsilon", "must be positive");
  if (e.max_rounds < 1) bad("experiment.max_rounds", "must be at least 1");
  if (e.max_levels < 1) bad("experiment.max_levels", "must be at least 1");
  if (e.radii.empty() || e.radii.size() > 3) bad("experiment.radii", "takes one to three radii");

  if (cfg.group.kind == "affine") {
    if (e.name != "verify-nonunimodular") bad("group.kind", e.name + " runs on the torus");
    if (!(e.u_lo[0] > 0.0 && e.u_hi[0] > e.u_lo[0] && e.u_hi[1] > e.u_lo[1])) bad("experiment.u_lo", "empty affine box");
    if (!(e.f[0] > 0.0)) bad("experiment.f", "the scale part must be positive");
    if (!(cfg.group.L > 0.0)) bad("group.L", "must be positive");
    torus_of(ExperimentConfig{GroupSpec{"torus", 2, cfg.group.L}, {}, {}, 1, 0, {}});
    return;
  }
  if (e.name == "verify-nonunimodular") bad("group.kind", "verify-nonunimodular runs on the affine group");

  const CarrierGroup g = torus_of(cfg);
  const double quarter = g.side() / 4.0;
  auto range = [&](const std::string& path, double v, bool strict_positive) {
    if (strict_positive ? !(v > 0.0) : !(v >= 0.0)) bad(path, strict_positive ? "must be positive" : "must be >= 0");
    if (!(v < quarter)) bad(path, "interaction range must stay below L/4 = " + fmt(quarter));
  };
  range("experiment.R", e.R, false);
  range("experiment.delta", e.delta, true);
  range("experiment.r_obs", e.r_obs, true);
  range("process.delta", p.delta, true);
  for (std::size_t i = 0; i < e.radii.size(); ++i) {
    const std::string path = "experiment.radii[" + std::to_string(i) + "]";
    range(path, e.radii[i], true);
    if (e.radii[i] > e.r_obs) bad(path, "must not exceed r_obs");
  }
  if (e.margin >= 0.0 ? !(e.r_obs + e.margin < g.side() / 2.0) : !(e.r_obs + quarter < g.side() / 2.0)) {
    bad("experiment.margin", "r_obs + margin must stay below L/2");
  }
  if (e.h != -1.0) {
    if (!(e.h > 0.0)) bad("experiment.h", "must be positive (or -1 for L/512)");
    const double cells = g.side() / e.h;
    if (std::abs(cells - std::round(cells)) > 1e-9 * cells) bad("experiment.h", "must divide L");
  }
  if (p.kind == "lattice") {
    if (!(p.spacing > 0.0)) bad("process.spacing", "must be positive");
    const double k = g.side() / p.spacing;
    if (std::abs(k - std::round(k)) > 1e-9 * k) bad("process.spacing", "must divide L");
  }
  auto check_F = [&](const std::vector<std::vector<double>>& F, const std::string& path, bool required) {
    if (F.empty()) {
      if (required) bad(path, "must contain the identity");
      return;
    }
    bool has_identity = false;
    for (std::size_t i = 0; i < F.size(); ++i) {
      const std::string at = path + "[" + std::to_string(i) + "]";
      if (static_cast<int>(F[i].size()) != g.dim()) bad(at, "needs " + std::to_string(g.dim()) + " coordinates");
      double sq = 0.0;
      for (double x : F[i]) sq += x * x;
      if (!(std::sqrt(sq) < quarter)) bad(at, "must lie within L/4 of the identity");
      has_identity = has_identity || sq == 0.0;
    }
    if (!has_identity) bad(path, "must contain the identity");
  };
  check_F(e.F, "experiment.F", true);
  check_F(p.F, "process.F", p.kind == "thickened");
}

std::string canonical_json(const ExperimentConfig& cfg) {
  ojson j;
  j["group"] = {{"kind", cfg.group.kind}, {"d", cfg.group.d}, {"L", cfg.group.L}};
  const auto& p = cfg.process;
  j["process"] = {{"kind", p.kind},         {"intensity", p.intensity}, {"spacing", p.spacing},
                  {"thinning", p.thinning}, {"delta", p.delta},         {"p", p.p},
                  {"F", p.F},               {"marks", p.marks}};
  const auto& e = cfg.experiment;
  ojson ex;
  ex["name"] = e.name;
  ex["R"] = e.R;
  ex["delta"] = e.delta;
  ex["p"] = e.p;
  ex["F"] = e.F;
  ex["h"] = e.h;
  ex["epsilon"] = e.epsilon;
  ex["max_rounds"] = e.max_rounds;
  ex["r_obs"] = e.r_obs;
  ex["margin"] = e.margin;
  ex["radii"] = e.radii;
  ex["alpha"] = e.alpha;
  ex["threshold"] = e.threshold;
  ex["max_levels"] = e.max_levels;
  ex["u_lo"] = e.u_lo;
  ex["u_hi"] = e.u_hi;
  ex["f"] = e.f;
  j["experiment"] = std::move(ex);
  j["trials"] = cfg.trials;
  j["seed"] = cfg.seed;
  return j.dump();
}

std::string config_hash(const ExperimentConfig& cfg) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(canonical_json(cfg))));
  return buf;
}

ProcessModel make_process(const ExperimentConfig& cfg) {
  const CarrierGroup g = torus_of(cfg);
  const auto& p = cfg.process;
  if (p.kind == "poisson" || p.kind == "marked") return poisson_model(g, p.intensity);
  if (p.kind == "lattice") return lattice_model(g, p.spacing);
  if (p.kind == "thinned") {
    return p.thinning == "delta" ? delta_thinned_poisson_model(g, p.intensity, p.delta)
                                 : independent_thinned_model(g, p.intensity, p.p);
  }
  if (p.kind == "thickened") {
    return thickened_model(delta_thinned_poisson_model(g, p.intensity, p.delta), points_of(g, p.F, "process.F"));
  }
  throw ConfigError("process.kind: unknown process '" + p.kind + "'");
}

CheckOptions make_options(const ExperimentConfig& cfg, int threads) {
  CheckOptions o;
  o.seed = cfg.seed;
  o.trials = cfg.trials;
  o.threads = resolve_threads(threads);
  o.r_obs = cfg.experiment.r_obs;
  o.margin = cfg.experiment.margin;
  o.alpha = cfg.experiment.alpha;
  o.threshold = cfg.experiment.threshold;
  o.radii = cfg.experiment.radii;
  o.grid = cfg.experiment.h;
  return o;
}

std::string RunManifest::to_json(bool with_wall_time) const {
  ojson j;
  j["tool"] = "palmlab";
  j["version"] = version;
  j["experiment"] = experiment;
  j["config_hash"] = config_hash;
  if (with_wall_time) j["wall_time_s"] = wall_time_s;
  j["pass"] = pass;
  ojson reps = ojson::array();
  for (const auto& r : reports) reps.push_back(report_json(r));
  j["reports"] = std::move(reps);
  return j.dump(2) + "\n";
}

std::string RunManifest::csv() const {
  std::string out = StatReport::csv_header() + "\n";
  for (const auto& r : reports) out += r.csv_row() + "\n";
  return out;
}

RunManifest run(const ExperimentConfig& cfg, int threads, bool write_files) {
  validate(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  const CheckOptions o = make_options(cfg, threads);
  Files files;
  RunManifest m;
  m.config_hash = config_hash(cfg);
  m.version = std::string(kVersion);
  m.experiment = cfg.experiment.name;
  m.reports = dispatch(cfg, o, files);
  m.pass = std::all_of(m.reports.begin(), m.reports.end(), [](const StatReport& r) { return r.pass; });
  m.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (write_files) {
    const std::filesystem::path dir(cfg.output.dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw UsageError("cannot create " + dir.string() + ": " + ec.message());
    write_file(dir / "report.csv", m.csv());
    write_file(dir / "manifest.json", m.to_json(false));
    char buf[64];
    std::snprintf(buf, sizeof buf, "{\"wall_time_s\": %.3f}\n", m.wall_time_s);
    write_file(dir / "timing.json", buf);
    write_file(dir / "config.json", canonical_json(cfg) + "\n");
    for (const auto& [name, content] : files) write_file(dir / name, content);
  }
  return m;
}

int exit_code(const RunManifest& m) { return m.pass ? 0 : 1; }

std::vector<StatReport> check_poisson_law(const ProcessModel& model, const CheckOptions& o) {
  const CarrierGroup& g = model.carrier;
  if (g.kind() != CarrierKind::FlatTorus) throw UsageError("the Poisson law check runs on the torus");
  const double L = g.side();
  const int d = g.dim();
  // Sides L/10, L/5 and 2L/5; the first two are disjoint.
  const std::array<std::pair<double, double>, 3> spans{{{0.0, L / 10.0}, {L / 5.0, 2.0 * L / 5.0}, {L / 2.0, 0.9 * L}}};
  std::vector<Window> windows;
  for (const auto& [lo, hi] : spans) {
    std::vector<double> a(d, lo), b(d, hi);
    windows.push_back(Window::box(g, a, b));
  }
  const auto counts = run_trials<std::array<double, 3>>(o.seed, "poisson-law", o.trials, o.threads,
                                                        [&](std::size_t, Rng& rng) {
                                                          const Configuration c = model.sample(rng);
                                                          std::array<double, 3> k{};
                                                          for (int w = 0; w < 3; ++w) {
                                                            k[w] = static_cast<double>(count(c, windows[w]));
                                                          }
                                                          return k;
                                                        });
  const std::string exp = "poisson-law:" + model.name;
  const auto n = static_cast<std::int64_t>(counts.size());
  std::vector<StatReport> out;
  for (int w = 0; w < 3; ++w) {
    std::vector<double> ks;
    for (const auto& k : counts) ks.push_back(k[w]);
    const double vol = haar_volume(windows[w]);
    double mean = 0.0;
    for (double k : ks) mean += k;
    mean /= static_cast<double>(ks.size());
    const bool known = model.intensity.has_value();
    const double mu = known ? *model.intensity * vol : mean;
    const std::string stat = "count_gof:|U|=" + fmt(vol);
    if (!(mu > 0.0)) {
      out.push_back(StatReport::exact(exp, stat, mean == 0.0, n, "degenerate mean"));
      continue;
    }
    const auto kmax = static_cast<std::size_t>(*std::max_element(ks.begin(), ks.end()));
    std::vector<double> observed(kmax + 1, 0.0), expected(kmax + 1, 0.0);
    for (double k : ks) observed[static_cast<std::size_t>(k)] += 1.0;
    const boost::math::poisson_distribution<double> pois(mu);
    for (std::size_t k = 0; k < kmax; ++k) expected[k] = static_cast<double>(n) * boost::math::pdf(pois, static_cast<double>(k));
    expected[kmax] = kmax == 0 ? static_cast<double>(n)
                               : static_cast<double>(n) * boost::math::cdf(boost::math::complement(pois, static_cast<double>(kmax - 1)));
    StatReport r = [&] {
      try {
        const TestResult t = chi_square_gof(observed, expected, known ? 0 : 1);
        StatReport s = StatReport::from_pvalue(exp, stat, t.pvalue, o.alpha, n);
        s.note = "chi2=" + fmt(t.statistic) + " df=" + fmt(t.df);
        return s;
      } catch (const InsufficientData& e) {
        // A degenerate count law (all mass in one cell) cannot be Poisson with mean > 0.
        return StatReport::exact(exp, stat, false, n, e.what());
      }
    }();
    out.push_back(std::move(r));
  }
  std::vector<double> a, b;
  for (const auto& k : counts) {
    a.push_back(k[0]);
    b.push_back(k[1]);
  }
  out.push_back(StatReport::from_estimate(exp, "disjoint_count_correlation", pearson(a, b),
                                          1.0 / std::sqrt(static_cast<double>(n)), n, 0.0, o.threshold));
  return out;
}

std::vector<StatReport> check_thinning_intensity(const ProcessModel& poisson, double p, double delta,
                                                 const CheckOptions& o) {
  const CarrierGroup& g = poisson.carrier;
  if (!poisson.intensity) throw UsageError("thinning intensities need the base intensity");
  const double t = *poisson.intensity;
  const double vol = haar_volume(Window::full(g));
  struct Pair {
    double independent = 0.0;
    double delta = 0.0;
  };
  const auto v = run_trials<Pair>(o.seed, "thinning-intensity", o.trials, o.threads, [&](std::size_t, Rng& rng) {
    const Configuration c = poisson.sample(rng);
    const MarkedConfiguration mc = attach_iid_marks(c, MarkSpace::unit_interval(), rng);
    return Pair{static_cast<double>(independent_thinning(mc, p).size()) / vol,
                static_cast<double>(delta_thinning(c, delta).size()) / vol};
  });
  Moments mi, md;
  for (const auto& x : v) {
    mi.add(x.independent);
    md.add(x.delta);
  }
  const std::string exp = "thinning-intensity:" + poisson.name;
  return {StatReport::from_moments(exp, "independent(p=" + fmt(p) + ")", mi, p * t, o.threshold),
          StatReport::from_moments(exp, "delta(" + fmt(delta) + ")", md, t * std::exp(-t * ball_volume(g.dim(), delta)),
                                   o.threshold)};
}

std::vector<StatReport> check_clumpings(const ProcessModel& model, int max_levels, const CheckOptions& o) {
  struct Result {
    bool used = false;
    std::string axiom_failure;
    std::string path_failure;
    std::string contiguity_failure;
    bool level_bound = true;
    double levels = 0.0;
  };
  const auto results = run_trials<Result>(o.seed, "clumping", o.trials, o.threads, [&](std::size_t, Rng& rng) {
    const Configuration c = model.sample(rng);
    Result r;
    if (c.empty()) return r;
    r.used = true;
    const ClumpingSequence s = build_clumping(c, max_levels);
    const std::size_t n = c.size();
    r.levels = static_cast<double>(s.levels.size() - 1);
    r.level_bound = s.levels.size() - 1 <= static_cast<std::size_t>(std::ceil(std::log2(static_cast<double>(n))));
    const ClumpingVerdict v = verify_clumping(s);
    if (!v.ok) {
      r.axiom_failure = v.axiom + " (" + std::to_string(v.witness.first) + "," + std::to_string(v.witness.second) +
                        "): " + v.message;
      return r;
    }
    const FactorGraph line = z_line_factor(s);
    const auto in = line.in_degrees();
    const auto out = line.out_degrees();
    std::size_t sources = 0, sinks = 0, start = 0;
    bool degrees_ok = true;
    for (std::size_t i = 0; i < n; ++i) {
      degrees_ok = degrees_ok && in[i] <= 1 && out[i] <= 1;
      if (in[i] == 0) {
        ++sources;
        start = i;
      }
      sinks += out[i] == 0 ? 1 : 0;
    }
    std::vector<std::uint32_t> next(n, UINT32_MAX);
    for (const auto& [a, b] : line.edges) next[a] = b;
    std::vector<std::size_t> position(n, SIZE_MAX);
    std::size_t visited = 0;
    for (std::size_t x = start; x != UINT32_MAX && visited <= n; x = next[x]) {
      if (position[x] != SIZE_MAX) break;
      position[x] = visited++;
    }
    if (line.edges.size() != n - 1 || sources != 1 || sinks != 1 || !degrees_ok || visited != n) {
      r.path_failure = "not a Hamiltonian path on " + std::to_string(n) + " points";
      return r;
    }
    for (std::size_t lv = 0; lv < s.levels.size() && r.contiguity_failure.empty(); ++lv) {
      for (const auto& cls : s.classes(lv)) {
        std::size_t lo = SIZE_MAX, hi = 0;
        for (auto i : cls) {
          lo = std::min(lo, position[i]);
          hi = std::max(hi, position[i]);
        }
        if (hi - lo + 1 != cls.size()) {
          r.contiguity_failure = "level " + std::to_string(lv) + " class of " + std::to_string(cls[0]) + " is split";
          break;
        }
      }
    }
    return r;
  });
  std::int64_t used = 0, axiom_bad = 0, path_bad = 0, contiguity_bad = 0, bound_bad = 0;
  std::string first_axiom, first_path, first_contiguity;
  Moments levels;
  for (const auto& r : results) {
    if (!r.used) continue;
    ++used;
    levels.add(r.levels);
    bound_bad += r.level_bound ? 0 : 1;
    if (!r.axiom_failure.empty() && axiom_bad++ == 0) first_axiom = r.axiom_failure;
    if (!r.path_failure.empty() && path_bad++ == 0) first_path = r.path_failure;
    if (!r.contiguity_failure.empty() && contiguity_bad++ == 0) first_contiguity = r.contiguity_failure;
  }
  const std::string exp = "clumping:" + model.name;
  return {StatReport::exact(exp, "axioms", axiom_bad == 0, used, axiom_bad ? first_axiom : "all hold"),
          StatReport::exact(exp, "z_line_hamiltonian_path", path_bad == 0 && axiom_bad == 0, used,
                            path_bad ? first_path : "n-1 edges, one source, one sink"),
          StatReport::exact(exp, "z_line_clump_contiguity", contiguity_bad == 0 && axiom_bad == 0, used,
                            contiguity_bad ? first_contiguity : "every class is a contiguous run"),
          StatReport::exact(exp, "levels<=ceil(log2|c|)", bound_bad == 0, used),
          StatReport::from_moments(exp, "levels_to_merge", levels, std::nullopt, o.threshold)};
}

StatReport check_mark_encoding(const ProcessModel& model, double delta, const CheckOptions& o) {
  struct Result {
    std::int64_t points = 0;
    bool ok = true;
  };
  const auto results = run_trials<Result>(o.seed, "encode-marks", o.trials, o.threads, [&](std::size_t, Rng& rng) {
    const Configuration c = delta_thinning(model.sample(rng), delta);
    const MarkedConfiguration mc = attach_iid_marks(c, MarkSpace::alphabet(2), rng);
    return Result{static_cast<std::int64_t>(c.size()), local_decode_marks(local_encode_marks(mc, delta), delta) == mc};
  });
  std::int64_t bad_runs = 0, points = 0;
  for (const auto& r : results) {
    bad_runs += r.ok ? 0 : 1;
    points += r.points;
  }
  return StatReport::exact("encode-marks:" + model.name, "decode(encode(mc))==mc", bad_runs == 0,
                           static_cast<std::int64_t>(o.trials),
                           std::to_string(bad_runs) + " failing configurations, " + std::to_string(points) + " points");
}

namespace {

using PointPairs = std::vector<std::pair<GroupPoint, GroupPoint>>;

PointPairs edge_points(const FactorGraph& fg, const CarrierGroup& g, const GroupPoint* shift) {
  PointPairs out;
  for (const auto& [a, b] : fg.edges) {
    GroupPoint x = fg.base[a], y = fg.base[b];
    if (shift) {
      x = g.mul(*shift, x);
      y = g.mul(*shift, y);
    }
    out.emplace_back(x, y);
  }
  std::sort(out.begin(), out.end(), [](const auto& p, const auto& q) {
    if (p.first != q.first) return lex_less(p.first, q.first);
    return lex_less(p.second, q.second);
  });
  return out;
}

using Partition = std::vector<std::vector<GroupPoint>>;

Partition partition_points(const ClumpingSequence& s, std::size_t level, const CarrierGroup& g,
                           const GroupPoint* shift) {
  Partition out;
  for (const auto& cls : s.classes(level)) {
    std::vector<GroupPoint> pts;
    for (auto i : cls) pts.push_back(shift ? g.mul(*shift, s.base[i]) : s.base[i]);
    std::sort(pts.begin(), pts.end(), lex_less);
    out.push_back(std::move(pts));
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return lex_less(a.front(), b.front()); });
  return out;
}

// Cell index of (cell + shift) on a grid with row-major layout, first axis slowest.
std::int64_t shifted_cell(std::int64_t cell, const std::array<std::int64_t, 3>& shift, std::int64_t side, int d) {
  std::array<std::int64_t, 3> idx{};
  for (int k = d - 1; k >= 0; --k) {
    idx[k] = cell % side;
    cell /= side;
  }
  std::int64_t out = 0;
  for (int k = 0; k < d; ++k) out = out * side + (idx[k] + shift[k]) % side;
  return out;
}

template <class A>
bool owners_commute(const A& a, const A& b, const Configuration& c, const Configuration& tc, const GroupPoint& g,
                    const std::array<std::int64_t, 3>& shift) {
  const CarrierGroup& G = c.carrier();
  const int d = G.dim();
  if (a.cells_per_side != b.cells_per_side) return false;
  for (std::int64_t k = 0; k < static_cast<std::int64_t>(a.owner.size()); ++k) {
    const std::uint32_t oa = a.owner[k];
    const std::uint32_t ob = b.owner[shifted_cell(k, shift, a.cells_per_side, d)];
    if (oa == Allocation::kUnclaimed || ob == Allocation::kUnclaimed) {
      if (oa != ob) return false;
      continue;
    }
    if (!(G.mul(g, c[oa]) == tc[ob])) return false;
  }
  return true;
}

}  // namespace

std::vector<StatReport> check_equivariance(const ProcessModel& model, double h, const CheckOptions& o) {
  const CarrierGroup& G = model.carrier;
  if (G.kind() != CarrierKind::FlatTorus) throw UsageError("equivariance is checked on the torus");
  const int d = G.dim();
  const double L = G.side();
  if (h <= 0.0) h = L / 512.0;
  const auto cells = static_cast<std::int64_t>(std::llround(L / h));
  const double delta = std::min(0.5, L / 20.0);
  const std::vector<GroupPoint> F = [&] {
    std::vector<double> step(d, 0.0);
    step[0] = delta / 3.0;
    return std::vector<GroupPoint>{G.identity(), G.point(std::span<const double>(step.data(), step.size()))};
  }();
  const LocalPredicate crowded{1.0, [](const RootedConfiguration& rc) { return rc.size() >= 3; }};
  const LocalMap isolation{delta, MarkSpace::alphabet(2),
                           [](const RootedConfiguration& rc) { return rc.size() == 1 ? 1.0 : 0.0; }};
  const std::vector<std::string> ops{"delta_thinning",       "independent_thinning", "constant_thickening",
                                     "thinning_from_set",    "marking_from_map",     "distance_R_graph",
                                     "nearest_neighbor_digraph", "input_output_decomposition", "voronoi_partition",
                                     "balanced_allocation",  "local_encode_marks",   "clumping_partitions",
                                     "z_line_factor"};
  using Flags = std::vector<char>;
  const auto results = run_trials<Flags>(o.seed, "equivariance", o.trials, o.threads, [&](std::size_t, Rng& rng) {
    Flags ok(ops.size(), 1);
    const Configuration c = model.sample(rng);
    std::array<std::int64_t, 3> shift{};
    std::array<double, 3> gx{};
    std::uniform_int_distribution<std::int64_t> pick(0, cells - 1);
    for (int k = 0; k < d; ++k) {
      shift[k] = pick(rng);
      gx[k] = static_cast<double>(shift[k]) * h;
    }
    const GroupPoint g = G.point(std::span<const double>(gx.data(), d));
    const Configuration tc = translate(c, g);
    const MarkedConfiguration mc = attach_iid_marks(c, MarkSpace::unit_interval(), rng);
    std::size_t op = 0;
    auto record = [&](bool same) { ok[op++] = same ? 1 : 0; };

    record(delta_thinning(tc, delta) == translate(delta_thinning(c, delta), g));
    record(independent_thinning(translate(mc, g), 0.5) == translate(independent_thinning(mc, 0.5), g));
    const Configuration sep = delta_thinning(c, delta);
    record(constant_thickening(translate(sep, g), F) == translate(constant_thickening(sep, F), g));
    record(thinning_from_set(tc, crowded) == translate(thinning_from_set(c, crowded), g));
    record(marking_from_map(tc, isolation) == translate(marking_from_map(c, isolation), g));
    record(edge_points(distance_R_graph(tc, 1.0), G, nullptr) == edge_points(distance_R_graph(c, 1.0), G, &g));
    record(edge_points(nearest_neighbor_digraph(tc), G, nullptr) == edge_points(nearest_neighbor_digraph(c), G, &g));
    auto phi = [&](const Configuration& x) { return delta_thinning(x, delta); };
    record(input_output_decomposition(phi, tc) == translate(input_output_decomposition(phi, c), g));
    if (c.empty()) {
      op += 5;
      return ok;
    }
    record(owners_commute(voronoi_partition(c, h), voronoi_partition(tc, h), c, tc, g, shift));
    record(owners_commute(balanced_allocation(c, h), balanced_allocation(tc, h), c, tc, g, shift));
    if (d == 2) {
      const MarkedConfiguration bits = attach_iid_marks(sep, MarkSpace::alphabet(2), rng);
      record(local_encode_marks(translate(bits, g), delta) == translate(local_encode_marks(bits, delta), g));
    } else {
      ++op;
    }
    const ClumpingSequence s = build_clumping(c);
    const ClumpingSequence ts = build_clumping(tc);
    bool parts = s.levels.size() == ts.levels.size();
    for (std::size_t lv = 0; parts && lv < s.levels.size(); ++lv) {
      parts = partition_points(ts, lv, G, nullptr) == partition_points(s, lv, G, &g);
    }
    record(parts);
    record(parts && edge_points(z_line_factor(ts), G, nullptr) == edge_points(z_line_factor(s), G, &g));
    return ok;
  });
  const std::string exp = "equivariance:" + model.name;
  std::vector<StatReport> out;
  for (std::size_t k = 0; k < ops.size(); ++k) {
    std::int64_t bad_pairs = 0;
    for (const auto& r : results) bad_pairs += r[k] ? 0 : 1;
    StatReport r = StatReport::exact(exp, ops[k], bad_pairs == 0, static_cast<std::int64_t>(results.size()),
                                     std::to_string(bad_pairs) + " mismatched pairs");
    if (ops[k] == "z_line_factor") {
      // Lexicographic representatives are not translation-covariant on the torus.
      r.note += " (representative order, informational)";
      r.pass = true;
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::string owner_pgm(const std::vector<std::uint32_t>& owner, std::int64_t cells_per_side) {
  if (static_cast<std::int64_t>(owner.size()) != cells_per_side * cells_per_side) {
    throw UsageError("PGM output needs a square 2-d grid");
  }
  std::string out = "P5\n" + std::to_string(cells_per_side) + " " + std::to_string(cells_per_side) + "\n65535\n";
  out.reserve(out.size() + 2 * owner.size());
  // Rows top to bottom are decreasing second coordinate; owner is row-major with the first axis slowest.
  for (std::int64_t row = cells_per_side - 1; row >= 0; --row) {
    for (std::int64_t col = 0; col < cells_per_side; ++col) {
      const std::uint32_t o = owner[col * cells_per_side + row];
      const std::uint32_t v = o == Allocation::kUnclaimed ? 0u : std::min<std::uint32_t>(o + 1, 65535u);
      out += static_cast<char>(v >> 8);
      out += static_cast<char>(v & 0xFF);
    }
  }
  return out;
}

}  // namespace palmlab
