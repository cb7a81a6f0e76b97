#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "palmlab/error.hpp"
#include "palmlab/palm.hpp"

namespace palmlab {

inline constexpr std::string_view kVersion = "0.1.0";

/// Malformed or invalid experiment configuration.
class ConfigError : public UsageError {
 public:
  using UsageError::UsageError;
};

/// The sixteen experiment names, in CLI order.
const std::vector<std::string>& experiment_names();

struct GroupSpec {
  std::string kind = "torus";  // torus | affine
  int d = 2;
  double L = 10.0;
};

struct ProcessSpec {
  std::string kind = "poisson";  // poisson | lattice | thinned | thickened | marked
  double intensity = 1.0;
  double spacing = 2.0;
  std::string thinning = "delta";  // delta | independent
  double delta = 0.5;
  double p = 0.5;
  std::vector<std::vector<double>> F;
  std::string marks = "binary";  // binary | unit
};

struct ExperimentSpec {
  std::string name;
  double R = 1.0;
  double delta = 0.5;
  double p = 0.5;
  std::vector<std::vector<double>> F;
  double h = -1.0;
  double epsilon = 0.01;
  int max_rounds = 500;
  double r_obs = 2.0;
  double margin = -1.0;
  std::vector<double> radii{0.5, 1.0, 2.0};
  double alpha = 0.01;
  double threshold = 3.0;
  int max_levels = 64;
  std::array<double, 2> u_lo{1.0, 0.0};
  std::array<double, 2> u_hi{2.0, 1.0};
  std::array<double, 2> f{2.0, 0.0};
};

struct OutputSpec {
  std::string dir = "palmlab-out";
  bool dumps = false;
};

struct ExperimentConfig {
  GroupSpec group;
  ProcessSpec process;
  ExperimentSpec experiment;
  std::size_t trials = 10000;
  std::uint64_t seed = 1;
  OutputSpec output;
};

/// Defaults for an experiment (each runs in a couple of minutes on one core).
/// `paper_scale` raises trial counts where the defaults are smaller.
ExperimentConfig default_config(const std::string& experiment, bool paper_scale = false);

/// Strict JSON overlay on `base`: unknown keys, wrong types and out-of-range
/// values raise ConfigError; syntax errors carry line and column.
ExperimentConfig parse_config(std::string_view text, ExperimentConfig base);
ExperimentConfig load_config(const std::string& path, ExperimentConfig base);
/// Range checks (interaction ranges below L/4 and the like).
void validate(const ExperimentConfig& cfg);

/// Canonical JSON of everything that determines the results (output paths excluded).
std::string canonical_json(const ExperimentConfig& cfg);
/// 16 hex digits of FNV-1a over canonical_json.
std::string config_hash(const ExperimentConfig& cfg);

ProcessModel make_process(const ExperimentConfig& cfg);
CheckOptions make_options(const ExperimentConfig& cfg, int threads);

struct RunManifest {
  std::string config_hash;
  std::string version;
  std::string experiment;
  double wall_time_s = 0.0;
  std::vector<StatReport> reports;
  bool pass = true;

  /// Wall time is left out unless asked for, so the default form is reproducible.
  std::string to_json(bool with_wall_time = false) const;
  std::string csv() const;
};

/// Runs the experiment and writes report.csv, manifest.json and any dumps into
/// cfg.output.dir. Throws UsageError (and subclasses) or PreconditionError on bad input.
RunManifest run(const ExperimentConfig& cfg, int threads, bool write_files = true);

/// 0 when every report passes, 1 otherwise.
int exit_code(const RunManifest& m);

// Experiments that have no home in the library modules.

/// Count-in-window chi-square fits for three windows, a dispersion test and the
/// correlation of counts in two disjoint windows.
std::vector<StatReport> check_poisson_law(const ProcessModel& model, const CheckOptions& o);
/// Per-configuration intensity of independent and delta thinnings against their laws.
std::vector<StatReport> check_thinning_intensity(const ProcessModel& poisson, double p, double delta,
                                                 const CheckOptions& o);
/// Axioms of build_clumping and the shape of z_line_factor on fresh samples.
std::vector<StatReport> check_clumpings(const ProcessModel& model, int max_levels, const CheckOptions& o);
/// Encode/decode round trips of binary marks on delta-separated samples.
StatReport check_mark_encoding(const ProcessModel& model, double delta, const CheckOptions& o);
/// Every factor operation against torus translation by random grid-aligned elements.
std::vector<StatReport> check_equivariance(const ProcessModel& model, double h, const CheckOptions& o);

/// Binary 16-bit PGM of cell owners (0 = unclaimed, owner + 1 otherwise), 2-d grids only.
std::string owner_pgm(const std::vector<std::uint32_t>& owner, std::int64_t cells_per_side);

}  // namespace palmlab
