#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "qpnls/qp_solver.hpp"

namespace qpnls {

// Flat "section.key" -> value table. Grammar, one item per line:
//   # comment
//   [section]
//   key = value
// A value is a JSON scalar or array (numbers, true/false, "strings", [1, 2],
// [[1, 0], [0, 2]]); anything else is taken as a bare string.
using ConfigTable = std::map<std::string, nlohmann::json>;

ConfigTable parse_config_text(const std::string& text, const std::string& source = "<config>");
ConfigTable parse_config_file(const std::string& path);
// "section.key=value"; a bare "key=value" targets the top level.
void apply_override(ConfigTable& table, const std::string& assignment);

enum class Mode { kResonance, kGenericity, kSolveQp, kSemiclassical, kEvolve, kSurface, kSweep };

std::string to_string(Mode m);
Mode parse_mode(const std::string& s);

struct ProblemConfig {
  int d = 1;
  int p = 1;
  double delta = 1e-2;
  int K = 4;
  double kappa = 1.0;
  // "amplitude": seed amplitudes are delta * amps and the coupling is 1.
  // "coupling": amplitudes are used as given and delta multiplies the nonlinearity.
  std::string convention = "amplitude";
  std::vector<SpatialVec> freqs{{1}, {2}};
  std::vector<cplx> amps;  // empty: drawn from the RNG
  int sample_count = 0;    // > 0: Monte-Carlo over that many amplitude draws
};

struct ToleranceConfig {
  double newton_tol = 1e-12;
  int max_iterations = 20;
  double excision_c = 0.1;
  bool enforce_excision = true;
  double gamma = 0.05;
  double tau = 0.0;  // 0: b + 1
  int n_max = 0;     // 0: solver default
};

struct EvolveConfig {
  double horizon = 10.0;
  double horizon_exponent = 0.0;  // > 0: horizon = delta^-A (K^A in the semiclassical convention)
  double dt = 0.0;   // 0: default_dt
  int n_space = 0;   // 0: branch box
  double t_min = 0.1;
  int samples_per_decade = 10;
  double drift_tol = 0.0;      // 0: drift_multiple * delta
  double drift_multiple = 5.0;  // 0 with drift_tol = 0: no drift breach
  double distance_tol = 0.0;
  double integrity_horizon = 1.0;  // 0: skip the integrator checks
  std::string checkpoint;          // restart from a saved CauchyState instead of a branch
};

struct SurfaceConfig {
  std::string metric = "torus";  // torus | flat | profile
  double R = 2.0;
  double g0 = 1.0;
  std::string profile;
  std::vector<int> k_list{32, 64, 128, 256};
  int grid_n = 0;
};

struct SweepConfig {
  std::string vary = "delta";  // delta | K
  std::vector<double> values{1e-2, 3e-3, 1e-3};
  std::string mode = "solve-qp";  // solve-qp | semiclassical
};

struct OutputConfig {
  std::string directory = ".";
  std::string format = "json";  // json | csv
};

struct RunConfig {
  Mode mode = Mode::kSolveQp;
  std::string preset;
  ProblemConfig problem;
  TruncationBox box{0, 0};  // zero entries: automatic
  AnalyticWeight weights;
  ToleranceConfig tolerances;
  EvolveConfig evolve;
  SurfaceConfig surface;
  SweepConfig sweep;
  OutputConfig output;
  std::uint64_t rng_seed = 0;
  int threads = 1;

  int b() const { return static_cast<int>(problem.freqs.size()); }
  NlsProblem nls_problem() const;
  // Seed with the given unit-scale amplitudes (scaled by delta in the amplitude convention).
  SeedSolution seed(const std::vector<cplx>& amps) const;
  SolveOptions solve_options() const;
};

// Preset defaults; user keys override them.
ConfigTable preset_table(const std::string& name);
std::vector<std::string> preset_names();

// Resolves every field, starting from the preset named by "preset" if present.
// Throws ValidationError naming the offending key.
RunConfig resolve_config(const ConfigTable& table);

// Amplitudes with modulus uniform in (0, 1] and phase uniform in [0, 2 pi).
std::vector<cplx> sample_amplitudes(int b, std::mt19937_64& rng);

void to_json(nlohmann::json& j, const RunConfig& c);
// Resolved configuration in the config-file grammar; parsing it reproduces the run.
std::string to_config_text(const RunConfig& c);

}  // namespace qpnls
