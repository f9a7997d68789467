#include "qpnls/driver.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <new>
#include <sstream>
#include <thread>

#include <fftw3.h>

#include "qpnls/cauchy.hpp"
#include "qpnls/error.hpp"
#include "qpnls/fit.hpp"
#include "qpnls/qp_solver.hpp"
#include "qpnls/resonance.hpp"
#include "qpnls/surface.hpp"

#ifndef QPNLS_VERSION
#define QPNLS_VERSION "0.0.0"
#endif

namespace qpnls {

int exit_code_for(const std::exception& e) {
  if (const auto* err = dynamic_cast<const Error*>(&e)) {
    switch (err->kind()) {
      case ErrorKind::kValidation: return 2;
      case ErrorKind::kNumerical: return 3;
      case ErrorKind::kResource: return 4;
    }
  }
  if (dynamic_cast<const std::bad_alloc*>(&e)) return 4;
  return 1;
}

void parallel_for(int n, int threads, const std::function<void(int)>& f) {
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(std::max(n, 0)));
  std::atomic<int> next{0};
  const auto worker = [&]() {
    for (int i = next++; i < n; i = next++) {
      try {
        f(i);
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  };
  const int w = std::max(1, std::min(threads, n));
  if (w == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < w; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

namespace {

class ArtifactWriter {
 public:
  explicit ArtifactWriter(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
  }
  void text(const std::string& name, const std::string& content) {
    std::ofstream out(dir_ / name, std::ios::binary);
    if (!out) throw ResourceError("cannot write artifact '" + (dir_ / name).string() + "'");
    out << content;
    names_.push_back(name);
  }
  void json(const std::string& name, const nlohmann::json& j) { text(name, j.dump(2) + "\n"); }
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::filesystem::path dir_;
  std::vector<std::string> names_;
};

std::vector<cplx> unit_amplitudes(const RunConfig& cfg, std::mt19937_64& rng) {
  return cfg.problem.amps.empty() ? sample_amplitudes(cfg.b(), rng) : cfg.problem.amps;
}

std::string csv_number(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

DiophantineResult diophantine_for(const RunConfig& cfg, const std::vector<double>& omega) {
  const double tau = cfg.tolerances.tau > 0 ? cfg.tolerances.tau : cfg.b() + 1.0;
  const int n_max = cfg.tolerances.n_max > 0 ? cfg.tolerances.n_max : (cfg.b() <= 3 ? 100 : 20);
  return diophantine_check(omega, cfg.tolerances.gamma, tau, n_max);
}

nlohmann::json run_resonance(const RunConfig& cfg, ArtifactWriter& out, std::mt19937_64& rng) {
  const SeedSolution seed = cfg.seed(unit_amplitudes(cfg, rng));
  const int p = cfg.problem.p;
  const TruncationBox box =
      (cfg.box.n_time > 0 && cfg.box.n_space > 0) ? cfg.box : minimal_certificate_box(seed, p);
  const ResonantSet rs = bicharacteristics(seed, box);
  const ResonanceGraph graph = build_resonance_graph(seed, rs, p);
  const GenericityCertificate cert = certify_genericity(graph, seed, p, seed.b(), seed.d);

  std::set<SpatialVec> projection;
  auto comps = nlohmann::json::array();
  std::ostringstream csv;
  csv << "component,sign,n,j\n";
  int ci = 0;
  for (const auto& comp : graph.components()) {
    if (comp.size() < 2) continue;
    std::set<SpatialVec> proj;
    auto sites = nlohmann::json::array();
    for (std::size_t v : comp) {
      const auto& vx = graph.vertices()[v];
      const auto t = vx.site.time();
      const auto s = vx.site.space();
      const std::vector<int> n(t.begin(), t.end());
      const SpatialVec j(s.begin(), s.end());
      proj.insert(j);
      const int sign = static_cast<int>(vx.sign);
      sites.push_back({{"n", n}, {"j", j}, {"sign", sign}});
      csv << ci << ',' << sign << ",\"" << nlohmann::json(n).dump() << "\",\"" << nlohmann::json(j).dump() << "\"\n";
    }
    projection.insert(proj.begin(), proj.end());
    comps.push_back({{"size", comp.size()}, {"spatial_projection", proj}, {"vertices", sites}});
    ++ci;
  }
  nlohmann::json j{{"seed", seed},
                   {"p", p},
                   {"box", {{"n_time", box.n_time}, {"n_space", box.n_space}}},
                   {"resonant_rows", graph.vertices().size()},
                   {"resonant_sites", {{"plus", rs.plus.size()}, {"minus", rs.minus.size()}}},
                   {"edges", graph.edges().size()},
                   {"components", comps},
                   {"spatial_projection", projection},
                   {"certificate", cert}};
  out.json("resonance.json", j);
  if (cfg.output.format == "csv") out.text("resonance_components.csv", csv.str());
  return {{"is_generic", cert.is_generic},
          {"max_component_size", cert.max_component_size},
          {"spatial_projection", projection}};
}

nlohmann::json run_genericity(const RunConfig& cfg, ArtifactWriter& out, std::mt19937_64& rng) {
  const SeedSolution seed = cfg.seed(unit_amplitudes(cfg, rng));
  const int p = cfg.problem.p;
  const TruncationBox box =
      (cfg.box.n_time > 0 && cfg.box.n_space > 0) ? cfg.box : minimal_certificate_box(seed, p);
  const GenericityCertificate cert = certify_seed(seed, p, box);
  const SaturationReport sat = box_growth(seed, p, box);
  nlohmann::json j{{"seed", seed},
                   {"p", p},
                   {"certificate", cert},
                   {"saturation", {{"size_n", sat.size_n}, {"size_2n", sat.size_2n}, {"saturated", sat.saturated()}}}};
  out.json("genericity.json", j);
  if (!cert.is_generic) {
    throw NumericalError("seed is not generic: max component " + std::to_string(cert.max_component_size) +
                         " (bound " + std::to_string(cert.bound) + "), supp F0 clean " +
                         (cert.f0_support_clean ? "yes" : "no") + ", antipodal free " +
                         (cert.antipodal_free ? "yes" : "no"));
  }
  return {{"is_generic", cert.is_generic}, {"max_component_size", cert.max_component_size},
          {"saturated", sat.saturated()}};
}

nlohmann::json branch_summary(const SolutionBranch& br) {
  return {{"converged", br.converged},
          {"iterations", br.iterations.size()},
          {"residual_norm", br.residual_norm},
          {"omega", br.omega},
          {"excision_ok", br.excision_ok},
          {"diophantine_ok", br.diophantine ? br.diophantine->ok : false}};
}

std::string iterations_csv(const SolutionBranch& br) {
  std::ostringstream os;
  os << "iteration,residual_norm,correction_norm,omega_shift,min_singular_value,krylov_iterations\n";
  for (std::size_t i = 0; i < br.iterations.size(); ++i) {
    const auto& r = br.iterations[i];
    os << i << ',' << csv_number(r.residual_norm) << ',' << csv_number(r.correction_norm) << ','
       << csv_number(r.omega_shift) << ',' << csv_number(r.min_singular_value) << ',' << r.krylov_iterations << '\n';
  }
  return os.str();
}

SolutionBranch solve_checked(const RunConfig& cfg, const SeedSolution& seed, const SolveOptions& opt) {
  SolutionBranch br = solve_branch(seed, cfg.nls_problem(), opt);
  br.diophantine = diophantine_for(cfg, br.omega);
  return br;
}

nlohmann::json run_solve_qp(const RunConfig& cfg, ArtifactWriter& out, std::mt19937_64& rng) {
  if (cfg.problem.sample_count == 0) {
    const SeedSolution seed = cfg.seed(unit_amplitudes(cfg, rng));
    const SolutionBranch br = solve_checked(cfg, seed, cfg.solve_options());
    nlohmann::json bj = br;
    bj["certificates"]["genericity"] = certify_seed(seed, cfg.problem.p, minimal_certificate_box(seed, cfg.problem.p));
    out.json("branch.json", bj);
    if (cfg.output.format == "csv") out.text("iterations.csv", iterations_csv(br));
    if (!br.converged) {
      throw NumericalError("Newton iteration did not reach the tolerance; final residual " +
                           csv_number(br.residual_norm));
    }
    return branch_summary(br);
  }
  // Monte-Carlo excision fractions over amplitude draws.
  const int n = cfg.problem.sample_count;
  std::vector<std::vector<cplx>> draws;
  for (int i = 0; i < n; ++i) draws.push_back(sample_amplitudes(cfg.b(), rng));
  SolveOptions opt = cfg.solve_options();
  opt.enforce_excision = false;
  std::vector<nlohmann::json> rows(n);
  parallel_for(n, cfg.threads, [&](int i) {
    const SeedSolution seed = cfg.seed(draws[i]);
    try {
      const SolutionBranch br = solve_checked(cfg, seed, opt);
      rows[i] = branch_summary(br);
      rows[i]["min_singular_value"] = br.excision.min_singular_value;
    } catch (const NumericalError& e) {
      rows[i] = {{"converged", false}, {"excision_ok", false}, {"diophantine_ok", false}, {"failure", e.what()}};
    }
    rows[i]["amplitudes"] = nlohmann::json(seed)["amps"];
  });
  int exc = 0, dio = 0, conv = 0;
  std::ostringstream csv;
  csv << "sample,converged,excision_ok,diophantine_ok,min_singular_value\n";
  for (int i = 0; i < n; ++i) {
    exc += rows[i]["excision_ok"].get<bool>();
    dio += rows[i]["diophantine_ok"].get<bool>();
    conv += rows[i]["converged"].get<bool>();
    csv << i << ',' << rows[i]["converged"].get<bool>() << ',' << rows[i]["excision_ok"].get<bool>() << ','
        << rows[i]["diophantine_ok"].get<bool>() << ','
        << (rows[i].contains("min_singular_value") ? csv_number(rows[i]["min_singular_value"].get<double>()) : "")
        << '\n';
  }
  nlohmann::json summary{{"samples", n},
                         {"converged_fraction", static_cast<double>(conv) / n},
                         {"excision_fraction", static_cast<double>(exc) / n},
                         {"diophantine_fraction", static_cast<double>(dio) / n}};
  nlohmann::json j = summary;
  j["rows"] = rows;
  out.json("excision.json", j);
  if (cfg.output.format == "csv") out.text("excision.csv", csv.str());
  return summary;
}

nlohmann::json run_semiclassical(const RunConfig& cfg, ArtifactWriter& out, std::mt19937_64& rng) {
  SeedSolution tmpl;
  tmpl.d = cfg.problem.d;
  tmpl.freqs = cfg.problem.freqs;
  tmpl.amps = unit_amplitudes(cfg, rng);
  const SemiclassicalResult r = semiclassical_run(tmpl, cfg.problem.K, cfg.problem.p, cfg.solve_options());
  nlohmann::json j{{"K", r.K},
                   {"remainder", r.remainder},
                   {"frequency_offsets", r.frequency_offsets},
                   {"branch", r.branch}};
  out.json("semiclassical.json", j);
  if (cfg.output.format == "csv") out.text("iterations.csv", iterations_csv(r.branch));
  return {{"K", r.K}, {"remainder", r.remainder}, {"converged", r.branch.converged}};
}

nlohmann::json run_evolve(const RunConfig& cfg, ArtifactWriter& out, std::mt19937_64& rng) {
  CauchyState u0;
  std::optional<QuasiPeriodicEvaluator> v;
  nlohmann::json source;
  if (!cfg.evolve.checkpoint.empty()) {
    std::ifstream in(cfg.evolve.checkpoint);
    if (!in) throw ValidationError("evolve.checkpoint: cannot open '" + cfg.evolve.checkpoint + "'");
    nlohmann::json j;
    try {
      in >> j;
      u0 = j.get<CauchyState>();
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("evolve.checkpoint: " + std::string(e.what()));
    }
    source = {{"checkpoint", cfg.evolve.checkpoint}, {"time", u0.time}};
  } else {
    const SeedSolution seed = cfg.seed(unit_amplitudes(cfg, rng));
    const SolutionBranch br = solve_checked(cfg, seed, cfg.solve_options());
    if (!br.converged) throw NumericalError("branch for the initial data did not converge");
    v.emplace(br);
    u0 = v->at(0.0, cfg.evolve.n_space > 0 ? cfg.evolve.n_space : br.box.n_space);
    source = {{"branch", branch_summary(br)}};
  }
  const double delta = std::abs(cfg.problem.delta);
  DriftOptions dopt;
  dopt.horizon = cfg.evolve.horizon_exponent > 0 ? std::pow(delta, -cfg.evolve.horizon_exponent) : cfg.evolve.horizon;
  dopt.dt = cfg.evolve.dt;
  dopt.t_min = cfg.evolve.t_min;
  dopt.samples_per_decade = cfg.evolve.samples_per_decade;
  dopt.rho_space = cfg.weights.rho_space;
  dopt.drift_tol = cfg.evolve.drift_tol > 0 ? cfg.evolve.drift_tol : cfg.evolve.drift_multiple * delta;
  dopt.distance_tol = cfg.evolve.distance_tol;
  const DriftReport rep = drift_monitor(u0, v ? &*v : nullptr, dopt);
  std::ostringstream csv;
  rep.write_csv(csv);
  out.text("drift.csv", csv.str());

  nlohmann::json j{{"source", source}, {"drift", rep}};
  std::optional<IntegrityReport> integ;
  if (cfg.evolve.integrity_horizon > 0) {
    integ = integrator_integrity(u0, std::min(cfg.evolve.integrity_horizon, dopt.horizon), 4.0 * rep.dt);
    j["integrity"] = *integ;
  }
  out.json("checkpoint.json", rep.final_state);
  out.json("drift.json", j);
  if (integ && !integ->ok) throw NumericalError("integrator integrity check failed");
  return {{"horizon_reached", rep.horizon_reached},
          {"max_abs_analytic_norm_drift", rep.max_abs_drift()},
          {"integrity_ok", integ ? integ->ok : true}};
}

RevolutionMetric make_metric(const SurfaceConfig& s) {
  if (s.metric == "flat") return RevolutionMetric::flat(s.g0);
  if (s.metric == "profile") return RevolutionMetric::load_profile(s.profile);
  return RevolutionMetric::torus(s.R);
}

nlohmann::json run_surface(const RunConfig& cfg, ArtifactWriter& out) {
  const RevolutionMetric metric = make_metric(cfg.surface);
  ScalingOptions opt;
  opt.grid_n = cfg.surface.grid_n;
  const ScalingStudy st = scaling_study(metric, cfg.surface.k_list, opt);
  std::ostringstream csv;
  write_csv(csv, st.records);
  out.text("surface.csv", csv.str());
  nlohmann::json j = st;
  j["metric"] = {{"name", metric.name()},
                 {"period", metric.period()},
                 {"max_location", metric.max_location()},
                 {"nondegeneracy", metric.nondegeneracy()},
                 {"c3_bound", metric.c3_bound()}};
  out.json("surface.json", j);
  return {{"slope", st.slope}, {"slope_without_lowest", st.slope_without_lowest}};
}

nlohmann::json run_sweep(const RunConfig& cfg, ArtifactWriter& out, std::mt19937_64& rng) {
  const bool semi = cfg.sweep.mode == "semiclassical";
  if (semi != (cfg.sweep.vary == "K")) {
    throw ValidationError("sweep: vary = K goes with mode = semiclassical, vary = delta with mode = solve-qp");
  }
  const std::vector<cplx> amps = unit_amplitudes(cfg, rng);
  const auto& vals = cfg.sweep.values;
  const int n = static_cast<int>(vals.size());
  std::vector<SweepRow> rows(n);
  std::vector<nlohmann::json> branches(n);
  parallel_for(n, cfg.threads, [&](int i) {
    RunConfig c = cfg;
    SweepRow& row = rows[i];
    row.delta_or_k = vals[i];
    if (semi) {
      const int K = static_cast<int>(std::lround(vals[i]));
      if (K < 1 || std::abs(vals[i] - K) > 1e-12) throw ValidationError("sweep.values: K must be a positive integer");
      SeedSolution tmpl;
      tmpl.d = c.problem.d;
      tmpl.freqs = c.problem.freqs;
      tmpl.amps = amps;
      const auto r = semiclassical_run(tmpl, K, c.problem.p, c.solve_options());
      row.first_correction_norm = r.branch.first_correction_norm();
      row.omega_shift_norm = r.branch.first_omega_shift();
      row.remainder = r.remainder;
      branches[i] = branch_summary(r.branch);
    } else {
      if (!(vals[i] > 0)) throw ValidationError("sweep.values: delta must be positive");
      c.problem.delta = vals[i];
      const SeedSolution seed = c.seed(amps);
      SolveOptions opt = c.solve_options();
      opt.enforce_excision = false;
      const SolutionBranch br = solve_checked(c, seed, opt);
      row.first_correction_norm = br.first_correction_norm();
      row.omega_shift_norm = br.first_omega_shift();
      row.det_jacobian = frequency_jacobian(seed, c.nls_problem(), opt).det_abs;
      row.remainder = br.residual_norm;
      branches[i] = branch_summary(br);
    }
  });
  std::ostringstream csv;
  write_sweep_csv(csv, rows);
  out.text("sweep.csv", csv.str());

  nlohmann::json slopes = nlohmann::json::object();
  const auto fit = [&](const char* name, auto get) {
    std::vector<double> x, y;
    for (const auto& r : rows) {
      if (get(r) > 0) {
        x.push_back(r.delta_or_k);
        y.push_back(get(r));
      }
    }
    if (x.size() >= 2 && x.front() != x.back()) slopes[name] = loglog_fit(x, y).slope;
  };
  fit("first_correction_norm", [](const SweepRow& r) { return r.first_correction_norm; });
  fit("omega_shift_norm", [](const SweepRow& r) { return r.omega_shift_norm; });
  fit("det_jacobian", [](const SweepRow& r) { return r.det_jacobian; });
  if (semi) fit("remainder", [](const SweepRow& r) { return r.remainder; });
  nlohmann::json j{{"vary", cfg.sweep.vary}, {"mode", cfg.sweep.mode}, {"slopes", slopes}, {"branches", branches}};
  out.json("sweep.json", j);
  return {{"slopes", slopes}};
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

RunResult run(const RunConfig& cfg, std::ostream& log) {
  const auto t0 = std::chrono::steady_clock::now();
  RunResult res;
  ArtifactWriter out(cfg.output.directory);
  out.text("config.resolved.toml", to_config_text(cfg));
  std::mt19937_64 rng(cfg.rng_seed);
  const std::string module = to_string(cfg.mode);
  log << "qpnls " << module << ": writing to " << cfg.output.directory << "\n";
  try {
    switch (cfg.mode) {
      case Mode::kResonance: res.summary = run_resonance(cfg, out, rng); break;
      case Mode::kGenericity: res.summary = run_genericity(cfg, out, rng); break;
      case Mode::kSolveQp: res.summary = run_solve_qp(cfg, out, rng); break;
      case Mode::kSemiclassical: res.summary = run_semiclassical(cfg, out, rng); break;
      case Mode::kEvolve: res.summary = run_evolve(cfg, out, rng); break;
      case Mode::kSurface: res.summary = run_surface(cfg, out); break;
      case Mode::kSweep: res.summary = run_sweep(cfg, out, rng); break;
    }
  } catch (const std::exception& e) {
    res.exit_code = exit_code_for(e);
    res.error = {{"module", module}, {"exit_code", res.exit_code}, {"message", e.what()}};
    log << "qpnls " << module << ": error: " << e.what() << "\n";
  }
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  nlohmann::json manifest{
      {"tool", "qpnls"},
      {"version", QPNLS_VERSION},
      {"mode", module},
      {"exit_code", res.exit_code},
      {"artifacts", out.names()},
      {"summary", res.summary},
      {"error", res.error},
      {"config", cfg},
      {"libraries",
       {{"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                      std::to_string(EIGEN_MINOR_VERSION)},
        {"fftw", std::string(fftw_version)},
        {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                              std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                              std::to_string(NLOHMANN_JSON_VERSION_PATCH)}}},
      {"wall_time_seconds", wall},
      {"timestamp", utc_timestamp()},
  };
  try {
    out.json("manifest.json", manifest);
  } catch (const std::exception& e) {
    log << "qpnls: cannot write manifest: " << e.what() << "\n";
    if (res.exit_code == 0) res.exit_code = 4;
  }
  res.artifacts = out.names();
  log << "qpnls " << module << ": exit " << res.exit_code << "\n";
  return res;
}

}  // namespace qpnls
