#include "qpnls/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>

#include "qpnls/error.hpp"

namespace qpnls {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Strips a '#' comment that is not inside a double-quoted string.
std::string strip_comment(const std::string& s) {
  bool quoted = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"' && (i == 0 || s[i - 1] != '\\')) quoted = !quoted;
    if (s[i] == '#' && !quoted) return s.substr(0, i);
  }
  return s;
}

nlohmann::json parse_value(const std::string& raw) {
  const std::string v = trim(raw);
  if (v.empty()) throw ValidationError("empty value");
  auto j = nlohmann::json::parse(v, nullptr, false);
  if (!j.is_discarded()) return j;
  if (v.front() == '[' || v.front() == '{' || v.front() == '"') throw ValidationError("malformed value '" + v + "'");
  return v;
}

}  // namespace

ConfigTable parse_config_text(const std::string& text, const std::string& source) {
  ConfigTable t;
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string where = source + ":" + std::to_string(lineno) + ": ";
    line = trim(strip_comment(line));
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']' && line.find('=') == std::string::npos) {
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) throw ValidationError(where + "empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ValidationError(where + "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ValidationError(where + "missing key");
    try {
      t[section.empty() ? key : section + "." + key] = parse_value(line.substr(eq + 1));
    } catch (const ValidationError& e) {
      throw ValidationError(where + key + ": " + e.what());
    }
  }
  return t;
}

ConfigTable parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path);
}

void apply_override(ConfigTable& table, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw ValidationError("override '" + assignment + "' must look like key=value");
  const std::string key = trim(assignment.substr(0, eq));
  if (key.empty()) throw ValidationError("override '" + assignment + "' has no key");
  try {
    table[key] = parse_value(assignment.substr(eq + 1));
  } catch (const ValidationError& e) {
    throw ValidationError(key + ": " + e.what());
  }
}

std::string to_string(Mode m) {
  switch (m) {
    case Mode::kResonance: return "resonance";
    case Mode::kGenericity: return "genericity";
    case Mode::kSolveQp: return "solve-qp";
    case Mode::kSemiclassical: return "semiclassical";
    case Mode::kEvolve: return "evolve";
    case Mode::kSurface: return "surface";
    case Mode::kSweep: return "sweep";
  }
  return "unknown";
}

Mode parse_mode(const std::string& s) {
  for (Mode m : {Mode::kResonance, Mode::kGenericity, Mode::kSolveQp, Mode::kSemiclassical, Mode::kEvolve,
                 Mode::kSurface, Mode::kSweep}) {
    if (to_string(m) == s) return m;
  }
  if (s == "solve_qp") return Mode::kSolveQp;
  throw ValidationError("mode: unknown mode '" + s + "'");
}

NlsProblem RunConfig::nls_problem() const {
  NlsProblem pr;
  pr.b = b();
  pr.d = problem.d;
  pr.p = problem.p;
  pr.delta = problem.convention == "coupling" ? problem.delta : 1.0;
  pr.kappa = problem.kappa;
  return pr;
}

SeedSolution RunConfig::seed(const std::vector<cplx>& amps) const {
  SeedSolution s;
  s.d = problem.d;
  s.freqs = problem.freqs;
  const double scale = problem.convention == "amplitude" ? problem.delta : 1.0;
  for (const auto& a : amps) s.amps.push_back(scale * a);
  s.validate();
  return s;
}

SolveOptions RunConfig::solve_options() const {
  SolveOptions o;
  if (box.n_time > 0 && box.n_space > 0) o.box = box;
  o.tol = tolerances.newton_tol;
  o.max_iterations = tolerances.max_iterations;
  o.excision_c = tolerances.excision_c;
  o.enforce_excision = tolerances.enforce_excision;
  o.weight = weights;
  return o;
}

ConfigTable preset_table(const std::string& name) {
  ConfigTable t;
  if (name == "single-mode") {
    t["mode"] = "solve-qp";
    t["problem.d"] = 1;
    t["problem.p"] = 1;
    t["problem.convention"] = "coupling";
    t["problem.delta"] = 0.1;
    t["problem.freqs"] = nlohmann::json::array({{1}});
    t["problem.amps"] = nlohmann::json::array({{0.5, 0.0}});
  } else if (name == "cubic-d1-b2") {
    t["mode"] = "resonance";
    t["problem.d"] = 1;
    t["problem.p"] = 1;
    t["problem.convention"] = "amplitude";
    t["problem.delta"] = 1e-2;
    t["problem.freqs"] = nlohmann::json::array({{1}, {2}});
    t["problem.amps"] = nlohmann::json::array({{1.0, 0.0}, {0.7, 0.4}});
  } else if (name == "torus-revolution") {
    t["mode"] = "surface";
    t["surface.metric"] = "torus";
    t["surface.R"] = 2.0;
    t["surface.k_list"] = nlohmann::json::array({32, 64, 128, 256});
  } else {
    throw ValidationError("preset: unknown preset '" + name + "'");
  }
  return t;
}

std::vector<std::string> preset_names() { return {"single-mode", "cubic-d1-b2", "torus-revolution"}; }

namespace {

double as_double(const nlohmann::json& v, const std::string& key) {
  if (!v.is_number()) throw ValidationError(key + ": expected a number");
  return v.get<double>();
}

int as_int(const nlohmann::json& v, const std::string& key) {
  if (v.is_number_integer()) return v.get<int>();
  if (v.is_number_float()) {
    const double x = v.get<double>();
    if (std::floor(x) == x && std::abs(x) < 1e9) return static_cast<int>(x);
  }
  throw ValidationError(key + ": expected an integer");
}

bool as_bool(const nlohmann::json& v, const std::string& key) {
  if (!v.is_boolean()) throw ValidationError(key + ": expected true or false");
  return v.get<bool>();
}

std::string as_string(const nlohmann::json& v, const std::string& key) {
  if (!v.is_string()) throw ValidationError(key + ": expected a string");
  return v.get<std::string>();
}

cplx as_complex(const nlohmann::json& v, const std::string& key) {
  if (v.is_number()) return {v.get<double>(), 0.0};
  if (v.is_array() && v.size() == 2 && v[0].is_number() && v[1].is_number()) {
    return {v[0].get<double>(), v[1].get<double>()};
  }
  throw ValidationError(key + ": expected a number or [re, im]");
}

template <class T, class F>
std::vector<T> as_list(const nlohmann::json& v, const std::string& key, F&& item) {
  if (v.is_number()) return {item(v, key)};
  if (!v.is_array()) throw ValidationError(key + ": expected a list");
  std::vector<T> out;
  for (std::size_t i = 0; i < v.size(); ++i) out.push_back(item(v[i], key + "[" + std::to_string(i) + "]"));
  return out;
}

// Accepts [1, 2] or "1e-2,3e-3" style lists.
std::vector<double> as_double_list(const nlohmann::json& v, const std::string& key) {
  if (v.is_string()) {
    std::vector<double> out;
    std::stringstream ss(v.get<std::string>());
    std::string item;
    while (std::getline(ss, item, ',')) {
      try {
        out.push_back(std::stod(trim(item)));
      } catch (const std::exception&) {
        throw ValidationError(key + ": '" + item + "' is not a number");
      }
    }
    return out;
  }
  return as_list<double>(v, key, as_double);
}

std::vector<int> as_int_list(const nlohmann::json& v, const std::string& key) {
  std::vector<int> out;
  for (double x : as_double_list(v, key)) out.push_back(as_int(nlohmann::json(x), key));
  return out;
}

}  // namespace

RunConfig resolve_config(const ConfigTable& user) {
  ConfigTable t;
  if (auto it = user.find("preset"); it != user.end() && !as_string(it->second, "preset").empty()) {
    t = preset_table(as_string(it->second, "preset"));
    t["preset"] = it->second;
  }
  for (const auto& [k, v] : user) t[k] = v;

  RunConfig c;
  auto& P = c.problem;
  auto& T = c.tolerances;
  auto& E = c.evolve;
  auto& S = c.surface;
  using Setter = std::function<void(const nlohmann::json&, const std::string&)>;
  const std::map<std::string, Setter> setters = {
      {"mode", [&](auto& v, auto& k) { c.mode = parse_mode(as_string(v, k)); }},
      {"preset", [&](auto& v, auto& k) { c.preset = as_string(v, k); }},
      {"rng_seed", [&](auto& v, auto& k) {
         if (!v.is_number_integer() || v.template get<long long>() < 0) throw ValidationError(k + ": expected a nonnegative integer");
         c.rng_seed = v.template get<std::uint64_t>();
       }},
      {"threads", [&](auto& v, auto& k) { c.threads = as_int(v, k); }},
      {"problem.d", [&](auto& v, auto& k) { P.d = as_int(v, k); }},
      {"problem.p", [&](auto& v, auto& k) { P.p = as_int(v, k); }},
      {"problem.delta", [&](auto& v, auto& k) { P.delta = as_double(v, k); }},
      {"problem.K", [&](auto& v, auto& k) { P.K = as_int(v, k); }},
      {"problem.kappa", [&](auto& v, auto& k) { P.kappa = as_double(v, k); }},
      {"problem.convention", [&](auto& v, auto& k) { P.convention = as_string(v, k); }},
      {"problem.freqs", [&](auto& v, auto& k) {
         if (!v.is_array()) throw ValidationError(k + ": expected a list of integer vectors");
         P.freqs.clear();
         for (std::size_t i = 0; i < v.size(); ++i) {
           const std::string ki = k + "[" + std::to_string(i) + "]";
           P.freqs.push_back(as_list<int>(v[i], ki, as_int));
         }
       }},
      {"problem.amps", [&](auto& v, auto& k) { P.amps = as_list<cplx>(v, k, as_complex); }},
      {"problem.sample_count", [&](auto& v, auto& k) { P.sample_count = as_int(v, k); }},
      {"box.n_time", [&](auto& v, auto& k) { c.box.n_time = as_int(v, k); }},
      {"box.n_space", [&](auto& v, auto& k) { c.box.n_space = as_int(v, k); }},
      {"weights.rho_time", [&](auto& v, auto& k) { c.weights.rho_time = as_double(v, k); }},
      {"weights.rho_space", [&](auto& v, auto& k) { c.weights.rho_space = as_double(v, k); }},
      {"tolerances.newton_tol", [&](auto& v, auto& k) { T.newton_tol = as_double(v, k); }},
      {"tolerances.max_iterations", [&](auto& v, auto& k) { T.max_iterations = as_int(v, k); }},
      {"tolerances.excision_c", [&](auto& v, auto& k) { T.excision_c = as_double(v, k); }},
      {"tolerances.enforce_excision", [&](auto& v, auto& k) { T.enforce_excision = as_bool(v, k); }},
      {"tolerances.gamma", [&](auto& v, auto& k) { T.gamma = as_double(v, k); }},
      {"tolerances.tau", [&](auto& v, auto& k) { T.tau = as_double(v, k); }},
      {"tolerances.n_max", [&](auto& v, auto& k) { T.n_max = as_int(v, k); }},
      {"evolve.horizon", [&](auto& v, auto& k) { E.horizon = as_double(v, k); }},
      {"evolve.horizon_exponent", [&](auto& v, auto& k) { E.horizon_exponent = as_double(v, k); }},
      {"evolve.drift_multiple", [&](auto& v, auto& k) { E.drift_multiple = as_double(v, k); }},
      {"evolve.dt", [&](auto& v, auto& k) { E.dt = as_double(v, k); }},
      {"evolve.n_space", [&](auto& v, auto& k) { E.n_space = as_int(v, k); }},
      {"evolve.t_min", [&](auto& v, auto& k) { E.t_min = as_double(v, k); }},
      {"evolve.samples_per_decade", [&](auto& v, auto& k) { E.samples_per_decade = as_int(v, k); }},
      {"evolve.drift_tol", [&](auto& v, auto& k) { E.drift_tol = as_double(v, k); }},
      {"evolve.distance_tol", [&](auto& v, auto& k) { E.distance_tol = as_double(v, k); }},
      {"evolve.integrity_horizon", [&](auto& v, auto& k) { E.integrity_horizon = as_double(v, k); }},
      {"evolve.checkpoint", [&](auto& v, auto& k) { E.checkpoint = as_string(v, k); }},
      {"surface.metric", [&](auto& v, auto& k) { S.metric = as_string(v, k); }},
      {"surface.R", [&](auto& v, auto& k) { S.R = as_double(v, k); }},
      {"surface.g0", [&](auto& v, auto& k) { S.g0 = as_double(v, k); }},
      {"surface.profile", [&](auto& v, auto& k) { S.profile = as_string(v, k); }},
      {"surface.k_list", [&](auto& v, auto& k) { S.k_list = as_int_list(v, k); }},
      {"surface.grid_n", [&](auto& v, auto& k) { S.grid_n = as_int(v, k); }},
      {"sweep.vary", [&](auto& v, auto& k) { c.sweep.vary = as_string(v, k); }},
      {"sweep.values", [&](auto& v, auto& k) { c.sweep.values = as_double_list(v, k); }},
      {"sweep.mode", [&](auto& v, auto& k) { c.sweep.mode = as_string(v, k); }},
      {"output.directory", [&](auto& v, auto& k) { c.output.directory = as_string(v, k); }},
      {"output.format", [&](auto& v, auto& k) { c.output.format = as_string(v, k); }},
  };
  for (const auto& [k, v] : t) {
    const auto it = setters.find(k);
    if (it == setters.end()) throw ValidationError(k + ": unknown configuration key");
    it->second(v, k);
  }

  // d follows the frequency vectors when it was not given explicitly.
  if (!t.count("problem.d") && !P.freqs.empty()) P.d = static_cast<int>(P.freqs.front().size());

  const auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw ValidationError(msg);
  };
  require(P.d >= 1, "problem.d: must be >= 1");
  require(P.p >= 1, "problem.p: must be >= 1");
  require(P.delta != 0.0 && std::isfinite(P.delta), "problem.delta: must be finite and nonzero");
  require(P.convention != "amplitude" || P.delta > 0, "problem.delta: must be positive in the amplitude convention");
  require(P.K >= 1, "problem.K: must be >= 1");
  require(P.kappa > 0, "problem.kappa: must be positive");
  require(P.convention == "amplitude" || P.convention == "coupling",
          "problem.convention: expected 'amplitude' or 'coupling'");
  require(!P.freqs.empty(), "problem.freqs: at least one frequency is required");
  require(c.b() + P.d <= kMaxLatticeDim,
          "problem.freqs: b + d exceeds the lattice dimension cap of " + std::to_string(kMaxLatticeDim));
  for (std::size_t i = 0; i < P.freqs.size(); ++i) {
    require(static_cast<int>(P.freqs[i].size()) == P.d,
            "problem.freqs[" + std::to_string(i) + "]: expected " + std::to_string(P.d) + " components");
  }
  require(P.amps.empty() || static_cast<int>(P.amps.size()) == c.b(),
          "problem.amps: expected " + std::to_string(c.b()) + " amplitudes");
  require(P.sample_count >= 0, "problem.sample_count: must be >= 0");
  require(c.box.n_time >= 0 && c.box.n_space >= 0, "box: sizes must be >= 0");
  require(c.weights.rho_time > 0 && c.weights.rho_space > 0, "weights: strip widths must be positive");
  require(T.newton_tol > 0, "tolerances.newton_tol: must be positive");
  require(T.max_iterations >= 1, "tolerances.max_iterations: must be >= 1");
  require(T.excision_c >= 0, "tolerances.excision_c: must be >= 0");
  require(T.gamma > 0, "tolerances.gamma: must be positive");
  require(T.tau >= 0 && T.n_max >= 0, "tolerances: tau and n_max must be >= 0");
  require(E.horizon > 0, "evolve.horizon: must be positive");
  require(E.horizon_exponent >= 0 && E.drift_multiple >= 0, "evolve: horizon_exponent and drift_multiple must be >= 0");
  require(E.dt >= 0 && E.n_space >= 0, "evolve: dt and n_space must be >= 0");
  require(E.t_min > 0 && E.samples_per_decade >= 1, "evolve: t_min and samples_per_decade must be positive");
  require(E.integrity_horizon >= 0, "evolve.integrity_horizon: must be >= 0");
  require(S.metric == "torus" || S.metric == "flat" || S.metric == "profile",
          "surface.metric: expected torus, flat or profile");
  require(S.metric != "profile" || !S.profile.empty(), "surface.profile: required for metric = profile");
  require(!S.k_list.empty(), "surface.k_list: must not be empty");
  require(S.grid_n >= 0, "surface.grid_n: must be >= 0");
  require(c.sweep.vary == "delta" || c.sweep.vary == "K", "sweep.vary: expected delta or K");
  require(c.sweep.mode == "solve-qp" || c.sweep.mode == "semiclassical",
          "sweep.mode: expected solve-qp or semiclassical");
  require(!c.sweep.values.empty(), "sweep.values: must not be empty");
  require(c.output.format == "json" || c.output.format == "csv", "output.format: expected json or csv");
  require(c.threads >= 1, "threads: must be >= 1");
  return c;
}

std::vector<cplx> sample_amplitudes(int b, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<cplx> a(b);
  for (auto& x : a) {
    const double r = 1.0 - unit(rng);  // (0, 1]
    x = std::polar(r, 2.0 * std::numbers::pi * unit(rng));
  }
  return a;
}

void to_json(nlohmann::json& j, const RunConfig& c) {
  const auto& P = c.problem;
  auto amps = nlohmann::json::array();
  for (const auto& a : P.amps) amps.push_back({a.real(), a.imag()});
  j = nlohmann::json{
      {"mode", to_string(c.mode)},
      {"preset", c.preset},
      {"rng_seed", c.rng_seed},
      {"threads", c.threads},
      {"problem",
       {{"b", c.b()},
        {"d", P.d},
        {"p", P.p},
        {"delta", P.delta},
        {"K", P.K},
        {"kappa", P.kappa},
        {"convention", P.convention},
        {"freqs", P.freqs},
        {"amps", amps},
        {"sample_count", P.sample_count}}},
      {"box", {{"n_time", c.box.n_time}, {"n_space", c.box.n_space}}},
      {"weights", {{"rho_time", c.weights.rho_time}, {"rho_space", c.weights.rho_space}}},
      {"tolerances",
       {{"newton_tol", c.tolerances.newton_tol},
        {"max_iterations", c.tolerances.max_iterations},
        {"excision_c", c.tolerances.excision_c},
        {"enforce_excision", c.tolerances.enforce_excision},
        {"gamma", c.tolerances.gamma},
        {"tau", c.tolerances.tau},
        {"n_max", c.tolerances.n_max}}},
      {"evolve",
       {{"horizon", c.evolve.horizon},
        {"horizon_exponent", c.evolve.horizon_exponent},
        {"drift_multiple", c.evolve.drift_multiple},
        {"dt", c.evolve.dt},
        {"n_space", c.evolve.n_space},
        {"t_min", c.evolve.t_min},
        {"samples_per_decade", c.evolve.samples_per_decade},
        {"drift_tol", c.evolve.drift_tol},
        {"distance_tol", c.evolve.distance_tol},
        {"integrity_horizon", c.evolve.integrity_horizon},
        {"checkpoint", c.evolve.checkpoint}}},
      {"surface",
       {{"metric", c.surface.metric},
        {"R", c.surface.R},
        {"g0", c.surface.g0},
        {"profile", c.surface.profile},
        {"k_list", c.surface.k_list},
        {"grid_n", c.surface.grid_n}}},
      {"sweep", {{"vary", c.sweep.vary}, {"values", c.sweep.values}, {"mode", c.sweep.mode}}},
      {"output", {{"directory", c.output.directory}, {"format", c.output.format}}},
  };
}

std::string to_config_text(const RunConfig& c) {
  const nlohmann::json j = c;
  std::ostringstream os;
  for (const auto& [k, v] : j.items()) {
    if (!v.is_object()) os << k << " = " << v.dump() << '\n';
  }
  for (const auto& [sec, obj] : j.items()) {
    if (!obj.is_object()) continue;
    os << "\n[" << sec << "]\n";
    for (const auto& [k, v] : obj.items()) {
      if (sec == "problem" && k == "b") continue;
      if (sec == "problem" && k == "amps" && v.empty()) continue;
      os << k << " = " << v.dump() << '\n';
    }
  }
  return os.str();
}

}  // namespace qpnls
