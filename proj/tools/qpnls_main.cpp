#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qpnls/config.hpp"
#include "qpnls/driver.hpp"
#include "qpnls/error.hpp"

namespace {

struct Flags {
  std::string config;
  std::string preset;
  std::optional<std::string> out;
  std::optional<int> threads;
  std::optional<unsigned long long> rng_seed;
  std::optional<std::string> format;
  std::optional<double> delta;
  std::optional<int> K;
  std::vector<std::string> sets;
  std::optional<std::string> vary;
  std::optional<std::string> values;
  std::optional<std::string> sweep_mode;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quasi-periodic NLS solutions on the torus: resonance certificates, Newton branches, "
               "Cauchy drift checks and torus-of-revolution eigenfunctions."};
  app.set_version_flag("--version", std::string("qpnls ") + "0.1.0");
  Flags f;
  app.add_option("--config", f.config, "Config file (key = value lines with [section] headers)");
  app.add_option("--preset", f.preset, "Preset: single-mode, cubic-d1-b2, torus-revolution");
  app.add_option("--out", f.out, "Output directory");
  app.add_option("--threads", f.threads, "Worker threads for sweeps and samples")->check(CLI::PositiveNumber);
  app.add_option("--rng-seed", f.rng_seed, "Seed for amplitude sampling");
  app.add_option("--format", f.format, "Extra artifact format")->check(CLI::IsMember({"json", "csv"}));
  app.add_option("--delta", f.delta, "Shorthand for --set problem.delta=VALUE");
  app.add_option("--K", f.K, "Shorthand for --set problem.K=VALUE");
  app.add_option("--set", f.sets, "Override any key, e.g. --set problem.p=2 (repeatable)");
  app.require_subcommand(1, 1);

  const std::vector<std::pair<std::string, std::string>> subs = {
      {"resonance", "Resonance graph and component projections of the seed"},
      {"genericity", "Genericity certificate with box-doubling saturation"},
      {"solve-qp", "Newton branch with excision and Diophantine certificates"},
      {"semiclassical", "Branch in the scaled-frequency regime for one K"},
      {"evolve", "Split-step evolution with drift and integrator checks"},
      {"surface", "Ground states and sup-norm scaling on a torus of revolution"},
      {"sweep", "Sweep over delta or K with fitted log-log slopes"},
  };
  for (const auto& [name, help] : subs) {
    auto* sc = app.add_subcommand(name, help);
    sc->fallthrough();
    if (name == "sweep") {
      sc->add_option("--vary", f.vary, "Parameter to vary")->check(CLI::IsMember({"delta", "K"}));
      sc->add_option("--values", f.values, "Comma-separated values");
      sc->add_option("--mode", f.sweep_mode, "Pipeline per value")->check(CLI::IsMember({"solve-qp", "semiclassical"}));
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  qpnls::RunConfig cfg;
  try {
    qpnls::ConfigTable table;
    if (!f.config.empty()) table = qpnls::parse_config_file(f.config);
    table["mode"] = app.get_subcommands().front()->get_name();
    if (!f.preset.empty()) table["preset"] = f.preset;
    for (const auto& s : f.sets) qpnls::apply_override(table, s);
    if (f.out) table["output.directory"] = *f.out;
    if (f.threads) table["threads"] = *f.threads;
    if (f.rng_seed) table["rng_seed"] = *f.rng_seed;
    if (f.format) table["output.format"] = *f.format;
    if (f.delta) table["problem.delta"] = *f.delta;
    if (f.K) table["problem.K"] = *f.K;
    if (f.vary) table["sweep.vary"] = *f.vary;
    if (f.values) table["sweep.values"] = *f.values;
    if (f.sweep_mode) table["sweep.mode"] = *f.sweep_mode;
    cfg = qpnls::resolve_config(table);
  } catch (const std::exception& e) {
    std::cerr << "qpnls: " << e.what() << "\n";
    return qpnls::exit_code_for(e);
  }
  return qpnls::run(cfg, std::cerr).exit_code;
}
