// classb: pump sweeps, g2(tau) traces, thresholds and single steady states
// for the class-B laser density-matrix model.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "classb/errors.hpp"
#include "classb/sweep.hpp"

namespace {

struct Overrides {
  std::optional<std::string> config, out, model, preset;
  std::optional<std::size_t> workers, cutoff;
  std::optional<double> kappa, gamma_h, big_gamma, g, lambda_a, step, tmax;
  std::optional<std::int64_t> n_atoms;
  std::vector<std::string> settings;  // repeated --set key=value
};

void add_common_flags(CLI::App& app, Overrides& o) {
  app.add_option("--config", o.config, "key=value config file");
  app.add_option("--out", o.out, "output directory");
  app.add_option("--workers", o.workers, "worker threads (default: all cores)");
  app.add_option("--model", o.model, "classb, classa or both")->check(CLI::IsMember({"classb", "classa", "both"}));
  app.add_option("--preset", o.preset, "named figure preset (see `presets`)");
  app.add_option("--kappa", o.kappa, "cavity loss rate");
  app.add_option("--gamma-h", o.gamma_h, "pure dephasing rate");
  app.add_option("--big-gamma", o.big_gamma, "spontaneous a->b rate");
  app.add_option("--g", o.g, "light-matter coupling");
  app.add_option("--n-atoms", o.n_atoms, "number of atoms");
  app.add_option("--lambda-a", o.lambda_a, "single pump rate (replaces the pump grid)");
  app.add_option("--cutoff", o.cutoff, "initial Fock cutoff");
  app.add_option("--step", o.step, "RK4 time step");
  app.add_option("--tmax", o.tmax, "integration horizon");
  app.add_option("--set", o.settings, "extra key=value setting (repeatable)");
}

classb::SweepSpec resolve(const Overrides& o) {
  using classb::format_double;
  classb::SweepSpec spec;
  if (o.preset) spec = classb::preset_spec(*o.preset);
  if (o.config) {
    auto settings = classb::read_config_file(*o.config);
    if (o.preset) std::erase_if(settings, [](const auto& kv) { return kv.first == "preset"; });
    classb::apply_settings(spec, settings);
  }
  std::vector<std::pair<std::string, std::string>> flags;
  if (o.kappa) flags.emplace_back("kappa", format_double(*o.kappa));
  if (o.gamma_h) flags.emplace_back("gamma_h", format_double(*o.gamma_h));
  if (o.big_gamma) flags.emplace_back("big_gamma", format_double(*o.big_gamma));
  if (o.g) flags.emplace_back("g", format_double(*o.g));
  if (o.n_atoms) flags.emplace_back("n_atoms", std::to_string(*o.n_atoms));
  if (o.lambda_a) flags.emplace_back("lambda_a", format_double(*o.lambda_a));
  if (o.cutoff) flags.emplace_back("cutoff", std::to_string(*o.cutoff));
  if (o.step) flags.emplace_back("step", format_double(*o.step));
  if (o.tmax) flags.emplace_back("tmax", format_double(*o.tmax));
  if (o.model) flags.emplace_back("model", *o.model);
  if (o.out) flags.emplace_back("out", *o.out);
  if (o.workers) flags.emplace_back("workers", std::to_string(*o.workers));
  for (const auto& kv : o.settings) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw classb::ConfigError("--set expects key=value, got '" + kv + "'");
    flags.emplace_back(kv.substr(0, eq), kv.substr(eq + 1));
  }
  classb::apply_settings(spec, flags);
  spec.validate();
  return spec;
}

void list_presets() {
  for (const auto& preset : classb::presets()) {
    std::cout << preset.name << "\n  " << preset.description << "\n";
    for (const auto& [key, value] : classb::describe(preset.spec)) {
      if (key == "preset") continue;
      std::cout << "    " << key << "=" << value << "\n";
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Class-B laser density-matrix simulator"};
  app.require_subcommand(1);
  app.fallthrough();

  Overrides overrides;
  add_common_flags(app, overrides);
  auto* sweep = app.add_subcommand("sweep", "steady states over the pump grid");
  auto* g2tau = app.add_subcommand("g2tau", "g2(tau) traces and lag reports");
  auto* threshold = app.add_subcommand("threshold", "analytic (and optional bisection) thresholds");
  bool numeric = false;
  threshold->add_flag("--numeric", numeric, "also bisect the steady-state P0 = P1 crossing");
  auto* steady = app.add_subcommand("steady", "single-pump steady state with P_n dump");
  auto* list = app.add_subcommand("presets", "list built-in figure presets");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (list->parsed()) {
      list_presets();
      return 0;
    }
    classb::SweepSpec spec = resolve(overrides);
    if (sweep->parsed()) {
      classb::run_sweep(spec);
    } else if (g2tau->parsed()) {
      classb::run_correlation(spec);
    } else if (threshold->parsed()) {
      if (numeric) spec.numeric_threshold = true;
      classb::run_threshold(spec);
    } else if (steady->parsed()) {
      classb::run_steady(spec);
    }
    std::clog << "classb: wrote " << (spec.out_dir / "manifest.json").string() << "\n";
  } catch (const classb::ConfigError& e) {
    std::cerr << "classb: configuration error: " << e.what() << "\n";
    return 1;
  } catch (const classb::NumericalError& e) {
    std::cerr << "classb: numerical failure: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "classb: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
