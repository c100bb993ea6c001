#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "classb/integrator.hpp"
#include "classb/model.hpp"

namespace classb {

enum class PumpSpacing { Linear, Log };

/// Either an explicit list of pumps or an evenly spaced range.
struct PumpGrid {
  std::vector<double> explicit_values;
  double min = 0.0;
  double max = 0.0;
  std::size_t count = 0;
  PumpSpacing spacing = PumpSpacing::Log;

  std::vector<double> values() const;
};

enum class ModelSelection { ClassB, ClassALike, Both };

ModelSelection parse_model_selection(std::string_view text);
std::vector<ModelKind> model_kinds(ModelSelection selection);

/// Initial Fock cutoff per pump: `below` up to and including switch_pump,
/// `above` past it.
struct CutoffRule {
  std::size_t below = 50;
  std::size_t above = 50;
  double switch_pump = std::numeric_limits<double>::infinity();

  std::size_t for_pump(double lambda_a) const { return lambda_a > switch_pump ? above : below; }
};

struct SweepSpec {
  std::string preset;
  ModelParams base;
  PumpGrid grid;
  ModelSelection models = ModelSelection::Both;
  IntegrationOptions integration;
  CutoffRule cutoff_rule;
  std::vector<double> snapshots;  ///< pumps at which P_n files are written

  std::vector<double> tau_pumps;  ///< g2tau pumps when the grid was not overridden
  bool pumps_overridden = false;
  double tau_max = 5.0;
  double tau_step = 0.005;

  bool numeric_threshold = false;
  double bracket_lower = 0.0;  ///< 0: 0.5 lambda_th0
  double bracket_upper = 0.0;  ///< 0: 4 lambda_th0
  double bisect_tol = 1.0e-3;

  std::filesystem::path out_dir = "out";
  std::size_t workers = 0;  ///< 0: hardware concurrency

  /// Throws ConfigError.
  void validate() const;

  std::vector<double> pumps() const { return grid.values(); }
  std::vector<double> correlation_pumps() const;
  std::vector<double> tau_grid() const;

  /// Integration options for one pump, with the cutoff rule applied.
  IntegrationOptions options_for(double lambda_a, ModelKind kind) const;
};

struct Preset {
  std::string name;
  std::string description;
  SweepSpec spec;
};

const std::vector<Preset>& presets();

/// Throws ConfigError for unknown names.
SweepSpec preset_spec(std::string_view name);

/// Applies one key=value setting. Keys match the config file format; unknown
/// keys and malformed values throw ConfigError.
void apply_setting(SweepSpec& spec, const std::string& key, const std::string& value);

/// Flat key=value file: one setting per line, '#' starts a comment. A
/// `preset` line is applied before everything else regardless of position.
std::vector<std::pair<std::string, std::string>> read_config_file(const std::filesystem::path& path);

void apply_settings(SweepSpec& spec, const std::vector<std::pair<std::string, std::string>>& settings);

/// Canonical, ordered key=value echo of the resolved spec.
std::vector<std::pair<std::string, std::string>> describe(const SweepSpec& spec);

/// Shortest decimal that round-trips to the same double.
std::string format_double(double value);

// --- runs ---

struct PointResult {
  double lambda_a = 0.0;
  ModelKind model = ModelKind::ClassB;
  bool ok = false;  ///< false when the point threw; `error` says why
  std::string error;
  bool converged = false;
  double mean_n = 0.0;
  std::optional<double> g2;
  double p0 = 0.0;
  double p1 = 0.0;
  double beta = 0.0;
  double upper_occupation = 0.0;
  double residual = 0.0;
  double trace_drift = 0.0;
  double tail_mass = 0.0;
  double detailed_balance = 0.0;
  std::size_t cutoff = 0;
  double elapsed = 0.0;
};

struct OutputFile {
  std::string path;  ///< relative to the output directory
  std::string sha256;
  std::uintmax_t bytes = 0;
};

struct RunOutcome {
  std::vector<PointResult> points;
  std::vector<OutputFile> files;
  std::vector<std::string> notes;
};

/// Calls fn(i) for i in [0, count) on `workers` threads. The first exception
/// (by index) is rethrown after all workers finish.
void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& fn);

/// Steady state for every (pump, model) on the grid; writes sweep.csv,
/// requested P_n snapshots and manifest.json. Rows follow grid order.
RunOutcome run_sweep(const SweepSpec& spec);

/// g2(tau) traces per (pump, model), lag reports for class-B traces.
RunOutcome run_correlation(const SweepSpec& spec);

/// Threshold report for spec.base (threshold.txt), plus bisection when
/// spec.numeric_threshold is set.
RunOutcome run_threshold(const SweepSpec& spec);

/// Single pump; writes steady_<model>_lambda_<x>.csv with n, p, rho_a.
RunOutcome run_steady(const SweepSpec& spec);

std::string sha256_hex(const std::filesystem::path& path);

}  // namespace classb
