#include "classb/sweep.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <ctime>
#include <exception>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "classb/analytics.hpp"
#include "classb/correlations.hpp"
#include "classb/errors.hpp"
#include "classb/observables.hpp"

#ifndef CLASSB_VERSION
#define CLASSB_VERSION "0.0.0"
#endif

namespace classb {

namespace fs = std::filesystem;

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

// --- parsing helpers ---

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* what) {
  throw ConfigError("setting '" + key + "': " + what + " (got '" + value + "')");
}

double parse_double(const std::string& key, const std::string& value, bool allow_inf = false) {
  const std::string text = trim(value);
  double out = 0.0;
  const char* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, out);
  if (text.empty() || res.ec != std::errc() || res.ptr != end) bad_value(key, value, "expected a number");
  if (std::isnan(out) || (std::isinf(out) && !allow_inf)) bad_value(key, value, "expected a finite number");
  return out;
}

template <class Int>
Int parse_integer(const std::string& key, const std::string& value) {
  const std::string text = trim(value);
  Int out = 0;
  const char* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, out);
  if (text.empty() || res.ec != std::errc() || res.ptr != end) bad_value(key, value, "expected an integer");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  const std::string text = trim(value);
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  bad_value(key, value, "expected true or false");
}

std::vector<double> parse_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  std::stringstream in(value);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (trim(item).empty()) continue;
    out.push_back(parse_double(key, item));
  }
  return out;
}

std::string join(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += format_double(values[i]);
  }
  return out;
}

bool same_pump(double a, double b) { return std::abs(a - b) <= 1.0e-9 * std::max(std::abs(a), std::abs(b)); }

}  // namespace

// --- spec ---

std::vector<double> PumpGrid::values() const {
  if (!explicit_values.empty()) return explicit_values;
  std::vector<double> out;
  if (count == 0) return out;
  if (count == 1) return {min};
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(count - 1);
    out.push_back(spacing == PumpSpacing::Log ? min * std::pow(max / min, t) : min + (max - min) * t);
  }
  out.back() = max;
  return out;
}

ModelSelection parse_model_selection(std::string_view text) {
  if (text == "both") return ModelSelection::Both;
  return parse_model_kind(text) == ModelKind::ClassB ? ModelSelection::ClassB : ModelSelection::ClassALike;
}

std::vector<ModelKind> model_kinds(ModelSelection selection) {
  switch (selection) {
    case ModelSelection::ClassB: return {ModelKind::ClassB};
    case ModelSelection::ClassALike: return {ModelKind::ClassALike};
    case ModelSelection::Both: break;
  }
  return {ModelKind::ClassB, ModelKind::ClassALike};
}

namespace {

std::string_view to_string(ModelSelection selection) {
  switch (selection) {
    case ModelSelection::ClassB: return "classb";
    case ModelSelection::ClassALike: return "classa";
    case ModelSelection::Both: break;
  }
  return "both";
}

}  // namespace

void SweepSpec::validate() const {
  base.validate();
  integration.validate();
  if (grid.explicit_values.empty()) {
    if (grid.count == 0) throw ConfigError("pump grid is empty");
    if (grid.count > 1 && !(grid.max > grid.min)) throw ConfigError("pump_max must exceed pump_min");
    if (grid.spacing == PumpSpacing::Log && !(grid.min > 0.0)) {
      throw ConfigError("log-spaced pump grid needs pump_min > 0");
    }
  }
  for (double pump : pumps()) {
    if (!(pump >= 0.0) || !std::isfinite(pump)) throw ConfigError("pumps must be finite and >= 0");
  }
  for (double pump : tau_pumps) {
    if (!(pump >= 0.0) || !std::isfinite(pump)) throw ConfigError("tau_pumps must be finite and >= 0");
  }
  if (cutoff_rule.below < 1 || cutoff_rule.above < 1) throw ConfigError("cutoff must be >= 1");
  const auto grid_values = pumps();
  for (double snap : snapshots) {
    const bool on_grid = std::any_of(grid_values.begin(), grid_values.end(),
                                     [&](double v) { return same_pump(v, snap); });
    if (!on_grid) throw ConfigError("snapshot pump " + format_double(snap) + " is not on the pump grid");
  }
  if (!(tau_max >= 0.0) || !std::isfinite(tau_max)) throw ConfigError("tau_max must be >= 0");
  if (!(tau_step > 0.0) || !std::isfinite(tau_step)) throw ConfigError("tau_step must be > 0");
  if (!(bisect_tol > 0.0)) throw ConfigError("bisect_tol must be > 0");
  if (bracket_lower < 0.0 || bracket_upper < 0.0) throw ConfigError("bracket must be >= 0");
}

std::vector<double> SweepSpec::correlation_pumps() const {
  if (pumps_overridden || tau_pumps.empty()) return pumps();
  return tau_pumps;
}

std::vector<double> SweepSpec::tau_grid() const {
  const auto count = static_cast<std::size_t>(std::llround(tau_max / tau_step));
  std::vector<double> out;
  out.reserve(count + 1);
  for (std::size_t i = 0; i <= count; ++i) out.push_back(static_cast<double>(i) * tau_step);
  return out;
}

IntegrationOptions SweepSpec::options_for(double lambda_a, ModelKind kind) const {
  IntegrationOptions opts = integration;
  opts.model = kind;
  opts.cutoff.initial = cutoff_rule.for_pump(lambda_a);
  opts.cutoff.hard_limit = std::max(opts.cutoff.hard_limit, opts.cutoff.initial);
  return opts;
}

// --- presets ---

namespace {

SweepSpec make_preset(ModelParams params, PumpGrid grid, double step, CutoffRule rule) {
  SweepSpec spec;
  spec.base = params;
  spec.grid = std::move(grid);
  spec.integration.step = step;
  spec.integration.t_max = 100.0;
  spec.cutoff_rule = rule;
  spec.integration.cutoff.initial = rule.below;
  return spec;
}

std::vector<Preset> build_presets() {
  std::vector<Preset> out;
  {
    ModelParams p{100.0, 1.0e3, 1.0, 10.0, 1, 0.0};
    PumpGrid grid{{}, 0.1, 10.0, 13, PumpSpacing::Log};
    SweepSpec spec = make_preset(p, grid, 1.0e-5, {50, 50});
    spec.preset = "fig2-single";
    out.push_back({"fig2-single", "single atom cavity: kappa=100 gamma_h=1e3 g=10 N=1", spec});
  }
  {
    ModelParams p{100.0, 1.0e4, 1.0, 1.0, 1000000, 0.0};
    const double lambda0 = *class_a_like_threshold(p);
    PumpGrid grid{{}, 0.5 * lambda0, 2.0 * lambda0, 7, PumpSpacing::Log};
    // The caption step (2e-6) is unstable once the cutoff grows past ~6000
    // above threshold; 8e-7 with fine-grained growth keeps RK4 stable.
    SweepSpec spec = make_preset(p, grid, 8.0e-7, {50, 2200, lambda0});
    spec.integration.initial = InitialCondition::ClassALikeSeed;
    spec.integration.cutoff.growth_factor = 1.1;
    spec.integration.cutoff.hard_limit = 20000;
    spec.preset = "fig2-thermo";
    out.push_back({"fig2-thermo", "towards the thermodynamic limit: kappa=100 gamma_h=1e4 g=1 N=1e6", spec});
  }
  {
    ModelParams p{10.0, 1.0e3, 1.0, 50.0, 10, 0.0};
    const double lambda0 = *class_a_like_threshold(p);
    PumpGrid grid{{}, 0.1, 10.0, 21, PumpSpacing::Log};
    SweepSpec spec = make_preset(p, grid, 1.0e-5, {50, 100, 0.75 * lambda0});
    spec.tau_pumps = {0.297, 3.0};
    spec.tau_max = 2.0;
    spec.tau_step = 0.002;
    spec.preset = "fig3-nano";
    out.push_back({"fig3-nano", "nanoscopic regime: kappa=10 gamma_h=1e3 g=50 N=10", spec});
  }
  {
    ModelParams p{100.0, 1.0e4, 1.0, 10.0, 100000, 0.0};
    const double lambda0 = *class_a_like_threshold(p);
    PumpGrid grid{{}, 0.01, 0.3, 30, PumpSpacing::Log};
    SweepSpec spec = make_preset(p, grid, 1.0e-5, {50, 300, 0.75 * lambda0});
    // From vacuum the switch-on transient above ~0.25 overshoots into a
    // cutoff near 1000 where h=1e-5 is no longer stable.
    spec.integration.initial = InitialCondition::ClassALikeSeed;
    spec.tau_pumps = {0.039, 0.15};
    spec.tau_max = 2.0;
    spec.tau_step = 0.002;
    spec.preset = "fig4-meso";
    out.push_back({"fig4-meso", "mesoscopic regime: kappa=100 gamma_h=1e4 g=10 N=1e5", spec});
  }
  return out;
}

}  // namespace

const std::vector<Preset>& presets() {
  static const std::vector<Preset> all = build_presets();
  return all;
}

SweepSpec preset_spec(std::string_view name) {
  for (const auto& preset : presets()) {
    if (preset.name == name) return preset.spec;
  }
  throw ConfigError("unknown preset '" + std::string(name) + "' (see `classb presets`)");
}

// --- settings ---

void apply_setting(SweepSpec& spec, const std::string& key, const std::string& raw) {
  const std::string value = trim(raw);
  auto set_range = [&] {
    spec.grid.explicit_values.clear();
    spec.pumps_overridden = true;
  };

  if (key == "preset") {
    spec = preset_spec(value);
  } else if (key == "kappa") {
    spec.base.kappa = parse_double(key, value);
  } else if (key == "gamma_h") {
    spec.base.gamma_h = parse_double(key, value);
  } else if (key == "big_gamma") {
    spec.base.big_gamma = parse_double(key, value);
  } else if (key == "g") {
    spec.base.g = parse_double(key, value);
  } else if (key == "n_atoms") {
    spec.base.n_atoms = parse_integer<std::int64_t>(key, value);
  } else if (key == "lambda_a") {
    spec.base.lambda_a = parse_double(key, value);
    spec.grid.explicit_values = {spec.base.lambda_a};
    spec.pumps_overridden = true;
  } else if (key == "pumps") {
    spec.grid.explicit_values = parse_list(key, value);
    if (spec.grid.explicit_values.empty()) bad_value(key, value, "expected a non-empty list");
    spec.pumps_overridden = true;
  } else if (key == "pump_min") {
    set_range();
    spec.grid.min = parse_double(key, value);
  } else if (key == "pump_max") {
    set_range();
    spec.grid.max = parse_double(key, value);
  } else if (key == "pump_count") {
    set_range();
    spec.grid.count = parse_integer<std::size_t>(key, value);
  } else if (key == "pump_spacing") {
    set_range();
    if (value == "log") {
      spec.grid.spacing = PumpSpacing::Log;
    } else if (value == "linear") {
      spec.grid.spacing = PumpSpacing::Linear;
    } else {
      bad_value(key, value, "expected log or linear");
    }
  } else if (key == "model") {
    spec.models = parse_model_selection(value);
  } else if (key == "cutoff") {
    const auto n = parse_integer<std::size_t>(key, value);
    spec.cutoff_rule = {n, n};
    spec.integration.cutoff.initial = n;
  } else if (key == "cutoff_below") {
    spec.cutoff_rule.below = parse_integer<std::size_t>(key, value);
  } else if (key == "cutoff_above") {
    spec.cutoff_rule.above = parse_integer<std::size_t>(key, value);
  } else if (key == "cutoff_switch") {
    spec.cutoff_rule.switch_pump = parse_double(key, value, true);
  } else if (key == "cutoff_mode") {
    if (value == "auto") {
      spec.integration.cutoff.mode = CutoffMode::AutoGrow;
    } else if (value == "fixed") {
      spec.integration.cutoff.mode = CutoffMode::Fixed;
    } else {
      bad_value(key, value, "expected auto or fixed");
    }
  } else if (key == "hard_limit") {
    spec.integration.cutoff.hard_limit = parse_integer<std::size_t>(key, value);
  } else if (key == "tail_threshold") {
    spec.integration.cutoff.tail_threshold = parse_double(key, value);
  } else if (key == "growth_factor") {
    spec.integration.cutoff.growth_factor = parse_double(key, value);
  } else if (key == "step") {
    spec.integration.step = parse_double(key, value);
  } else if (key == "tmax") {
    spec.integration.t_max = parse_double(key, value);
  } else if (key == "tol") {
    spec.integration.tol_ss = parse_double(key, value);
  } else if (key == "trace_tol") {
    spec.integration.trace_tol = parse_double(key, value);
  } else if (key == "initial") {
    if (value == "vacuum") {
      spec.integration.initial = InitialCondition::Vacuum;
    } else if (value == "seed") {
      spec.integration.initial = InitialCondition::ClassALikeSeed;
    } else {
      bad_value(key, value, "expected vacuum or seed");
    }
  } else if (key == "check_every") {
    spec.integration.check_every = parse_integer<std::size_t>(key, value);
  } else if (key == "snapshots") {
    spec.snapshots = parse_list(key, value);
  } else if (key == "tau_pumps") {
    spec.tau_pumps = parse_list(key, value);
  } else if (key == "tau_max") {
    spec.tau_max = parse_double(key, value);
  } else if (key == "tau_step") {
    spec.tau_step = parse_double(key, value);
  } else if (key == "numeric_threshold") {
    spec.numeric_threshold = parse_bool(key, value);
  } else if (key == "bracket") {
    const auto pair = parse_list(key, value);
    if (pair.size() != 2) bad_value(key, value, "expected lower,upper");
    spec.bracket_lower = pair[0];
    spec.bracket_upper = pair[1];
  } else if (key == "bisect_tol") {
    spec.bisect_tol = parse_double(key, value);
  } else if (key == "out") {
    spec.out_dir = value;
  } else if (key == "workers") {
    spec.workers = parse_integer<std::size_t>(key, value);
  } else {
    throw ConfigError("unknown setting '" + key + "'");
  }
}

std::vector<std::pair<std::string, std::string>> read_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const std::string text = trim(line);
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(number) + ": expected key=value");
    }
    std::string key = trim(std::string_view(text).substr(0, eq));
    if (key.empty()) throw ConfigError(path.string() + ":" + std::to_string(number) + ": empty key");
    out.emplace_back(std::move(key), trim(std::string_view(text).substr(eq + 1)));
  }
  std::stable_partition(out.begin(), out.end(), [](const auto& kv) { return kv.first == "preset"; });
  return out;
}

void apply_settings(SweepSpec& spec, const std::vector<std::pair<std::string, std::string>>& settings) {
  for (const auto& [key, value] : settings) apply_setting(spec, key, value);
}

std::vector<std::pair<std::string, std::string>> describe(const SweepSpec& spec) {
  const auto& opts = spec.integration;
  std::vector<std::pair<std::string, std::string>> out = {
      {"preset", spec.preset.empty() ? "none" : spec.preset},
      {"kappa", format_double(spec.base.kappa)},
      {"gamma_h", format_double(spec.base.gamma_h)},
      {"big_gamma", format_double(spec.base.big_gamma)},
      {"g", format_double(spec.base.g)},
      {"n_atoms", std::to_string(spec.base.n_atoms)},
      {"pumps", join(spec.pumps())},
      {"model", std::string(to_string(spec.models))},
      {"cutoff_below", std::to_string(spec.cutoff_rule.below)},
      {"cutoff_above", std::to_string(spec.cutoff_rule.above)},
      {"cutoff_switch", format_double(spec.cutoff_rule.switch_pump)},
      {"cutoff_mode", opts.cutoff.mode == CutoffMode::AutoGrow ? "auto" : "fixed"},
      {"hard_limit", std::to_string(opts.cutoff.hard_limit)},
      {"tail_threshold", format_double(opts.cutoff.tail_threshold)},
      {"growth_factor", format_double(opts.cutoff.growth_factor)},
      {"step", format_double(opts.step)},
      {"tmax", format_double(opts.t_max)},
      {"tol", format_double(opts.tol_ss)},
      {"trace_tol", format_double(opts.trace_tol)},
      {"initial", opts.initial == InitialCondition::Vacuum ? "vacuum" : "seed"},
      {"check_every", std::to_string(opts.check_every)},
      {"snapshots", join(spec.snapshots)},
      {"tau_pumps", join(spec.correlation_pumps())},
      {"tau_max", format_double(spec.tau_max)},
      {"tau_step", format_double(spec.tau_step)},
      {"numeric_threshold", spec.numeric_threshold ? "true" : "false"},
      {"bracket", format_double(spec.bracket_lower) + "," + format_double(spec.bracket_upper)},
      {"bisect_tol", format_double(spec.bisect_tol)},
  };
  return out;
}

// --- execution ---

void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, std::max<std::size_t>(count, 1));
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::string sha256_hex(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string() + " for checksum");
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256: digest initialisation failed");
  }
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &len);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  }
  return hex.str();
}

namespace {

void log_line(const std::string& msg) {
  static std::mutex mu;
  std::lock_guard lock(mu);
  std::clog << "classb: " << msg << '\n';
}

void prepare_out_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw ConfigError("output directory " + dir.string() + " is not writable: " + ec.message());
  }
}

std::string metadata_line(const std::string& command, const SweepSpec& spec,
                          const std::vector<std::pair<std::string, std::string>>& extra = {}) {
  std::string line = "# classb " + command;
  for (const auto& [k, v] : describe(spec)) line += " " + k + "=" + v;
  for (const auto& [k, v] : extra) line += " " + k + "=" + v;
  return line;
}

class Writer {
 public:
  Writer(const fs::path& dir, RunOutcome& outcome) : dir_(dir), outcome_(outcome) {}

  void write(const std::string& name, const std::string& content) {
    const fs::path path = dir_ / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
    out.close();
    if (!out) throw ConfigError("cannot write " + path.string());
    outcome_.files.push_back({name, sha256_hex(path), fs::file_size(path)});
  }

 private:
  fs::path dir_;
  RunOutcome& outcome_;
};

std::string pump_tag(ModelKind kind, double lambda_a) {
  return std::string(to_string(kind)) + "_lambda_" + format_double(lambda_a);
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

std::string optional_cell(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

void write_manifest(const std::string& command, const SweepSpec& spec, RunOutcome& outcome) {
  using nlohmann::ordered_json;
  ordered_json manifest;
  manifest["tool"] = "classb";
  manifest["version"] = CLASSB_VERSION;
  manifest["command"] = command;
  manifest["created_utc"] = utc_timestamp();
  manifest["workers"] = spec.workers;
  ordered_json config = ordered_json::object();
  for (const auto& [k, v] : describe(spec)) config[k] = v;
  manifest["config"] = config;

  ordered_json points = ordered_json::array();
  for (const auto& p : outcome.points) {
    ordered_json row;
    row["lambda_a"] = p.lambda_a;
    row["model"] = std::string(to_string(p.model));
    row["ok"] = p.ok;
    if (!p.ok) {
      row["error"] = p.error;
    } else {
      row["converged"] = p.converged;
      row["residual"] = p.residual;
      row["trace_drift"] = p.trace_drift;
      row["tail_mass"] = p.tail_mass;
      row["detailed_balance_residual"] = p.detailed_balance;
      row["cutoff"] = p.cutoff;
      row["elapsed"] = p.elapsed;
    }
    points.push_back(row);
  }
  manifest["points"] = points;
  manifest["notes"] = outcome.notes;

  ordered_json files = ordered_json::array();
  for (const auto& f : outcome.files) files.push_back({{"path", f.path}, {"sha256", f.sha256}, {"bytes", f.bytes}});
  manifest["files"] = files;

  std::ofstream out(spec.out_dir / "manifest.json", std::ios::trunc);
  out << manifest.dump(2) << '\n';
  if (!out) throw ConfigError("cannot write manifest in " + spec.out_dir.string());
}

struct Job {
  double lambda_a;
  ModelKind kind;
};

std::vector<Job> make_jobs(const std::vector<double>& pumps, ModelSelection models) {
  std::vector<Job> jobs;
  for (double pump : pumps) {
    for (ModelKind kind : model_kinds(models)) jobs.push_back({pump, kind});
  }
  return jobs;
}

PointResult summarize(const Job& job, const ModelParams& params, const SteadyStateResult& ss) {
  PointResult r;
  r.lambda_a = job.lambda_a;
  r.model = job.kind;
  r.ok = true;
  const auto obs = compute_observables(ss.state, params);
  r.converged = ss.converged;
  r.mean_n = obs.mean_n;
  r.g2 = obs.g2_zero;
  r.p0 = obs.p0;
  r.p1 = obs.p1;
  r.beta = derived_params(params).beta;
  r.upper_occupation = obs.upper_occupation;
  r.residual = ss.max_residual;
  r.trace_drift = ss.trace_drift;
  r.tail_mass = ss.tail_mass;
  r.detailed_balance = ss.detailed_balance_residual;
  r.cutoff = ss.cutoff;
  r.elapsed = ss.elapsed;
  return r;
}

std::string state_csv(const std::string& header, const LaserState& state) {
  std::string out = header + "\nn,p,rho_a\n";
  for (std::size_t n = 0; n < state.size(); ++n) {
    out += std::to_string(n) + "," + format_double(state.p()[n]) + "," + format_double(state.rho_a()[n]) + "\n";
  }
  return out;
}

}  // namespace

RunOutcome run_sweep(const SweepSpec& spec) {
  spec.validate();
  prepare_out_dir(spec.out_dir);
  const auto jobs = make_jobs(spec.pumps(), spec.models);

  RunOutcome outcome;
  outcome.points.resize(jobs.size());
  std::vector<std::optional<LaserState>> snapshots(jobs.size());

  parallel_for(jobs.size(), spec.workers, [&](std::size_t i) {
    const Job& job = jobs[i];
    ModelParams params = spec.base;
    params.lambda_a = job.lambda_a;
    try {
      const auto ss = steady_state(params, spec.options_for(job.lambda_a, job.kind));
      outcome.points[i] = summarize(job, params, ss);
      const bool snap = std::any_of(spec.snapshots.begin(), spec.snapshots.end(),
                                    [&](double s) { return same_pump(s, job.lambda_a); });
      if (snap) snapshots[i] = ss.state;
      if (!ss.converged) {
        log_line("lambda_a=" + format_double(job.lambda_a) + " " + std::string(to_string(job.kind)) +
                 ": not converged (residual " + format_double(ss.max_residual) + ")");
      }
    } catch (const NumericalError& e) {
      PointResult& r = outcome.points[i];
      r.lambda_a = job.lambda_a;
      r.model = job.kind;
      r.error = e.what();
      log_line("lambda_a=" + format_double(job.lambda_a) + " " + std::string(to_string(job.kind)) +
               ": " + e.what());
    }
  });

  Writer writer(spec.out_dir, outcome);
  std::string csv = metadata_line("sweep", spec) + "\n";
  csv += "lambda_a,model,mean_n,g2_zero,p0,p1,beta,upper_occupation,converged,residual\n";
  for (const auto& r : outcome.points) {
    csv += format_double(r.lambda_a) + "," + std::string(to_string(r.model)) + ",";
    if (r.ok) {
      csv += format_double(r.mean_n) + "," + optional_cell(r.g2) + "," + format_double(r.p0) + "," +
             format_double(r.p1) + "," + format_double(r.beta) + "," + format_double(r.upper_occupation) +
             "," + (r.converged ? "true" : "false") + "," + format_double(r.residual) + "\n";
    } else {
      csv += ",,,,,,false,\n";
    }
  }
  writer.write("sweep.csv", csv);

  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (!snapshots[i]) continue;
    const std::string header = metadata_line("snapshot", spec, {{"lambda_a", format_double(jobs[i].lambda_a)},
                                                               {"snapshot_model", std::string(to_string(jobs[i].kind))}});
    writer.write("pn_" + pump_tag(jobs[i].kind, jobs[i].lambda_a) + ".csv", state_csv(header, *snapshots[i]));
  }
  write_manifest("sweep", spec, outcome);
  return outcome;
}

RunOutcome run_correlation(const SweepSpec& spec) {
  spec.validate();
  prepare_out_dir(spec.out_dir);
  const auto jobs = make_jobs(spec.correlation_pumps(), spec.models);
  const auto taus = spec.tau_grid();

  RunOutcome outcome;
  outcome.points.resize(jobs.size());
  std::vector<std::optional<CorrelationTrace>> traces(jobs.size());
  std::vector<std::string> skipped(jobs.size());

  parallel_for(jobs.size(), spec.workers, [&](std::size_t i) {
    const Job& job = jobs[i];
    ModelParams params = spec.base;
    params.lambda_a = job.lambda_a;
    const std::string label = "lambda_a=" + format_double(job.lambda_a) + " " + std::string(to_string(job.kind));
    try {
      const auto opts = spec.options_for(job.lambda_a, job.kind);
      const auto ss = steady_state(params, opts);
      outcome.points[i] = summarize(job, params, ss);
      if (!ss.converged) {
        skipped[i] = label + ": skipped, steady state not converged (residual " + format_double(ss.max_residual) + ")";
        return;
      }
      if (!(mean_photon_number(ss.state.p()) > kNoSignalMean)) {
        skipped[i] = label + ": skipped, no signal (<n> = 0)";
        return;
      }
      traces[i] = g2_tau(ss, params, taus, opts.step);
    } catch (const NumericalError& e) {
      PointResult& r = outcome.points[i];
      r.lambda_a = job.lambda_a;
      r.model = job.kind;
      r.ok = false;
      r.error = e.what();
      skipped[i] = label + ": " + e.what();
    }
  });

  for (const auto& reason : skipped) {
    if (reason.empty()) continue;
    log_line(reason);
    outcome.notes.push_back(reason);
  }

  Writer writer(spec.out_dir, outcome);
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (!traces[i]) continue;
    const auto& trace = *traces[i];
    const std::vector<std::pair<std::string, std::string>> extra = {
        {"lambda_a", format_double(jobs[i].lambda_a)},
        {"trace_model", std::string(to_string(jobs[i].kind))},
        {"mean_n_ss", format_double(trace.mean_n_ss)},
        {"p_a_ss", format_double(trace.p_a_ss)},
        {"g2_zero", format_double(trace.g2_zero_ss)},
        {"cutoff_used", std::to_string(trace.cutoff)}};
    std::string csv = metadata_line("g2tau", spec, extra) + "\ntau,g2,p_a\n";
    for (std::size_t k = 0; k < trace.tau.size(); ++k) {
      csv += format_double(trace.tau[k]) + "," + format_double(trace.g2[k]) + "," + format_double(trace.p_a[k]) + "\n";
    }
    writer.write("g2tau_" + pump_tag(jobs[i].kind, jobs[i].lambda_a) + ".csv", csv);

    if (jobs[i].kind != ModelKind::ClassB) continue;
    const auto report = extrema_lag_analysis(trace);
    auto lag_extra = extra;
    lag_extra.emplace_back("noise_floor", format_double(report.noise_floor));
    lag_extra.emplace_back("p_a_amplitude", format_double(report.amplitude));
    std::string lag = metadata_line("lag", spec, lag_extra) + "\ntau,g2,kind,p_a,distance,normalized\n";
    for (const auto& pt : report.points) {
      lag += format_double(pt.extremum.tau) + "," + format_double(pt.extremum.g2) + "," +
             (pt.extremum.is_max ? "max" : "min") + "," + format_double(pt.p_a) + "," +
             format_double(pt.distance) + "," + format_double(pt.normalized) + "\n";
    }
    writer.write("lag_" + pump_tag(jobs[i].kind, jobs[i].lambda_a) + ".csv", lag);
  }
  write_manifest("g2tau", spec, outcome);
  if (!jobs.empty() && std::none_of(traces.begin(), traces.end(), [](const auto& t) { return t.has_value(); })) {
    throw NumericalError("g2tau: no trace could be computed (see notes above)");
  }
  return outcome;
}

RunOutcome run_threshold(const SweepSpec& spec) {
  spec.validate();
  prepare_out_dir(spec.out_dir);
  RunOutcome outcome;

  const auto report = class_b_threshold_estimate(spec.base);
  std::ostringstream text;
  text << metadata_line("threshold", spec) << "\n";
  text << "N_sat: " << format_double(report.N_sat) << "\n";
  text << "xi_minus: " << format_double(report.xi_minus.real()) << " " << format_double(report.xi_minus.imag())
       << "i\n";
  text << "xi_plus: " << format_double(report.xi_plus.real()) << " " << format_double(report.xi_plus.imag())
       << "i\n";
  if (!report.exists) {
    text << "no threshold: N ≤ N_sat (" << spec.base.n_atoms << " ≤ " << format_double(report.N_sat) << ")\n";
  } else {
    text << "xi_used: " << format_double(report.xi_used) << "\n";
    text << "lambda_th0: " << format_double(report.lambda_th0) << "\n";
    text << "delta1: " << format_double(report.delta1) << "\n";
    text << "lambda_th1: " << format_double(report.lambda_th1) << "\n";
    if (spec.numeric_threshold) {
      NumericThresholdOptions opts;
      opts.lower = spec.bracket_lower;
      opts.upper = spec.bracket_upper;
      opts.rel_tol = spec.bisect_tol;
      opts.integration = spec.options_for(0.0, ModelKind::ClassB);
      const double lambda = numeric_threshold(spec.base, opts);
      text << "lambda_numeric: " << format_double(lambda) << "\n";
    }
  }
  std::cout << text.str().substr(text.str().find('\n') + 1);
  Writer(spec.out_dir, outcome).write("threshold.txt", text.str());
  write_manifest("threshold", spec, outcome);
  return outcome;
}

RunOutcome run_steady(const SweepSpec& spec) {
  spec.validate();
  const auto pumps = spec.pumps();
  if (pumps.size() != 1) throw ConfigError("steady needs exactly one pump (use --lambda-a)");
  prepare_out_dir(spec.out_dir);
  const auto jobs = make_jobs(pumps, spec.models);

  RunOutcome outcome;
  outcome.points.resize(jobs.size());
  std::vector<std::optional<LaserState>> states(jobs.size());
  parallel_for(jobs.size(), spec.workers, [&](std::size_t i) {
    ModelParams params = spec.base;
    params.lambda_a = jobs[i].lambda_a;
    const auto ss = steady_state(params, spec.options_for(jobs[i].lambda_a, jobs[i].kind));
    outcome.points[i] = summarize(jobs[i], params, ss);
    states[i] = ss.state;
  });

  Writer writer(spec.out_dir, outcome);
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const auto& r = outcome.points[i];
    std::cout << to_string(r.model) << ": lambda_a=" << format_double(r.lambda_a) << " mean_n="
              << format_double(r.mean_n) << " g2_zero=" << (r.g2 ? format_double(*r.g2) : "undefined")
              << " converged=" << (r.converged ? "true" : "false") << " residual=" << format_double(r.residual)
              << " cutoff=" << r.cutoff << "\n";
    const std::string header = metadata_line(
        "steady", spec,
        {{"lambda_a", format_double(r.lambda_a)}, {"steady_model", std::string(to_string(r.model))},
         {"mean_n", format_double(r.mean_n)}, {"g2_zero", optional_cell(r.g2)},
         {"converged", r.converged ? "true" : "false"}, {"residual", format_double(r.residual)}});
    writer.write("steady_" + pump_tag(r.model, r.lambda_a) + ".csv", state_csv(header, *states[i]));
  }
  write_manifest("steady", spec, outcome);
  return outcome;
}

}  // namespace classb
