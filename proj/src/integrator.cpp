#include "classb/integrator.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "classb/errors.hpp"
#include "classb/observables.hpp"

#if defined(__SSE__) || defined(_M_X64)
#include <xmmintrin.h>
#define CLASSB_HAVE_MXCSR 1
#endif

namespace classb {

void IntegrationOptions::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("invalid IntegrationOptions: " + msg); };
  if (!(step > 0.0) || !std::isfinite(step)) fail("step must be > 0");
  if (!(t_max >= 0.0)) fail("t_max must be >= 0");
  if (!(tol_ss > 0.0)) fail("tol_ss must be > 0");
  if (!(trace_tol > 0.0)) fail("trace_tol must be > 0");
  if (cutoff.initial < 1) fail("initial cutoff must be >= 1");
  if (!(cutoff.tail_threshold > 0.0)) fail("tail threshold must be > 0");
  if (cutoff.tail_rungs < 1) fail("tail_rungs must be >= 1");
  if (!(cutoff.growth_factor > 1.0)) fail("growth factor must be > 1");
  if (cutoff.hard_limit < cutoff.initial) fail("hard cutoff limit below initial cutoff");
  if (check_every < 1) fail("check_every must be >= 1");
}

namespace {

// Far ladder tails underflow into subnormals, which are slow on x86 and carry
// no physical weight. Flush them to zero for the duration of an integration.
class FlushSubnormals {
 public:
  FlushSubnormals() {
#ifdef CLASSB_HAVE_MXCSR
    saved_ = _mm_getcsr();
    _mm_setcsr(saved_ | 0x8040);  // FTZ | DAZ
#endif
  }
  ~FlushSubnormals() {
#ifdef CLASSB_HAVE_MXCSR
    _mm_setcsr(saved_);
#endif
  }
  FlushSubnormals(const FlushSubnormals&) = delete;
  FlushSubnormals& operator=(const FlushSubnormals&) = delete;

 private:
  unsigned saved_ = 0;
};

}  // namespace

// --- Propagator ---

Propagator::Propagator(const LaserState& initial, const ModelParams& params, ModelKind kind,
                       DenominatorFloor floor)
    : params_(params), kind_(kind), floor_(floor), n_cut_(initial.n_cut()) {
  params_.validate();
  const std::size_t size = initial.size();
  if (kind_ == ModelKind::ClassB) {
    x_.resize(2 * size);
    std::copy(initial.rho_a().begin(), initial.rho_a().end(), x_.begin());
    std::copy(initial.p().begin(), initial.p().end(), x_.begin() + static_cast<std::ptrdiff_t>(size));
  } else {
    x_.assign(initial.p().begin(), initial.p().end());
  }
  stepper_.resize(x_.size());
}

void Propagator::system(std::span<const double> x, std::span<double> dx) const {
  if (kind_ == ModelKind::ClassB) {
    const std::size_t size = x.size() / 2;
    const auto rho = x.first(size);
    const auto p = x.subspan(size);
    class_b_rhs(rho, p, params_, floor_.resolve(p), dx.first(size), dx.subspan(size));
  } else {
    class_a_like_rhs(x, params_, dx);
  }
}

void Propagator::step(double h) {
  stepper_.step([this](std::span<const double> x, std::span<double> dx) { system(x, dx); },
                std::span<double>(x_), h);
  time_ += h;
  ++steps_;
}

void Propagator::advance(double duration, double h) {
  if (duration <= 0.0) return;
  FlushSubnormals ftz;
  const auto count = static_cast<std::size_t>(std::ceil(duration / h - 1.0e-9));
  const double dt = duration / static_cast<double>(std::max<std::size_t>(count, 1));
  const double start = time_;
  for (std::size_t i = 0; i < std::max<std::size_t>(count, 1); ++i) step(dt);
  time_ = start + duration;
}

void Propagator::grow(std::size_t n_cut) {
  if (n_cut <= n_cut_) return;
  const std::size_t old_size = n_cut_ + 1;
  const std::size_t new_size = n_cut + 1;
  if (kind_ == ModelKind::ClassB) {
    std::vector<double> x(2 * new_size, 0.0);
    std::copy(x_.begin(), x_.begin() + static_cast<std::ptrdiff_t>(old_size), x.begin());
    std::copy(x_.begin() + static_cast<std::ptrdiff_t>(old_size), x_.end(),
              x.begin() + static_cast<std::ptrdiff_t>(new_size));
    x_ = std::move(x);
  } else {
    x_.resize(new_size, 0.0);
  }
  n_cut_ = n_cut;
  stepper_.resize(x_.size());
}

std::span<const double> Propagator::p() const {
  const std::span<const double> all(x_);
  return kind_ == ModelKind::ClassB ? all.subspan(n_cut_ + 1) : all;
}

LaserState Propagator::state() const {
  const std::size_t size = n_cut_ + 1;
  std::vector<double> p(size);
  std::vector<double> rho(size);
  if (kind_ == ModelKind::ClassB) {
    std::copy(x_.begin(), x_.begin() + static_cast<std::ptrdiff_t>(size), rho.begin());
    std::copy(x_.begin() + static_cast<std::ptrdiff_t>(size), x_.end(), p.begin());
  } else {
    p = x_;
    adiabatic_rho_a(p, params_, rho);
  }
  return LaserState::unchecked(std::move(rho), std::move(p));
}

double Propagator::last_residual() const {
  double worst = 0.0;
  for (double v : stepper_.last_derivative()) {
    if (!std::isfinite(v)) return std::numeric_limits<double>::quiet_NaN();
    worst = std::max(worst, std::abs(v));
  }
  return worst;
}

LaserState rk4_step(const LaserState& state, const ModelParams& params, double h,
                    ModelKind kind, const DenominatorFloor& floor) {
  if (!(h > 0.0)) throw ConfigError("rk4_step: step must be > 0");
  Propagator prop(state, params, kind, floor);
  prop.step(h);
  auto next = prop.state();
  for (std::size_t i = 0; i < next.size(); ++i) {
    if (!std::isfinite(next.p()[i]) || !std::isfinite(next.rho_a()[i])) {
      std::ostringstream msg;
      msg << "rk4_step: non-finite state at n=" << i << " (h=" << h
          << "); reduce the step or raise the cutoff";
      throw NumericalError(msg.str());
    }
  }
  return next;
}

// --- evolve / steady state ---

namespace {

double tail_mass(std::span<const double> p, std::size_t rungs) {
  const std::size_t count = std::min(rungs, p.size());
  double sum = 0.0;
  for (std::size_t i = p.size() - count; i < p.size(); ++i) sum += std::abs(p[i]);
  return sum;
}

double sum(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

std::size_t next_cutoff(std::size_t current, const CutoffPolicy& policy) {
  const auto grown = static_cast<std::size_t>(
      std::ceil(static_cast<double>(current + 1) * policy.growth_factor)) - 1;
  return std::min(std::max(grown, current + 1), policy.hard_limit);
}

}  // namespace

EvolveResult evolve(const LaserState& initial, const ModelParams& params,
                    const IntegrationOptions& options, std::span<const double> sample_times,
                    bool stop_at_steady_state) {
  options.validate();
  for (std::size_t i = 0; i < sample_times.size(); ++i) {
    if (sample_times[i] < 0.0 || sample_times[i] > options.t_max ||
        (i > 0 && sample_times[i] <= sample_times[i - 1])) {
      throw ConfigError("evolve: sample times must be strictly increasing within [0, t_max]");
    }
  }

  FlushSubnormals ftz;
  Propagator prop(initial, params, options.model, options.floor);
  const double trace0 = sum(prop.p());
  const auto& policy = options.cutoff;
  const bool auto_grow = policy.mode == CutoffMode::AutoGrow;

  EvolveResult result;
  std::size_t next_sample = 0;
  std::size_t since_check = 0;

  auto record_samples = [&] {
    while (next_sample < sample_times.size() &&
           prop.time() >= sample_times[next_sample] - 1.0e-12) {
      result.samples.push_back({sample_times[next_sample], prop.state()});
      ++next_sample;
    }
  };

  // Returns true when the steady-state criterion holds.
  auto check = [&]() -> bool {
    const auto p = prop.p();
    const double residual = prop.last_residual();
    if (!std::isfinite(residual)) {
      std::ostringstream msg;
      msg << "evolve: non-finite derivative at t=" << prop.time() << " (h=" << options.step
          << ", cutoff=" << prop.n_cut() << "); reduce the step or raise the cutoff";
      throw NumericalError(msg.str());
    }
    result.max_residual = residual;
    result.trace_drift = std::abs(sum(p) - trace0);
    result.tail_mass = tail_mass(p, policy.tail_rungs);

    const auto state = prop.state();
    for (std::size_t n = 0; n < state.size(); ++n) {
      result.min_p = std::min(result.min_p, state.p()[n]);
      result.max_excess = std::max(result.max_excess, state.rho_a()[n] - state.p()[n]);
    }

    const bool tail_ok = result.tail_mass <= policy.tail_threshold;
    if (auto_grow && !tail_ok) {
      if (prop.n_cut() >= policy.hard_limit) {
        std::ostringstream msg;
        msg << "evolve: Fock cutoff would exceed the hard limit " << policy.hard_limit
            << " (tail mass " << result.tail_mass << " at t=" << prop.time() << ")";
        throw NumericalError(msg.str());
      }
      prop.grow(next_cutoff(prop.n_cut(), policy));
      return false;
    }
    result.converged = residual <= options.tol_ss && result.trace_drift <= options.trace_tol && tail_ok;
    return residual <= options.tol_ss;
  };

  record_samples();
  const double h = options.step;
  while (prop.time() < options.t_max - 1.0e-12) {
    double dt = std::min(h, options.t_max - prop.time());
    if (next_sample < sample_times.size()) {
      dt = std::min(dt, sample_times[next_sample] - prop.time());
    }
    if (dt <= 1.0e-15) dt = std::min(h, options.t_max - prop.time());
    prop.step(dt);
    record_samples();
    if (++since_check >= options.check_every) {
      since_check = 0;
      if (check() && stop_at_steady_state && next_sample >= sample_times.size()) break;
    }
  }
  if (since_check != 0 || prop.steps() == 0) {
    if (prop.steps() == 0) prop.step(0.0);  // populate k1 for the residual
    check();
  }

  result.final_state = prop.state();
  result.elapsed = prop.time();
  result.steps = prop.steps();
  result.cutoff = prop.n_cut();
  return result;
}

LaserState class_a_like_seed(const ModelParams& params, const CutoffPolicy& policy) {
  params.validate();
  const double stim = params.stimulated_rate();
  const double gain = stim * static_cast<double>(params.n_atoms) * params.lambda_a;
  const double local = params.lambda_a + params.big_gamma;
  if (gain <= 0.0 || params.kappa <= 0.0) {
    if (params.kappa <= 0.0 && gain > 0.0) {
      throw NumericalError("class_a_like_seed: no stationary state without cavity loss");
    }
    return LaserState::vacuum(policy.initial);
  }

  // log P_n up to normalization; walk past the mode until the tail is negligible.
  std::vector<double> log_p{0.0};
  double log_max = 0.0;
  const double log_cut = std::log(policy.tail_threshold) - 2.0;
  for (std::size_t n = 1;; ++n) {
    const double ratio = gain / (params.kappa * (local + stim * static_cast<double>(n)));
    log_p.push_back(log_p.back() + std::log(ratio));
    log_max = std::max(log_max, log_p.back());
    const bool past_mode = ratio < 1.0;
    if (n + 1 >= policy.initial + 1 && past_mode && log_p.back() - log_max < log_cut) break;
    if (n > policy.hard_limit) {
      throw NumericalError("class_a_like_seed: distribution extends past the hard cutoff limit " +
                           std::to_string(policy.hard_limit));
    }
  }
  std::vector<double> p(log_p.size());
  double norm = 0.0;
  for (std::size_t n = 0; n < p.size(); ++n) {
    p[n] = std::exp(log_p[n] - log_max);
    norm += p[n];
  }
  for (double& v : p) v /= norm;
  auto rho = adiabatic_rho_a(p, params);
  return LaserState::unchecked(std::move(rho), std::move(p));
}

SteadyStateResult steady_state(const ModelParams& params, const IntegrationOptions& options) {
  options.validate();
  const LaserState start = options.initial == InitialCondition::Vacuum
                               ? LaserState::vacuum(options.cutoff.initial)
                               : class_a_like_seed(params, options.cutoff);
  auto run = evolve(start, params, options);
  SteadyStateResult out;
  out.state = std::move(run.final_state);
  out.elapsed = run.elapsed;
  out.max_residual = run.max_residual;
  out.trace_drift = run.trace_drift;
  out.tail_mass = run.tail_mass;
  out.cutoff = run.cutoff;
  out.converged = run.converged;
  out.model = options.model;
  out.detailed_balance_residual = detailed_balance_residual(out.state, params);
  return out;
}

}  // namespace classb
