#include "classb/correlations.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "classb/errors.hpp"
#include "classb/observables.hpp"

namespace classb {

double ThetaState::trace() const { return std::accumulate(theta_p.begin(), theta_p.end(), 0.0); }

ThetaState make_theta_initial(const LaserState& steady) {
  const double mean = mean_photon_number(steady.p());
  if (!(mean > kNoSignalMean)) {
    std::ostringstream msg;
    msg << "make_theta_initial: no signal (<n> = " << mean << ")";
    throw NumericalError(msg.str());
  }
  const std::size_t size = steady.size();
  ThetaState theta;
  theta.theta_a.assign(size, 0.0);
  theta.theta_p.assign(size, 0.0);
  for (std::size_t n = 0; n + 1 < size; ++n) {
    const double weight = static_cast<double>(n + 1);
    theta.theta_p[n] = weight * steady.p()[n + 1];
    theta.theta_a[n] = weight * steady.rho_a()[n + 1];
  }
  return theta;
}

ThetaState make_theta_initial(const SteadyStateResult& steady) {
  return make_theta_initial(steady.state);
}

namespace {

void check_grid(std::span<const double> tau_grid) {
  if (tau_grid.empty()) throw ConfigError("g2_tau: empty tau grid");
  for (std::size_t i = 0; i < tau_grid.size(); ++i) {
    if (!std::isfinite(tau_grid[i]) || tau_grid[i] < 0.0 ||
        (i > 0 && tau_grid[i] <= tau_grid[i - 1])) {
      throw ConfigError("g2_tau: tau grid must be finite, non-negative and strictly increasing");
    }
  }
}

double weighted_sum(std::span<const double> p) {
  double s = 0.0;
  for (std::size_t n = 1; n < p.size(); ++n) s += static_cast<double>(n) * p[n];
  return s;
}

}  // namespace

CorrelationTrace g2_tau(const SteadyStateResult& steady, const ModelParams& params,
                        std::span<const double> tau_grid, double step) {
  check_grid(tau_grid);
  if (!(step > 0.0)) throw ConfigError("g2_tau: step must be > 0");

  const ThetaState theta = make_theta_initial(steady);
  CorrelationTrace trace;
  trace.model = steady.model;
  trace.mean_n_ss = mean_photon_number(steady.state.p());
  trace.g2_zero_ss = g2_zero(steady.state.p()).value_or(0.0);
  trace.p_a_ss = upper_occupation(steady.state.rho_a());
  trace.cutoff = steady.state.n_cut();

  Propagator prop(LaserState::unchecked(theta.theta_a, theta.theta_p), params, steady.model);
  const double norm2 = trace.mean_n_ss * trace.mean_n_ss;

  // The class-A-like propagator has no independent atomic variable, so P_a
  // is always read from the propagator (adiabatic for that model).
  for (double tau : tau_grid) {
    prop.advance(tau - prop.time(), step);
    const auto state = prop.state();
    const double g2 = weighted_sum(state.p()) / norm2;
    const double pa = upper_occupation(state.rho_a()) / trace.mean_n_ss;
    if (!std::isfinite(g2) || !std::isfinite(pa)) {
      std::ostringstream msg;
      msg << "g2_tau: non-finite value at tau=" << tau << " (step " << step << ")";
      throw NumericalError(msg.str());
    }
    trace.tau.push_back(tau);
    trace.g2.push_back(std::max(g2, 0.0));
    trace.p_a.push_back(pa);
  }
  return trace;
}

CorrelationTrace g2_tau(const ModelParams& params, std::span<const double> tau_grid,
                        ModelKind kind, IntegrationOptions options) {
  check_grid(tau_grid);
  options.model = kind;
  const SteadyStateResult ss = steady_state(params, options);
  if (!ss.converged) {
    std::ostringstream msg;
    msg << "g2_tau: steady state not converged (residual " << ss.max_residual << ", drift "
        << ss.trace_drift << ")";
    throw NumericalError(msg.str());
  }
  return g2_tau(ss, params, tau_grid, options.step);
}

ConditionalOccupation conditional_upper_occupation(const CorrelationTrace& trace) {
  return {trace.tau, trace.p_a, trace.p_a_ss};
}

std::vector<TurningPoint> find_extrema(std::span<const double> values, double noise_floor) {
  std::vector<TurningPoint> found;
  if (values.size() < 3) return found;
  enum class Seek { Either, Max, Min } seek = Seek::Either;
  std::size_t hi = 0, lo = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    const double v = values[i];
    if (v > values[hi]) hi = i;
    if (v < values[lo]) lo = i;
    if (seek != Seek::Min && v < values[hi] - noise_floor) {
      if (hi > 0) found.push_back({hi, true});
      seek = Seek::Min;
      lo = i;
    } else if (seek != Seek::Max && v > values[lo] + noise_floor) {
      if (lo > 0) found.push_back({lo, false});
      seek = Seek::Max;
      hi = i;
    }
  }
  return found;
}

LagReport extrema_lag_analysis(const CorrelationTrace& trace, double noise_floor) {
  LagReport report;
  report.noise_floor = noise_floor;
  // Oscillation amplitude from the interior turning points of P_a. The value
  // at tau=0 is the post-emission jump, not part of the oscillation, and can
  // dwarf it in few-photon regimes.
  for (const TurningPoint& turn : find_extrema(trace.p_a, 0.0)) {
    report.amplitude = std::max(report.amplitude, std::abs(trace.p_a[turn.index] - trace.p_a_ss));
  }
  if (report.amplitude == 0.0) {
    for (double pa : trace.p_a) report.amplitude = std::max(report.amplitude, std::abs(pa - trace.p_a_ss));
  }

  for (const TurningPoint& turn : find_extrema(trace.g2, noise_floor)) {
    const std::size_t i = turn.index;
    LagPoint point;
    point.extremum = {i, trace.tau[i], trace.g2[i], turn.is_max};
    point.p_a = trace.p_a[i];
    point.distance = std::abs(point.p_a - trace.p_a_ss);
    point.normalized = report.amplitude > 0.0 ? point.distance / report.amplitude : 0.0;
    report.points.push_back(point);
  }
  return report;
}

}  // namespace classb
