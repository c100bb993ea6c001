#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "classb/integrator.hpp"
#include "classb/model.hpp"

namespace classb {

/// Diagonal of the conditional (post-emission) operator theta and its
/// upper-level companion. Unnormalized: the trace starts at <n>_ss.
struct ThetaState {
  std::vector<double> theta_a;
  std::vector<double> theta_p;

  double trace() const;
};

/// theta_p_n(0) = (n+1) P_{n+1}, theta_a_n(0) = (n+1) rho_a_{n+1}; top rung 0.
/// Throws NumericalError when <n> <= kNoSignalMean.
ThetaState make_theta_initial(const LaserState& steady);
ThetaState make_theta_initial(const SteadyStateResult& steady);

struct CorrelationTrace {
  ModelKind model = ModelKind::ClassB;
  std::vector<double> tau;
  std::vector<double> g2;
  std::vector<double> p_a;  ///< Tr theta_a(tau) / <n>_ss
  double mean_n_ss = 0.0;
  double g2_zero_ss = 0.0;  ///< moment-based g2(0) of the steady state
  double p_a_ss = 0.0;      ///< upper_occupation(rho_a_ss)
  std::size_t cutoff = 0;
};

/// Evolves theta from an already computed steady state and samples
/// g2(tau) = sum_n n theta_p_n(tau) / <n>_ss^2 on the grid (non-negative,
/// strictly increasing). The ladder stays at the steady-state cutoff.
CorrelationTrace g2_tau(const SteadyStateResult& steady, const ModelParams& params,
                        std::span<const double> tau_grid, double step);

/// Computes the steady state of `kind` first (options.model is overridden).
/// Throws NumericalError if it does not converge.
CorrelationTrace g2_tau(const ModelParams& params, std::span<const double> tau_grid,
                        ModelKind kind, IntegrationOptions options = {});

struct ConditionalOccupation {
  std::vector<double> tau;
  std::vector<double> p_a;
  double p_a_ss = 0.0;
};

ConditionalOccupation conditional_upper_occupation(const CorrelationTrace& trace);

struct Extremum {
  std::size_t index = 0;
  double tau = 0.0;
  double g2 = 0.0;
  bool is_max = false;
};

/// Interior turning points of a sampled signal. A candidate extremum is only
/// accepted once the signal has moved away from it by more than noise_floor,
/// so grid-level wiggles below the floor never register. The first sample is
/// not interior and is never reported.
struct TurningPoint {
  std::size_t index = 0;
  bool is_max = false;
};

std::vector<TurningPoint> find_extrema(std::span<const double> values, double noise_floor);

struct LagPoint {
  Extremum extremum;
  double p_a = 0.0;
  double distance = 0.0;    ///< |P_a - P_a_ss|
  double normalized = 0.0;  ///< distance / amplitude
};

struct LagReport {
  double noise_floor = 0.0;
  double amplitude = 0.0;  ///< largest |P_a - P_a_ss| at an interior turning point of P_a
  std::vector<LagPoint> points;
};

/// For each interior g2 extremum: how far P_a is from its steady value,
/// relative to the P_a oscillation amplitude (falls back to the largest
/// excursion when P_a has no turning point). Empty when g2 has no extrema
/// above the floor.
LagReport extrema_lag_analysis(const CorrelationTrace& trace, double noise_floor = 1.0e-4);

}  // namespace classb
