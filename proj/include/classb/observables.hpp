#pragma once

#include <optional>
#include <span>

#include "classb/model.hpp"

namespace classb {

/// Below this mean photon number g2(0) is reported as "no signal".
inline constexpr double kNoSignalMean = 1.0e-12;

struct Observables {
  double mean_n = 0.0;
  std::optional<double> g2_zero;  ///< empty when mean_n <= kNoSignalMean
  double upper_occupation = 0.0;
  double population_inversion = 0.0;
  double p0 = 0.0;
  double p1 = 0.0;
};

double mean_photon_number(std::span<const double> p);

/// Second factorial moment sum_n n(n-1) P_n.
double factorial_moment2(std::span<const double> p);

/// <n(n-1)>/<n>^2, empty for a (numerically) vanishing mean.
std::optional<double> g2_zero(std::span<const double> p);

double upper_occupation(std::span<const double> rho_a);

/// N * sum_n rho_a_n.
double population_inversion(std::span<const double> rho_a, const ModelParams& params);

/// max_{n>=1} |N (2g^2/gamma_h) rho_a_{n-1} - kappa P_n| / max(kappa P_n, floor)
/// with floor = relative_floor * kappa * max_n P_n.
double detailed_balance_residual(const LaserState& state, const ModelParams& params,
                                 double relative_floor = 1.0e-8);

Observables compute_observables(const LaserState& state, const ModelParams& params);

}  // namespace classb
