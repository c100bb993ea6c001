#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "classb/integrator.hpp"
#include "classb/model.hpp"

namespace classb {

/// Three-level class-A reference model with equal atomic decay gamma_a = gamma_b.
struct ClassAParams {
  double kappa = 0.1;
  double gamma = 1.0;
  double gamma_h = 1.0;
  double g = 0.05;
  std::int64_t n_atoms = 1;
  double lambda_a = 1.0;

  void validate() const;

  /// r_a = gamma lambda_a / (gamma + lambda_a)
  double pump_rate() const { return gamma * lambda_a / (gamma + lambda_a); }
};

struct ThresholdReport {
  bool exists = false;  ///< N > N_sat
  double N_sat = 0.0;
  double lambda_th0 = 0.0;
  std::complex<double> xi_minus;
  std::complex<double> xi_plus;
  double xi_used = 0.0;  ///< Re(xi_minus)
  double delta1 = 0.0;
  double lambda_th1 = 0.0;
  std::optional<double> lambda_numeric;
};

/// Adiabatic four-level threshold (N_sat/N)(Gamma + 2g^2/gamma_h)/(1 - N_sat/N);
/// empty when N <= N_sat.
std::optional<double> class_a_like_threshold(const ModelParams& params);

/// Coefficients of the quadratic whose roots are xi_-/+, i.e.
/// xi = (b -/+ sqrt(disc)) / (2 a) with b and a read off the closed form.
struct XiQuadratic {
  double a = 0.0;     ///< 4g^2 + 7 kappa gamma_h (N-1)/N + Gamma gamma_h - 4 kappa gamma_h
  double b = 0.0;     ///< 5g^2 + 4 kappa gamma_h (N-1)/N + Gamma gamma_h - 4 kappa gamma_h
  double disc = 0.0;  ///< Delta
};

XiQuadratic xi_quadratic(const ModelParams& params);

/// (xi_-, xi_+), complex when Delta < 0. Throws NumericalError when the
/// leading coefficient vanishes.
std::pair<std::complex<double>, std::complex<double>> xi_roots(const ModelParams& params);

/// Leading threshold correction kappa (N_sat/N)[xi - (1-xi)/N] / (1 - N_sat/N).
/// Throws NumericalError when N <= N_sat.
double threshold_correction(const ModelParams& params, double xi);

/// lambda_th0 + delta1 using xi = Re(xi_-). exists=false when N <= N_sat.
ThresholdReport class_b_threshold_estimate(const ModelParams& params);

struct NumericThresholdOptions {
  double lower = 0.0;  ///< 0 selects 0.5 * lambda_th0
  double upper = 0.0;  ///< 0 selects 4 * lambda_th0
  double rel_tol = 1.0e-3;
  std::size_t max_iterations = 60;
  IntegrationOptions integration;
};

/// Bisection on the steady-state sign of P_0 - P_1 over the pump rate.
/// Throws NumericalError when the bracket shows no sign change.
double numeric_threshold(const ModelParams& params, const NumericThresholdOptions& options);

/// P_0 - P_1 of the steady state at the given pump.
double threshold_indicator(const ModelParams& params, double lambda_a,
                           const IntegrationOptions& options);

/// Stationary class-A photon distribution on 0..n_max from the ladder
/// P_n = N 2g^2 r_a / (kappa (4g^2 n + gamma gamma_h)) P_{n-1}, normalized.
/// Throws NumericalError if more than tail_tol of the mass sits on the last rung
/// region (the top five rungs).
std::vector<double> class_a_exact_distribution(const ClassAParams& params, std::size_t n_max,
                                               double tail_tol = 1.0e-10);

struct ClassAThresholds {
  std::optional<double> lambda_sc;     ///< semiclassical (linear gain) threshold
  std::optional<double> lambda_p0p1;   ///< P_0 = P_1 threshold
  double beta0 = 0.0;                  ///< 4g^2 / (4g^2 + gamma gamma_h)
};

ClassAThresholds class_a_thresholds(const ClassAParams& params);

}  // namespace classb
