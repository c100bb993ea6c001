#include "classb/observables.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "classb/errors.hpp"

namespace classb {

namespace {

constexpr double kRoundoff = 1.0e-12;

// Values in [-1e-12, 0) are round-off and read as zero; anything more
// negative means the integration went wrong.
double clip(double value, std::size_t n) {
  if (value >= 0.0) return value;
  if (value >= -kRoundoff) return 0.0;
  std::ostringstream msg;
  msg << "negative probability " << value << " at n=" << n;
  throw NumericalError(msg.str());
}

}  // namespace

double mean_photon_number(std::span<const double> p) {
  double sum = 0.0;
  for (std::size_t n = 0; n < p.size(); ++n) sum += static_cast<double>(n) * clip(p[n], n);
  return sum;
}

double factorial_moment2(std::span<const double> p) {
  double sum = 0.0;
  for (std::size_t n = 2; n < p.size(); ++n) {
    const double k = static_cast<double>(n);
    sum += k * (k - 1.0) * clip(p[n], n);
  }
  return sum;
}

std::optional<double> g2_zero(std::span<const double> p) {
  const double mean = mean_photon_number(p);
  if (mean <= kNoSignalMean) return std::nullopt;
  return factorial_moment2(p) / (mean * mean);
}

double upper_occupation(std::span<const double> rho_a) {
  double sum = 0.0;
  for (std::size_t n = 0; n < rho_a.size(); ++n) sum += clip(rho_a[n], n);
  return sum;
}

double population_inversion(std::span<const double> rho_a, const ModelParams& params) {
  return static_cast<double>(params.n_atoms) * upper_occupation(rho_a);
}

double detailed_balance_residual(const LaserState& state, const ModelParams& params,
                                 double relative_floor) {
  const auto p = state.p();
  const auto rho = state.rho_a();
  if (p.size() < 2) return 0.0;
  const double gain = params.stimulated_rate() * static_cast<double>(params.n_atoms);
  const double p_max = *std::max_element(p.begin(), p.end());
  const double floor = std::max(relative_floor * params.kappa * p_max,
                                std::numeric_limits<double>::min());
  double worst = 0.0;
  for (std::size_t n = 1; n < p.size(); ++n) {
    const double loss = params.kappa * p[n];
    const double diff = std::abs(gain * rho[n - 1] - loss);
    worst = std::max(worst, diff / std::max(loss, floor));
  }
  return worst;
}

Observables compute_observables(const LaserState& state, const ModelParams& params) {
  Observables out;
  out.mean_n = mean_photon_number(state.p());
  out.g2_zero = out.mean_n > kNoSignalMean
                    ? std::optional<double>(factorial_moment2(state.p()) / (out.mean_n * out.mean_n))
                    : std::nullopt;
  out.upper_occupation = upper_occupation(state.rho_a());
  out.population_inversion = static_cast<double>(params.n_atoms) * out.upper_occupation;
  out.p0 = state.p().empty() ? 0.0 : state.p()[0];
  out.p1 = state.p().size() > 1 ? state.p()[1] : 0.0;
  return out;
}

}  // namespace classb
