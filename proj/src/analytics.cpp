#include "classb/analytics.hpp"

#include <cmath>
#include <sstream>

#include "classb/errors.hpp"

namespace classb {

void ClassAParams::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("invalid ClassAParams: " + msg); };
  if (!(kappa > 0.0) || !std::isfinite(kappa)) fail("kappa must be > 0");
  if (!(gamma > 0.0) || !std::isfinite(gamma)) fail("gamma must be > 0");
  if (!(gamma_h > 0.0) || !std::isfinite(gamma_h)) fail("gamma_h must be > 0");
  if (!(g > 0.0) || !std::isfinite(g)) fail("g must be > 0");
  if (n_atoms < 1) fail("n_atoms must be >= 1");
  if (!(lambda_a >= 0.0) || !std::isfinite(lambda_a)) fail("lambda_a must be >= 0");
}

namespace {

double saturation_ratio(const ModelParams& params) {
  return derived_params(params).N_sat / static_cast<double>(params.n_atoms);
}

std::string no_threshold_message(const ModelParams& params) {
  std::ostringstream msg;
  msg << "no threshold: N <= N_sat (" << params.n_atoms << " <= " << derived_params(params).N_sat
      << ")";
  return msg.str();
}

}  // namespace

std::optional<double> class_a_like_threshold(const ModelParams& params) {
  params.validate();
  const double b = saturation_ratio(params);
  if (!(b < 1.0)) return std::nullopt;
  return b * (params.big_gamma + params.stimulated_rate()) / (1.0 - b);
}

XiQuadratic xi_quadratic(const ModelParams& params) {
  params.validate();
  const double g2 = params.g * params.g;
  const double n = static_cast<double>(params.n_atoms);
  const double kh = params.kappa * params.gamma_h;
  const double frac = (n - 1.0) / n;
  const double loss = (params.big_gamma - 4.0 * params.kappa) * params.gamma_h;
  const double b_sat = saturation_ratio(params);

  XiQuadratic q;
  q.a = 4.0 * g2 + 7.0 * kh * frac + params.big_gamma * params.gamma_h - 4.0 * kh;
  q.b = 5.0 * g2 + 4.0 * kh * frac + params.big_gamma * params.gamma_h - 4.0 * kh;
  const double inner = g2 * (5.0 + 8.0 * b_sat * (n - 1.0)) + loss;
  q.disc = -8.0 * g2 * g2 * (2.0 + 7.0 * b_sat * (n - 1.0)) - 4.0 * g2 * loss + inner * inner;
  return q;
}

std::pair<std::complex<double>, std::complex<double>> xi_roots(const ModelParams& params) {
  const XiQuadratic q = xi_quadratic(params);
  const double scale = params.g * params.g + params.kappa * params.gamma_h +
                       params.big_gamma * params.gamma_h;
  if (std::abs(q.a) <= 1.0e-14 * scale) {
    std::ostringstream msg;
    msg << "xi_roots: degenerate leading coefficient " << q.a << " (scale " << scale << ")";
    throw NumericalError(msg.str());
  }
  const std::complex<double> root = std::sqrt(std::complex<double>(q.disc, 0.0));
  const std::complex<double> minus = 0.5 * (q.b - root) / q.a;
  const std::complex<double> plus = 0.5 * (q.b + root) / q.a;
  return {minus, plus};
}

double threshold_correction(const ModelParams& params, double xi) {
  params.validate();
  const double b = saturation_ratio(params);
  if (!(b < 1.0)) throw NumericalError(no_threshold_message(params));
  const double n = static_cast<double>(params.n_atoms);
  return params.kappa * b * (xi - (1.0 - xi) / n) / (1.0 - b);
}

ThresholdReport class_b_threshold_estimate(const ModelParams& params) {
  ThresholdReport report;
  report.N_sat = derived_params(params).N_sat;
  const auto lambda0 = class_a_like_threshold(params);
  const auto [minus, plus] = xi_roots(params);
  report.xi_minus = minus;
  report.xi_plus = plus;
  report.xi_used = minus.real();
  if (!lambda0) return report;
  report.exists = true;
  report.lambda_th0 = *lambda0;
  report.delta1 = threshold_correction(params, report.xi_used);
  report.lambda_th1 = report.lambda_th0 + report.delta1;
  return report;
}

double threshold_indicator(const ModelParams& params, double lambda_a,
                           const IntegrationOptions& options) {
  ModelParams point = params;
  point.lambda_a = lambda_a;
  const SteadyStateResult ss = steady_state(point, options);
  if (!ss.converged) {
    std::ostringstream msg;
    msg << "threshold_indicator: steady state not converged at lambda_a=" << lambda_a
        << " (residual " << ss.max_residual << ")";
    throw NumericalError(msg.str());
  }
  return ss.state.p()[0] - ss.state.p()[1];
}

double numeric_threshold(const ModelParams& params, const NumericThresholdOptions& options) {
  if (!(options.rel_tol > 0.0)) throw ConfigError("numeric_threshold: rel_tol must be > 0");
  double lo = options.lower;
  double hi = options.upper;
  if (lo == 0.0 || hi == 0.0) {
    const auto lambda0 = class_a_like_threshold(params);
    if (!lambda0) throw NumericalError("numeric_threshold: " + no_threshold_message(params));
    if (lo == 0.0) lo = 0.5 * *lambda0;
    if (hi == 0.0) hi = 4.0 * *lambda0;
  }
  if (!(lo > 0.0) || !(hi > lo)) {
    std::ostringstream msg;
    msg << "numeric_threshold: invalid bracket [" << lo << ", " << hi << "]";
    throw ConfigError(msg.str());
  }

  double f_lo = threshold_indicator(params, lo, options.integration);
  const double f_hi = threshold_indicator(params, hi, options.integration);
  if (!(f_lo * f_hi < 0.0)) {
    std::ostringstream msg;
    msg << "numeric_threshold: P0-P1 has no sign change on [" << lo << ", " << hi
        << "] (" << f_lo << ", " << f_hi << ")";
    throw NumericalError(msg.str());
  }
  for (std::size_t it = 0; it < options.max_iterations; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (hi - lo <= options.rel_tol * mid) break;
    const double f_mid = threshold_indicator(params, mid, options.integration);
    if (f_mid == 0.0) return mid;
    if ((f_mid > 0.0) == (f_lo > 0.0)) {
      lo = mid;
      f_lo = f_mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

std::vector<double> class_a_exact_distribution(const ClassAParams& params, std::size_t n_max,
                                               double tail_tol) {
  params.validate();
  const double g2 = params.g * params.g;
  const double gain = static_cast<double>(params.n_atoms) * 2.0 * g2 * params.pump_rate();

  std::vector<double> p(n_max + 1, 0.0);
  if (gain == 0.0) {
    p[0] = 1.0;
    return p;
  }
  // log-space ladder, shifted by its maximum before exponentiating
  std::vector<double> logp(n_max + 1, 0.0);
  double peak = 0.0;
  for (std::size_t n = 1; n <= n_max; ++n) {
    const double den = params.kappa * (4.0 * g2 * static_cast<double>(n) + params.gamma * params.gamma_h);
    logp[n] = logp[n - 1] + std::log(gain / den);
    peak = std::max(peak, logp[n]);
  }
  double sum = 0.0;
  for (std::size_t n = 0; n <= n_max; ++n) {
    p[n] = std::exp(logp[n] - peak);
    sum += p[n];
  }
  for (double& v : p) v /= sum;

  const std::size_t rungs = std::min<std::size_t>(5, n_max);
  double tail = 0.0;
  for (std::size_t k = 0; k < rungs; ++k) tail += p[n_max - k];
  if (tail > tail_tol) {
    std::ostringstream msg;
    msg << "class_a_exact_distribution: tail mass " << tail << " above " << tail_tol
        << "; raise n_max (" << n_max << ")";
    throw NumericalError(msg.str());
  }
  return p;
}

ClassAThresholds class_a_thresholds(const ClassAParams& params) {
  params.validate();
  const double g2 = params.g * params.g;
  const double n = static_cast<double>(params.n_atoms);
  ClassAThresholds out;
  out.beta0 = 4.0 * g2 / (4.0 * g2 + params.gamma * params.gamma_h);

  // N lambda / (1 + lambda/gamma) = c  =>  lambda = c gamma / (N gamma - c)
  auto solve = [&](double c) -> std::optional<double> {
    const double den = n * params.gamma - c;
    if (!(den > 0.0)) return std::nullopt;
    return c * params.gamma / den;
  };
  out.lambda_sc = solve(params.kappa * params.gamma_h * params.gamma / (2.0 * g2));
  out.lambda_p0p1 = solve(2.0 * params.kappa / out.beta0);
  return out;
}

}  // namespace classb
