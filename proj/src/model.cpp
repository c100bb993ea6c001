#include "classb/model.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>

#include "classb/errors.hpp"

namespace classb {

namespace {

constexpr double kRoundoff = 1.0e-12;

void require_same_size(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    std::ostringstream msg;
    msg << what << ": length mismatch (" << a << " vs " << b << ")";
    throw ConfigError(msg.str());
  }
}

}  // namespace

void ModelParams::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("invalid ModelParams: " + msg); };
  auto finite_nonneg = [&](double v, const char* name) {
    if (!std::isfinite(v) || v < 0.0) fail(std::string(name) + " must be finite and >= 0");
  };
  finite_nonneg(kappa, "kappa");
  finite_nonneg(big_gamma, "big_gamma");
  finite_nonneg(lambda_a, "lambda_a");
  if (!std::isfinite(gamma_h) || gamma_h <= 0.0) fail("gamma_h must be > 0");
  if (!std::isfinite(g) || g <= 0.0) fail("g must be > 0");
  if (n_atoms < 1) fail("n_atoms must be >= 1");
}

bool ModelParams::is_class_b_regime() const {
  return gamma_h > 10.0 * kappa && kappa > big_gamma;
}

DerivedParams derived_params(const ModelParams& params) {
  params.validate();
  const double two_g2 = 2.0 * params.g * params.g;
  DerivedParams out;
  out.beta = two_g2 / (two_g2 + (params.big_gamma + params.lambda_a) * params.gamma_h);
  // 1/beta overflows for vanishing coupling; saturate instead of returning inf.
  out.n_sat = out.beta > 1.0 / std::numeric_limits<double>::max()
                  ? 1.0 / out.beta
                  : std::numeric_limits<double>::max();
  out.N_sat = params.kappa * params.gamma_h / two_g2;
  return out;
}

std::string_view to_string(ModelKind kind) {
  return kind == ModelKind::ClassB ? "classb" : "classa";
}

ModelKind parse_model_kind(std::string_view text) {
  if (text == "classb" || text == "class-b") return ModelKind::ClassB;
  if (text == "classa" || text == "class-a" || text == "classa-like") return ModelKind::ClassALike;
  throw ConfigError("unknown model kind '" + std::string(text) + "'");
}

// --- LaserState ---

LaserState::LaserState(std::vector<double> rho_a, std::vector<double> p)
    : rho_a_(std::move(rho_a)), p_(std::move(p)) {
  require_same_size(rho_a_.size(), p_.size(), "LaserState");
  if (p_.empty()) throw ConfigError("LaserState: empty ladder");
  for (std::size_t n = 0; n < p_.size(); ++n) {
    const double r = rho_a_[n];
    const double q = p_[n];
    if (!(r >= -kRoundoff && q >= -kRoundoff && r <= q + kRoundoff && q <= 1.0 + kRoundoff)) {
      std::ostringstream msg;
      msg << "LaserState: require 0 <= rho_a <= p <= 1 at n=" << n << " (rho_a=" << r
          << ", p=" << q << ")";
      throw ConfigError(msg.str());
    }
  }
}

LaserState LaserState::unchecked(std::vector<double> rho_a, std::vector<double> p) {
  require_same_size(rho_a.size(), p.size(), "LaserState");
  LaserState s;
  s.rho_a_ = std::move(rho_a);
  s.p_ = std::move(p);
  return s;
}

LaserState LaserState::vacuum(std::size_t n_cut) {
  std::vector<double> p(n_cut + 1, 0.0);
  p[0] = 1.0;
  return unchecked(std::vector<double>(n_cut + 1, 0.0), std::move(p));
}

double LaserState::trace() const { return std::accumulate(p_.begin(), p_.end(), 0.0); }

LaserState LaserState::resized(std::size_t n_cut) const {
  auto r = rho_a_;
  auto q = p_;
  r.resize(n_cut + 1, 0.0);
  q.resize(n_cut + 1, 0.0);
  return unchecked(std::move(r), std::move(q));
}

void LaserState::check_trace(double tolerance) const {
  const double t = trace();
  if (!(std::abs(t - 1.0) <= tolerance)) {
    std::ostringstream msg;
    msg << "LaserState: trace " << t << " outside tolerance " << tolerance;
    throw NumericalError(msg.str());
  }
}

double DenominatorFloor::resolve(std::span<const double> p) const {
  double floor = absolute;
  if (relative > 0.0 && !p.empty()) {
    floor = std::max(floor, relative * *std::max_element(p.begin(), p.end()));
  }
  return floor;
}

// --- right-hand sides ---

void class_b_rhs(std::span<const double> rho_a, std::span<const double> p,
                 const ModelParams& params, double denominator_floor,
                 std::span<double> d_rho_a, std::span<double> d_p) {
  const std::size_t size = p.size();
  assert(rho_a.size() == size && d_rho_a.size() == size && d_p.size() == size);
  if (size == 0) return;

  const double stim = params.stimulated_rate();
  const double gain = stim * static_cast<double>(params.n_atoms);
  const double pair = stim * static_cast<double>(params.n_atoms - 1);
  const double lambda = params.lambda_a;
  const double local = params.lambda_a + params.big_gamma;
  const double kappa = params.kappa;
  const bool with_pairs = params.n_atoms > 1;

  // f_n = rho_n * c_n on the link (n, n+1), with the conditional upper-level
  // probability c_n = (rho_n + rho_{n+1}) / (P_n + P_{n+1}) held in [0, 1].
  // Deep-tail rungs carry round-off noise where rho/P is meaningless; an
  // unclamped c_n there turns the pair term into an arbitrarily stiff rate.
  // Out-of-range entries read zero.
  auto link = [&](double r0, double r1, double p0, double p1) {
    const double den = p0 + p1;
    if (!(den >= denominator_floor)) return 0.0;
    const double c = std::clamp((r0 + r1) / den, 0.0, 1.0);
    return r0 * c;
  };

  const std::size_t top = size - 1;
  double f_prev = 0.0;
  double r_prev = 0.0;
  for (std::size_t i = 0; i < top; ++i) {
    const double n = static_cast<double>(i);
    const double r = rho_a[i];
    const double r_next = rho_a[i + 1];
    const double q = p[i];
    const double q_next = p[i + 1];
    const double f = with_pairs ? link(r, r_next, q, q_next) : 0.0;
    d_rho_a[i] = lambda * q - (local + stim * (n + 1.0)) * r + kappa * ((n + 1.0) * r_next - n * r) +
                 pair * (n * f_prev - (n + 1.0) * f);
    d_p[i] = gain * (n * r_prev - (n + 1.0) * r) + kappa * ((n + 1.0) * q_next - n * q);
    f_prev = f;
    r_prev = r;
  }
  {
    const double n = static_cast<double>(top);
    const double r = rho_a[top];
    const double q = p[top];
    const double f = with_pairs ? link(r, 0.0, q, 0.0) : 0.0;
    d_rho_a[top] = lambda * q - (local + stim * (n + 1.0)) * r - kappa * n * r +
                   pair * (n * f_prev - (n + 1.0) * f);
    d_p[top] = gain * (n * r_prev - (n + 1.0) * r) - kappa * n * q;
  }
}

void adiabatic_rho_a(std::span<const double> p, const ModelParams& params,
                     std::span<double> rho_a) {
  assert(rho_a.size() == p.size());
  const double stim = params.stimulated_rate();
  const double local = params.lambda_a + params.big_gamma;
  for (std::size_t i = 0; i < p.size(); ++i) {
    rho_a[i] = params.lambda_a * p[i] / (local + stim * (static_cast<double>(i) + 1.0));
  }
}

void class_a_like_rhs(std::span<const double> p, const ModelParams& params,
                      std::span<double> d_p) {
  const std::size_t size = p.size();
  assert(d_p.size() == size);
  if (size == 0) return;
  const double stim = params.stimulated_rate();
  const double gain = stim * static_cast<double>(params.n_atoms);
  const double local = params.lambda_a + params.big_gamma;
  const double lambda = params.lambda_a;
  const double kappa = params.kappa;

  double r_prev = 0.0;
  for (std::size_t i = 0; i < size; ++i) {
    const double n = static_cast<double>(i);
    const double q_next = i + 1 < size ? p[i + 1] : 0.0;
    const double r = lambda * p[i] / (local + stim * (n + 1.0));
    d_p[i] = gain * (n * r_prev - (n + 1.0) * r) + kappa * ((n + 1.0) * q_next - n * p[i]);
    r_prev = r;
  }
}

StateDerivative rhs_class_b(const LaserState& state, const ModelParams& params,
                            const DenominatorFloor& floor) {
  StateDerivative out{std::vector<double>(state.size()), std::vector<double>(state.size())};
  class_b_rhs(state.rho_a(), state.p(), params, floor.resolve(state.p()), out.d_rho_a, out.d_p);
  for (std::size_t i = 0; i < state.size(); ++i) {
    if (!std::isfinite(out.d_rho_a[i]) || !std::isfinite(out.d_p[i])) {
      throw NumericalError("rhs_class_b: non-finite derivative at n=" + std::to_string(i) +
                           "; check cutoff and step size");
    }
  }
  return out;
}

std::vector<double> adiabatic_rho_a(std::span<const double> p, const ModelParams& params) {
  std::vector<double> out(p.size());
  adiabatic_rho_a(p, params, out);
  return out;
}

std::vector<double> rhs_class_a_like(std::span<const double> p, const ModelParams& params) {
  std::vector<double> out(p.size());
  class_a_like_rhs(p, params, out);
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!std::isfinite(out[i])) {
      throw NumericalError("rhs_class_a_like: non-finite derivative at n=" + std::to_string(i));
    }
  }
  return out;
}

}  // namespace classb
