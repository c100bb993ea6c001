#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace classb {

/// Physical parameterization of the four-level class-B laser. Rates are in
/// units of the spontaneous a->b rate (big_gamma = 1 fixes the time unit).
struct ModelParams {
  double kappa = 100.0;      ///< cavity loss rate
  double gamma_h = 1.0e4;    ///< pure dephasing rate
  double big_gamma = 1.0;    ///< spontaneous a->b rate
  double g = 10.0;           ///< light-matter coupling
  std::int64_t n_atoms = 1;  ///< atom count N
  double lambda_a = 0.0;     ///< pump rate

  /// Throws ConfigError unless rates >= 0, g > 0, gamma_h > 0, N >= 1.
  void validate() const;

  /// 2g^2/gamma_h, the single-atom stimulated emission rate per photon.
  double stimulated_rate() const { return 2.0 * g * g / gamma_h; }

  /// Informational: gamma_h >> kappa > big_gamma.
  bool is_class_b_regime() const;
};

struct DerivedParams {
  double beta = 0.0;   ///< spontaneous emission factor, pump dependent
  double n_sat = 0.0;  ///< 1/beta (saturates at DBL_MAX instead of inf)
  double N_sat = 0.0;  ///< saturated population inversion kappa*gamma_h/(2g^2)
};

DerivedParams derived_params(const ModelParams& params);

enum class ModelKind { ClassB, ClassALike };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view text);

/// Diagonal reduced density matrix on the truncated Fock ladder n = 0..n_cut.
/// rho_a[n] is the joint probability (upper level, n photons), p[n] = P_n.
class LaserState {
 public:
  LaserState() = default;

  /// Validates 0 <= rho_a <= p (with a 1e-12 round-off allowance) and equal
  /// lengths. The trace is not checked here; see check_trace().
  LaserState(std::vector<double> rho_a, std::vector<double> p);

  /// Construct without invariant checks (integration results, theta seeds).
  static LaserState unchecked(std::vector<double> rho_a, std::vector<double> p);

  static LaserState vacuum(std::size_t n_cut);

  std::size_t n_cut() const { return p_.empty() ? 0 : p_.size() - 1; }
  std::size_t size() const { return p_.size(); }

  std::span<const double> rho_a() const { return rho_a_; }
  std::span<const double> p() const { return p_; }
  std::span<double> rho_a_mut() { return rho_a_; }
  std::span<double> p_mut() { return p_; }

  double trace() const;

  /// Zero-pads (or truncates) both ladders to the new cutoff.
  LaserState resized(std::size_t n_cut) const;

  /// Throws NumericalError when |trace - 1| > tolerance.
  void check_trace(double tolerance) const;

 private:
  std::vector<double> rho_a_;
  std::vector<double> p_;
};

struct StateDerivative {
  std::vector<double> d_rho_a;
  std::vector<double> d_p;
};

/// Floor below which P_n + P_{n+1} is treated as degenerate and the two-atom
/// term on that link is dropped. The effective floor is
/// max(absolute, relative * max_n P_n).
struct DenominatorFloor {
  double absolute = 1.0e-300;
  double relative = 0.0;

  double resolve(std::span<const double> p) const;
};

// Span kernels. Lengths must agree; outputs are overwritten.

void class_b_rhs(std::span<const double> rho_a, std::span<const double> p,
                 const ModelParams& params, double denominator_floor,
                 std::span<double> d_rho_a, std::span<double> d_p);

void adiabatic_rho_a(std::span<const double> p, const ModelParams& params,
                     std::span<double> rho_a);

void class_a_like_rhs(std::span<const double> p, const ModelParams& params,
                      std::span<double> d_p);

// Value-returning API.

StateDerivative rhs_class_b(const LaserState& state, const ModelParams& params,
                            const DenominatorFloor& floor = {});

std::vector<double> adiabatic_rho_a(std::span<const double> p, const ModelParams& params);

std::vector<double> rhs_class_a_like(std::span<const double> p, const ModelParams& params);

}  // namespace classb
