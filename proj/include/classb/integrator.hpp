#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "classb/model.hpp"

namespace classb {

enum class CutoffMode { Fixed, AutoGrow };

/// Starting point of steady_state(). The class-A-like seed is the closed-form
/// stationary distribution of the adiabatic model, which shares the
/// attractor's mean field and skips the switch-on transient (whose broad
/// thermal tail would otherwise force very large cutoffs).
enum class InitialCondition { Vacuum, ClassALikeSeed };

/// Fock truncation management. With AutoGrow the ladder is extended by
/// growth_factor (zero padded) whenever the probability held by the top
/// tail_rungs rungs exceeds tail_threshold.
struct CutoffPolicy {
  CutoffMode mode = CutoffMode::AutoGrow;
  std::size_t initial = 50;
  double tail_threshold = 1.0e-12;
  std::size_t tail_rungs = 5;
  double growth_factor = 1.5;
  std::size_t hard_limit = 10000;
};

struct IntegrationOptions {
  double step = 1.0e-5;     ///< RK4 step h
  double t_max = 100.0;     ///< horizon
  double tol_ss = 1.0e-10;  ///< steady state: max |d/dt| over the full state
  double trace_tol = 1.0e-6;
  CutoffPolicy cutoff;
  ModelKind model = ModelKind::ClassB;
  InitialCondition initial = InitialCondition::Vacuum;
  DenominatorFloor floor;
  std::size_t check_every = 100;  ///< steps between residual/tail checks

  void validate() const;
};

/// Classical fixed-step RK4 on a flat state vector. Buffers are reused across
/// steps; the derivative at the start of the last step is kept as k1.
class Rk4Stepper {
 public:
  explicit Rk4Stepper(std::size_t size = 0) { resize(size); }

  void resize(std::size_t size) {
    tmp_.assign(size, 0.0);
    k1_.assign(size, 0.0);
    k2_.assign(size, 0.0);
    k3_.assign(size, 0.0);
    k4_.assign(size, 0.0);
  }

  template <class System>
  void step(System&& system, std::span<double> x, double h) {
    const std::size_t size = x.size();
    const double h2 = 0.5 * h;
    const double h6 = h / 6.0;

    system(std::span<const double>(x), std::span<double>(k1_));
    for (std::size_t i = 0; i < size; ++i) tmp_[i] = x[i] + h2 * k1_[i];
    system(std::span<const double>(tmp_), std::span<double>(k2_));
    for (std::size_t i = 0; i < size; ++i) tmp_[i] = x[i] + h2 * k2_[i];
    system(std::span<const double>(tmp_), std::span<double>(k3_));
    for (std::size_t i = 0; i < size; ++i) tmp_[i] = x[i] + h * k3_[i];
    system(std::span<const double>(tmp_), std::span<double>(k4_));
    for (std::size_t i = 0; i < size; ++i) {
      x[i] += h6 * (k1_[i] + 2.0 * (k2_[i] + k3_[i]) + k4_[i]);
    }
  }

  std::span<const double> last_derivative() const { return k1_; }

 private:
  std::vector<double> tmp_, k1_, k2_, k3_, k4_;
};

/// Integrates one model on a fixed Fock ladder. Class-B keeps (rho_a | p)
/// packed in one buffer; class-A-like keeps p only and derives rho_a.
/// The state is not required to be normalized (theta evolution).
class Propagator {
 public:
  Propagator(const LaserState& initial, const ModelParams& params, ModelKind kind,
             DenominatorFloor floor = {});

  void step(double h);

  /// Steps of size <= h until exactly `duration` has elapsed.
  void advance(double duration, double h);

  /// Zero-pads the ladder.
  void grow(std::size_t n_cut);

  LaserState state() const;
  std::span<const double> p() const;

  /// max |d/dt| at the start of the last step (NaN if a NaN appeared).
  double last_residual() const;

  std::size_t n_cut() const { return n_cut_; }
  ModelKind kind() const { return kind_; }
  double time() const { return time_; }
  std::size_t steps() const { return steps_; }

 private:
  void system(std::span<const double> x, std::span<double> dx) const;

  ModelParams params_;
  ModelKind kind_;
  DenominatorFloor floor_;
  std::size_t n_cut_ = 0;
  std::vector<double> x_;
  Rk4Stepper stepper_;
  double time_ = 0.0;
  std::size_t steps_ = 0;
};

/// One RK4 step of the selected model. Throws NumericalError on NaN/Inf.
LaserState rk4_step(const LaserState& state, const ModelParams& params, double h,
                    ModelKind kind, const DenominatorFloor& floor = {});

struct TrajectorySample {
  double time = 0.0;
  LaserState state;
};

struct EvolveResult {
  std::vector<TrajectorySample> samples;
  LaserState final_state;
  double elapsed = 0.0;
  std::size_t steps = 0;
  bool converged = false;
  double max_residual = 0.0;  ///< max |d/dt| at the final check
  double trace_drift = 0.0;   ///< |Tr P - Tr P(0)| at the end
  double tail_mass = 0.0;     ///< probability on the top tail_rungs rungs
  double min_p = 0.0;         ///< most negative P_n seen at checks
  double max_excess = 0.0;    ///< max (rho_a_n - P_n) seen at checks
  std::size_t cutoff = 0;
};

/// Integrates from `initial` up to options.t_max, or until the steady-state
/// criterion holds when stop_at_steady_state is set. States are recorded at
/// every entry of sample_times (must be increasing and within t_max).
/// Non-convergence is reported, not thrown.
EvolveResult evolve(const LaserState& initial, const ModelParams& params,
                    const IntegrationOptions& options,
                    std::span<const double> sample_times = {},
                    bool stop_at_steady_state = true);

struct SteadyStateResult {
  LaserState state;
  double elapsed = 0.0;
  double max_residual = 0.0;
  double trace_drift = 0.0;
  double tail_mass = 0.0;
  std::size_t cutoff = 0;
  bool converged = false;
  double detailed_balance_residual = 0.0;
  ModelKind model = ModelKind::ClassB;
};

/// Stationary distribution of the class-A-like model from its detailed-balance
/// ladder P_n / P_{n-1} = (2g^2 N lambda_a / gamma_h) / (kappa (lambda_a + Gamma
/// + 2g^2 n / gamma_h)), with rho_a from the adiabatic formula. The ladder is
/// cut where the top tail_rungs rungs hold less than tail_threshold (at least
/// policy.initial). Throws NumericalError past hard_limit.
LaserState class_a_like_seed(const ModelParams& params, const CutoffPolicy& policy);

/// Evolves from options.initial (vacuum by default) until the residual, trace and tail criteria hold.
/// Throws NumericalError if the cutoff would have to grow past hard_limit.
SteadyStateResult steady_state(const ModelParams& params, const IntegrationOptions& options);

}  // namespace classb
