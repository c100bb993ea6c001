#include <doctest.h>

#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "classb/errors.hpp"
#include "classb/model.hpp"
#include "support.hpp"

using namespace classb;

namespace {

ModelParams small_params(std::int64_t n_atoms, double lambda_a) {
  return ModelParams{1.0, 10.0, 1.0, 1.0, n_atoms, lambda_a};
}

double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("parameter validation") {
  CHECK_NOTHROW(ModelParams{}.validate());
  CHECK_THROWS_AS((ModelParams{-1.0, 1e4, 1, 10, 1, 0}.validate()), ConfigError);
  CHECK_THROWS_AS((ModelParams{100, 0.0, 1, 10, 1, 0}.validate()), ConfigError);
  CHECK_THROWS_AS((ModelParams{100, 1e4, 1, 0.0, 1, 0}.validate()), ConfigError);
  CHECK_THROWS_AS((ModelParams{100, 1e4, 1, 10, 0, 0}.validate()), ConfigError);
  CHECK_THROWS_AS((ModelParams{100, 1e4, 1, 10, 1, -0.5}.validate()), ConfigError);
  CHECK_THROWS_AS((ModelParams{100, 1e4, std::nan(""), 10, 1, 0}.validate()), ConfigError);
}

TEST_CASE("class-B regime flag is informational") {
  CHECK(ModelParams{100, 1e4, 1, 10, 1, 0}.is_class_b_regime());
  CHECK_FALSE(ModelParams{0.5, 1e4, 1, 10, 1, 0}.is_class_b_regime());
}

TEST_CASE("derived parameters") {
  SUBCASE("single-atom saturation inversion") {
    CHECK(derived_params({100, 1e3, 1, 10, 1, 0}).N_sat == doctest::Approx(500.0).epsilon(1e-15));
  }
  SUBCASE("mesoscopic values at zero pump") {
    const auto d = derived_params({100, 1e4, 1, 10, 100000, 0});
    CHECK(d.beta == doctest::Approx(200.0 / 10200.0).epsilon(1e-15));
    CHECK(d.N_sat == doctest::Approx(5000.0).epsilon(1e-15));
    CHECK(d.n_sat * d.beta == doctest::Approx(1.0).epsilon(1e-15));
  }
  SUBCASE("vanishing coupling keeps n_sat finite") {
    const auto d = derived_params({100, 1e4, 1, 1e-9, 1, 0.3});
    CHECK(d.beta > 0.0);
    CHECK(d.beta < 1e-20);
    CHECK(std::isfinite(d.n_sat));
    CHECK(d.n_sat > 1e20);
  }
  SUBCASE("beta depends on the pump") {
    const auto lo = derived_params({100, 1e4, 1, 10, 1, 0.0});
    const auto hi = derived_params({100, 1e4, 1, 10, 1, 1.0});
    CHECK(hi.beta < lo.beta);
    CHECK(hi.beta == doctest::Approx(200.0 / (200.0 + 2.0e4)).epsilon(1e-15));
  }
}

TEST_CASE("model kind names") {
  CHECK(to_string(ModelKind::ClassB) == "classb");
  CHECK(to_string(ModelKind::ClassALike) == "classa");
  CHECK(parse_model_kind("classa") == ModelKind::ClassALike);
  CHECK(parse_model_kind("classb") == ModelKind::ClassB);
  CHECK_THROWS_AS(parse_model_kind("class-c"), ConfigError);
}

TEST_CASE("LaserState invariants") {
  CHECK_NOTHROW(LaserState({0.1, 0.0}, {0.5, 0.5}));
  CHECK_THROWS_AS(LaserState({0.6, 0.0}, {0.5, 0.5}), ConfigError);
  CHECK_THROWS_AS(LaserState({0.0, 0.0}, {-0.1, 1.1}), ConfigError);
  CHECK_THROWS_AS(LaserState({0.0}, {0.5, 0.5}), ConfigError);
  CHECK_THROWS_AS(LaserState({}, {}), ConfigError);
  // round-off above P is tolerated
  CHECK_NOTHROW(LaserState({0.5 + 5e-13, 0.0}, {0.5, 0.5}));

  const auto vac = LaserState::vacuum(4);
  CHECK(vac.n_cut() == 4);
  CHECK(vac.size() == 5);
  CHECK(vac.trace() == 1.0);
  CHECK_NOTHROW(vac.check_trace(1e-12));

  const auto grown = vac.resized(9);
  CHECK(grown.size() == 10);
  CHECK(grown.p()[0] == 1.0);
  CHECK(grown.p()[9] == 0.0);

  const auto off = LaserState::unchecked({0, 0}, {0.5, 0.4});
  CHECK_THROWS_AS(off.check_trace(1e-6), NumericalError);
}

TEST_CASE("vacuum is a fixed point without pump") {
  const auto vac = LaserState::vacuum(10);
  const auto d = rhs_class_b(vac, {100, 1e4, 1, 10, 100000, 0.0});
  CHECK(max_abs(d.d_rho_a) == 0.0);
  CHECK(max_abs(d.d_p) == 0.0);
  const auto da = rhs_class_a_like(vac.p(), {100, 1e4, 1, 10, 100000, 0.0});
  CHECK(max_abs(da) == 0.0);
}

TEST_CASE("hand-evaluated derivative with two atoms") {
  const LaserState s({0.3, 0.0, 0.0}, {1.0, 0.0, 0.0});
  const auto d = rhs_class_b(s, small_params(2, 0.0));
  CHECK(d.d_p[0] == doctest::Approx(-0.12).epsilon(1e-14));
  CHECK(d.d_p[1] == doctest::Approx(0.12).epsilon(1e-14));
  CHECK(d.d_p[2] == 0.0);
  // -0.36 local decay, -0.018 two-atom drain
  CHECK(d.d_rho_a[0] == doctest::Approx(-0.378).epsilon(1e-14));
}

TEST_CASE("agrees with the reference implementation on random states") {
  std::mt19937_64 rng(7);
  for (std::int64_t n_atoms : {1, 2, 5, 1000}) {
    const ModelParams m{3.0, 40.0, 1.0, 2.0, n_atoms, 0.7};
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<double> r, p;
      oracle::random_state(rng, 12, trial % 3, r, p);
      const auto want = oracle::class_b(r, p, m);
      const auto got = rhs_class_b(LaserState::unchecked(r, p), m);
      const double scale = std::max(max_abs(want.d_p), max_abs(want.d_rho_a));
      for (std::size_t i = 0; i < p.size(); ++i) {
        CHECK(std::abs(got.d_p[i] - want.d_p[i]) <= 1e-13 * scale);
        CHECK(std::abs(got.d_rho_a[i] - want.d_rho_a[i]) <= 1e-13 * scale);
      }
    }
  }
}

TEST_CASE("degree-1 homogeneity") {
  std::mt19937_64 rng(11);
  const ModelParams m{100, 1e4, 1, 10, 100000, 0.15};
  for (double c : {2.0, 0.37, 1234.5, 1e-6}) {
    std::vector<double> r, p;
    oracle::random_state(rng, 30, 0, r, p);
    const auto base = rhs_class_b(LaserState::unchecked(r, p), m);
    for (auto& x : r) x *= c;
    for (auto& x : p) x *= c;
    const auto scaled = rhs_class_b(LaserState::unchecked(r, p), m);
    const double scale = c * std::max(max_abs(base.d_p), max_abs(base.d_rho_a));
    for (std::size_t i = 0; i < p.size(); ++i) {
      CHECK(std::abs(scaled.d_p[i] - c * base.d_p[i]) <= 4e-15 * scale);
      CHECK(std::abs(scaled.d_rho_a[i] - c * base.d_rho_a[i]) <= 4e-15 * scale);
    }
  }
}

TEST_CASE("single atom: right-hand side is linear") {
  std::mt19937_64 rng(3);
  const ModelParams m{100, 1e3, 1, 10, 1, 1.0};
  const std::size_t n_cut = 15;
  const auto A = oracle::n1_generator(m, n_cut);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> r, p;
    oracle::random_state(rng, n_cut, 0, r, p);
    Eigen::VectorXd x(2 * (n_cut + 1));
    for (std::size_t i = 0; i <= n_cut; ++i) {
      x(static_cast<long>(i)) = r[i];
      x(static_cast<long>(n_cut + 1 + i)) = p[i];
    }
    const Eigen::VectorXd want = A * x;
    const auto got = rhs_class_b(LaserState::unchecked(r, p), m);
    const double scale = want.cwiseAbs().maxCoeff();
    for (std::size_t i = 0; i <= n_cut; ++i) {
      CHECK(std::abs(got.d_rho_a[i] - want(static_cast<long>(i))) <= 1e-13 * scale);
      CHECK(std::abs(got.d_p[i] - want(static_cast<long>(n_cut + 1 + i))) <= 1e-13 * scale);
    }
  }
}

TEST_CASE("trace is conserved when the top two rungs are empty") {
  std::mt19937_64 rng(5);
  for (std::int64_t n_atoms : {1, 10, 100000}) {
    const ModelParams m{100, 1e4, 1, 10, n_atoms, 0.2};
    std::vector<double> r, p;
    oracle::random_state(rng, 40, 2, r, p);
    const auto d = rhs_class_b(LaserState::unchecked(r, p), m);
    const double total = std::accumulate(d.d_p.begin(), d.d_p.end(), 0.0);
    CHECK(std::abs(total) <= 1e-12 * max_abs(d.d_p));
    const auto da = rhs_class_a_like(p, m);
    CHECK(std::abs(std::accumulate(da.begin(), da.end(), 0.0)) <= 1e-12 * max_abs(da));
  }
}

TEST_CASE("gain flux telescopes to the ladder boundary") {
  std::mt19937_64 rng(9);
  const ModelParams m{100, 1e4, 1, 10, 50, 0.4};
  std::vector<double> r, p;
  oracle::random_state(rng, 20, 0, r, p);
  // Without cavity loss only the gain ladder is left in dP.
  ModelParams no_loss = m;
  no_loss.kappa = 0.0;
  const auto d = rhs_class_b(LaserState::unchecked(r, p), no_loss);
  const double total = std::accumulate(d.d_p.begin(), d.d_p.end(), 0.0);
  const double gain = m.stimulated_rate() * static_cast<double>(m.n_atoms);
  CHECK(total == doctest::Approx(-gain * 21.0 * r[20]).epsilon(1e-12));

  // Photon gain rate equals gain * sum (n+1) rho_n minus the same, shifted.
  double up = 0.0;
  for (std::size_t n = 0; n < p.size(); ++n) up += d.d_p[n] * static_cast<double>(n);
  double expected = 0.0;
  for (std::size_t n = 0; n + 1 < p.size(); ++n) expected += gain * static_cast<double>(n + 1) * r[n];
  expected -= gain * 20.0 * 21.0 * r[20];
  CHECK(up == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("degenerate denominators drop the pair term") {
  const ModelParams m{1, 10, 1, 1, 4, 0.5};
  const LaserState s = LaserState::unchecked({0.2, 0.0, 0.0, 0.0}, {1.0, 0.0, 0.0, 0.0});
  const auto d = rhs_class_b(s, m);
  for (double v : d.d_rho_a) CHECK(std::isfinite(v));
  for (double v : d.d_p) CHECK(std::isfinite(v));
  CHECK(d.d_rho_a[2] == 0.0);

  // A relative floor removes links that are tiny relative to the peak.
  const LaserState tail = LaserState::unchecked({0.2, 1e-20, 0.0}, {0.9, 1e-20, 1e-20});
  const auto loose = rhs_class_b(tail, m, {1e-300, 0.0});
  const auto strict = rhs_class_b(tail, m, {1e-300, 1e-16});
  CHECK(loose.d_rho_a[2] != strict.d_rho_a[2]);
  CHECK(loose.d_rho_a[0] == strict.d_rho_a[0]);
}

TEST_CASE("non-finite input is a hard error") {
  const ModelParams m{1, 10, 1, 1, 4, 0.5};
  const auto bad = LaserState::unchecked({0.0, std::nan("")}, {1.0, 0.0});
  CHECK_THROWS_AS(rhs_class_b(bad, m), NumericalError);
  const std::vector<double> p{std::numeric_limits<double>::infinity(), 0.0};
  CHECK_THROWS_AS(rhs_class_a_like(p, m), NumericalError);
}

TEST_CASE("adiabatic upper-level occupation") {
  const ModelParams m{1, 10, 1, 1, 1, 1.0};
  const std::vector<double> vac{1.0, 0.0};
  CHECK(adiabatic_rho_a(vac, m)[0] == doctest::Approx(1.0 / 2.2).epsilon(1e-15));

  ModelParams off = m;
  off.lambda_a = 0.0;
  const std::vector<double> p{0.2, 0.3, 0.5};
  for (double v : adiabatic_rho_a(p, off)) CHECK(v == 0.0);
  const auto rho = adiabatic_rho_a(p, m);
  for (std::size_t n = 0; n < p.size(); ++n) {
    CHECK(rho[n] >= 0.0);
    CHECK(rho[n] < p[n]);
  }
}

TEST_CASE("class-A-like detailed-balance ladder is stationary") {
  const ModelParams m{100, 1e4, 1, 10, 100000, 0.03};
  const double a = m.stimulated_rate();
  const std::size_t n_cut = 400;
  std::vector<double> p(n_cut + 1);
  p[0] = 1.0;
  for (std::size_t n = 1; n <= n_cut; ++n) {
    p[n] = p[n - 1] * (a * 100000.0 * m.lambda_a / m.kappa) /
           (m.lambda_a + m.big_gamma + a * static_cast<double>(n));
  }
  const double sum = std::accumulate(p.begin(), p.end(), 0.0);
  for (auto& v : p) v /= sum;
  REQUIRE(p.back() < 1e-40);
  const auto d = rhs_class_a_like(p, m);
  CHECK(max_abs(d) <= 1e-14 * m.kappa);
}

}  // TEST_SUITE
