#include <doctest.h>

#include <cmath>
#include <complex>

#include "classb/analytics.hpp"
#include "classb/errors.hpp"
#include "classb/model.hpp"

using namespace classb;

namespace {

const ModelParams kSingle{100, 1e3, 1, 10, 1, 0.0};
const ModelParams kThermo{100, 1e4, 1, 1, 1000000, 0.0};
const ModelParams kNano{10, 1e3, 1, 50, 10, 0.0};
const ModelParams kMeso{100, 1e4, 1, 10, 100000, 0.0};

// beta(lambda) of the four-level model, written out independently
double beta_of(const ModelParams& m, double lambda) {
  const double a = 2.0 * m.g * m.g / m.gamma_h;
  return a / (lambda + m.big_gamma + a);
}

}  // namespace

TEST_SUITE("analytics") {

TEST_CASE("class-A-like threshold values") {
  CHECK(class_a_like_threshold(kMeso).value() == doctest::Approx(0.0536842).epsilon(1e-6));
  CHECK(class_a_like_threshold(kNano).value() == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(class_a_like_threshold(kThermo).value() == doctest::Approx(1.0002).epsilon(1e-12));
  CHECK_FALSE(class_a_like_threshold(kSingle).has_value());

  // N = N_sat exactly: still no threshold
  ModelParams edge = kNano;
  edge.n_atoms = 2;
  CHECK_FALSE(class_a_like_threshold(edge).has_value());
}

TEST_CASE("threshold satisfies the gain-loss balance") {
  for (const ModelParams& m : {kMeso, kNano, kThermo}) {
    const double lam = class_a_like_threshold(m).value();
    const double n = static_cast<double>(m.n_atoms);
    CHECK(m.kappa / (n * beta_of(m, lam)) == doctest::Approx(lam).epsilon(1e-10));
  }
}

TEST_CASE("xi roots solve the underlying quadratic") {
  for (const ModelParams& m : {kMeso, kNano, kThermo, kSingle}) {
    const auto q = xi_quadratic(m);
    const double c = m.g * m.g;
    CHECK(q.disc == doctest::Approx(q.b * q.b - 4.0 * q.a * c).epsilon(1e-12));
    const auto [xm, xp] = xi_roots(m);
    for (const auto& x : {xm, xp}) {
      const std::complex<double> r = q.a * x * x - q.b * x + c;
      CHECK(std::abs(r) <= 1e-12 * (std::abs(q.a * x * x) + std::abs(q.b * x) + c));
    }
  }
}

TEST_CASE("xi roots: complex in the mesoscopic case, real in the thermodynamic one") {
  const auto [mm, mp] = xi_roots(kMeso);
  CHECK(mm.imag() != 0.0);
  CHECK(mp.imag() == doctest::Approx(-mm.imag()));
  const auto [tm, tp] = xi_roots(kThermo);
  CHECK(tm.imag() == 0.0);
  CHECK(tp.imag() == 0.0);
  CHECK(tm.real() == doctest::Approx(1.0319509e-4).epsilon(1e-6));
}

TEST_CASE("xi in the single-atom weak-loss limit") {
  ModelParams m = kSingle;
  m.kappa = 1e-9;
  // with N = 1 and kappa -> 0 the quadratic has the roots g^2/(4g^2 + Gamma gamma_h) and 1
  const auto [xm, xp] = xi_roots(m);
  CHECK(xm.real() == doctest::Approx(m.g * m.g / (4 * m.g * m.g + m.big_gamma * m.gamma_h)).epsilon(1e-6));
  CHECK(xm.real() == doctest::Approx(0.0714286).epsilon(1e-5));
  CHECK(xp.real() == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("degenerate leading coefficient") {
  // a = 4g^2 + 7 k gh (N-1)/N + G gh - 4 k gh vanishes for N = 1 when 4 k gh = 4 g^2 + G gh
  ModelParams m{1.0, 4.0, 1.0, 1.0, 1, 0.0};
  m.kappa = (4.0 * m.g * m.g + m.big_gamma * m.gamma_h) / (4.0 * m.gamma_h);
  CHECK(std::abs(xi_quadratic(m).a) < 1e-12);
  CHECK_THROWS_AS(xi_roots(m), NumericalError);
}

TEST_CASE("threshold correction") {
  // xi = 0 and N -> infinity: the correction vanishes
  ModelParams big = kMeso;
  big.n_atoms = 1000000000000LL;
  CHECK(std::abs(threshold_correction(big, 0.0)) < 1e-9);

  // N = 1 with N_sat < 1
  ModelParams one{0.1, 1.0, 1.0, 1.0, 1, 0.0};
  const double n_sat = one.kappa * one.gamma_h / (2.0 * one.g * one.g);
  REQUIRE(n_sat < 1.0);
  for (double xi : {0.1, 0.5, 0.8}) {
    CHECK(threshold_correction(one, xi) ==
          doctest::Approx(one.kappa * n_sat * (2 * xi - 1) / (1 - n_sat)).epsilon(1e-14));
  }
  CHECK_THROWS_AS(threshold_correction(kSingle, 0.1), NumericalError);
}

TEST_CASE("class-B threshold estimate") {
  const auto meso = class_b_threshold_estimate(kMeso);
  REQUIRE(meso.exists);
  CHECK(meso.lambda_th0 == doctest::Approx(0.0536842).epsilon(1e-6));
  CHECK(meso.xi_used == doctest::Approx(meso.xi_minus.real()));
  CHECK(meso.delta1 == doctest::Approx(0.0090914).epsilon(1e-4));
  CHECK(meso.lambda_th1 == doctest::Approx(0.0627756).epsilon(1e-4));
  CHECK(meso.N_sat == doctest::Approx(5000.0));

  const auto thermo = class_b_threshold_estimate(kThermo);
  REQUIRE(thermo.exists);
  const double b = thermo.N_sat / static_cast<double>(kThermo.n_atoms);
  const double approx = kThermo.kappa * thermo.xi_used * b / (1.0 - b);
  CHECK(std::abs(approx - thermo.delta1) <= 0.05 * std::abs(thermo.delta1));
  CHECK(std::abs(thermo.delta1 / thermo.lambda_th0) < 0.05);

  const auto none = class_b_threshold_estimate(kSingle);
  CHECK_FALSE(none.exists);
  CHECK(none.N_sat == doctest::Approx(500.0));
}

TEST_CASE("numeric threshold argument checks") {
  NumericThresholdOptions o;
  CHECK_THROWS_AS(numeric_threshold(kSingle, o), NumericalError);
  o.rel_tol = 0.0;
  CHECK_THROWS_AS(numeric_threshold(kNano, o), ConfigError);
  o = {};
  o.lower = 2.0;
  o.upper = 1.0;
  CHECK_THROWS_AS(numeric_threshold(kNano, o), ConfigError);
}

TEST_CASE("class-A exact distribution") {
  const ClassAParams generic{0.1, 1.0, 1.0, 0.05, 100, 2.0};
  const auto p = class_a_exact_distribution(generic, 3000);
  CHECK(p[1] / p[0] == doctest::Approx(3.30033).epsilon(1e-5));
  double sum = 0.0;
  for (double v : p) sum += v;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-13));

  ClassAParams off = generic;
  off.lambda_a = 0.0;
  CHECK(class_a_exact_distribution(off, 10)[0] == 1.0);
  off.lambda_a = 1e-9;
  CHECK(class_a_exact_distribution(off, 10)[0] == doctest::Approx(1.0).epsilon(1e-6));

  // the P0 = P1 threshold really gives P1 = P0
  const auto th = class_a_thresholds(generic);
  REQUIRE(th.lambda_p0p1.has_value());
  ClassAParams at = generic;
  at.lambda_a = *th.lambda_p0p1;
  const auto q = class_a_exact_distribution(at, 3000);
  CHECK(q[1] / q[0] == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_THROWS_AS(class_a_exact_distribution(generic, 50), NumericalError);
  ClassAParams bad = generic;
  bad.kappa = 0.0;
  CHECK_THROWS_AS(class_a_exact_distribution(bad, 10), ConfigError);
}

TEST_CASE("class-A thresholds") {
  const ClassAParams half{0.1, 1.0, 1.0, 0.5, 100, 1.0};
  CHECK(class_a_thresholds(half).beta0 == doctest::Approx(0.5).epsilon(1e-15));

  // 4g^2 / (gamma gamma_h) = 1e-3: the two thresholds coincide to 1%
  ClassAParams thermo{0.1, 1.0, 1.0, std::sqrt(0.25e-3), 1000, 1.0};
  const auto t = class_a_thresholds(thermo);
  REQUIRE(t.lambda_sc.has_value());
  REQUIRE(t.lambda_p0p1.has_value());
  CHECK(std::abs(*t.lambda_sc - *t.lambda_p0p1) <= 0.01 * *t.lambda_sc);

  // a strongly coupled emitter separates them
  const auto s = class_a_thresholds(half);
  REQUIRE(s.lambda_sc.has_value());
  REQUIRE(s.lambda_p0p1.has_value());
  CHECK(*s.lambda_p0p1 > 1.5 * *s.lambda_sc);

  // pump saturates at N gamma: too few atoms means no threshold
  ClassAParams few = thermo;
  few.n_atoms = 100;
  const auto f = class_a_thresholds(few);
  CHECK_FALSE(f.lambda_sc.has_value());
  CHECK_FALSE(f.lambda_p0p1.has_value());
}

}  // TEST_SUITE
