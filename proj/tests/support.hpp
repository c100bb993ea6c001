#pragma once

// Independent reference implementations used as test oracles. They are
// written straight from the equations of motion, with explicit bounds checks
// instead of the production code's streaming loop.

#include <Eigen/Dense>

#include <cstddef>
#include <random>
#include <vector>

#include "classb/model.hpp"

namespace oracle {

inline double at(const std::vector<double>& v, long i) {
  return (i < 0 || i >= static_cast<long>(v.size())) ? 0.0 : v[static_cast<std::size_t>(i)];
}

struct Rhs {
  std::vector<double> d_rho_a, d_p;
};

inline Rhs class_b(const std::vector<double>& r, const std::vector<double>& p,
                   const classb::ModelParams& m) {
  const double a = 2.0 * m.g * m.g / m.gamma_h;
  const double big_n = static_cast<double>(m.n_atoms);
  auto f = [&](long n) {
    const double den = at(p, n) + at(p, n + 1);
    if (den <= 0.0) return 0.0;
    return at(r, n) * (at(r, n) + at(r, n + 1)) / den;
  };
  Rhs out;
  const long size = static_cast<long>(p.size());
  for (long i = 0; i < size; ++i) {
    const double n = static_cast<double>(i);
    const double dr = m.lambda_a * at(p, i) - (m.lambda_a + m.big_gamma + a * (n + 1)) * at(r, i) +
                      m.kappa * (n + 1) * at(r, i + 1) - m.kappa * n * at(r, i) +
                      a * (big_n - 1) * (n * f(i - 1) - (n + 1) * f(i));
    const double dp = a * big_n * (n * at(r, i - 1) - (n + 1) * at(r, i)) +
                      m.kappa * (n + 1) * at(p, i + 1) - m.kappa * n * at(p, i);
    out.d_rho_a.push_back(dr);
    out.d_p.push_back(dp);
  }
  return out;
}

/// Linear generator of the N=1 system on x = (rho_0..rho_M, P_0..P_M).
inline Eigen::MatrixXd n1_generator(const classb::ModelParams& m, std::size_t n_cut) {
  const long size = static_cast<long>(n_cut) + 1;
  const double a = 2.0 * m.g * m.g / m.gamma_h;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2 * size, 2 * size);
  for (long i = 0; i < size; ++i) {
    const double n = static_cast<double>(i);
    const long ri = i;
    const long pi = size + i;
    A(ri, pi) += m.lambda_a;
    A(ri, ri) -= m.lambda_a + m.big_gamma + a * (n + 1) + m.kappa * n;
    if (i + 1 < size) A(ri, ri + 1) += m.kappa * (n + 1);
    if (i >= 1) A(pi, ri - 1) += a * n;
    A(pi, ri) -= a * (n + 1);
    if (i + 1 < size) A(pi, pi + 1) += m.kappa * (n + 1);
    A(pi, pi) -= m.kappa * n;
  }
  return A;
}

/// Random state with 0 <= rho <= P, sum P = 1, zero on the top `empty` rungs.
inline void random_state(std::mt19937_64& rng, std::size_t n_cut, std::size_t empty,
                         std::vector<double>& r, std::vector<double>& p) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  r.assign(n_cut + 1, 0.0);
  p.assign(n_cut + 1, 0.0);
  double sum = 0.0;
  for (std::size_t i = 0; i + empty <= n_cut; ++i) {
    p[i] = u(rng) + 1e-3;
    sum += p[i];
  }
  for (std::size_t i = 0; i <= n_cut; ++i) {
    p[i] /= sum;
    r[i] = u(rng) * p[i];
  }
}

}  // namespace oracle
