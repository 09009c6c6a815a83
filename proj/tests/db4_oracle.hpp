#ifndef SWEC_TESTS_DB4_ORACLE_HPP
#define SWEC_TESTS_DB4_ORACLE_HPP

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

namespace swec::test {

/// Daubechies spectral factorization for p vanishing moments, independent of the table
/// in the library: roots of the Bezout polynomial, minimum-phase selection, expansion.
inline std::vector<double> daubechies_scaling(int p) {
  using C = std::complex<double>;
  // P(y) = sum_k binom(p-1+k, k) y^k; roots via the companion matrix.
  std::vector<double> coef(p);
  for (int k = 0; k < p; ++k) {
    double b = 1.0;
    for (int j = 1; j <= k; ++j) b = b * (p - 1 + j) / j;
    coef[k] = b;
  }
  const int deg = p - 1;
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(deg, deg);
  for (int i = 1; i < deg; ++i) companion(i, i - 1) = 1.0;
  for (int i = 0; i < deg; ++i) companion(i, deg - 1) = -coef[i] / coef[deg];
  const Eigen::VectorXcd yroots = Eigen::EigenSolver<Eigen::MatrixXd>(companion).eigenvalues();

  // y = (2 - z - 1/z) / 4  =>  z^2 - (2 - 4y) z + 1 = 0; keep the root inside the unit circle.
  std::vector<C> poly{C(1.0)};
  auto multiply = [&](C root) {
    std::vector<C> next(poly.size() + 1, C(0.0));
    for (std::size_t i = 0; i < poly.size(); ++i) {
      next[i + 1] += poly[i];
      next[i] -= root * poly[i];
    }
    poly = next;
  };
  for (int i = 0; i < deg; ++i) {
    const C y = yroots(i);
    const C b = 2.0 - 4.0 * y;
    const C disc = std::sqrt(b * b - 4.0);
    C z = (b + disc) / 2.0;
    if (std::abs(z) >= 1.0) z = (b - disc) / 2.0;
    multiply(z);
  }
  for (int i = 0; i < p; ++i) multiply(C(-1.0));

  std::vector<double> h(poly.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    h[i] = poly[i].real();
    sum += h[i];
  }
  for (double& v : h) v *= std::numbers::sqrt2 / sum;
  // Conventional tap order starts at the large end of the minimum-phase filter.
  if (std::abs(h.front()) < std::abs(h.back())) std::reverse(h.begin(), h.end());
  return h;
}

}  // namespace swec::test

#endif  // SWEC_TESTS_DB4_ORACLE_HPP
