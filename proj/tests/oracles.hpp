#pragma once

// Reference computations that avoid the library's code paths: Eigen's QR
// eigensolver instead of Jacobi, Denman-Beavers iteration instead of
// spectral square roots, closed forms for commuting covariances, and
// finite differences.

#include <Eigen/Dense>

#include <cmath>
#include <random>
#include <vector>

namespace oracle {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Eigenvalues, nonincreasing, from Eigen's tridiagonal QR solver.
inline Vector eigenvalues(const Matrix& a) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (a + a.transpose()), Eigen::EigenvaluesOnly);
  return solver.eigenvalues().reverse();
}

/// Principal square root by the Denman-Beavers iteration (no eigenvectors).
inline Matrix sqrt_db(const Matrix& a, int iters = 100) {
  Matrix y = a;
  Matrix z = Matrix::Identity(a.rows(), a.cols());
  for (int k = 0; k < iters; ++k) {
    const Matrix y_next = 0.5 * (y + z.inverse());
    const Matrix z_next = 0.5 * (z + y.inverse());
    if ((y_next - y).norm() <= 1e-15 * y.norm()) {
      y = y_next;
      break;
    }
    y = y_next;
    z = z_next;
  }
  return 0.5 * (y + y.transpose());
}

/// W2^2 between centered Gaussians through Denman-Beavers roots.
inline double w2_sq(const Matrix& a, const Matrix& b) {
  const Matrix ra = sqrt_db(a);
  return a.trace() + b.trace() - 2.0 * sqrt_db(ra * b * ra).trace();
}

/// Transport matrix through Denman-Beavers roots and a plain inverse.
inline Matrix transport(const Matrix& a, const Matrix& b) {
  const Matrix ra = sqrt_db(a);
  const Matrix ira = ra.inverse();
  return ira * sqrt_db(ra * b * ra) * ira;
}

/// Barycenter of commuting (diagonal) covariances: (sum_i w_i Sigma_i^{1/2})^2.
inline Matrix diagonal_barycenter(const std::vector<Vector>& diagonals,
                                  const std::vector<double>& weights) {
  Vector root = Vector::Zero(diagonals.front().size());
  for (std::size_t i = 0; i < diagonals.size(); ++i) {
    root += weights[i] * diagonals[i].cwiseSqrt();
  }
  return Matrix(root.cwiseProduct(root).asDiagonal());
}

/// G(b) for centered Gaussians via the oracle distance.
inline double objective(const std::vector<Matrix>& atoms, const std::vector<double>& weights,
                        const Matrix& b) {
  double total = 0.0;
  for (std::size_t i = 0; i < atoms.size(); ++i) total += weights[i] * w2_sq(b, atoms[i]);
  return 0.5 * total;
}

/// Test-local SPD generator: eigenvalues uniform in [lo, hi], Haar rotation.
inline Matrix random_spd(std::mt19937_64& gen, int dim, double lo, double hi) {
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(lo, hi);
  Matrix g(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) g(i, j) = normal(gen);
  Eigen::HouseholderQR<Matrix> qr(g);
  const Matrix q = qr.householderQ();
  Vector values(dim);
  for (int i = 0; i < dim; ++i) values(i) = unif(gen);
  const Matrix out = q * values.asDiagonal() * q.transpose();
  return 0.5 * (out + out.transpose());
}

inline Matrix random_symmetric(std::mt19937_64& gen, int dim, double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Matrix g(dim, dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) g(i, j) = normal(gen);
  return 0.5 * (g + g.transpose());
}

}  // namespace oracle
