#pragma once

// Dense symmetric linear algebra on the cone of positive (semi)definite
// matrices: eigendecomposition, square roots, log-determinant, operator norm.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <vector>

#include "bures/error.hpp"

namespace bures {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Eigenvalues below -psd_tolerance are treated as genuinely negative.
inline double psd_tolerance(double opnorm) {
  return 1e-10 * std::max(1.0, opnorm);
}

/// Smallest eigenvalue accepted by inversions.
inline constexpr double kPdFloor = 1e-12;

/// Relative asymmetry accepted when validating user-supplied matrices.
inline constexpr double kSymmetryTol = 1e-12;

/// Sweep budget of the Jacobi eigensolver.
inline constexpr int kEigenSweeps = 100;

inline Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

struct EigenDecomposition {
  Vector values;   // nonincreasing
  Matrix vectors;  // orthonormal columns, vectors.col(i) pairs with values(i)
};

/// Symmetric eigendecomposition by cyclic Jacobi rotations, eigenvalues
/// sorted nonincreasing. Only symmetric input is meaningful; callers
/// symmetrize first.
inline EigenDecomposition eig_sym(const Matrix& input) {
  if (input.rows() != input.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "eig_sym needs a square matrix");
  }
  const Eigen::Index d = input.rows();
  if (d == 0) return {Vector(0), Matrix(0, 0)};
  if (!input.allFinite()) {
    throw Error(ErrorKind::NonConvergence, "eig_sym input has non-finite entries");
  }
  Matrix a = input;
  Matrix v = Matrix::Identity(d, d);
  const double frob = a.norm();
  const double eps = std::numeric_limits<double>::epsilon();

  auto off_diagonal = [&]() {
    double off = 0.0;
    for (Eigen::Index q = 1; q < d; ++q)
      for (Eigen::Index p = 0; p < q; ++p) off += a(p, q) * a(p, q);
    return off;
  };

  bool converged = false;
  for (int sweep = 0; sweep <= kEigenSweeps; ++sweep) {
    const double off = off_diagonal();
    if (off == 0.0 || std::sqrt(off) <= eps * frob) {
      converged = true;
      break;
    }
    if (sweep == kEigenSweeps) break;
    for (Eigen::Index p = 0; p < d - 1; ++p) {
      for (Eigen::Index q = p + 1; q < d; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double app = a(p, p);
        const double aqq = a(q, q);
        // Negligible compared to both diagonal entries: drop it.
        if (sweep > 3 && std::abs(app) + 100.0 * std::abs(apq) == std::abs(app) &&
            std::abs(aqq) + 100.0 * std::abs(apq) == std::abs(aqq)) {
          a(p, q) = a(q, p) = 0.0;
          continue;
        }
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < d; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < d; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = a(q, p) = 0.0;
        for (Eigen::Index k = 0; k < d; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }
  if (!converged) {
    throw Error(ErrorKind::NonConvergence, "Jacobi eigensolver exceeded its sweep budget");
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(d));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index i, Eigen::Index j) { return a(i, i) > a(j, j); });
  EigenDecomposition out{Vector(d), Matrix(d, d)};
  for (Eigen::Index k = 0; k < d; ++k) {
    const Eigen::Index src = order[static_cast<std::size_t>(k)];
    out.values(k) = a(src, src);
    out.vectors.col(k) = v.col(src);
  }
  return out;
}

/// Largest absolute eigenvalue of a symmetric (possibly indefinite) matrix.
inline double sym_opnorm(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  const Vector values = eig_sym(symmetrize(a)).values;
  return std::max(std::abs(values(0)), std::abs(values(values.size() - 1)));
}

inline double min_eigenvalue(const Matrix& a) {
  const Vector values = eig_sym(symmetrize(a)).values;
  return values(values.size() - 1);
}

/// A symmetric positive semidefinite matrix together with its spectrum.
///
/// The spectrum is computed once at construction and reused by every
/// spectral function, so the value is immutable and cheap to query.
class SpdMatrix {
 public:
  /// Validating constructor: rejects asymmetry beyond
  /// 1e-12 * max(1, ||a||_op) and eigenvalues below -psd_tolerance.
  explicit SpdMatrix(const Matrix& a) { init(a, /*check_symmetry=*/true); }

  /// Builds from (a + a^T)/2 without the asymmetry check; for internal
  /// products such as S * Sigma * S.
  static SpdMatrix from_symmetric_part(const Matrix& a) {
    SpdMatrix out;
    out.init(a, /*check_symmetry=*/false);
    return out;
  }

  static SpdMatrix identity(Eigen::Index dim) {
    return SpdMatrix(Matrix::Identity(dim, dim));
  }

  static SpdMatrix diagonal(const Vector& diag) {
    return SpdMatrix(Matrix(diag.asDiagonal()));
  }

  /// U diag(values) U^T; values need not be sorted.
  static SpdMatrix from_spectrum(const Vector& values, const Matrix& vectors) {
    const Eigen::Index d = values.size();
    std::vector<Eigen::Index> order(static_cast<std::size_t>(d));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index i, Eigen::Index j) { return values(i) > values(j); });
    SpdMatrix out;
    out.eig_.values.resize(d);
    out.eig_.vectors.resize(d, d);
    for (Eigen::Index k = 0; k < d; ++k) {
      out.eig_.values(k) = values(order[static_cast<std::size_t>(k)]);
      out.eig_.vectors.col(k) = vectors.col(order[static_cast<std::size_t>(k)]);
    }
    out.matrix_ = symmetrize(out.eig_.vectors * out.eig_.values.asDiagonal() *
                             out.eig_.vectors.transpose());
    out.check_psd();
    return out;
  }

  Eigen::Index dim() const { return matrix_.rows(); }
  const Matrix& matrix() const { return matrix_; }
  double operator()(Eigen::Index i, Eigen::Index j) const { return matrix_(i, j); }

  const EigenDecomposition& eigen() const { return eig_; }
  const Vector& eigenvalues() const { return eig_.values; }
  double max_eigenvalue() const { return eig_.values(0); }
  double min_eigenvalue() const { return eig_.values(eig_.values.size() - 1); }
  double trace() const { return matrix_.trace(); }

  /// alpha * A for alpha >= 0.
  SpdMatrix scaled(double alpha) const {
    if (!(alpha >= 0.0)) {
      throw Error(ErrorKind::InvalidArgument, "SpdMatrix::scaled needs alpha >= 0");
    }
    return from_spectrum(alpha * eig_.values, eig_.vectors);
  }

 private:
  SpdMatrix() = default;

  void init(const Matrix& a, bool check_symmetry) {
    if (a.rows() != a.cols() || a.rows() == 0) {
      throw Error(ErrorKind::DimensionMismatch, "SpdMatrix needs a non-empty square matrix");
    }
    if (!a.allFinite()) {
      throw Error(ErrorKind::NotPsd, "SpdMatrix has non-finite entries");
    }
    matrix_ = symmetrize(a);
    eig_ = eig_sym(matrix_);
    if (check_symmetry) {
      const double asym = (a - a.transpose()).cwiseAbs().maxCoeff();
      const double scale = std::max(1.0, std::max(std::abs(eig_.values(0)),
                                                  std::abs(eig_.values(eig_.values.size() - 1))));
      if (asym > kSymmetryTol * scale) {
        std::ostringstream msg;
        msg << "matrix is not symmetric (max |a_ij - a_ji| = " << asym << ")";
        throw Error(ErrorKind::NotSymmetric, msg.str());
      }
    }
    check_psd();
  }

  void check_psd() const {
    const double tol = psd_tolerance(std::abs(eig_.values(0)));
    if (min_eigenvalue() < -tol) {
      std::ostringstream msg;
      msg << "matrix is not positive semidefinite (smallest eigenvalue " << min_eigenvalue()
          << ")";
      throw Error(ErrorKind::NotPsd, msg.str());
    }
  }

  Matrix matrix_;
  EigenDecomposition eig_;
};

inline EigenDecomposition eig_sym(const SpdMatrix& a) { return a.eigen(); }

/// Principal square root; eigenvalues in [-psd_tol, 0) are clipped to zero.
inline SpdMatrix sqrt_spd(const SpdMatrix& a) {
  const Vector roots = a.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return SpdMatrix::from_spectrum(roots, a.eigen().vectors);
}

inline void require_pd(const SpdMatrix& a, const char* what) {
  if (a.min_eigenvalue() < kPdFloor) {
    std::ostringstream msg;
    msg << what << ": matrix is singular (smallest eigenvalue " << a.min_eigenvalue() << ")";
    throw Error(ErrorKind::SingularMatrix, msg.str());
  }
}

inline SpdMatrix invsqrt_spd(const SpdMatrix& a) {
  require_pd(a, "invsqrt_spd");
  const Vector inv_roots = a.eigenvalues().cwiseSqrt().cwiseInverse();
  return SpdMatrix::from_spectrum(inv_roots, a.eigen().vectors);
}

inline SpdMatrix inverse_spd(const SpdMatrix& a) {
  require_pd(a, "inverse_spd");
  return SpdMatrix::from_spectrum(a.eigenvalues().cwiseInverse(), a.eigen().vectors);
}

/// Sum of log-eigenvalues.
inline double logdet(const SpdMatrix& a) {
  require_pd(a, "logdet");
  return a.eigenvalues().array().log().sum();
}

inline double opnorm(const SpdMatrix& a) { return a.max_eigenvalue(); }

}  // namespace bures
