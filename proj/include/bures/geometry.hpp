#pragma once

// The Bures-Wasserstein manifold of Gaussian measures: closed-form optimal
// transport maps, the W2 distance, exponential and logarithmic maps, and
// (generalized) geodesics.

#include <cmath>
#include <optional>
#include <sstream>
#include <utility>
#include <vector>

#include "bures/spd.hpp"

namespace bures {

/// The Gaussian measure N(mean, cov).
class GaussianMeasure {
 public:
  GaussianMeasure(Vector mean, SpdMatrix cov) : mean_(std::move(mean)), cov_(std::move(cov)) {
    if (mean_.size() != cov_.dim()) {
      throw Error(ErrorKind::DimensionMismatch, "Gaussian mean and covariance dimensions differ");
    }
  }

  static GaussianMeasure centered(SpdMatrix cov) {
    Vector zero = Vector::Zero(cov.dim());
    return GaussianMeasure(std::move(zero), std::move(cov));
  }

  static GaussianMeasure centered(const Matrix& cov) { return centered(SpdMatrix(cov)); }

  static GaussianMeasure standard(Eigen::Index dim) {
    return centered(SpdMatrix::identity(dim));
  }

  Eigen::Index dim() const { return cov_.dim(); }
  const Vector& mean() const { return mean_; }
  const SpdMatrix& cov() const { return cov_; }

  /// Membership in S_zeta: ||cov||_op <= 1 and det cov >= zeta. `slack` is
  /// a relative allowance on both comparisons.
  bool in_regular_set(double zeta, double slack = 1e-12) const {
    if (opnorm(cov_) > 1.0 + slack) return false;
    if (cov_.min_eigenvalue() < kPdFloor) return false;
    return logdet(cov_) >= std::log(zeta) - slack;
  }

  /// Pushforward under x -> alpha x; covariance scales by alpha^2.
  GaussianMeasure scaled(double alpha) const {
    return GaussianMeasure(alpha * mean_, cov_.scaled(alpha * alpha));
  }

 private:
  Vector mean_;
  SpdMatrix cov_;
};

/// x -> linear * x + offset.
struct AffineMap {
  Matrix linear;
  Vector offset;

  Vector operator()(const Vector& x) const { return linear * x + offset; }
};

/// A tangent vector at `base`, the affine vector field x -> sym * x + offset
/// with `sym` symmetric.
struct TangentMap {
  GaussianMeasure base;
  Matrix sym;
  Vector offset;

  static TangentMap zero(const GaussianMeasure& at) {
    return {at, Matrix::Zero(at.dim(), at.dim()), Vector::Zero(at.dim())};
  }

  /// E_{x ~ rho} <u(x), w(x)> for u = *this, w = other.
  double inner_under(const TangentMap& other, const GaussianMeasure& rho) const {
    const Vector mu = sym * rho.mean() + offset;
    const Vector mw = other.sym * rho.mean() + other.offset;
    return (sym * rho.cov().matrix() * other.sym).trace() + mu.dot(mw);
  }

  /// <u, w> in L2(base).
  double inner(const TangentMap& other) const { return inner_under(other, base); }

  /// ||u||^2 in L2(base).
  double norm_sq() const { return inner(*this); }

  /// ||u||^2 in L2(rho) for an arbitrary Gaussian rho.
  double norm_sq_under(const GaussianMeasure& rho) const { return inner_under(*this, rho); }

  TangentMap scaled(double factor) const { return {base, factor * sym, factor * offset}; }
};

namespace detail {

inline void require_same_dim(const GaussianMeasure& a, const GaussianMeasure& b) {
  if (a.dim() != b.dim()) {
    throw Error(ErrorKind::DimensionMismatch, "Gaussian measures have different dimensions");
  }
}

inline void require_unit_interval(double s) {
  if (!(s >= 0.0 && s <= 1.0)) {
    std::ostringstream msg;
    msg << "interpolation parameter " << s << " outside [0, 1]";
    throw Error(ErrorKind::InvalidArgument, msg.str());
  }
}

/// tr A + tr B - 2 tr C for PD A, written as ||(C - A) A^{-1/2}||_F^2 so
/// that nearby covariances do not lose digits to cancellation.
inline double bures_sq_pd(const SpdMatrix& a, const SpdMatrix& inv_root, const SpdMatrix& cross) {
  return ((cross.matrix() - a.matrix()) * inv_root.matrix()).squaredNorm();
}

/// Condition threshold below which the cancellation-free form is used.
inline constexpr double kW2SourceCondition = 1e-8;

inline double condition_ratio(const SpdMatrix& a) {
  const double top = a.max_eigenvalue();
  return top > 0.0 ? a.min_eigenvalue() / top : 0.0;
}

}  // namespace detail

/// The pieces shared by the transport map and the W2 distance from a fixed
/// source: Sigma_0^{1/2}, Sigma_0^{-1/2}.
class TransportSource {
 public:
  explicit TransportSource(const GaussianMeasure& src)
      : src_(src), root_(sqrt_spd(src.cov())), inv_root_(invsqrt_spd(src.cov())) {}

  const GaussianMeasure& source() const { return src_; }

  /// (Sigma_0^{1/2} Sigma_1 Sigma_0^{1/2})^{1/2}
  SpdMatrix cross_root(const GaussianMeasure& dst) const {
    detail::require_same_dim(src_, dst);
    const Matrix& r = root_.matrix();
    return sqrt_spd(SpdMatrix::from_symmetric_part(r * dst.cov().matrix() * r));
  }

  /// Linear part from an already computed cross root.
  Matrix linear_from_cross_root(const SpdMatrix& cross) const {
    const Matrix& ir = inv_root_.matrix();
    return symmetrize(ir * cross.matrix() * ir);
  }

  AffineMap map_to(const GaussianMeasure& dst) const {
    Matrix m = linear_from_cross_root(cross_root(dst));
    Vector v = dst.mean() - m * src_.mean();
    return {std::move(m), std::move(v)};
  }

  double w2_sq_from_cross_root(const GaussianMeasure& dst, const SpdMatrix& cross) const {
    return (src_.mean() - dst.mean()).squaredNorm() +
           detail::bures_sq_pd(src_.cov(), inv_root_, cross);
  }

 private:
  GaussianMeasure src_;
  SpdMatrix root_;
  SpdMatrix inv_root_;
};

/// Optimal transport map from src to dst:
/// M = S0^{-1/2} (S0^{1/2} S1 S0^{1/2})^{1/2} S0^{-1/2}, v = m1 - M m0.
inline AffineMap transport_map(const GaussianMeasure& src, const GaussianMeasure& dst) {
  return TransportSource(src).map_to(dst);
}

/// W2^2 = |m_a - m_b|^2 + tr A + tr B - 2 tr (A^{1/2} B A^{1/2})^{1/2}.
/// Needs only PSD covariances. When one covariance is well conditioned the
/// trace terms are evaluated as a sum of squares (see bures_sq_pd).
inline double w2_distance_sq(const GaussianMeasure& a, const GaussianMeasure& b) {
  detail::require_same_dim(a, b);
  const double ra = detail::condition_ratio(a.cov());
  const double rb = detail::condition_ratio(b.cov());
  const GaussianMeasure& src = ra >= rb ? a : b;
  const GaussianMeasure& dst = ra >= rb ? b : a;
  if (std::max(ra, rb) >= detail::kW2SourceCondition && src.cov().min_eigenvalue() >= kPdFloor) {
    const TransportSource from(src);
    return from.w2_sq_from_cross_root(dst, from.cross_root(dst));
  }
  const SpdMatrix root = sqrt_spd(a.cov());
  const Matrix& r = root.matrix();
  const SpdMatrix cross = sqrt_spd(SpdMatrix::from_symmetric_part(r * b.cov().matrix() * r));
  const double value = (a.mean() - b.mean()).squaredNorm() + a.cov().trace() + b.cov().trace() -
                       2.0 * cross.trace();
  return std::max(0.0, value);
}

inline double w2_distance(const GaussianMeasure& a, const GaussianMeasure& b) {
  return std::sqrt(w2_distance_sq(a, b));
}

/// log_base(target) = T_{base -> target} - id.
inline TangentMap log_map(const GaussianMeasure& base, const GaussianMeasure& target) {
  AffineMap t = transport_map(base, target);
  Matrix sym = t.linear - Matrix::Identity(base.dim(), base.dim());
  return {base, std::move(sym), std::move(t.offset)};
}

/// Tangent map whose exponential leaves `base` with covariance velocity U:
/// the solution L of the Lyapunov equation L Sigma + Sigma L = U. At
/// Sigma = I this is U / 2, so exp gives (I + U/2)^2.
inline Matrix velocity_to_tangent(const GaussianMeasure& base, const Matrix& u) {
  if (u.rows() != base.dim() || u.cols() != base.dim()) {
    throw Error(ErrorKind::DimensionMismatch, "velocity does not match its base");
  }
  require_pd(base.cov(), "velocity_to_tangent");
  const EigenDecomposition& eig = base.cov().eigen();
  Matrix rotated = eig.vectors.transpose() * symmetrize(u) * eig.vectors;
  for (Eigen::Index i = 0; i < rotated.rows(); ++i) {
    for (Eigen::Index j = 0; j < rotated.cols(); ++j) {
      rotated(i, j) /= eig.values(i) + eig.values(j);
    }
  }
  return symmetrize(eig.vectors * rotated * eig.vectors.transpose());
}

/// Pushforward of `base` under x -> (I + sym) x + offset.
inline GaussianMeasure exp_map(const GaussianMeasure& base, const Matrix& sym, const Vector& offset) {
  if (sym.rows() != base.dim() || sym.cols() != base.dim() || offset.size() != base.dim()) {
    throw Error(ErrorKind::DimensionMismatch, "tangent vector does not match its base");
  }
  const Matrix step = Matrix::Identity(base.dim(), base.dim()) + symmetrize(sym);
  const EigenDecomposition eig = eig_sym(step);
  const double lowest = eig.values(eig.values.size() - 1);
  if (lowest < -psd_tolerance(std::abs(eig.values(0)))) {
    std::ostringstream msg;
    msg << "I + V has eigenvalue " << lowest << " < 0";
    throw Error(ErrorKind::ExpNotAdmissible, msg.str());
  }
  Vector mean = step * base.mean() + offset;
  return GaussianMeasure(std::move(mean),
                         SpdMatrix::from_symmetric_part(step * base.cov().matrix() * step));
}

inline GaussianMeasure exp_map(const GaussianMeasure& base, const TangentMap& v) {
  return exp_map(base, v.sym, v.offset);
}

/// exp_base(v) with v expressed at its own base.
inline GaussianMeasure exp_map(const TangentMap& v) { return exp_map(v.base, v); }

/// Point at parameter s of the constant-speed geodesic from a to b:
/// ((1 - s) id + s T_{a -> b})_# a. Requires a PD; b may be PSD.
inline GaussianMeasure geodesic_point(const GaussianMeasure& a, const GaussianMeasure& b, double s) {
  detail::require_unit_interval(s);
  detail::require_same_dim(a, b);
  const AffineMap t = transport_map(a, b);
  const Matrix identity = Matrix::Identity(a.dim(), a.dim());
  const Matrix step = (1.0 - s) * identity + s * t.linear;
  Vector mean = (1.0 - s) * a.mean() + s * b.mean();
  return GaussianMeasure(std::move(mean),
                         SpdMatrix::from_symmetric_part(step * a.cov().matrix() * step));
}

/// Generalized geodesic with base nu between m0 and m1:
/// ((1 - s) T_{nu -> m0} + s T_{nu -> m1})_# nu.
inline GaussianMeasure generalized_geodesic_point(const GaussianMeasure& base,
                                                  const GaussianMeasure& m0,
                                                  const GaussianMeasure& m1, double s) {
  detail::require_unit_interval(s);
  detail::require_same_dim(base, m0);
  detail::require_same_dim(base, m1);
  const TransportSource from_base(base);
  const AffineMap t0 = from_base.map_to(m0);
  const AffineMap t1 = from_base.map_to(m1);
  const Matrix linear = (1.0 - s) * t0.linear + s * t1.linear;
  Vector mean = (1.0 - s) * m0.mean() + s * m1.mean();
  return GaussianMeasure(std::move(mean),
                         SpdMatrix::from_symmetric_part(linear * base.cov().matrix() * linear));
}

/// Finitely many weighted Gaussian atoms.
class BuresDistribution {
 public:
  BuresDistribution(std::vector<GaussianMeasure> atoms, std::vector<double> weights)
      : atoms_(std::move(atoms)), weights_(std::move(weights)) {
    if (atoms_.empty()) {
      throw Error(ErrorKind::InvalidArgument, "distribution needs at least one atom");
    }
    if (weights_.size() != atoms_.size()) {
      throw Error(ErrorKind::DimensionMismatch, "one weight per atom is required");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < atoms_.size(); ++i) {
      if (atoms_[i].dim() != atoms_.front().dim()) {
        std::ostringstream msg;
        msg << "atom " << i << " has dimension " << atoms_[i].dim() << ", expected "
            << atoms_.front().dim();
        throw Error(ErrorKind::DimensionMismatch, msg.str());
      }
      if (!(weights_[i] > 0.0) || !std::isfinite(weights_[i])) {
        std::ostringstream msg;
        msg << "atom " << i << " has non-positive weight " << weights_[i];
        throw Error(ErrorKind::InvalidArgument, msg.str());
      }
      total += weights_[i];
    }
    if (std::abs(total - 1.0) > 1e-12) {
      std::ostringstream msg;
      msg << "weights sum to " << total << ", not 1";
      throw Error(ErrorKind::InvalidArgument, msg.str());
    }
  }

  static BuresDistribution uniform(std::vector<GaussianMeasure> atoms) {
    const std::size_t n = atoms.size();
    std::vector<double> weights(n, n == 0 ? 0.0 : 1.0 / static_cast<double>(n));
    return BuresDistribution(std::move(atoms), std::move(weights));
  }

  std::size_t size() const { return atoms_.size(); }
  Eigen::Index dim() const { return atoms_.front().dim(); }
  const std::vector<GaussianMeasure>& atoms() const { return atoms_; }
  const std::vector<double>& weights() const { return weights_; }
  const GaussianMeasure& atom(std::size_t i) const { return atoms_.at(i); }
  double weight(std::size_t i) const { return weights_.at(i); }

  /// min over atoms of det(cov), via logdet.
  double zeta() const { return std::exp(min_logdet()); }

  double min_logdet() const {
    double lowest = std::numeric_limits<double>::infinity();
    for (const auto& a : atoms_) lowest = std::min(lowest, logdet(a.cov()));
    return lowest;
  }

  /// Index of the first atom outside S_zeta, if any.
  std::optional<std::size_t> first_irregular_atom(double zeta) const {
    for (std::size_t i = 0; i < atoms_.size(); ++i) {
      if (!atoms_[i].in_regular_set(zeta)) return i;
    }
    return std::nullopt;
  }

  bool is_zeta_regular(double zeta) const { return !first_irregular_atom(zeta).has_value(); }

  /// Every atom pushed forward by x -> alpha x.
  BuresDistribution scaled(double alpha) const {
    std::vector<GaussianMeasure> out;
    out.reserve(atoms_.size());
    for (const auto& a : atoms_) out.push_back(a.scaled(alpha));
    return BuresDistribution(std::move(out), weights_);
  }

 private:
  std::vector<GaussianMeasure> atoms_;
  std::vector<double> weights_;
};

}  // namespace bures
