#pragma once

// Numerical certificates for the inequalities that drive the convergence
// analysis: PL, variance, smoothness, integrated PL, and convexity of
// lambda_max and -logdet along generalized geodesics.

#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "bures/solvers.hpp"

namespace bures {

/// Relative slack on every inequality margin.
inline constexpr double kCheckTol = 1e-8;

/// Absolute slack on grid convexity probes.
inline constexpr double kConvexityTol = 1e-9;

struct InequalityReport {
  std::string name;
  double lhs = 0.0;
  double rhs = 0.0;
  /// Positive when the inequality holds with room to spare.
  double margin = 0.0;
  /// Satisfied iff margin >= -tolerance.
  double tolerance = 0.0;
  bool satisfied = false;
  std::string context;
};

namespace detail {

inline InequalityReport make_report(std::string name, double lhs, double rhs, double margin,
                                    double tolerance, std::string context = {}) {
  InequalityReport r;
  r.name = std::move(name);
  r.lhs = lhs;
  r.rhs = rhs;
  r.margin = margin;
  r.tolerance = tolerance;
  r.satisfied = margin >= -tolerance;
  r.context = std::move(context);
  return r;
}

inline double relative_tol(double lhs, double rhs) {
  return kCheckTol * std::max({1.0, std::abs(lhs), std::abs(rhs)});
}

inline void require_regular(const GaussianMeasure& b, double zeta, const char* what) {
  if (!(zeta > 0.0 && zeta <= 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "zeta must lie in (0, 1]");
  }
  if (!b.in_regular_set(zeta)) {
    std::ostringstream msg;
    msg << what << " is outside S_zeta for zeta = " << zeta;
    throw Error(ErrorKind::NotRegular, msg.str());
  }
}

}  // namespace detail

/// ||grad G(b)||^2 >= 2 c_pl (G(b) - G(bbar)) for an arbitrary constant,
/// without the regularity gate.
inline InequalityReport check_pl_with_constant(const BuresDistribution& q, const GaussianMeasure& b,
                                               const GaussianMeasure& bbar, double c_pl) {
  const ObjectiveAndGradient eval = objective_and_gradient(q, b);
  const double gap = eval.value - objective(q, bbar);
  const double lhs = eval.gradient.norm_sq();
  const double rhs = 2.0 * c_pl * gap;
  std::ostringstream ctx;
  ctx << "c_pl=" << c_pl;
  return detail::make_report("pl", lhs, rhs, lhs - rhs, detail::relative_tol(lhs, rhs), ctx.str());
}

/// PL inequality with C_PL = zeta^2 / 4 at b in S_zeta.
inline InequalityReport check_pl(const BuresDistribution& q, const GaussianMeasure& b,
                                 const GaussianMeasure& bbar, double zeta) {
  detail::require_regular(b, zeta, "point");
  InequalityReport r = check_pl_with_constant(q, b, bbar, zeta * zeta / 4.0);
  r.context = "zeta=" + std::to_string(zeta);
  return r;
}

/// G(b) - G(bbar) >= (zeta / 2) W2^2(b, bbar).
inline InequalityReport check_variance_inequality(const BuresDistribution& q,
                                                  const GaussianMeasure& b,
                                                  const GaussianMeasure& bbar, double zeta) {
  detail::require_regular(b, zeta, "point");
  const double lhs = objective(q, b) - objective(q, bbar);
  const double rhs = 0.5 * zeta * w2_distance_sq(b, bbar);
  return detail::make_report("variance", lhs, rhs, lhs - rhs, detail::relative_tol(lhs, rhs),
                             "zeta=" + std::to_string(zeta));
}

struct SmoothnessReport {
  /// G(b1) <= G(b0) + <grad G(b0), log_{b0} b1> + 1/2 W2^2(b0, b1)
  InequalityReport smoothness;
  /// G(b+) - G(b0) <= -1/2 ||grad G(b0)||^2 with b+ = exp_{b0}(-grad G(b0))
  InequalityReport descent;
};

inline SmoothnessReport check_smoothness(const BuresDistribution& q, const GaussianMeasure& b0,
                                         const GaussianMeasure& b1) {
  require_pd(b0.cov(), "check_smoothness");
  const ObjectiveAndGradient eval = objective_and_gradient(q, b0);
  const TangentMap direction = log_map(b0, b1);
  const double lhs = objective(q, b1);
  const double rhs = eval.value + eval.gradient.inner(direction) + 0.5 * w2_distance_sq(b0, b1);
  SmoothnessReport out;
  out.smoothness =
      detail::make_report("smoothness", lhs, rhs, rhs - lhs, detail::relative_tol(lhs, rhs));

  const GaussianMeasure next = exp_map(b0, eval.gradient.scaled(-1.0));
  const double drop = objective(q, next) - eval.value;
  const double bound = -0.5 * eval.gradient.norm_sq();
  out.descent = detail::make_report("descent", drop, bound, bound - drop,
                                    detail::relative_tol(drop, bound));
  return out;
}

/// Composite Simpson on `nodes` equispaced points of [0, 1]. An even node
/// count closes with the 3/8 rule on the last three intervals; two nodes
/// fall back to the trapezoid rule.
template <typename Fn>
double integrate_unit_interval(Fn&& f, int nodes) {
  if (nodes < 2) throw Error(ErrorKind::InvalidArgument, "quadrature needs at least 2 nodes");
  const int intervals = nodes - 1;
  const double h = 1.0 / intervals;
  std::vector<double> y(static_cast<std::size_t>(nodes));
  for (int i = 0; i < nodes; ++i) y[static_cast<std::size_t>(i)] = f(i == intervals ? 1.0 : i * h);
  if (intervals == 1) return 0.5 * h * (y[0] + y[1]);
  if (intervals == 2) return h / 3.0 * (y[0] + 4.0 * y[1] + y[2]);
  const int simpson_intervals = (intervals % 2 == 0) ? intervals : intervals - 3;
  double total = 0.0;
  for (int i = 0; i + 2 <= simpson_intervals; i += 2) {
    const auto k = static_cast<std::size_t>(i);
    total += h / 3.0 * (y[k] + 4.0 * y[k + 1] + y[k + 2]);
  }
  if (simpson_intervals != intervals) {
    const auto k = static_cast<std::size_t>(simpson_intervals);
    total += 3.0 * h / 8.0 * (y[k] + 3.0 * y[k + 1] + 3.0 * y[k + 2] + y[k + 3]);
  }
  return total;
}

/// int_0^1 ||grad G(b)||_{L2(b_s)} ds along the geodesic b_s from b to bbar.
inline double integrated_gradient_norm(const BuresDistribution& q, const GaussianMeasure& b,
                                       const GaussianMeasure& bbar, int quad_nodes) {
  const TangentMap grad = gradient(q, b);
  return integrate_unit_interval(
      [&](double s) {
        const GaussianMeasure bs = geodesic_point(b, bbar, s);
        return std::sqrt(std::max(0.0, grad.norm_sq_under(bs)));
      },
      quad_nodes);
}

inline constexpr int kDefaultQuadNodes = 33;

/// G(b) - G(bbar) <= (2 / zeta) (int_0^1 ||grad G(b)||_{L2(b_s)} ds)^2,
/// with C_var = zeta.
inline InequalityReport check_integrated_pl(const BuresDistribution& q, const GaussianMeasure& b,
                                            const GaussianMeasure& bbar, double zeta,
                                            int quad_nodes = kDefaultQuadNodes) {
  detail::require_regular(b, zeta, "point");
  if (quad_nodes < 2) throw Error(ErrorKind::InvalidArgument, "quad_nodes must be >= 2");
  const double lhs = objective(q, b) - objective(q, bbar);
  const double integral = integrated_gradient_norm(q, b, bbar, quad_nodes);
  const double rhs = 2.0 / zeta * integral * integral;
  return detail::make_report("integrated_pl", lhs, rhs, rhs - lhs, detail::relative_tol(lhs, rhs),
                             "nodes=" + std::to_string(quad_nodes));
}

/// Midpoint convexity of grid samples f(k / (n-1)): for every pair (i, j)
/// with i + j even, f((i+j)/2) <= (f_i + f_j) / 2 + tol. Reports the worst pair.
inline InequalityReport midpoint_convexity(const std::string& name, const std::vector<double>& f,
                                           double tol) {
  const std::size_t n = f.size();
  double worst = std::numeric_limits<double>::infinity();
  double worst_lhs = 0.0, worst_rhs = 0.0;
  std::string where;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 2; j < n; j += 2) {
      const double mid = f[(i + j) / 2];
      const double avg = 0.5 * (f[i] + f[j]);
      if (avg - mid < worst) {
        worst = avg - mid;
        worst_lhs = mid;
        worst_rhs = avg;
        where = "i=" + std::to_string(i) + ",j=" + std::to_string(j);
      }
    }
  }
  if (n < 3) worst = 0.0;
  return detail::make_report(name, worst_lhs, worst_rhs, worst, tol, where);
}

namespace detail {

template <typename Fn>
std::vector<double> along_generalized_geodesic(const GaussianMeasure& base,
                                               const GaussianMeasure& m0,
                                               const GaussianMeasure& m1, int grid, Fn&& f) {
  if (grid < 3) throw Error(ErrorKind::InvalidArgument, "convexity grid needs >= 3 points");
  require_pd(base.cov(), "convexity probe base");
  const TransportSource from_base(base);
  const AffineMap t0 = from_base.map_to(m0);
  const AffineMap t1 = from_base.map_to(m1);
  std::vector<double> values(static_cast<std::size_t>(grid));
  for (int k = 0; k < grid; ++k) {
    const double s = static_cast<double>(k) / (grid - 1);
    const Matrix linear = (1.0 - s) * t0.linear + s * t1.linear;
    const SpdMatrix cov =
        SpdMatrix::from_symmetric_part(linear * base.cov().matrix() * linear);
    values[static_cast<std::size_t>(k)] = f(cov);
  }
  return values;
}

}  // namespace detail

/// s -> lambda_max(Sigma_s) along the generalized geodesic with base `base`.
inline InequalityReport convexity_probe_opnorm(const GaussianMeasure& base,
                                               const GaussianMeasure& m0,
                                               const GaussianMeasure& m1, int grid = 17) {
  const auto values = detail::along_generalized_geodesic(
      base, m0, m1, grid, [](const SpdMatrix& c) { return opnorm(c); });
  return midpoint_convexity("convexity_opnorm", values, kConvexityTol);
}

/// s -> -logdet(Sigma_s) along the generalized geodesic with base `base`.
inline InequalityReport convexity_probe_neglogdet(const GaussianMeasure& base,
                                                  const GaussianMeasure& m0,
                                                  const GaussianMeasure& m1, int grid = 17) {
  const auto values = detail::along_generalized_geodesic(
      base, m0, m1, grid, [](const SpdMatrix& c) { return -logdet(c); });
  return midpoint_convexity("convexity_neglogdet", values, kConvexityTol);
}

// ---------------------------------------------------------------------------
// Non-convexity of the squared distance along a Bures geodesic

struct NonconvexityExample {
  Matrix a;
  Matrix b;
  Matrix c;
};

/// The 2x2 triple whose Bures geodesic A -> B has a non-convex squared
/// distance to C.
inline NonconvexityExample nonconvexity_example_matrices() {
  NonconvexityExample ex{Matrix(2, 2), Matrix(2, 2), Matrix(2, 2)};
  ex.a << 0.8, -0.4, -0.4, 0.3;
  ex.b << 0.3, -0.5, -0.5, 1.0;
  ex.c << 0.5, 0.5, 0.5, 0.6;
  return ex;
}

struct NonconvexityRow {
  double s;
  double bures;      // W2^2(C, Bures geodesic A -> B at s)
  double euclidean;  // W2^2(C, (1 - s) A + s B)
};

struct NonconvexityDemo {
  std::vector<NonconvexityRow> rows;
  InequalityReport bures_convexity;
  InequalityReport euclidean_convexity;
  bool bures_violation = false;
  bool euclidean_violation = false;
};

/// Midpoint tolerance used by the demo's violation scan.
inline constexpr double kDemoConvexityTol = 1e-12;

inline NonconvexityDemo nonconvexity_demo(int grid = 101) {
  if (grid < 3) throw Error(ErrorKind::InvalidArgument, "demo grid needs >= 3 points");
  const NonconvexityExample ex = nonconvexity_example_matrices();
  const GaussianMeasure a = GaussianMeasure::centered(ex.a);
  const GaussianMeasure b = GaussianMeasure::centered(ex.b);
  const GaussianMeasure c = GaussianMeasure::centered(ex.c);
  NonconvexityDemo demo;
  std::vector<double> bures_values, euclid_values;
  for (int k = 0; k < grid; ++k) {
    const double s = static_cast<double>(k) / (grid - 1);
    const GaussianMeasure on_geodesic = geodesic_point(a, b, s);
    const GaussianMeasure on_segment =
        GaussianMeasure::centered(SpdMatrix::from_symmetric_part((1.0 - s) * ex.a + s * ex.b));
    NonconvexityRow row{s, w2_distance_sq(c, on_geodesic), w2_distance_sq(c, on_segment)};
    bures_values.push_back(row.bures);
    euclid_values.push_back(row.euclidean);
    demo.rows.push_back(row);
  }
  demo.bures_convexity = midpoint_convexity("bures_geodesic_convexity", bures_values,
                                            kDemoConvexityTol);
  demo.euclidean_convexity = midpoint_convexity("euclidean_segment_convexity", euclid_values,
                                                kDemoConvexityTol);
  demo.bures_violation = !demo.bures_convexity.satisfied;
  demo.euclidean_violation = !demo.euclidean_convexity.satisfied;
  return demo;
}

// ---------------------------------------------------------------------------
// Regularity of transport maps

struct RegularityConstants {
  double alpha;  // lambda_min of the transport matrix
  double beta;   // lambda_max of the transport matrix
  double kappa;  // lambda_max / lambda_min over both covariances
  bool within_bounds;
};

/// Eigenvalue range of T_{a -> b} against [1/kappa, kappa].
inline RegularityConstants regularity_constants(const GaussianMeasure& a, const GaussianMeasure& b) {
  require_pd(a.cov(), "regularity_constants");
  require_pd(b.cov(), "regularity_constants");
  const AffineMap t = transport_map(a, b);
  const Vector values = eig_sym(t.linear).values;
  const double lo = std::min(a.cov().min_eigenvalue(), b.cov().min_eigenvalue());
  const double hi = std::max(a.cov().max_eigenvalue(), b.cov().max_eigenvalue());
  const double kappa = hi / lo;
  RegularityConstants out{values(values.size() - 1), values(0), kappa, false};
  out.within_bounds = out.alpha >= 1.0 / kappa - 1e-9 && out.beta <= kappa + 1e-9;
  return out;
}

// ---------------------------------------------------------------------------
// Monte Carlo instances

/// U diag(lambda) U^T with lambda ~ U[floor, 1] and U Haar-orthogonal.
inline SpdMatrix random_spd(Eigen::Index dim, double eig_floor, Rng& rng) {
  if (!(eig_floor > 0.0 && eig_floor <= 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "eigenvalue floor must lie in (0, 1]");
  }
  Vector values(dim);
  for (Eigen::Index i = 0; i < dim; ++i) values(i) = rng.uniform(eig_floor, 1.0);
  const Matrix u = rng.orthogonal(dim);
  SpdMatrix out = SpdMatrix::from_spectrum(values, u);
  if (opnorm(out) > 1.0) out = out.scaled(1.0 / opnorm(out));
  return out;
}

inline GaussianMeasure random_centered_gaussian(Eigen::Index dim, double eig_floor, Rng& rng) {
  return GaussianMeasure::centered(random_spd(dim, eig_floor, rng));
}

/// Uniformly weighted centered atoms from random_spd; zeta-regular with
/// zeta >= eig_floor^dim.
inline BuresDistribution random_regular_distribution(Eigen::Index dim, std::size_t atoms,
                                                     double eig_floor, Rng& rng) {
  std::vector<GaussianMeasure> out;
  out.reserve(atoms);
  for (std::size_t i = 0; i < atoms; ++i) out.push_back(random_centered_gaussian(dim, eig_floor, rng));
  return BuresDistribution::uniform(std::move(out));
}

/// [sum_j lambda_j T_{base -> mu_j}]_# base with Dirichlet(1) weights over
/// the atoms of Q; stays in S_zeta whenever Q is zeta-regular.
inline GaussianMeasure random_point_in_hull(const BuresDistribution& q, const GaussianMeasure& base,
                                            Rng& rng) {
  const TransportSource from_base(base);
  std::vector<double> lambda(q.size());
  double total = 0.0;
  for (auto& l : lambda) {
    l = -std::log(1.0 - rng.uniform());
    total += l;
  }
  Matrix linear = Matrix::Zero(q.dim(), q.dim());
  Vector mean = Vector::Zero(q.dim());
  for (std::size_t j = 0; j < q.size(); ++j) {
    const double w = lambda[j] / total;
    linear += w * from_base.map_to(q.atom(j)).linear;
    mean += w * q.atom(j).mean();
  }
  linear = symmetrize(linear);
  return GaussianMeasure(std::move(mean),
                         SpdMatrix::from_symmetric_part(linear * base.cov().matrix() * linear));
}

// ---------------------------------------------------------------------------
// Report serialization

/// One report per line, tab separated:
/// name, lhs, rhs, margin, satisfied (0/1), context. Numbers use 17
/// significant digits.
inline std::string format_report(const InequalityReport& r) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << r.name << '\t' << r.lhs << '\t' << r.rhs << '\t' << r.margin << '\t'
      << (r.satisfied ? 1 : 0) << '\t' << r.context;
  return out.str();
}

inline constexpr const char* kReportHeader = "name\tlhs\trhs\tmargin\tsatisfied\tcontext";

inline InequalityReport parse_report(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, '\t')) fields.push_back(field);
  if (fields.size() == 5) fields.emplace_back();
  if (fields.size() != 6) {
    throw Error(ErrorKind::Parse, "report line needs 6 tab-separated fields");
  }
  InequalityReport r;
  try {
    r.name = fields[0];
    r.lhs = std::stod(fields[1]);
    r.rhs = std::stod(fields[2]);
    r.margin = std::stod(fields[3]);
    r.satisfied = fields[4] == "1";
    r.context = fields[5];
  } catch (const std::exception&) {
    throw Error(ErrorKind::Parse, "malformed number in report line");
  }
  return r;
}

}  // namespace bures
