#pragma once

// First-order barycenter solvers on the Bures-Wasserstein manifold: the
// objective G(b) = 1/2 sum_i w_i W2^2(b, mu_i), its Wasserstein gradient,
// batch gradient descent, stochastic gradient descent (single pass, with
// replacement, and iterate-averaged), step-size schedules and the
// fixed-point residual.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "bures/geometry.hpp"
#include "bures/parallel.hpp"
#include "bures/random.hpp"

namespace bures {

// ---------------------------------------------------------------------------
// Step sizes

/// eta_t = c (1 - sqrt(1 - (2(t+k)+1) / (c^2 (t+k+1)^2))), k = 2/c^2 - 1 by
/// default. Solves 1 - 2 c eta + eta^2 = ((t+k)/(t+k+1))^2.
struct PlSchedule {
  double c_pl;
  double k;
};

/// eta_t = 2 / (c (t + 2/c + 1)).
struct ExperimentSchedule {
  double c;
};

struct ConstantSchedule {
  double eta;
};

struct CustomSchedule {
  std::vector<double> steps;
};

class StepSchedule {
 public:
  using Kind = std::variant<PlSchedule, ExperimentSchedule, ConstantSchedule, CustomSchedule>;

  static StepSchedule paper_pl(double c_pl) { return paper_pl(c_pl, 2.0 / (c_pl * c_pl) - 1.0); }

  static StepSchedule paper_pl(double c_pl, double k) {
    if (!(c_pl > 0.0 && c_pl <= 1.0)) {
      throw Error(ErrorKind::InvalidSchedule, "PL constant must lie in (0, 1]");
    }
    if (!(k >= 0.0) || !std::isfinite(k)) {
      throw Error(ErrorKind::InvalidSchedule, "PL schedule offset k must be >= 0");
    }
    return StepSchedule(PlSchedule{c_pl, k});
  }

  static StepSchedule experiment(double c) {
    if (!(c > 0.0) || !std::isfinite(c)) {
      throw Error(ErrorKind::InvalidSchedule, "experiment schedule constant must be > 0");
    }
    return StepSchedule(ExperimentSchedule{c});
  }

  static StepSchedule constant(double eta) {
    check_step(eta, 0);
    return StepSchedule(ConstantSchedule{eta});
  }

  static StepSchedule custom(std::vector<double> steps) {
    for (std::size_t t = 0; t < steps.size(); ++t) check_step(steps[t], t);
    return StepSchedule(CustomSchedule{std::move(steps)});
  }

  const Kind& kind() const { return kind_; }

  /// Number of steps available, if finite.
  std::optional<std::size_t> length() const {
    if (const auto* c = std::get_if<CustomSchedule>(&kind_)) return c->steps.size();
    return std::nullopt;
  }

  /// Step size for iteration t (t = 0 produces b_1 from b_0).
  double step_size(std::size_t t) const {
    const double eta = std::visit([t](const auto& s) { return evaluate(s, t); }, kind_);
    check_step(eta, t);
    return eta;
  }

  double operator()(std::size_t t) const { return step_size(t); }

 private:
  explicit StepSchedule(Kind kind) : kind_(std::move(kind)) {}

  static void check_step(double eta, std::size_t t) {
    if (!(eta > 0.0 && eta <= 1.0)) {
      std::ostringstream msg;
      msg << "step size " << eta << " at t=" << t << " is outside (0, 1]";
      throw Error(ErrorKind::InvalidSchedule, msg.str());
    }
  }

  static double evaluate(const PlSchedule& s, std::size_t t) {
    const double tk = static_cast<double>(t) + s.k;
    const double x = (2.0 * tk + 1.0) / (s.c_pl * s.c_pl * (tk + 1.0) * (tk + 1.0));
    if (x > 1.0) {
      std::ostringstream msg;
      msg << "PL schedule square-root argument " << 1.0 - x << " is negative at t=" << t;
      throw Error(ErrorKind::InvalidSchedule, msg.str());
    }
    // 1 - sqrt(1 - x) written without cancellation.
    return s.c_pl * x / (1.0 + std::sqrt(1.0 - x));
  }

  static double evaluate(const ExperimentSchedule& s, std::size_t t) {
    return 2.0 / (s.c * (static_cast<double>(t) + 2.0 / s.c + 1.0));
  }

  static double evaluate(const ConstantSchedule& s, std::size_t) { return s.eta; }

  static double evaluate(const CustomSchedule& s, std::size_t t) {
    if (t >= s.steps.size()) {
      std::ostringstream msg;
      msg << "custom schedule has " << s.steps.size() << " steps, step " << t << " requested";
      throw Error(ErrorKind::ScheduleExhausted, msg.str());
    }
    return s.steps[t];
  }

  Kind kind_;
};

inline double step_size(const StepSchedule& schedule, std::size_t t) {
  return schedule.step_size(t);
}

// ---------------------------------------------------------------------------
// Traces and results

struct TraceRow {
  std::size_t iter = 0;
  double objective = std::numeric_limits<double>::quiet_NaN();
  double grad_norm_sq = std::numeric_limits<double>::quiet_NaN();
  double w2_sq_to_ref = std::numeric_limits<double>::quiet_NaN();
  /// Step taken from this iterate to the next; 0 on the final row.
  double step_size = 0.0;
  /// Seconds since the solver started.
  double wall_time = 0.0;
};

using SolverTrace = std::vector<TraceRow>;

struct SolverResult {
  GaussianMeasure final;
  SolverTrace trace;
  bool converged = false;
  std::size_t iterations = 0;
};

struct SolverOptions {
  /// Adds w2_sq_to_ref to every trace row.
  std::optional<GaussianMeasure> reference;
  /// Evaluates objective and gradient norm of this distribution on every
  /// row of a stochastic run (batch GD always records them).
  std::optional<BuresDistribution> monitor;
};

// ---------------------------------------------------------------------------
// Objective and gradient

/// Per-atom quantities at a fixed base point b, computed together so each
/// atom costs one cross square root.
struct AtomTerms {
  std::vector<double> w2_sq;    // W2^2(b, mu_i)
  std::vector<Matrix> linear;   // M_i, transport b -> mu_i
  std::vector<Vector> offset;   // v_i
  std::vector<Matrix> cross;    // (Sigma_b^{1/2} Sigma_i Sigma_b^{1/2})^{1/2}
};

namespace detail {

inline void require_dim(const BuresDistribution& q, const GaussianMeasure& b) {
  if (q.dim() != b.dim()) {
    std::ostringstream msg;
    msg << "point has dimension " << b.dim() << ", distribution has " << q.dim();
    throw Error(ErrorKind::DimensionMismatch, msg.str());
  }
}

inline AtomTerms atom_terms(const BuresDistribution& q, const GaussianMeasure& b,
                            bool need_maps) {
  require_dim(q, b);
  const std::size_t n = q.size();
  AtomTerms terms;
  terms.w2_sq.resize(n);
  terms.cross.resize(n);
  if (need_maps) {
    terms.linear.resize(n);
    terms.offset.resize(n);
  }
  const bool pd_base = b.cov().min_eigenvalue() >= kPdFloor &&
                       detail::condition_ratio(b.cov()) >= detail::kW2SourceCondition;
  if (need_maps || pd_base) {
    const TransportSource source(b);
    parallel_for(n, [&](std::size_t i) {
      const GaussianMeasure& atom = q.atom(i);
      const SpdMatrix cross = source.cross_root(atom);
      terms.w2_sq[i] = source.w2_sq_from_cross_root(atom, cross);
      if (need_maps) {
        terms.linear[i] = source.linear_from_cross_root(cross);
        terms.offset[i] = atom.mean() - terms.linear[i] * b.mean();
      }
      terms.cross[i] = cross.matrix();
    });
  } else {
    // Singular or badly conditioned base: no inverse root, trace formula.
    const SpdMatrix root = sqrt_spd(b.cov());
    parallel_for(n, [&](std::size_t i) {
      const GaussianMeasure& atom = q.atom(i);
      const Matrix& r = root.matrix();
      const SpdMatrix cross =
          sqrt_spd(SpdMatrix::from_symmetric_part(r * atom.cov().matrix() * r));
      terms.w2_sq[i] = std::max(0.0, (b.mean() - atom.mean()).squaredNorm() + b.cov().trace() +
                                         atom.cov().trace() - 2.0 * cross.trace());
      terms.cross[i] = cross.matrix();
    });
  }
  return terms;
}

template <typename T>
T weighted_sum(const BuresDistribution& q, const std::vector<T>& items) {
  std::vector<T> scaled;
  scaled.reserve(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) scaled.push_back(q.weight(i) * items[i]);
  return pairwise_sum(scaled);
}

inline Vector weighted_mean_of_means(const BuresDistribution& q) {
  std::vector<Vector> means;
  means.reserve(q.size());
  for (const auto& a : q.atoms()) means.push_back(a.mean());
  return weighted_sum(q, means);
}

}  // namespace detail

/// G(b) = 1/2 sum_i w_i W2^2(b, mu_i).
inline double objective(const BuresDistribution& q, const GaussianMeasure& b) {
  const AtomTerms terms = detail::atom_terms(q, b, /*need_maps=*/false);
  return 0.5 * detail::weighted_sum(q, terms.w2_sq);
}

/// Objective and gradient evaluated together.
struct ObjectiveAndGradient {
  double value;
  TangentMap gradient;
  /// sum_i w_i M_i
  Matrix mean_linear;
};

inline ObjectiveAndGradient objective_and_gradient(const BuresDistribution& q,
                                                   const GaussianMeasure& b) {
  const AtomTerms terms = detail::atom_terms(q, b, /*need_maps=*/true);
  const double value = 0.5 * detail::weighted_sum(q, terms.w2_sq);
  Matrix mean_linear = symmetrize(detail::weighted_sum(q, terms.linear));
  const Vector mean_offset = detail::weighted_sum(q, terms.offset);
  Matrix sym = Matrix::Identity(b.dim(), b.dim()) - mean_linear;
  return {value, TangentMap{b, std::move(sym), -mean_offset}, std::move(mean_linear)};
}

/// Wasserstein gradient -sum_i w_i (T_{b -> mu_i} - id).
inline TangentMap gradient(const BuresDistribution& q, const GaussianMeasure& b) {
  return objective_and_gradient(q, b).gradient;
}

/// var(Q) = sum_i w_i W2^2(bbar, mu_i) = 2 G(bbar).
inline double variance(const BuresDistribution& q, const GaussianMeasure& bbar) {
  return 2.0 * objective(q, bbar);
}

/// ||Sigma_b - sum_i w_i (Sigma_b^{1/2} Sigma_i Sigma_b^{1/2})^{1/2}||_op
/// + ||m_b - sum_i w_i m_i||.
inline double fixed_point_residual(const BuresDistribution& q, const GaussianMeasure& b) {
  require_pd(b.cov(), "fixed_point_residual");
  const AtomTerms terms = detail::atom_terms(q, b, /*need_maps=*/false);
  const Matrix image = detail::weighted_sum(q, terms.cross);
  const double cov_residual = sym_opnorm(b.cov().matrix() - image);
  const double mean_residual = (b.mean() - detail::weighted_mean_of_means(q)).norm();
  return cov_residual + mean_residual;
}

/// The atom with the largest weight, lowest index on ties.
inline const GaussianMeasure& default_init(const BuresDistribution& q) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < q.size(); ++i) {
    if (q.weight(i) > q.weight(best)) best = i;
  }
  return q.atom(best);
}

/// zeta(Q)^2 / 4, capped at 1.
inline double estimated_pl_constant(const BuresDistribution& q) {
  const double zeta = q.zeta();
  return std::min(1.0, zeta * zeta / 4.0);
}

// ---------------------------------------------------------------------------
// Gradient descent

struct GdOptions {
  std::size_t max_iters = 200;
  /// Stop once ||grad G(b_t)||^2_{b_t} <= tol.
  double tol = 1e-12;
  std::optional<GaussianMeasure> reference;
};

namespace detail {

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

}  // namespace detail

/// Batch gradient descent with unit step:
/// S_t = sum_i w_i M_i(b_{t-1}), Sigma_t = S_t Sigma_{t-1} S_t, m_t = sum_i w_i m_i.
inline SolverResult gd(const BuresDistribution& q, const GaussianMeasure& init,
                       const GdOptions& options = {}) {
  detail::require_dim(q, init);
  require_pd(init.cov(), "gd initial point");
  const detail::Stopwatch clock;
  SolverTrace trace;
  GaussianMeasure current = init;
  bool converged = false;
  std::size_t iterations = 0;
  while (true) {
    const ObjectiveAndGradient eval = objective_and_gradient(q, current);
    TraceRow row;
    row.iter = iterations;
    row.objective = eval.value;
    row.grad_norm_sq = eval.gradient.norm_sq();
    if (options.reference) row.w2_sq_to_ref = w2_distance_sq(current, *options.reference);
    if (row.grad_norm_sq <= options.tol) {
      converged = true;
    }
    if (converged || iterations >= options.max_iters) {
      row.wall_time = clock.seconds();
      trace.push_back(row);
      break;
    }
    row.step_size = 1.0;
    row.wall_time = clock.seconds();
    trace.push_back(row);
    current = exp_map(current, eval.gradient.scaled(-1.0));
    require_pd(current.cov(), "gd iterate");
    ++iterations;
  }
  return {std::move(current), std::move(trace), converged, iterations};
}

/// GD to tight tolerance; the reference barycenter used by experiments.
inline GaussianMeasure barycenter(const BuresDistribution& q, double tol = 1e-14,
                                  std::size_t max_iters = 500) {
  GdOptions options;
  options.tol = tol;
  options.max_iters = max_iters;
  return gd(q, default_init(q), options).final;
}

// ---------------------------------------------------------------------------
// Stochastic gradient descent

/// One SGD step: ((1 - eta) id + eta T_{b -> sample})_# b, eta in [0, 1].
inline GaussianMeasure sgd_step(const GaussianMeasure& b, const GaussianMeasure& sample,
                                double eta) {
  if (!(eta >= 0.0 && eta <= 1.0)) {
    std::ostringstream msg;
    msg << "SGD step " << eta << " outside [0, 1]";
    throw Error(ErrorKind::InvalidSchedule, msg.str());
  }
  return geodesic_point(b, sample, eta);
}

/// Weight of the new iterate in the running average at step t: 1/(t+1).
inline double averaging_weight(std::size_t t) { return 1.0 / (static_cast<double>(t) + 1.0); }

namespace detail {

inline TraceRow stochastic_row(std::size_t iter, const GaussianMeasure& tracked,
                               const SolverOptions& options) {
  TraceRow row;
  row.iter = iter;
  if (options.monitor) {
    const ObjectiveAndGradient eval = objective_and_gradient(*options.monitor, tracked);
    row.objective = eval.value;
    row.grad_norm_sq = eval.gradient.norm_sq();
  }
  if (options.reference) row.w2_sq_to_ref = w2_distance_sq(tracked, *options.reference);
  return row;
}

/// Shared loop: `sample(t)` yields the measure used at step t; the trace
/// follows the averaged iterate when `average` is set.
template <typename SampleFn>
SolverResult run_sgd(std::size_t steps, SampleFn&& sample, const GaussianMeasure& init,
                     const StepSchedule& schedule, const SolverOptions& options, bool average) {
  require_pd(init.cov(), "sgd initial point");
  if (const auto len = schedule.length(); len && *len < steps) {
    std::ostringstream msg;
    msg << "schedule has " << *len << " steps but the stream needs " << steps;
    throw Error(ErrorKind::ScheduleExhausted, msg.str());
  }
  const detail::Stopwatch clock;
  SolverTrace trace;
  trace.reserve(steps + 1);
  GaussianMeasure current = init;
  GaussianMeasure averaged = init;
  for (std::size_t t = 0; t < steps; ++t) {
    const GaussianMeasure& next_sample = sample(t);
    if (next_sample.dim() != init.dim()) {
      throw Error(ErrorKind::DimensionMismatch, "stream element has the wrong dimension");
    }
    const double eta = schedule.step_size(t);
    TraceRow row = stochastic_row(t, average ? averaged : current, options);
    row.step_size = eta;
    row.wall_time = clock.seconds();
    trace.push_back(row);
    current = sgd_step(current, next_sample, eta);
    require_pd(current.cov(), "sgd iterate");
    if (average) {
      averaged = geodesic_point(averaged, current, averaging_weight(t));
      require_pd(averaged.cov(), "averaged sgd iterate");
    }
  }
  TraceRow last = stochastic_row(steps, average ? averaged : current, options);
  last.wall_time = clock.seconds();
  trace.push_back(last);
  return {average ? std::move(averaged) : std::move(current), std::move(trace), true, steps};
}

}  // namespace detail

/// Single pass over `stream`, each element used once in order.
inline SolverResult sgd(const std::vector<GaussianMeasure>& stream, const GaussianMeasure& init,
                        const StepSchedule& schedule, const SolverOptions& options = {}) {
  return detail::run_sgd(
      stream.size(), [&](std::size_t t) -> const GaussianMeasure& { return stream[t]; }, init,
      schedule, options, /*average=*/false);
}

/// Single-pass SGD that also keeps the geodesic running average
/// b~_{t+1} = [t/(t+1) id + 1/(t+1) T_{b~_t -> b_{t+1}}]_# b~_t and returns it.
inline SolverResult averaged_sgd(const std::vector<GaussianMeasure>& stream,
                                 const GaussianMeasure& init, const StepSchedule& schedule,
                                 const SolverOptions& options = {}) {
  return detail::run_sgd(
      stream.size(), [&](std::size_t t) -> const GaussianMeasure& { return stream[t]; }, init,
      schedule, options, /*average=*/true);
}

/// Atom indices drawn i.i.d. from the weights of Q.
inline std::vector<std::size_t> sample_indices(const BuresDistribution& q, std::size_t count,
                                               std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::size_t> out(count);
  for (auto& idx : out) idx = rng.categorical(q.weights());
  return out;
}

/// SGD that draws an atom of Q with replacement at every iteration.
inline SolverResult sgd_with_replacement(const BuresDistribution& q, const GaussianMeasure& init,
                                         const StepSchedule& schedule, std::size_t iters,
                                         std::uint64_t seed, const SolverOptions& options = {},
                                         bool average = false) {
  detail::require_dim(q, init);
  const std::vector<std::size_t> picks = sample_indices(q, iters, seed);
  return detail::run_sgd(
      iters, [&](std::size_t t) -> const GaussianMeasure& { return q.atom(picks[t]); }, init,
      schedule, options, average);
}

}  // namespace bures
