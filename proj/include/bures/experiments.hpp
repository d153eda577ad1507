#pragma once

// Synthetic datasets with a known barycenter, replicated solver runs with
// normal-approximation 95% bands, and log-log rate fits.

#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "bures/solvers.hpp"

namespace bures {

enum class Variant { Gd, Sgd, SgdReplacement, AveragedSgd };

inline const char* to_string(Variant v) {
  switch (v) {
    case Variant::Gd: return "gd";
    case Variant::Sgd: return "sgd";
    case Variant::SgdReplacement: return "sgd-replace";
    case Variant::AveragedSgd: return "avg-sgd";
  }
  return "unknown";
}

inline Variant parse_variant(const std::string& name) {
  if (name == "gd") return Variant::Gd;
  if (name == "sgd") return Variant::Sgd;
  if (name == "sgd-replace" || name == "sgd_replacement") return Variant::SgdReplacement;
  if (name == "avg-sgd" || name == "averaged_sgd") return Variant::AveragedSgd;
  throw Error(ErrorKind::Parse, "unknown variant '" + name + "'");
}

/// What the error curve is measured against.
enum class ReferenceKind {
  /// The sampling base, the population barycenter.
  Population,
  /// The barycenter of the sampled dataset (the base itself when recentred,
  /// otherwise GD to tolerance 1e-14).
  Empirical,
};

struct ExperimentConfig {
  Eigen::Index dim = 3;
  std::size_t n = 1000;
  /// Entry variance of the perturbation matrices A_i.
  double sigma2 = 0.25;
  GaussianMeasure base = GaussianMeasure::standard(3);
  StepSchedule schedule = StepSchedule::experiment(0.7);
  std::size_t replicates = 100;
  std::uint64_t seed = 0;
  /// Shift the sampled tangent vectors to mean zero so `base` is the exact
  /// empirical barycenter.
  bool recentre = false;
  /// GD iterations, or SGD-with-replacement draws; 0 picks the default
  /// (50 for GD, n for SGD with replacement).
  std::size_t iterations = 0;
  ReferenceKind reference = ReferenceKind::Population;
};

inline void validate(const ExperimentConfig& cfg) {
  auto fail = [](const std::string& field, const std::string& why) {
    throw Error(ErrorKind::InvalidArgument, "config field '" + field + "': " + why);
  };
  if (cfg.dim < 1) fail("dim", "must be >= 1");
  if (cfg.n < 1) fail("n", "must be >= 1");
  if (!(cfg.sigma2 > 0.0) || !std::isfinite(cfg.sigma2)) fail("sigma2", "must be > 0");
  if (cfg.replicates < 1) fail("replicates", "must be >= 1");
  if (cfg.base.dim() != cfg.dim) fail("base", "dimension differs from dim");
  if (cfg.base.cov().min_eigenvalue() < kPdFloor) fail("base", "covariance must be positive definite");
}

/// Sampling base within the unit operator-norm ball, the setting covered by
/// the convergence guarantees.
inline bool inside_regular_set(const ExperimentConfig& cfg) {
  return opnorm(cfg.base.cov()) <= 1.0 + 1e-12;
}

/// Same experiment with every state scaled by alpha (covariances by alpha^2).
inline ExperimentConfig rescaled(ExperimentConfig cfg, double alpha) {
  cfg.base = cfg.base.scaled(alpha);
  return cfg;
}

/// Well-conditioned setup: base I_3, sigma2 = 0.25, eta_t = 2/(0.7 (t + 2/0.7 + 1)).
inline ExperimentConfig population_config() { return ExperimentConfig{}; }

/// Poorly conditioned setup: base diag(20, 1, 1), sigma2 = 1,
/// eta_t = 2/(0.1 (t + 2/0.1 + 1)). The base lies outside the unit ball.
inline ExperimentConfig poorly_conditioned_config() {
  ExperimentConfig cfg;
  Vector diag(3);
  diag << 20.0, 1.0, 1.0;
  cfg.base = GaussianMeasure::centered(SpdMatrix::diagonal(diag));
  cfg.sigma2 = 1.0;
  cfg.schedule = StepSchedule::experiment(0.1);
  return cfg;
}

struct SampledDataset {
  BuresDistribution distribution;
  /// Tangent vectors V_i at the base, after recentring if requested.
  std::vector<Matrix> tangents;
  std::size_t draws = 0;
  std::size_t rejections = 0;
};

/// Sigma_i = exp_base(sym(A_i)) with A_i entries i.i.d. N(0, sigma2),
/// sym(A) = (A + A^T)/2, and sym(A_i) read as a covariance velocity: the
/// transport tangent is V_i = L_base[sym(A_i)] (velocity_to_tangent), so
/// Sigma_i = (I + V_i) base (I + V_i). Draws with I + V not positive
/// definite are rejected and redrawn. With `recentre`, the V_i are shifted
/// by their mean; if that breaks admissibility the whole batch is redrawn.
inline SampledDataset sample_dataset(const ExperimentConfig& cfg) {
  validate(cfg);
  Rng rng(cfg.seed);
  const Eigen::Index d = cfg.dim;
  const double stddev = std::sqrt(cfg.sigma2);
  const Matrix identity = Matrix::Identity(d, d);
  const std::size_t max_draws = 1000 * cfg.n + 1000;
  std::size_t draws = 0, rejections = 0;

  auto admissible = [&](const Matrix& v) { return min_eigenvalue(identity + v) > kPdFloor; };

  while (true) {
    std::vector<Matrix> tangents;
    tangents.reserve(cfg.n);
    while (tangents.size() < cfg.n) {
      if (draws >= max_draws) {
        throw Error(ErrorKind::ExpNotAdmissible,
                    "too many rejected draws; sigma2 is too large for this dimension");
      }
      ++draws;
      const Matrix a = rng.gaussian_matrix(d, d, stddev);
      Matrix v = velocity_to_tangent(cfg.base, symmetrize(a));
      if (!admissible(v)) {
        ++rejections;
        continue;
      }
      tangents.push_back(std::move(v));
    }
    if (cfg.recentre) {
      std::vector<Matrix> scaled;
      for (const auto& v : tangents) scaled.push_back(v / static_cast<double>(cfg.n));
      const Matrix shift = pairwise_sum(scaled);
      bool ok = true;
      for (auto& v : tangents) {
        v -= shift;
        v = symmetrize(v);
        ok = ok && admissible(v);
      }
      if (!ok) {
        rejections += cfg.n;
        continue;
      }
    }
    std::vector<GaussianMeasure> atoms;
    atoms.reserve(cfg.n);
    const Vector zero = Vector::Zero(d);
    for (const auto& v : tangents) atoms.push_back(exp_map(cfg.base, v, zero));
    return {BuresDistribution::uniform(std::move(atoms)), std::move(tangents), draws, rejections};
  }
}

/// Config for replicate r: the seed is derived from (cfg.seed, r).
inline ExperimentConfig replicate_config(ExperimentConfig cfg, std::size_t r) {
  cfg.seed = derive_seed(cfg.seed, r);
  return cfg;
}

struct ReplicatedCurve {
  Variant variant = Variant::Gd;
  /// Per-iteration mean of W2^2(b_t, reference) over successful replicates.
  std::vector<double> mean;
  /// mean -/+ 1.96 * standard error (normal approximation).
  std::vector<double> lo95;
  std::vector<double> hi95;
  std::vector<std::vector<double>> per_replicate;
  std::size_t succeeded = 0;
  std::vector<std::string> failures;
  std::size_t draws = 0;
  std::size_t rejections = 0;
  /// Mean over replicates of var(Q_r) = 2 G(reference) on each dataset.
  double mean_variance = 0.0;
  /// Mean over replicates of min atom logdet.
  double mean_min_logdet = 0.0;
};

namespace detail {

struct ReplicateOutcome {
  std::vector<double> errors;
  std::size_t draws = 0;
  std::size_t rejections = 0;
  double variance = 0.0;
  double min_logdet = 0.0;
  std::string failure;
};

inline std::vector<double> error_column(const SolverTrace& trace) {
  std::vector<double> out;
  out.reserve(trace.size());
  for (const auto& row : trace) out.push_back(row.w2_sq_to_ref);
  return out;
}

inline std::size_t gd_iterations(const ExperimentConfig& cfg) {
  return cfg.iterations == 0 ? 50 : cfg.iterations;
}

inline std::size_t curve_length(const ExperimentConfig& cfg, Variant variant) {
  switch (variant) {
    case Variant::Gd: return gd_iterations(cfg) + 1;
    case Variant::Sgd:
    case Variant::AveragedSgd: return cfg.n;
    case Variant::SgdReplacement: return (cfg.iterations == 0 ? cfg.n : cfg.iterations) + 1;
  }
  return 0;
}

inline ReplicateOutcome run_replicate(const ExperimentConfig& base_cfg, Variant variant,
                                      std::size_t r) {
  ReplicateOutcome out;
  try {
    const ExperimentConfig cfg = replicate_config(base_cfg, r);
    SampledDataset data = sample_dataset(cfg);
    out.draws = data.draws;
    out.rejections = data.rejections;
    const BuresDistribution& q = data.distribution;
    GaussianMeasure reference = cfg.base;
    if (cfg.reference == ReferenceKind::Empirical && !cfg.recentre) reference = barycenter(q);
    out.variance = variance(q, reference);
    out.min_logdet = q.min_logdet();

    SolverOptions options;
    options.reference = reference;
    const GaussianMeasure& init = q.atom(0);
    std::vector<GaussianMeasure> stream(q.atoms().begin() + 1, q.atoms().end());
    switch (variant) {
      case Variant::Gd: {
        GdOptions gd_options;
        gd_options.max_iters = gd_iterations(cfg);
        gd_options.tol = 0.0;
        gd_options.reference = reference;
        out.errors = error_column(gd(q, init, gd_options).trace);
        break;
      }
      case Variant::Sgd:
        out.errors = error_column(sgd(stream, init, cfg.schedule, options).trace);
        break;
      case Variant::AveragedSgd:
        out.errors = error_column(averaged_sgd(stream, init, cfg.schedule, options).trace);
        break;
      case Variant::SgdReplacement: {
        const std::size_t iters = cfg.iterations == 0 ? cfg.n : cfg.iterations;
        out.errors = error_column(sgd_with_replacement(q, init, cfg.schedule, iters,
                                                       derive_seed(cfg.seed, 0xA7), options)
                                      .trace);
        break;
      }
    }
    // GD can stop early on an exactly zero gradient; hold the last value.
    const std::size_t len = curve_length(base_cfg, variant);
    while (!out.errors.empty() && out.errors.size() < len) out.errors.push_back(out.errors.back());
  } catch (const Error& e) {
    out.errors.clear();
    out.failure = "replicate " + std::to_string(r) + ": " + e.what();
  }
  return out;
}

}  // namespace detail

inline ReplicatedCurve run_replicated(const ExperimentConfig& cfg, Variant variant) {
  validate(cfg);
  std::vector<detail::ReplicateOutcome> outcomes(cfg.replicates);
  parallel_for(
      cfg.replicates, [&](std::size_t r) { outcomes[r] = detail::run_replicate(cfg, variant, r); },
      /*min_chunk=*/1);

  ReplicatedCurve curve;
  curve.variant = variant;
  const std::size_t len = detail::curve_length(cfg, variant);
  std::vector<double> sum(len, 0.0);
  double variance_sum = 0.0, logdet_sum = 0.0;
  for (auto& o : outcomes) {
    curve.draws += o.draws;
    curve.rejections += o.rejections;
    if (!o.failure.empty()) {
      curve.failures.push_back(o.failure);
      continue;
    }
    ++curve.succeeded;
    variance_sum += o.variance;
    logdet_sum += o.min_logdet;
    for (std::size_t t = 0; t < len; ++t) sum[t] += o.errors[t];
    curve.per_replicate.push_back(std::move(o.errors));
  }
  if (curve.succeeded == 0) {
    throw Error(ErrorKind::NonConvergence, "every replicate failed");
  }
  const double count = static_cast<double>(curve.succeeded);
  curve.mean_variance = variance_sum / count;
  curve.mean_min_logdet = logdet_sum / count;
  curve.mean.resize(len);
  curve.lo95.resize(len);
  curve.hi95.resize(len);
  for (std::size_t t = 0; t < len; ++t) {
    const double mean = sum[t] / count;
    double sq = 0.0;
    for (const auto& errors : curve.per_replicate) sq += (errors[t] - mean) * (errors[t] - mean);
    const double stderr_t =
        curve.succeeded > 1 ? std::sqrt(sq / (count - 1.0)) / std::sqrt(count) : 0.0;
    curve.mean[t] = mean;
    curve.lo95[t] = mean - 1.96 * stderr_t;
    curve.hi95[t] = mean + 1.96 * stderr_t;
  }
  return curve;
}

/// Half-open index range [first, last) of a curve.
struct FitWindow {
  std::size_t first = 0;
  std::size_t last = 0;
};

inline FitWindow last_half_window(std::size_t length) { return {length / 2, length}; }

inline FitWindow last_n_window(std::size_t length, std::size_t count) {
  return {length > count ? length - count : 1, length};
}

struct RateEstimate {
  double slope = 0.0;
  double intercept = 0.0;
  FitWindow window;
  double r_squared = 0.0;
};

/// Least squares of ln(curve[t]) on ln(t) over the window; t must be >= 1.
inline RateEstimate fit_rate(const std::vector<double>& curve, FitWindow window) {
  if (window.last > curve.size() || window.first >= window.last) {
    throw Error(ErrorKind::DegenerateFit, "fit window is empty or exceeds the curve");
  }
  if (window.first == 0) {
    throw Error(ErrorKind::InvalidArgument, "log-log fit window must start at t >= 1");
  }
  const std::size_t count = window.last - window.first;
  if (count < 3) throw Error(ErrorKind::DegenerateFit, "fit window needs at least 3 points");
  std::vector<double> xs, ys;
  for (std::size_t t = window.first; t < window.last; ++t) {
    if (!(curve[t] > 0.0)) {
      throw Error(ErrorKind::InvalidArgument,
                  "curve value at t=" + std::to_string(t) + " is not positive");
    }
    xs.push_back(std::log(static_cast<double>(t)));
    ys.push_back(std::log(curve[t]));
  }
  const double n = static_cast<double>(count);
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (!(sxx > 0.0)) throw Error(ErrorKind::DegenerateFit, "no spread in ln(t)");
  RateEstimate est;
  est.slope = sxy / sxx;
  est.intercept = my - est.slope * mx;
  est.window = window;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const double r = ys[i] - (est.intercept + est.slope * xs[i]);
    ss_res += r * r;
  }
  est.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  return est;
}

/// (2 / zeta) (1 - zeta^2/4)^T gap0: bound on W2^2(b_T, bbar) for GD.
inline double gd_distance_bound(double zeta, std::size_t iters, double gap0) {
  return 2.0 / zeta * std::pow(1.0 - zeta * zeta / 4.0, static_cast<double>(iters)) * gap0;
}

/// 96 var(Q) / (n zeta^5): bound on E W2^2(b_n, bbar) for single-pass SGD.
inline double sgd_distance_bound(double variance, std::size_t n, double zeta) {
  return 96.0 * variance / (static_cast<double>(n) * std::pow(zeta, 5));
}

}  // namespace bures
