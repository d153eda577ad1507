#pragma once

// Command implementations behind the `bures` executable. Each command writes
// machine-readable results to `out`, human-readable notes to `err`, and
// returns the process exit code.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "bures/diagnostics.hpp"
#include "bures/io.hpp"

namespace bures::cli {

enum ExitCode : int {
  kOk = 0,
  kInvalid = 1,
  kNotConverged = 2,
  kNotRegular = 3,
  kUnsatisfied = 4,
};

// ---------------------------------------------------------------------------
// barycenter

struct BarycenterArgs {
  std::string method = "gd";  // gd | sgd | sgd-replace | avg-sgd
  std::string input;
  std::string init;  // "", "atom:<i>" or a dataset file with one atom
  double tol = 1e-12;
  std::size_t max_iters = 200;
  std::string schedule;  // empty: paper_pl with C_PL = zeta(Q)^2/4
  std::uint64_t seed = 0;
  std::string ref;  // "", "fixed-point" or a dataset file with one atom
  std::string trace;
  std::string output;  // empty: final measure goes to `out`
};

namespace detail {

inline std::optional<std::size_t> parse_atom_token(const std::string& init) {
  if (init.rfind("atom:", 0) != 0) return std::nullopt;
  try {
    std::size_t used = 0;
    const std::string digits = init.substr(5);
    const unsigned long long idx = std::stoull(digits, &used);
    if (used != digits.size()) throw Error(ErrorKind::Parse, "bad atom index in '" + init + "'");
    return static_cast<std::size_t>(idx);
  } catch (const std::logic_error&) {
    throw Error(ErrorKind::Parse, "bad atom index in '" + init + "'");
  }
}

inline int fail(std::ostream& err, const Error& e) {
  err << "error: " << e.what() << '\n';
  return e.kind() == ErrorKind::NotRegular ? kNotRegular : kInvalid;
}

}  // namespace detail

inline int cmd_barycenter(const BarycenterArgs& args, std::ostream& out, std::ostream& err) {
  try {
    const BuresDistribution q = read_dataset(args.input);
    const std::string& m = args.method;
    if (m != "gd" && m != "sgd" && m != "sgd-replace" && m != "avg-sgd") {
      throw Error(ErrorKind::InvalidArgument, "unknown method '" + m + "'");
    }

    // Initial point, and for single-pass methods the stream that follows it.
    std::optional<GaussianMeasure> init;
    std::optional<std::size_t> init_atom;
    if (args.init.empty()) {
      if (m == "sgd" || m == "avg-sgd") init_atom = 0;
    } else if (auto idx = detail::parse_atom_token(args.init)) {
      if (*idx >= q.size()) {
        throw Error(ErrorKind::InvalidArgument, "init atom " + std::to_string(*idx) +
                                                    " out of range (dataset has " +
                                                    std::to_string(q.size()) + " atoms)");
      }
      init_atom = *idx;
    } else {
      init = read_measure(args.init);
    }
    if (init_atom) init = q.atom(*init_atom);
    if (!init) init = default_init(q);
    if (init->dim() != q.dim()) {
      throw Error(ErrorKind::DimensionMismatch, "init dimension differs from the dataset");
    }

    std::optional<GaussianMeasure> reference;
    if (args.ref == "fixed-point") {
      reference = barycenter(q, 1e-14, 500);
    } else if (!args.ref.empty()) {
      reference = read_measure(args.ref);
    }

    SolverResult result{*init, {}, false, 0};
    if (m == "gd") {
      GdOptions options;
      options.tol = args.tol;
      options.max_iters = args.max_iters;
      options.reference = reference;
      result = gd(q, *init, options);
    } else {
      const StepSchedule schedule = args.schedule.empty()
                                        ? StepSchedule::paper_pl(estimated_pl_constant(q))
                                        : parse_schedule(args.schedule);
      SolverOptions options;
      options.reference = reference;
      if (!args.trace.empty()) options.monitor = q;
      if (m == "sgd-replace") {
        result = sgd_with_replacement(q, *init, schedule, args.max_iters, args.seed, options);
      } else {
        std::vector<GaussianMeasure> stream;
        for (std::size_t i = 0; i < q.size(); ++i) {
          if (init_atom && *init_atom == i) continue;
          stream.push_back(q.atom(i));
        }
        result = m == "sgd" ? sgd(stream, *init, schedule, options)
                            : averaged_sgd(stream, *init, schedule, options);
      }
    }

    if (!args.trace.empty()) write_trace(args.trace, result.trace);
    if (args.output.empty()) {
      out << measure_to_json(result.final).dump(2) << '\n';
    } else {
      write_measure(args.output, result.final);
    }
    err << std::setprecision(10) << m << ": " << (result.converged ? "converged" : "not converged")
        << " after " << result.iterations << " iterations";
    if (!result.trace.empty() && !std::isnan(result.trace.back().objective)) {
      err << ", objective " << result.trace.back().objective;
    }
    err << '\n';
    return result.converged ? kOk : kNotConverged;
  } catch (const Error& e) {
    return detail::fail(err, e);
  }
}

// ---------------------------------------------------------------------------
// diagnose

struct DiagnoseArgs {
  std::string input;  // empty: random zeta-regular instances
  std::string point;
  std::optional<double> zeta;
  std::string suite = "all";  // pl | var | smooth | intpl | convexity | all
  std::size_t trials = 100;
  std::uint64_t seed = 0;
  // Random-instance shape when no input is given.
  Eigen::Index dim = 3;
  std::size_t atoms = 5;
  double eig_floor = 0.5;
  int quad_nodes = kDefaultQuadNodes;
  int grid = 17;
  bool demo_nonconvexity = false;
};

namespace detail {

inline bool suite_has(const std::string& suite, const std::string& name) {
  return suite == "all" || suite == name;
}

/// Random point of S_zeta built from Q; redraws on roundoff misses.
inline GaussianMeasure regular_point(const BuresDistribution& q, const GaussianMeasure& base,
                                     double zeta, Rng& rng) {
  for (int attempt = 0; attempt < 100; ++attempt) {
    GaussianMeasure b = random_point_in_hull(q, base, rng);
    if (b.in_regular_set(zeta)) return b;
  }
  throw Error(ErrorKind::NotRegular, "could not draw a point inside S_zeta");
}

inline void run_suite(const DiagnoseArgs& args, const BuresDistribution& q,
                      const GaussianMeasure& bbar, double zeta, const GaussianMeasure& b,
                      Rng& rng, std::vector<InequalityReport>& reports,
                      const std::string& context) {
  auto push = [&](InequalityReport r) {
    r.context = context + (r.context.empty() ? "" : ";" + r.context);
    reports.push_back(std::move(r));
  };
  if (suite_has(args.suite, "pl")) push(check_pl(q, b, bbar, zeta));
  if (suite_has(args.suite, "var")) push(check_variance_inequality(q, b, bbar, zeta));
  if (suite_has(args.suite, "smooth")) {
    const GaussianMeasure b1 = regular_point(q, bbar, zeta, rng);
    SmoothnessReport s = check_smoothness(q, b, b1);
    push(std::move(s.smoothness));
    push(std::move(s.descent));
  }
  if (suite_has(args.suite, "intpl")) push(check_integrated_pl(q, b, bbar, zeta, args.quad_nodes));
  if (suite_has(args.suite, "convexity")) {
    const auto& m0 = q.atom(static_cast<std::size_t>(rng.uniform() * static_cast<double>(q.size())));
    const auto& m1 = q.atom(static_cast<std::size_t>(rng.uniform() * static_cast<double>(q.size())));
    push(convexity_probe_opnorm(b, m0, m1, args.grid));
    push(convexity_probe_neglogdet(b, m0, m1, args.grid));
  }
}

inline std::string describe_irregular(const GaussianMeasure& a, double zeta) {
  std::ostringstream msg;
  msg << std::setprecision(10) << "opnorm " << opnorm(a.cov()) << " (limit 1), det "
      << std::exp(logdet(a.cov())) << " (zeta " << zeta << ")";
  return msg.str();
}

}  // namespace detail

inline int cmd_diagnose(const DiagnoseArgs& args, std::ostream& out, std::ostream& err) {
  try {
    static const std::vector<std::string> suites = {"pl", "var", "smooth", "intpl", "convexity",
                                                    "all"};
    if (std::find(suites.begin(), suites.end(), args.suite) == suites.end()) {
      throw Error(ErrorKind::InvalidArgument, "unknown suite '" + args.suite + "'");
    }
    if (args.demo_nonconvexity) {
      const NonconvexityDemo demo = nonconvexity_demo(args.grid < 3 ? 101 : args.grid);
      out << std::setprecision(17) << "s\tbures_w2_sq\teuclidean_w2_sq\n";
      for (const auto& row : demo.rows) {
        out << row.s << '\t' << row.bures << '\t' << row.euclidean << '\n';
      }
      out << kReportHeader << '\n'
          << format_report(demo.bures_convexity) << '\n'
          << format_report(demo.euclidean_convexity) << '\n';
      err << "bures geodesic midpoint violation: " << (demo.bures_violation ? "found" : "none")
          << "; euclidean segment violation: " << (demo.euclidean_violation ? "found" : "none")
          << '\n';
      return demo.bures_violation && !demo.euclidean_violation ? kOk : kUnsatisfied;
    }

    std::vector<InequalityReport> reports;
    if (!args.input.empty()) {
      const BuresDistribution q = read_dataset(args.input);
      const double zeta = args.zeta ? *args.zeta : std::min(1.0, q.zeta());
      if (const auto bad = q.first_irregular_atom(zeta)) {
        err << "error: atom " << *bad << " is outside S_zeta: "
            << detail::describe_irregular(q.atom(*bad), zeta) << '\n';
        return kNotRegular;
      }
      const GaussianMeasure bbar = barycenter(q);
      if (!args.point.empty()) {
        const GaussianMeasure b = read_measure(args.point);
        if (!b.in_regular_set(zeta)) {
          err << "error: point is outside S_zeta: " << detail::describe_irregular(b, zeta) << '\n';
          return kNotRegular;
        }
        Rng rng(args.seed);
        detail::run_suite(args, q, bbar, zeta, b, rng, reports, "point");
      } else {
        for (std::size_t t = 0; t < args.trials; ++t) {
          Rng rng(derive_seed(args.seed, t));
          const GaussianMeasure b = detail::regular_point(q, bbar, zeta, rng);
          detail::run_suite(args, q, bbar, zeta, b, rng, reports, "trial=" + std::to_string(t));
        }
      }
    } else {
      for (std::size_t t = 0; t < args.trials; ++t) {
        Rng rng(derive_seed(args.seed, t));
        const BuresDistribution q = random_regular_distribution(args.dim, args.atoms, args.eig_floor, rng);
        const double zeta = q.zeta();
        const GaussianMeasure bbar = barycenter(q);
        const GaussianMeasure b = detail::regular_point(q, bbar, zeta, rng);
        detail::run_suite(args, q, bbar, zeta, b, rng, reports, "trial=" + std::to_string(t));
      }
    }
    out << kReportHeader << '\n';
    std::size_t failed = 0;
    for (const auto& r : reports) {
      out << format_report(r) << '\n';
      if (!r.satisfied) ++failed;
    }
    err << reports.size() - failed << "/" << reports.size() << " checks satisfied\n";
    return failed == 0 ? kOk : kUnsatisfied;
  } catch (const Error& e) {
    return detail::fail(err, e);
  }
}

// ---------------------------------------------------------------------------
// experiment

struct ExperimentArgs {
  std::string config;  // empty: population preset
  std::string variant = "sgd";  // gd | sgd | sgd-replace | avg-sgd | all
  std::string out_dir = ".";
  /// Fit over the last `fit_last` points; 0 fits the last half.
  std::size_t fit_last = 0;
};

inline json summarize(const ReplicatedCurve& curve, const ExperimentConfig& cfg,
                      std::size_t fit_last, std::ostream& err) {
  json summary;
  summary["variant"] = to_string(curve.variant);
  summary["replicates"] = cfg.replicates;
  summary["succeeded"] = curve.succeeded;
  summary["failures"] = curve.failures;
  summary["draws"] = curve.draws;
  summary["rejections"] = curve.rejections;
  summary["outside_regular_set"] = !inside_regular_set(cfg);
  summary["band"] = "normal approximation, mean +/- 1.96 standard errors";
  summary["final_mean_error"] = curve.mean.empty() ? 0.0 : curve.mean.back();
  const FitWindow window = fit_last == 0 ? last_half_window(curve.mean.size())
                                         : last_n_window(curve.mean.size(), fit_last);
  summary["window_first"] = window.first;
  summary["window_last"] = window.last;
  try {
    const RateEstimate fit = fit_rate(curve.mean, {std::max<std::size_t>(1, window.first), window.last});
    summary["slope"] = fit.slope;
    summary["intercept"] = fit.intercept;
    summary["r_squared"] = fit.r_squared;
  } catch (const Error& e) {
    err << "warning: rate fit skipped: " << e.what() << '\n';
    summary["slope"] = nullptr;
    summary["intercept"] = nullptr;
    summary["r_squared"] = nullptr;
  }
  return summary;
}

inline int cmd_experiment(const ExperimentArgs& args, std::ostream& out, std::ostream& err) {
  try {
    const ExperimentConfig cfg = args.config.empty() ? population_config() : read_config(args.config);
    std::vector<Variant> variants;
    if (args.variant == "all") {
      variants = {Variant::Gd, Variant::Sgd, Variant::SgdReplacement, Variant::AveragedSgd};
    } else {
      variants = {parse_variant(args.variant)};
    }
    if (!inside_regular_set(cfg)) {
      err << "warning: base covariance has operator norm " << opnorm(cfg.base.cov())
          << " > 1; the run is outside S_zeta and no theoretical rate applies\n";
    }
    std::filesystem::create_directories(args.out_dir);
    json all = json::array();
    for (Variant v : variants) {
      const ReplicatedCurve curve = run_replicated(cfg, v);
      const std::string stem = std::string(to_string(v));
      const auto dir = std::filesystem::path(args.out_dir);
      bures::detail::write_text((dir / ("curve_" + stem + ".csv")).string(), format_curve(curve));
      json summary = summarize(curve, cfg, args.fit_last, err);
      bures::detail::write_text((dir / ("summary_" + stem + ".json")).string(), summary.dump(2) + "\n");
      for (const auto& f : curve.failures) err << "warning: " << f << '\n';
      all.push_back(std::move(summary));
    }
    out << (all.size() == 1 ? all.front() : all).dump(2) << '\n';
    return kOk;
  } catch (const Error& e) {
    return detail::fail(err, e);
  } catch (const std::filesystem::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kInvalid;
  }
}

// ---------------------------------------------------------------------------
// distance

struct DistanceArgs {
  std::string a;
  std::string b;
};

inline int cmd_distance(const DistanceArgs& args, std::ostream& out, std::ostream& err) {
  try {
    const GaussianMeasure a = read_measure(args.a);
    const GaussianMeasure b = read_measure(args.b);
    const double d2 = w2_distance_sq(a, b);
    out << std::setprecision(17) << "w2_sq\t" << d2 << "\nw2\t" << std::sqrt(d2) << '\n';
    return kOk;
  } catch (const Error& e) {
    return detail::fail(err, e);
  }
}

}  // namespace bures::cli
