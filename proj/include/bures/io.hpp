#pragma once

// File formats: datasets (JSON), solver traces (CSV), experiment configs
// (JSON), curves (CSV) and the schedule mini-grammar.
//
// Dataset layout:
//   {"dim": D, "atoms": [{"weight": w, "mean": [..D..], "cov": [[..D..], ..D rows..]}]}
// Doubles are written in the shortest form that reads back to the same
// binary value (at most 17 significant digits).

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "bures/experiments.hpp"

namespace bures {

using json = nlohmann::json;

/// Weight-sum tolerance accepted on load; weights are then renormalized.
inline constexpr double kFileWeightTol = 1e-9;

namespace detail {

inline std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Parse, "cannot open '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorKind::Parse, "cannot write '" + path + "'");
  out << text;
  if (!out) throw Error(ErrorKind::Parse, "write to '" + path + "' failed");
}

inline std::string atom_prefix(std::size_t i) { return "atom " + std::to_string(i) + ": "; }

inline Matrix matrix_from_json(const json& rows, Eigen::Index dim, const std::string& where) {
  if (!rows.is_array() || static_cast<Eigen::Index>(rows.size()) != dim) {
    throw Error(ErrorKind::Parse, where + "cov must be a list of " + std::to_string(dim) + " rows");
  }
  Matrix m(dim, dim);
  for (Eigen::Index i = 0; i < dim; ++i) {
    const json& row = rows[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != dim) {
      throw Error(ErrorKind::Parse, where + "cov row " + std::to_string(i) + " must have " +
                                        std::to_string(dim) + " entries");
    }
    for (Eigen::Index j = 0; j < dim; ++j) {
      const json& x = row[static_cast<std::size_t>(j)];
      if (!x.is_number()) throw Error(ErrorKind::Parse, where + "cov entries must be numbers");
      m(i, j) = x.get<double>();
    }
  }
  return m;
}

inline json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace detail

/// Parses and validates a dataset document. Every failure names the atom
/// index and the violated invariant.
inline BuresDistribution dataset_from_json(const json& doc) {
  if (!doc.is_object()) throw Error(ErrorKind::Parse, "dataset must be a JSON object");
  if (!doc.contains("dim") || !doc["dim"].is_number_integer() || doc["dim"].get<long>() < 1) {
    throw Error(ErrorKind::Parse, "dataset field 'dim' must be a positive integer");
  }
  const auto dim = static_cast<Eigen::Index>(doc["dim"].get<long>());
  if (!doc.contains("atoms") || !doc["atoms"].is_array() || doc["atoms"].empty()) {
    throw Error(ErrorKind::Parse, "dataset field 'atoms' must be a non-empty list");
  }
  std::vector<GaussianMeasure> atoms;
  std::vector<double> weights;
  for (std::size_t i = 0; i < doc["atoms"].size(); ++i) {
    const json& a = doc["atoms"][i];
    const std::string where = detail::atom_prefix(i);
    if (!a.is_object()) throw Error(ErrorKind::Parse, where + "must be an object");
    double weight = 1.0;
    if (a.contains("weight")) {
      if (!a["weight"].is_number()) throw Error(ErrorKind::Parse, where + "weight must be a number");
      weight = a["weight"].get<double>();
    }
    if (!(weight > 0.0) || !std::isfinite(weight)) {
      throw Error(ErrorKind::InvalidArgument, where + "weight must be positive");
    }
    Vector mean = Vector::Zero(dim);
    if (a.contains("mean")) {
      const json& m = a["mean"];
      if (!m.is_array() || static_cast<Eigen::Index>(m.size()) != dim) {
        throw Error(ErrorKind::Parse, where + "mean must have " + std::to_string(dim) + " entries");
      }
      for (Eigen::Index k = 0; k < dim; ++k) {
        if (!m[static_cast<std::size_t>(k)].is_number()) {
          throw Error(ErrorKind::Parse, where + "mean entries must be numbers");
        }
        mean(k) = m[static_cast<std::size_t>(k)].get<double>();
      }
    }
    if (!a.contains("cov")) throw Error(ErrorKind::Parse, where + "missing cov");
    const Matrix cov = detail::matrix_from_json(a["cov"], dim, where);
    try {
      atoms.emplace_back(std::move(mean), SpdMatrix(cov));
    } catch (const Error& e) {
      throw Error(e.kind(), where + "cov invalid (" + e.what() + ")");
    }
    weights.push_back(weight);
  }
  double total = 0.0;
  for (double w : weights) total += w;
  if (std::abs(total - 1.0) > kFileWeightTol) {
    std::ostringstream msg;
    msg << std::setprecision(17) << "weights sum to " << total << ", expected 1 within "
        << kFileWeightTol;
    throw Error(ErrorKind::InvalidArgument, msg.str());
  }
  // Leave sums that are already 1 up to roundoff untouched so files round-trip exactly.
  if (std::abs(total - 1.0) > 1e-13) {
    for (double& w : weights) w /= total;
  }
  return BuresDistribution(std::move(atoms), std::move(weights));
}

inline json dataset_to_json(const BuresDistribution& q) {
  json doc;
  doc["dim"] = q.dim();
  json atoms = json::array();
  for (std::size_t i = 0; i < q.size(); ++i) {
    const GaussianMeasure& a = q.atom(i);
    json entry;
    entry["weight"] = q.weight(i);
    entry["mean"] = std::vector<double>(a.mean().data(), a.mean().data() + a.mean().size());
    entry["cov"] = detail::matrix_to_json(a.cov().matrix());
    atoms.push_back(std::move(entry));
  }
  doc["atoms"] = std::move(atoms);
  return doc;
}

inline json measure_to_json(const GaussianMeasure& m) {
  return dataset_to_json(BuresDistribution({m}, {1.0}));
}

inline BuresDistribution parse_dataset(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("dataset is not valid JSON: ") + e.what());
  }
  return dataset_from_json(doc);
}

inline BuresDistribution read_dataset(const std::string& path) {
  return parse_dataset(detail::read_text(path));
}

inline void write_dataset(const std::string& path, const BuresDistribution& q) {
  detail::write_text(path, dataset_to_json(q).dump(2) + "\n");
}

/// A dataset file holding exactly one atom.
inline GaussianMeasure read_measure(const std::string& path) {
  const BuresDistribution q = read_dataset(path);
  if (q.size() != 1) {
    throw Error(ErrorKind::InvalidArgument,
                "'" + path + "' must hold exactly one atom, found " + std::to_string(q.size()));
  }
  return q.atom(0);
}

inline void write_measure(const std::string& path, const GaussianMeasure& m) {
  detail::write_text(path, measure_to_json(m).dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// Traces

inline constexpr const char* kTraceHeader = "iter,objective,grad_norm_sq,w2_sq_to_ref,step_size";

namespace detail {

inline std::string format_number(double x) {
  if (std::isnan(x)) return "nan";
  std::ostringstream out;
  out << std::setprecision(17) << x;
  return out.str();
}

inline double parse_number(const std::string& field) {
  if (field == "nan") return std::numeric_limits<double>::quiet_NaN();
  try {
    std::size_t used = 0;
    const double x = std::stod(field, &used);
    if (used != field.size()) throw Error(ErrorKind::Parse, "trailing characters in '" + field + "'");
    return x;
  } catch (const std::logic_error&) {
    throw Error(ErrorKind::Parse, "malformed number '" + field + "'");
  }
}

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, sep)) fields.push_back(field);
  return fields;
}

}  // namespace detail

inline std::string format_trace(const SolverTrace& trace) {
  std::ostringstream out;
  out << kTraceHeader << '\n';
  for (const auto& row : trace) {
    out << row.iter << ',' << detail::format_number(row.objective) << ','
        << detail::format_number(row.grad_norm_sq) << ',' << detail::format_number(row.w2_sq_to_ref)
        << ',' << detail::format_number(row.step_size) << '\n';
  }
  return out.str();
}

inline SolverTrace parse_trace(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kTraceHeader) {
    throw Error(ErrorKind::Parse, "trace must start with header '" + std::string(kTraceHeader) + "'");
  }
  SolverTrace trace;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto fields = detail::split(line, ',');
    if (fields.size() != 5) throw Error(ErrorKind::Parse, "trace row needs 5 fields");
    TraceRow row;
    row.iter = static_cast<std::size_t>(std::stoull(fields[0]));
    row.objective = detail::parse_number(fields[1]);
    row.grad_norm_sq = detail::parse_number(fields[2]);
    row.w2_sq_to_ref = detail::parse_number(fields[3]);
    row.step_size = detail::parse_number(fields[4]);
    trace.push_back(row);
  }
  return trace;
}

inline void write_trace(const std::string& path, const SolverTrace& trace) {
  detail::write_text(path, format_trace(trace));
}

// ---------------------------------------------------------------------------
// Schedules: "paper_pl:c=0.25[,k=...]", "exp:c=0.7", "const:0.1", "file:path"

inline StepSchedule parse_schedule(const std::string& spec) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) {
    throw Error(ErrorKind::Parse, "schedule '" + spec + "' must look like kind:args");
  }
  const std::string kind = spec.substr(0, colon);
  const std::string args = spec.substr(colon + 1);
  auto keyed = [&](const std::string& text, const std::string& key) -> std::optional<double> {
    for (const auto& part : detail::split(text, ',')) {
      const auto eq = part.find('=');
      if (eq != std::string::npos && part.substr(0, eq) == key) {
        return detail::parse_number(part.substr(eq + 1));
      }
    }
    return std::nullopt;
  };
  if (kind == "paper_pl") {
    const auto c = keyed(args, "c");
    if (!c) throw Error(ErrorKind::Parse, "paper_pl schedule needs c=<value>");
    if (const auto k = keyed(args, "k")) return StepSchedule::paper_pl(*c, *k);
    return StepSchedule::paper_pl(*c);
  }
  if (kind == "exp") {
    const auto c = keyed(args, "c");
    if (!c) throw Error(ErrorKind::Parse, "exp schedule needs c=<value>");
    return StepSchedule::experiment(*c);
  }
  if (kind == "const") return StepSchedule::constant(detail::parse_number(args));
  if (kind == "file") {
    std::istringstream in(detail::read_text(args));
    std::vector<double> steps;
    std::string token;
    while (in >> token) steps.push_back(detail::parse_number(token));
    return StepSchedule::custom(std::move(steps));
  }
  throw Error(ErrorKind::Parse, "unknown schedule kind '" + kind + "'");
}

// ---------------------------------------------------------------------------
// Experiment configs
//
// {"preset": "population" | "poorly_conditioned" (optional),
//  "dim", "n", "sigma2", "base_cov": [[..]], "schedule": "exp:c=0.7",
//  "replicates", "seed", "recentre", "iterations",
//  "reference": "population" | "empirical", "rescale": alpha}

inline ExperimentConfig config_from_json(const json& doc) {
  if (!doc.is_object()) throw Error(ErrorKind::Parse, "config must be a JSON object");
  auto fail = [](const std::string& field, const std::string& why) -> Error {
    return Error(ErrorKind::Parse, "config field '" + field + "': " + why);
  };
  ExperimentConfig cfg;
  if (doc.contains("preset")) {
    const std::string preset = doc["preset"].is_string() ? doc["preset"].get<std::string>() : "";
    if (preset == "population") cfg = population_config();
    else if (preset == "poorly_conditioned") cfg = poorly_conditioned_config();
    else throw fail("preset", "expected 'population' or 'poorly_conditioned'");
  }
  auto unsigned_field = [&](const char* name, std::size_t& target) {
    if (!doc.contains(name)) return;
    if (!doc[name].is_number_integer() || doc[name].get<long long>() < 0) {
      throw fail(name, "must be a non-negative integer");
    }
    target = static_cast<std::size_t>(doc[name].get<long long>());
  };
  std::size_t dim = static_cast<std::size_t>(cfg.dim);
  unsigned_field("dim", dim);
  unsigned_field("n", cfg.n);
  unsigned_field("replicates", cfg.replicates);
  unsigned_field("iterations", cfg.iterations);
  if (doc.contains("seed")) {
    if (!doc["seed"].is_number_unsigned()) throw fail("seed", "must be a non-negative integer");
    cfg.seed = doc["seed"].get<std::uint64_t>();
  }
  if (doc.contains("sigma2")) {
    if (!doc["sigma2"].is_number()) throw fail("sigma2", "must be a number");
    cfg.sigma2 = doc["sigma2"].get<double>();
  }
  if (doc.contains("recentre")) {
    if (!doc["recentre"].is_boolean()) throw fail("recentre", "must be true or false");
    cfg.recentre = doc["recentre"].get<bool>();
  }
  if (doc.contains("schedule")) {
    if (!doc["schedule"].is_string()) throw fail("schedule", "must be a schedule string");
    try {
      cfg.schedule = parse_schedule(doc["schedule"].get<std::string>());
    } catch (const Error& e) {
      throw fail("schedule", e.what());
    }
  }
  if (doc.contains("reference")) {
    const std::string ref = doc["reference"].is_string() ? doc["reference"].get<std::string>() : "";
    if (ref == "population") cfg.reference = ReferenceKind::Population;
    else if (ref == "empirical") cfg.reference = ReferenceKind::Empirical;
    else throw fail("reference", "expected 'population' or 'empirical'");
  }
  if (dim < 1) throw fail("dim", "must be >= 1");
  cfg.dim = static_cast<Eigen::Index>(dim);
  if (doc.contains("base_cov")) {
    try {
      cfg.base = GaussianMeasure::centered(SpdMatrix(detail::matrix_from_json(doc["base_cov"], cfg.dim, "")));
    } catch (const Error& e) {
      throw fail("base_cov", e.what());
    }
  } else if (cfg.base.dim() != cfg.dim) {
    cfg.base = GaussianMeasure::standard(cfg.dim);
  }
  if (doc.contains("rescale")) {
    if (!doc["rescale"].is_number() || !(doc["rescale"].get<double>() > 0.0)) {
      throw fail("rescale", "must be a positive number");
    }
    cfg = rescaled(cfg, doc["rescale"].get<double>());
  }
  try {
    validate(cfg);
  } catch (const Error& e) {
    throw Error(ErrorKind::Parse, e.what());
  }
  return cfg;
}

inline ExperimentConfig read_config(const std::string& path) {
  json doc;
  try {
    doc = json::parse(detail::read_text(path));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("config is not valid JSON: ") + e.what());
  }
  return config_from_json(doc);
}

inline constexpr const char* kCurveHeader = "iter,mean_error,lo95,hi95";

inline std::string format_curve(const ReplicatedCurve& curve) {
  std::ostringstream out;
  out << kCurveHeader << '\n';
  for (std::size_t t = 0; t < curve.mean.size(); ++t) {
    out << t << ',' << detail::format_number(curve.mean[t]) << ','
        << detail::format_number(curve.lo95[t]) << ',' << detail::format_number(curve.hi95[t])
        << '\n';
  }
  return out.str();
}

}  // namespace bures
