#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "bures/cli.hpp"
#include "oracles.hpp"

using namespace bures;
namespace fs = std::filesystem;

namespace {

class TempDir : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() /
           (std::string("bures_test_") + info->test_suite_name() + "_" + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  std::string write(const std::string& name, const std::string& text) const {
    std::ofstream(path(name)) << text;
    return path(name);
  }

  fs::path dir_;
};

std::string samples(const std::string& name) { return std::string(BURES_SAMPLES_DIR) + "/" + name; }

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

BuresDistribution random_dataset(std::uint64_t seed, int d, int n) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(0.1, 1.0);
  std::vector<GaussianMeasure> atoms;
  std::vector<double> weights;
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    Vector mean(d);
    for (int j = 0; j < d; ++j) mean(j) = normal(gen);
    atoms.emplace_back(mean, SpdMatrix(oracle::random_spd(gen, d, 0.2, 1.0)));
    weights.push_back(unif(gen));
    total += weights.back();
  }
  for (auto& w : weights) w /= total;
  return BuresDistribution(atoms, weights);
}

using IoTest = TempDir;
using CliTest = TempDir;

}  // namespace

TEST_F(IoTest, DatasetRoundTripIsExact) {
  const auto q = random_dataset(1, 3, 7);
  write_dataset(path("q.json"), q);
  const auto back = read_dataset(path("q.json"));
  ASSERT_EQ(back.size(), q.size());
  for (std::size_t i = 0; i < q.size(); ++i) {
    EXPECT_EQ(back.weight(i), q.weight(i));
    EXPECT_EQ(back.atom(i).mean(), q.atom(i).mean());
    EXPECT_EQ(back.atom(i).cov().matrix(), q.atom(i).cov().matrix());
  }
}

TEST_F(IoTest, AsymmetricCovarianceNamesAtom) {
  const std::string text = R"({"dim": 2, "atoms": [
    {"weight": 0.5, "cov": [[1, 0], [0, 1]]},
    {"weight": 0.5, "cov": [[1, 0.5], [0.2, 1]]}]})";
  try {
    parse_dataset(text);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NotSymmetric);
    EXPECT_NE(std::string(e.what()).find("atom 1"), std::string::npos) << e.what();
  }
}

TEST_F(IoTest, MalformedInputs) {
  EXPECT_THROW(parse_dataset("{not json"), Error);
  EXPECT_THROW(parse_dataset(R"({"dim": 0, "atoms": []})"), Error);
  EXPECT_THROW(parse_dataset(R"({"dim": 1, "atoms": [{"weight": 0.4, "cov": [[1]]}]})"), Error);
  EXPECT_THROW(parse_dataset(R"({"dim": 2, "atoms": [{"cov": [[1, 0]]}]})"), Error);
  EXPECT_THROW(parse_dataset(R"({"dim": 1, "atoms": [{"cov": [[-1]]}]})"), Error);
  EXPECT_THROW(parse_dataset(R"({"dim": 1, "atoms": [{"mean": [1, 2], "cov": [[1]]}]})"), Error);
  // Weight sums within 1e-9 are accepted and renormalized.
  const auto q = parse_dataset(
      R"({"dim": 1, "atoms": [{"weight": 0.5, "cov": [[1]]}, {"weight": 0.5000000001, "cov": [[2]]}]})");
  EXPECT_NEAR(q.weight(0) + q.weight(1), 1.0, 1e-15);
}

TEST_F(IoTest, TraceRoundTrip) {
  SolverTrace trace(3);
  for (std::size_t t = 0; t < 3; ++t) {
    trace[t].iter = t;
    trace[t].objective = 1.0 / (t + 3.0);
    trace[t].grad_norm_sq = 0.1 * t;
    trace[t].step_size = t < 2 ? 1.0 / 7.0 : 0.0;
  }
  const std::string text = format_trace(trace);
  EXPECT_EQ(text.substr(0, text.find('\n')), kTraceHeader);
  const auto back = parse_trace(text);
  ASSERT_EQ(back.size(), 3u);
  for (std::size_t t = 0; t < 3; ++t) {
    EXPECT_EQ(back[t].iter, t);
    EXPECT_EQ(back[t].objective, trace[t].objective);
    EXPECT_TRUE(std::isnan(back[t].w2_sq_to_ref));
    EXPECT_EQ(back[t].step_size, trace[t].step_size);
  }
}

TEST_F(IoTest, ScheduleGrammar) {
  EXPECT_NEAR(parse_schedule("paper_pl:c=1")(0), 0.5, 1e-15);
  EXPECT_NEAR(parse_schedule("paper_pl:c=1,k=1")(0), 0.5, 1e-15);
  EXPECT_NEAR(parse_schedule("exp:c=0.7")(0), StepSchedule::experiment(0.7)(0), 0.0);
  EXPECT_DOUBLE_EQ(parse_schedule("const:0.1")(5), 0.1);
  const auto file = write("steps.txt", "0.5\n0.25 0.125\n");
  const auto custom = parse_schedule("file:" + file);
  EXPECT_EQ(custom.length().value(), 3u);
  EXPECT_DOUBLE_EQ(custom(2), 0.125);
  EXPECT_THROW(parse_schedule("exp"), Error);
  EXPECT_THROW(parse_schedule("exp:k=2"), Error);
  EXPECT_THROW(parse_schedule("cosine:c=1"), Error);
  EXPECT_THROW(parse_schedule("const:abc"), Error);
}

TEST_F(IoTest, ConfigFields) {
  const auto cfg = read_config(samples("small_experiment.json"));
  EXPECT_EQ(cfg.n, 200u);
  EXPECT_EQ(cfg.replicates, 20u);
  EXPECT_EQ(cfg.seed, 7u);
  const auto poor = read_config(samples("poorly_conditioned.json"));
  EXPECT_DOUBLE_EQ(opnorm(poor.base.cov()), 20.0);
  try {
    config_from_json(json::parse(R"({"sigma2": "big"})"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("'sigma2'"), std::string::npos) << e.what();
  }
  try {
    config_from_json(json::parse(R"({"n": 0})"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("'n'"), std::string::npos) << e.what();
  }
}

TEST_F(CliTest, BarycenterScalarPair) {
  cli::BarycenterArgs args;
  args.input = samples("two_scalars.json");
  args.output = path("out.json");
  args.trace = path("trace.csv");
  std::ostringstream out, err;
  EXPECT_EQ(cli::cmd_barycenter(args, out, err), cli::kOk) << err.str();
  EXPECT_NEAR(read_measure(args.output).cov()(0, 0), 2.25, 1e-14);
  const auto trace = parse_trace(slurp(args.trace));
  ASSERT_EQ(trace.size(), 2u);
  EXPECT_LE(trace[1].objective, trace[0].objective);
}

TEST_F(CliTest, BarycenterSingleAtomAndExitCodes) {
  write_dataset(path("one.json"), random_dataset(2, 3, 1));
  cli::BarycenterArgs args;
  args.input = path("one.json");
  write_measure(path("init.json"), GaussianMeasure::standard(3));
  args.init = path("init.json");
  std::ostringstream out, err;
  EXPECT_EQ(cli::cmd_barycenter(args, out, err), cli::kOk);
  EXPECT_NE(err.str().find("after 1 iterations"), std::string::npos) << err.str();
  EXPECT_NO_THROW(json::parse(out.str()));

  write_dataset(path("many.json"), random_dataset(3, 3, 6));
  args.input = path("many.json");
  args.max_iters = 1;
  args.tol = 0.0;
  EXPECT_EQ(cli::cmd_barycenter(args, out, err), cli::kNotConverged);

  args.input = write("bad.json", R"({"dim": 1, "atoms": [{"weight": 0.5, "cov": [[1]]}]})");
  std::ostringstream bad_err;
  EXPECT_EQ(cli::cmd_barycenter(args, out, bad_err), cli::kInvalid);
  EXPECT_NE(bad_err.str().find("weights sum"), std::string::npos) << bad_err.str();
}

TEST_F(CliTest, BarycenterStochasticVariants) {
  write_dataset(path("q.json"), random_dataset(4, 2, 20));
  for (const std::string method : {"sgd", "avg-sgd", "sgd-replace"}) {
    cli::BarycenterArgs args;
    args.method = method;
    args.input = path("q.json");
    args.schedule = "exp:c=0.7";
    args.ref = "fixed-point";
    args.trace = path(method + ".csv");
    args.max_iters = 30;
    std::ostringstream out, err;
    ASSERT_EQ(cli::cmd_barycenter(args, out, err), cli::kOk) << method << err.str();
    const auto trace = parse_trace(slurp(args.trace));
    ASSERT_EQ(trace.size(), method == "sgd-replace" ? 31u : 20u) << method;
    EXPECT_FALSE(std::isnan(trace.back().w2_sq_to_ref));
  }
  cli::BarycenterArgs args;
  args.method = "sgd";
  args.input = path("q.json");
  args.init = "atom:99";
  std::ostringstream out, err;
  EXPECT_EQ(cli::cmd_barycenter(args, out, err), cli::kInvalid);
}

TEST_F(CliTest, DiagnoseRegularityGate) {
  cli::DiagnoseArgs args;
  args.input = samples("two_scalars.json");
  args.zeta = 0.5;
  std::ostringstream out, err;
  EXPECT_EQ(cli::cmd_diagnose(args, out, err), cli::kNotRegular);
  EXPECT_NE(err.str().find("atom 1"), std::string::npos) << err.str();
}

TEST_F(CliTest, DiagnoseRecentredDatasetAllSatisfied) {
  ExperimentConfig cfg;
  cfg.n = 8;
  cfg.sigma2 = 0.002;
  cfg.recentre = true;
  cfg.base = GaussianMeasure::centered(Matrix(0.75 * Matrix::Identity(3, 3)));
  cfg.seed = 5;
  write_dataset(path("q.json"), sample_dataset(cfg).distribution);
  cli::DiagnoseArgs args;
  args.input = path("q.json");
  args.trials = 10;
  std::ostringstream out, err;
  EXPECT_EQ(cli::cmd_diagnose(args, out, err), cli::kOk) << err.str();
  std::istringstream lines(out.str());
  std::string line;
  std::getline(lines, line);
  EXPECT_EQ(line, kReportHeader);
  std::size_t count = 0;
  while (std::getline(lines, line)) {
    EXPECT_TRUE(parse_report(line).satisfied) << line;
    ++count;
  }
  EXPECT_EQ(count, 10u * 7u);
}

TEST_F(CliTest, DiagnoseRandomInstancesAndDemo) {
  cli::DiagnoseArgs args;
  args.trials = 5;
  args.suite = "pl";
  std::ostringstream out, err;
  EXPECT_EQ(cli::cmd_diagnose(args, out, err), cli::kOk) << err.str();

  args.demo_nonconvexity = true;
  std::ostringstream demo_out, demo_err;
  EXPECT_EQ(cli::cmd_diagnose(args, demo_out, demo_err), cli::kOk);
  EXPECT_NE(demo_err.str().find("bures geodesic midpoint violation: found"), std::string::npos);
  EXPECT_NE(demo_err.str().find("euclidean segment violation: none"), std::string::npos);

  args.demo_nonconvexity = false;
  args.suite = "everything";
  EXPECT_EQ(cli::cmd_diagnose(args, out, err), cli::kInvalid);
}

TEST_F(CliTest, ExperimentSmokeRun) {
  const auto cfg = write("cfg.json",
                         R"({"dim": 2, "n": 10, "replicates": 1, "seed": 3, "sigma2": 0.1})");
  cli::ExperimentArgs args;
  args.config = cfg;
  args.variant = "sgd";
  args.out_dir = path("out");
  std::ostringstream out, err;
  ASSERT_EQ(cli::cmd_experiment(args, out, err), cli::kOk) << err.str();
  ASSERT_TRUE(fs::exists(path("out/curve_sgd.csv")));
  const auto summary = json::parse(slurp(path("out/summary_sgd.json")));
  EXPECT_TRUE(summary.contains("slope"));
  EXPECT_TRUE(summary.contains("r_squared"));
  EXPECT_FALSE(summary["outside_regular_set"].get<bool>());
  EXPECT_EQ(slurp(path("out/curve_sgd.csv")).substr(0, 26), std::string(kCurveHeader) + "\n");
}

TEST_F(CliTest, ExperimentWarnsOutsideRegularSet) {
  const auto cfg = write("cfg.json", R"({"preset": "poorly_conditioned", "n": 10, "replicates": 1})");
  cli::ExperimentArgs args;
  args.config = cfg;
  args.out_dir = path("out");
  std::ostringstream out, err;
  ASSERT_EQ(cli::cmd_experiment(args, out, err), cli::kOk) << err.str();
  EXPECT_NE(err.str().find("outside S_zeta"), std::string::npos);
  EXPECT_TRUE(json::parse(out.str())["outside_regular_set"].get<bool>());

  args.config = write("bad.json", R"({"replicates": 0})");
  std::ostringstream bad_err;
  EXPECT_EQ(cli::cmd_experiment(args, out, bad_err), cli::kInvalid);
  EXPECT_NE(bad_err.str().find("'replicates'"), std::string::npos) << bad_err.str();
}

TEST_F(CliTest, DistanceSymmetric) {
  const auto ex = nonconvexity_example_matrices();
  write_measure(path("a.json"), GaussianMeasure::centered(ex.a));
  write_measure(path("b.json"), GaussianMeasure::centered(ex.b));
  auto run = [&](const std::string& a, const std::string& b) {
    std::ostringstream out, err;
    EXPECT_EQ(cli::cmd_distance({a, b}, out, err), cli::kOk);
    std::istringstream in(out.str());
    std::string label;
    double value = 0.0;
    in >> label >> value;
    EXPECT_EQ(label, "w2_sq");
    return value;
  };
  const double ab = run(path("a.json"), path("b.json"));
  EXPECT_NEAR(ab, run(path("b.json"), path("a.json")), 1e-12);
  EXPECT_NEAR(ab, oracle::w2_sq(ex.a, ex.b), 1e-10);
  EXPECT_NEAR(run(path("a.json"), path("a.json")), 0.0, 1e-12);

  write_measure(path("one.json"), GaussianMeasure::centered(Matrix::Constant(1, 1, 1.0)));
  write_measure(path("four.json"), GaussianMeasure::centered(Matrix::Constant(1, 1, 4.0)));
  EXPECT_NEAR(run(path("one.json"), path("four.json")), 1.0, 1e-14);
}

TEST_F(CliTest, BinaryEndToEnd) {
  const std::string cli = BURES_CLI_PATH;
  const std::string out = path("bary.json");
  const std::string cmd = "\"" + cli + "\" barycenter gd --input \"" + samples("two_scalars.json") +
                          "\" --output \"" + out + "\" 2>/dev/null";
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  EXPECT_NEAR(read_measure(out).cov()(0, 0), 2.25, 1e-14);

  const std::string gate = "\"" + cli + "\" diagnose --input \"" + samples("two_scalars.json") +
                           "\" --zeta 0.5 >/dev/null 2>&1";
  const int status = std::system(gate.c_str());
  ASSERT_TRUE(WIFEXITED(status));
  EXPECT_EQ(WEXITSTATUS(status), cli::kNotRegular);

  const std::string bad = "\"" + cli + "\" barycenter gd --input /nonexistent.json >/dev/null 2>&1";
  const int bad_status = std::system(bad.c_str());
  ASSERT_TRUE(WIFEXITED(bad_status));
  EXPECT_EQ(WEXITSTATUS(bad_status), cli::kInvalid);
}
