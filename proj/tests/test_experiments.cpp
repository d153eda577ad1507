#include <gtest/gtest.h>

#include <cmath>

#include "bures/experiments.hpp"

using namespace bures;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig cfg;
  cfg.n = 40;
  cfg.replicates = 4;
  cfg.seed = 17;
  return cfg;
}

}  // namespace

TEST(SampleDataset, DeterministicGivenSeed) {
  const auto a = sample_dataset(small_config());
  const auto b = sample_dataset(small_config());
  ASSERT_EQ(a.distribution.size(), 40u);
  for (std::size_t i = 0; i < a.distribution.size(); ++i) {
    ASSERT_EQ((a.distribution.atom(i).cov().matrix() - b.distribution.atom(i).cov().matrix())
                  .cwiseAbs()
                  .maxCoeff(),
              0.0);
  }
  auto other = small_config();
  other.seed = 18;
  EXPECT_GT((sample_dataset(other).distribution.atom(0).cov().matrix() -
             a.distribution.atom(0).cov().matrix())
                .norm(),
            0.0);
}

TEST(SampleDataset, AtomsAreExpOfTangents) {
  const auto data = sample_dataset(small_config());
  for (std::size_t i = 0; i < data.tangents.size(); ++i) {
    const Matrix step = Matrix::Identity(3, 3) + data.tangents[i];
    ASSERT_LE((data.distribution.atom(i).cov().matrix() - step * step).norm(), 1e-13);
    ASSERT_EQ((data.tangents[i] - data.tangents[i].transpose()).norm(), 0.0);
  }
}

TEST(SampleDataset, TinyVarianceCollapsesToBase) {
  auto cfg = small_config();
  cfg.sigma2 = 1e-24;
  const auto data = sample_dataset(cfg);
  for (const auto& atom : data.distribution.atoms()) {
    ASSERT_LE((atom.cov().matrix() - Matrix::Identity(3, 3)).norm(), 1e-10);
  }
}

TEST(SampleDataset, RecentredBaseIsExactBarycenter) {
  auto cfg = small_config();
  cfg.recentre = true;
  Vector diag(3);
  diag << 0.9, 0.7, 0.5;
  cfg.base = GaussianMeasure::centered(SpdMatrix::diagonal(diag));
  cfg.sigma2 = 0.01;
  const auto data = sample_dataset(cfg);
  EXPECT_LE(fixed_point_residual(data.distribution, cfg.base), 1e-8);
  GdOptions options;
  options.tol = 1e-16;
  const auto r = gd(data.distribution, data.distribution.atom(3), options);
  EXPECT_LE(w2_distance_sq(r.final, cfg.base), 1e-10);
}

TEST(SampleDataset, RejectionRateSmallForPaperSetup) {
  ExperimentConfig cfg;
  cfg.n = 1000;
  cfg.seed = 3;
  const auto data = sample_dataset(cfg);
  EXPECT_EQ(data.distribution.size(), 1000u);
  EXPECT_LT(static_cast<double>(data.rejections), 0.1 * static_cast<double>(data.draws));
}

TEST(SampleDataset, HugeVarianceGivesUp) {
  auto cfg = small_config();
  cfg.n = 2;
  cfg.dim = 30;
  cfg.base = GaussianMeasure::standard(30);
  cfg.sigma2 = 100.0;
  try {
    sample_dataset(cfg);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ExpNotAdmissible);
  }
}

TEST(RunReplicated, SingleReplicateHasZeroBand) {
  auto cfg = small_config();
  cfg.replicates = 1;
  const auto curve = run_replicated(cfg, Variant::Sgd);
  ASSERT_EQ(curve.mean.size(), cfg.n);
  for (std::size_t t = 0; t < curve.mean.size(); ++t) {
    ASSERT_EQ(curve.lo95[t], curve.mean[t]);
    ASSERT_EQ(curve.hi95[t], curve.mean[t]);
  }
}

TEST(RunReplicated, DeterministicAcrossRuns) {
  const auto cfg = small_config();
  for (Variant v : {Variant::Gd, Variant::Sgd, Variant::SgdReplacement, Variant::AveragedSgd}) {
    const auto a = run_replicated(cfg, v);
    const auto b = run_replicated(cfg, v);
    ASSERT_EQ(a.mean, b.mean) << to_string(v);
    ASSERT_EQ(a.hi95, b.hi95) << to_string(v);
    ASSERT_EQ(a.succeeded, cfg.replicates);
  }
}

TEST(RunReplicated, BandIsNormalApproximation) {
  const auto cfg = small_config();
  const auto curve = run_replicated(cfg, Variant::Sgd);
  const std::size_t t = 10;
  double mean = 0.0;
  for (const auto& r : curve.per_replicate) mean += r[t];
  mean /= 4.0;
  double sq = 0.0;
  for (const auto& r : curve.per_replicate) sq += (r[t] - mean) * (r[t] - mean);
  const double half = 1.96 * std::sqrt(sq / 3.0) / 2.0;
  EXPECT_NEAR(curve.mean[t], mean, 1e-15);
  EXPECT_NEAR(curve.hi95[t] - curve.mean[t], half, 1e-14);
}

TEST(RunReplicated, GdOnRegularDataDecaysAtTheoreticalRate) {
  auto cfg = small_config();
  Vector diag(3);
  diag << 0.85, 0.8, 0.75;
  cfg.base = GaussianMeasure::centered(SpdMatrix::diagonal(diag));
  cfg.sigma2 = 0.001;
  cfg.recentre = true;
  cfg.iterations = 10;
  const auto curve = run_replicated(cfg, Variant::Gd);
  ASSERT_EQ(curve.mean.size(), 11u);
  const double zeta = std::exp(curve.mean_min_logdet);
  // Semilog slope per iteration, from the first few points (before roundoff).
  const double slope = std::log(curve.mean[3] / curve.mean[0]) / 3.0;
  EXPECT_LE(slope, std::log(1.0 - zeta * zeta / 4.0));
}

TEST(RunReplicated, EmpiricalReferenceWithoutRecentring) {
  auto cfg = small_config();
  cfg.reference = ReferenceKind::Empirical;
  cfg.iterations = 20;
  const auto curve = run_replicated(cfg, Variant::Gd);
  EXPECT_LE(curve.mean.back(), 1e-12);
}

TEST(FitRate, PowerLaws) {
  std::vector<double> inv(200), flat(200, 3.0);
  for (std::size_t t = 0; t < inv.size(); ++t) inv[t] = 5.0 / std::max<double>(1.0, t);
  const auto est = fit_rate(inv, last_half_window(inv.size()));
  EXPECT_NEAR(est.slope, -1.0, 1e-9);
  EXPECT_NEAR(est.intercept, std::log(5.0), 1e-9);
  EXPECT_NEAR(est.r_squared, 1.0, 1e-12);
  EXPECT_EQ(est.window.first, 100u);
  EXPECT_NEAR(fit_rate(flat, {1, 200}).slope, 0.0, 1e-12);
}

TEST(FitRate, Errors) {
  const std::vector<double> curve(10, 1.0);
  auto kind_of = [&](FitWindow w) {
    try {
      fit_rate(curve, w);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::Parse;
  };
  EXPECT_EQ(kind_of({1, 3}), ErrorKind::DegenerateFit);
  EXPECT_EQ(kind_of({5, 5}), ErrorKind::DegenerateFit);
  EXPECT_EQ(kind_of({1, 11}), ErrorKind::DegenerateFit);
  EXPECT_EQ(kind_of({0, 10}), ErrorKind::InvalidArgument);
  std::vector<double> bad(10, 1.0);
  bad[6] = 0.0;
  EXPECT_THROW(fit_rate(bad, {1, 10}), Error);
  EXPECT_EQ(last_n_window(1000, 500).first, 500u);
  EXPECT_EQ(last_n_window(100, 500).first, 1u);
}

TEST(PoorlyConditioned, Constants) {
  const auto cfg = poorly_conditioned_config();
  EXPECT_DOUBLE_EQ(opnorm(cfg.base.cov()), 20.0);
  EXPECT_DOUBLE_EQ(cfg.sigma2, 1.0);
  const auto* s = std::get_if<ExperimentSchedule>(&cfg.schedule.kind());
  ASSERT_NE(s, nullptr);
  EXPECT_DOUBLE_EQ(s->c, 0.1);
  EXPECT_FALSE(inside_regular_set(cfg));
  const auto scaled = rescaled(cfg, 1.0 / std::sqrt(20.0));
  EXPECT_TRUE(inside_regular_set(scaled));
  EXPECT_NEAR(std::exp(logdet(scaled.base.cov())), 0.0025, 1e-15);
  EXPECT_TRUE(scaled.base.in_regular_set(0.0025));
}

TEST(PopulationConfig, PaperConstants) {
  const auto cfg = population_config();
  EXPECT_EQ(cfg.dim, 3);
  EXPECT_EQ(cfg.n, 1000u);
  EXPECT_DOUBLE_EQ(cfg.sigma2, 0.25);
  EXPECT_EQ(cfg.replicates, 100u);
  EXPECT_TRUE(inside_regular_set(cfg));
}

TEST(Validate, NamesOffendingField) {
  auto expect_field = [](ExperimentConfig cfg, const std::string& field) {
    try {
      validate(cfg);
      FAIL() << field;
    } catch (const Error& e) {
      EXPECT_NE(std::string(e.what()).find("'" + field + "'"), std::string::npos) << e.what();
    }
  };
  auto cfg = small_config();
  cfg.n = 0;
  expect_field(cfg, "n");
  cfg = small_config();
  cfg.sigma2 = -1.0;
  expect_field(cfg, "sigma2");
  cfg = small_config();
  cfg.replicates = 0;
  expect_field(cfg, "replicates");
  cfg = small_config();
  cfg.dim = 2;
  expect_field(cfg, "base");
}

TEST(Bounds, ClosedForms) {
  EXPECT_NEAR(sgd_distance_bound(0.5, 100, 0.5), 96.0 * 0.5 / (100.0 * 0.03125), 1e-12);
  EXPECT_NEAR(gd_distance_bound(1.0, 0, 2.0), 4.0, 1e-15);
  EXPECT_NEAR(gd_distance_bound(1.0, 2, 2.0), 4.0 * 0.5625, 1e-15);
}

TEST(Variant, NamesRoundTrip) {
  for (Variant v : {Variant::Gd, Variant::Sgd, Variant::SgdReplacement, Variant::AveragedSgd}) {
    EXPECT_EQ(parse_variant(to_string(v)), v);
  }
  EXPECT_THROW(parse_variant("adam"), Error);
}
