#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <numeric>

#include "relzero/analysis.hpp"
#include "relzero/error.hpp"
#include "relzero/rng.hpp"
#include "synthetic_corpus.hpp"
#include "temp_dir.hpp"

namespace {

using namespace relzero;
using namespace relzero::analysis;
using imaging::FeatureSource;
using imaging::PatchFeatureMap;
using relational::DistanceMatrix;

PatchFeatureMap random_features(std::uint64_t seed, int p, int d = 3) {
  Rng rng(seed);
  std::vector<double> v(static_cast<std::size_t>(p) * d);
  for (auto& x : v) x = rng.uniform();
  return PatchFeatureMap(1, p, d, v, FeatureSource::external);
}

DistanceMatrix map_offdiag(const DistanceMatrix& m, const std::function<double(double)>& f) {
  std::vector<double> v(m.values().begin(), m.values().end());
  const int p = m.patch_count();
  for (int i = 0; i < p; ++i)
    for (int j = i + 1; j < p; ++j) v[i * p + j] = v[j * p + i] = f(v[i * p + j]);
  return DistanceMatrix(p, v);
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

TEST(Regression, ExactScaleAndIdentity) {
  const auto d = relational::pairwise_distances(random_features(1, 30));
  const auto r2 = fit_distance_regression(d, d.scaled(2.0));
  EXPECT_NEAR(r2.alpha, 2.0, 1e-12);
  EXPECT_NEAR(r2.beta, 0.0, 1e-12);
  EXPECT_NEAR(r2.r_squared, 1.0, 1e-12);
  EXPECT_EQ(r2.spearman_rho, 1.0);
  EXPECT_EQ(r2.n, 435);
  const auto id = fit_distance_regression(d, d);
  EXPECT_NEAR(id.alpha, 1.0, 1e-12);
  EXPECT_NEAR(id.beta, 0.0, 1e-12);
}

TEST(Regression, MatchesClosedFormOls) {
  const auto before = relational::pairwise_distances(random_features(2, 25));
  Rng rng(20);
  const auto after = map_offdiag(before, [&](double x) { return std::abs(1.7 * x + 0.1 + rng.normal(0.0, 0.05)); });
  const auto x = before.upper();
  const auto y = after.upper();
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t t = 0; t < x.size(); ++t) {
    sx += x[t];
    sy += y[t];
    sxx += x[t] * x[t];
    sxy += x[t] * y[t];
  }
  const double alpha = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  const double beta = (sy - alpha * sx) / n;
  const auto r = fit_distance_regression(before, after);
  EXPECT_NEAR(r.alpha, alpha, 1e-9);
  EXPECT_NEAR(r.beta, beta, 1e-9);
  EXPECT_GT(r.alpha, 1.6);
  EXPECT_LT(r.alpha, 1.8);
  EXPECT_GT(r.spearman_rho, 0.95);
  // Residual orthogonality.
  double s0 = 0.0, s1 = 0.0;
  for (std::size_t t = 0; t < x.size(); ++t) {
    const double e = y[t] - r.alpha * x[t] - r.beta;
    s0 += e;
    s1 += e * x[t];
  }
  EXPECT_NEAR(s0, 0.0, 1e-9);
  EXPECT_NEAR(s1, 0.0, 1e-9);
}

TEST(Regression, DegenerateInput) {
  const PatchFeatureMap flat(1, 5, 3, std::vector<double>(15, 0.2), FeatureSource::external);
  const auto d = relational::pairwise_distances(flat);
  try {
    fit_distance_regression(d, d);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::degenerate_input);
  }
  EXPECT_THROW(fit_distance_regression(d, relational::pairwise_distances(random_features(3, 6))), Error);
}

TEST(Ranks, AverageTies) {
  EXPECT_EQ(average_ranks({10, 20, 20, 5}), (std::vector<double>{2, 3.5, 3.5, 1}));
}

TEST(Ranks, SpearmanMonotoneInvariance) {
  Rng rng(4);
  std::vector<double> x(200), y(200);
  for (std::size_t t = 0; t < x.size(); ++t) {
    x[t] = rng.uniform(0.1, 2.0);
    y[t] = x[t] + rng.normal(0.0, 0.3);
  }
  std::vector<double> x3(x);
  for (auto& v : x3) v = v * v * v;
  EXPECT_DOUBLE_EQ(spearman(x, y), spearman(x3, y));
  EXPECT_NEAR(pearson(x, x), 1.0, 1e-12);
  std::vector<double> neg(x);
  for (auto& v : neg) v = -v;
  EXPECT_NEAR(spearman(x, neg), -1.0, 1e-12);
}

TEST(Residuals, IdentitySpikeAtZero) {
  const auto d = relational::pairwise_distances(random_features(5, 12));
  const auto h = residual_distribution(d, d, 10);
  EXPECT_EQ(h.counts[0], 66);
  EXPECT_EQ(h.mean, 0.0);
  EXPECT_EQ(h.edges.size(), 11u);
}

TEST(Residuals, ConstantResidualSingleBin) {
  const auto d = relational::pairwise_distances(random_features(6, 12));
  const auto h = residual_distribution(d, map_offdiag(d, [](double x) { return x + 0.3; }), 7);
  const auto total = std::accumulate(h.counts.begin(), h.counts.end(), std::int64_t{0});
  EXPECT_EQ(total, 66);
  int nonempty = 0;
  for (std::size_t b = 0; b < h.counts.size(); ++b) {
    if (h.counts[b] == 0) continue;
    ++nonempty;
    EXPECT_LE(h.edges[b], 0.3 + 1e-12);
    EXPECT_GE(h.edges[b + 1], 0.3 - 1e-12);
  }
  EXPECT_EQ(nonempty, 1);
  EXPECT_NEAR(h.mean, 0.3, 1e-12);
  EXPECT_NEAR(h.stddev, 0.0, 1e-9);
}

TEST(Residuals, MassConservation) {
  const auto a = relational::pairwise_distances(random_features(7, 40));
  const auto b = relational::pairwise_distances(random_features(8, 40));
  const auto h = residual_distribution(a, b, 13);
  EXPECT_EQ(std::accumulate(h.counts.begin(), h.counts.end(), std::int64_t{0}), 780);
  EXPECT_THROW(residual_distribution(a, b, 0), Error);
}

TEST(Ssm, IdentityAndScale) {
  const auto d = relational::pairwise_distances(random_features(9, 20));
  const auto same = ssm_residual(d, d);
  for (double v : same.raw) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(same.raw_summary.max, 0.0);
  const auto tripled = ssm_residual(d, d.scaled(3.0));
  EXPECT_GT(tripled.raw_summary.mean, 0.1);
  EXPECT_NEAR(tripled.scale, 3.0, 1e-12);
  EXPECT_LE(tripled.adjusted_summary.max, 1e-9);
}

TEST(Ssm, AdjustedNoWorseThanRaw) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    const auto d = relational::pairwise_distances(random_features(10 + s, 30));
    Rng rng(s);
    const auto noisy = map_offdiag(d, [&](double x) { return std::abs(1.4 * x + rng.normal(0.0, 0.05)); });
    const auto r = ssm_residual(d, noisy);
    EXPECT_LE(r.adjusted_summary.mean, r.raw_summary.mean);
    EXPECT_LE(r.adjusted_summary.rms, r.raw_summary.rms);
  }
}

TEST(Uniqueness, IdenticalAndDisjoint) {
  const PairIndexSet a(10, {{0, 1}, {2, 3}});
  const PairIndexSet b(10, {{4, 5}, {6, 7}});
  const PairIndexSet c(10, {{8, 9}, {1, 2}});
  EXPECT_EQ(uniqueness_study({a, a}, 2).max, 1.0);
  const auto r = uniqueness_study({a, b, c}, 2);
  EXPECT_EQ(r.entries.size(), 3u);
  EXPECT_EQ(r.mean, 0.0);
  EXPECT_EQ(r.max, 0.0);
  EXPECT_EQ(r.histogram[0], 3);
  EXPECT_THROW(uniqueness_study({a}, 2), Error);
  EXPECT_THROW(uniqueness_study({a, PairIndexSet(10, {{0, 1}})}, 2), Error);
}

TEST(Uniqueness, RandomSubsetsMatchExpectation) {
  Rng rng(11);
  std::vector<PairIndexSet> sets;
  std::vector<std::int64_t> all(19110);
  std::iota(all.begin(), all.end(), 0);
  for (int n = 0; n < 100; ++n) {
    rng.shuffle(std::span<std::int64_t>(all));
    sets.push_back(PairIndexSet::from_ranks(196, std::vector<std::int64_t>(all.begin(), all.begin() + 50)));
  }
  const auto r = uniqueness_study(sets, 50);
  EXPECT_EQ(r.entries.size(), 4950u);
  EXPECT_NEAR(r.expected_eta, 50.0 / 19110.0, 1e-15);
  EXPECT_NEAR(r.expected_overlap, 2500.0 / 19110.0, 1e-15);
  EXPECT_LE(std::abs(r.mean - r.expected_eta), 3 * r.std_error);
  EXPECT_LE(r.mean, r.max);
  EXPECT_EQ(std::accumulate(r.histogram.begin(), r.histogram.end(), std::int64_t{0}), 4950);
  EXPECT_EQ(r.count_above(r.max), 0);
}

TEST(Sweep, IdentityAttackAlwaysAuthenticates) {
  const auto corpus = testkit::synthetic_corpus(77, 0, 3, 64);
  const auto model = predictor::PredictorModel::initialize(3, {8}, 1);
  const watermark::ArnoldKey key(3, 5, 10, watermark::grid_side_for(16));
  const auto calib = watermark::calibrate(5, 1e-3, watermark::CalibrationMode::hypergeometric, 120);
  const std::vector<perturb::AttackConfig> attacks = {{perturb::AttackKind::brightness, 1.0},
                                                      {perturb::AttackKind::brightness, 2.0}};
  const auto rows = robustness_sweep(model, corpus, key, calib, attacks, {16, 5, 1});
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].tpr, 1.0);
  EXPECT_EQ(rows[0].n, 3);
  EXPECT_EQ(rows[0].threshold_m, calib.threshold);
  EXPECT_EQ(rows[0].calib_mode, "hypergeometric");
  EXPECT_THROW(robustness_sweep(model, {}, key, calib, attacks, {16, 5, 1}), Error);
}

TEST(Sweep, MatchesStepwisePipeline) {
  const auto corpus = testkit::synthetic_corpus(78, 0, 4, 64);
  const auto model = predictor::PredictorModel::initialize(3, {8}, 2);
  const watermark::ArnoldKey key(3, 5, 10, watermark::grid_side_for(16));
  const auto calib = watermark::calibrate(6, 1e-2, watermark::CalibrationMode::hypergeometric, 120);
  const perturb::AttackConfig attack(perturb::AttackKind::brightness, 2.0);
  int authenticated = 0;
  for (const auto& item : corpus) {
    const auto registered = predictor::extract_watermark(model, imaging::extract_mean_rgb(item.image, 16), 6);
    const auto rec = watermark::encrypt(registered, key);
    const auto suspect =
        predictor::extract_watermark(model, imaging::extract_mean_rgb(perturb::apply_attack(item.image, attack), 16), 6);
    authenticated += watermark::verify(rec, key, suspect, calib).authenticated;
  }
  const auto rows = robustness_sweep(model, corpus, key, calib, {attack}, {16, 6, 0});
  EXPECT_DOUBLE_EQ(rows[0].tpr, authenticated / 4.0);
}

TEST(Csv, HeadersAndRows) {
  testkit::TempDir dir;
  write_regression_csv(dir / "regression.csv", {{"a", {1.5, 0.25, 0.9, 0.95, 10}}});
  EXPECT_EQ(read_file(dir / "regression.csv"), "id,alpha,beta,r2,rho,n\na,1.5,0.25,0.9,0.95,10\n");
  Histogram h;
  h.edges = {0, 0.5, 1};
  h.counts = {3, 4};
  write_residuals_csv(dir / "residuals.csv", h);
  EXPECT_EQ(read_file(dir / "residuals.csv"), "bin_lo,bin_hi,count\n0,0.5,3\n0.5,1,4\n");
  UniquenessReport u;
  u.entries = {{0, 1, 0.02}};
  write_uniqueness_csv(dir / "uniqueness.csv", u, {"x", "y"});
  EXPECT_EQ(read_file(dir / "uniqueness.csv"), "id_a,id_b,eta\nx,y,0.02\n");
  write_robustness_csv(dir / "robustness.csv", {{"jpeg:90", 0.98, 50, 3, "hypergeometric"}});
  EXPECT_EQ(read_file(dir / "robustness.csv"), "attack,tpr,n,threshold_m,calib_mode\njpeg:90,0.98,50,3,hypergeometric\n");
}

}  // namespace
