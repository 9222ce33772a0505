#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "relzero/imaging.hpp"
#include "relzero/pairs.hpp"
#include "relzero/perturb.hpp"
#include "relzero/predictor.hpp"
#include "relzero/relational.hpp"
#include "relzero/watermark.hpp"

namespace relzero::analysis {

/// Least-squares fit d_after ≈ alpha * d_before + beta over canonical pairs.
struct RegressionReport {
  double alpha = 0.0;
  double beta = 0.0;
  double r_squared = 0.0;
  double spearman_rho = 0.0;
  std::int64_t n = 0;
};

/// Errc::degenerate_input when all before-distances are equal.
RegressionReport fit_distance_regression(const relational::DistanceMatrix& before,
                                         const relational::DistanceMatrix& after);

/// Average ranks (1-based) with ties sharing the mean of their positions.
std::vector<double> average_ranks(const std::vector<double>& values);
double pearson(const std::vector<double>& x, const std::vector<double>& y);
double spearman(const std::vector<double>& x, const std::vector<double>& y);

struct Histogram {
  std::vector<double> edges;  // bins + 1
  std::vector<std::int64_t> counts;
  double mean = 0.0;
  double stddev = 0.0;
};

/// Histogram of |d_after - d_before| over [0, max residual]; the last bin is closed.
Histogram residual_distribution(const relational::DistanceMatrix& before,
                                const relational::DistanceMatrix& after, int bins);

struct ResidualSummary {
  double mean = 0.0;
  double max = 0.0;
  double rms = 0.0;
};

struct SsmResidual {
  std::vector<double> raw;       // |after - before|, P x P
  std::vector<double> adjusted;  // |after - scale * before|, P x P
  double scale = 1.0;            // least-squares scale through the origin
  ResidualSummary raw_summary;
  ResidualSummary adjusted_summary;
};

SsmResidual ssm_residual(const relational::DistanceMatrix& before, const relational::DistanceMatrix& after);

struct OverlapEntry {
  int a = 0;
  int b = 0;
  double eta = 0.0;
};

struct UniquenessReport {
  std::vector<OverlapEntry> entries;  // all n(n-1)/2 pairs, a < b
  double mean = 0.0;
  double max = 0.0;
  double std_error = 0.0;
  std::vector<std::int64_t> histogram;  // index = intersection count 0..K
  double expected_overlap = 0.0;        // K^2 / M
  double expected_eta = 0.0;            // K / M

  std::int64_t count_above(double threshold) const;
};

UniquenessReport uniqueness_study(const std::vector<PairIndexSet>& watermarks, int k);

struct CorpusImage {
  std::string id;
  imaging::ImageBuffer image;
};

struct SweepSettings {
  int patch_side = 16;
  int k = 50;
  std::uint64_t seed = 0;
};

struct RobustnessRow {
  std::string attack;
  double tpr = 0.0;
  int n = 0;
  int threshold_m = 0;
  std::string calib_mode;
};

/// Registers every corpus image, attacks it, re-extracts and verifies.
/// Stochastic attacks reseed per image from (attack seed, image index).
std::vector<RobustnessRow> robustness_sweep(const predictor::PredictorModel& model,
                                            const std::vector<CorpusImage>& corpus,
                                            const watermark::ArnoldKey& key,
                                            const watermark::CalibrationResult& calib,
                                            const std::vector<perturb::AttackConfig>& attacks,
                                            const SweepSettings& settings);

struct RegressionRow {
  std::string id;
  RegressionReport report;
};

void write_regression_csv(const std::filesystem::path& path, const std::vector<RegressionRow>& rows);
void write_residuals_csv(const std::filesystem::path& path, const Histogram& histogram);
void write_uniqueness_csv(const std::filesystem::path& path, const UniquenessReport& report,
                          const std::vector<std::string>& ids);
void write_robustness_csv(const std::filesystem::path& path, const std::vector<RobustnessRow>& rows);
void write_ssm_csv(const std::filesystem::path& path, const std::string& id, const SsmResidual& ssm);

}  // namespace relzero::analysis
