#include "relzero/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "relzero/error.hpp"
#include "relzero/rng.hpp"

namespace relzero::analysis {

using relational::DistanceMatrix;

namespace {

void require_same(const DistanceMatrix& a, const DistanceMatrix& b) {
  if (a.patch_count() != b.patch_count()) throw Error(Errc::dimension_mismatch, "distance matrices differ in P");
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

ResidualSummary summarize(const std::vector<double>& matrix, int patches) {
  ResidualSummary s;
  const auto n = static_cast<std::size_t>(patches);
  std::size_t count = 0;
  double sum = 0.0, sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double r = matrix[i * n + j];
      sum += r;
      sq += r * r;
      s.max = std::max(s.max, r);
      ++count;
    }
  }
  if (count) {
    s.mean = sum / static_cast<double>(count);
    s.rms = std::sqrt(sq / static_cast<double>(count));
  }
  return s;
}

std::ofstream open_csv(const std::filesystem::path& path, const char* header) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
  out << header << '\n';
  return out;
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

std::vector<double> average_ranks(const std::vector<double>& values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t start = 0; start < order.size();) {
    std::size_t stop = start + 1;
    while (stop < order.size() && values[order[stop]] == values[order[start]]) ++stop;
    const double rank = 0.5 * static_cast<double>(start + 1 + stop);  // mean of positions start+1..stop
    for (std::size_t t = start; t < stop; ++t) ranks[order[t]] = rank;
    start = stop;
  }
  return ranks;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw Error(Errc::dimension_mismatch, "pearson: need >= 2 paired samples");
  const double mx = mean_of(x), my = mean_of(y);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t t = 0; t < x.size(); ++t) {
    const double dx = x[t] - mx, dy = y[t] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0) return 0.0;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  return pearson(average_ranks(x), average_ranks(y));
}

RegressionReport fit_distance_regression(const DistanceMatrix& before, const DistanceMatrix& after) {
  require_same(before, after);
  const auto x = before.upper();
  const auto y = after.upper();
  if (x.size() < 2 || std::all_of(x.begin(), x.end(), [&](double v) { return v == x.front(); })) {
    throw Error(Errc::degenerate_input, "degenerate input: before-distances have zero variance");
  }
  const double mx = mean_of(x), my = mean_of(y);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t t = 0; t < x.size(); ++t) {
    const double dx = x[t] - mx, dy = y[t] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  RegressionReport r;
  r.n = static_cast<std::int64_t>(x.size());
  r.alpha = sxy / sxx;
  r.beta = my - r.alpha * mx;
  double ss_res = 0.0;
  for (std::size_t t = 0; t < x.size(); ++t) {
    const double e = y[t] - (r.alpha * x[t] + r.beta);
    ss_res += e * e;
  }
  r.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : (ss_res == 0.0 ? 1.0 : 0.0);
  r.spearman_rho = spearman(x, y);
  return r;
}

Histogram residual_distribution(const DistanceMatrix& before, const DistanceMatrix& after, int bins) {
  require_same(before, after);
  if (bins < 1) throw Error(Errc::invalid_argument, "bins must be >= 1");
  const auto b = before.upper();
  const auto a = after.upper();
  std::vector<double> res(a.size());
  for (std::size_t t = 0; t < a.size(); ++t) res[t] = std::fabs(a[t] - b[t]);

  Histogram h;
  double hi = res.empty() ? 0.0 : *std::max_element(res.begin(), res.end());
  if (hi == 0.0) hi = 1.0;
  const double width = hi / bins;
  for (int e = 0; e <= bins; ++e) h.edges.push_back(e == bins ? hi : e * width);
  h.counts.assign(static_cast<std::size_t>(bins), 0);
  for (double r : res) {
    auto idx = static_cast<int>(r / width);
    idx = std::clamp(idx, 0, bins - 1);
    while (idx > 0 && r < h.edges[idx]) --idx;
    while (idx + 1 < bins && r >= h.edges[idx + 1]) ++idx;
    ++h.counts[static_cast<std::size_t>(idx)];
  }
  h.mean = mean_of(res);
  double var = 0.0;
  for (double r : res) var += (r - h.mean) * (r - h.mean);
  h.stddev = res.empty() ? 0.0 : std::sqrt(var / static_cast<double>(res.size()));
  return h;
}

SsmResidual ssm_residual(const DistanceMatrix& before, const DistanceMatrix& after) {
  require_same(before, after);
  const int n = before.patch_count();
  const auto bv = before.values();
  const auto av = after.values();
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t e = 0; e < bv.size(); ++e) {
    sxy += bv[e] * av[e];
    sxx += bv[e] * bv[e];
  }
  SsmResidual out;
  out.scale = sxx > 0.0 ? sxy / sxx : 1.0;
  out.raw.resize(bv.size());
  out.adjusted.resize(bv.size());
  for (std::size_t e = 0; e < bv.size(); ++e) {
    out.raw[e] = std::fabs(av[e] - bv[e]);
    out.adjusted[e] = std::fabs(av[e] - out.scale * bv[e]);
  }
  out.raw_summary = summarize(out.raw, n);
  out.adjusted_summary = summarize(out.adjusted, n);
  return out;
}

std::int64_t UniquenessReport::count_above(double threshold) const {
  return std::count_if(entries.begin(), entries.end(), [&](const auto& e) { return e.eta > threshold; });
}

UniquenessReport uniqueness_study(const std::vector<PairIndexSet>& watermarks, int k) {
  if (watermarks.size() < 2) throw Error(Errc::invalid_argument, "uniqueness study needs >= 2 watermarks");
  if (k < 1) throw Error(Errc::invalid_argument, "K must be >= 1");
  const int patches = watermarks.front().patch_count();
  for (const auto& w : watermarks) {
    if (static_cast<int>(w.size()) != k || w.patch_count() != patches) {
      throw Error(Errc::dimension_mismatch, "every watermark must hold K pairs over the same P");
    }
  }
  UniquenessReport r;
  r.histogram.assign(static_cast<std::size_t>(k) + 1, 0);
  double sum = 0.0, sq = 0.0;
  for (std::size_t a = 0; a < watermarks.size(); ++a) {
    for (std::size_t b = a + 1; b < watermarks.size(); ++b) {
      const auto shared = intersection_size(watermarks[a], watermarks[b]);
      const double eta = static_cast<double>(shared) / k;
      r.entries.push_back({static_cast<int>(a), static_cast<int>(b), eta});
      ++r.histogram[shared];
      sum += eta;
      sq += eta * eta;
      r.max = std::max(r.max, eta);
    }
  }
  const auto count = static_cast<double>(r.entries.size());
  r.mean = sum / count;
  const double var = count > 1 ? std::max(0.0, (sq - count * r.mean * r.mean) / (count - 1)) : 0.0;
  r.std_error = std::sqrt(var / count);
  const auto m = static_cast<double>(pair_count(patches));
  r.expected_overlap = static_cast<double>(k) * k / m;
  r.expected_eta = k / m;
  return r;
}

std::vector<RobustnessRow> robustness_sweep(const predictor::PredictorModel& model,
                                            const std::vector<CorpusImage>& corpus,
                                            const watermark::ArnoldKey& key,
                                            const watermark::CalibrationResult& calib,
                                            const std::vector<perturb::AttackConfig>& attacks,
                                            const SweepSettings& settings) {
  if (corpus.empty()) throw Error(Errc::invalid_argument, "robustness sweep: empty corpus");
  std::vector<int> passed(attacks.size(), 0);
  watermark::RecordMeta meta;
  meta.patch_side = settings.patch_side;
  meta.created = "1970-01-01T00:00:00Z";
  for (std::size_t n = 0; n < corpus.size(); ++n) {
    const auto& img = corpus[n].image;
    meta.image_side = img.width;
    meta.content_id = corpus[n].id;
    const auto fm = imaging::extract_mean_rgb(img, settings.patch_side);
    const auto record = watermark::encrypt(predictor::extract_watermark(model, fm, settings.k), key, meta);
    for (std::size_t a = 0; a < attacks.size(); ++a) {
      auto cfg = attacks[a];
      if (cfg.stochastic()) cfg.seed = mix_seed(cfg.seed, n);
      const auto attacked = perturb::apply_attack(img, cfg);
      const auto suspect =
          predictor::extract_watermark(model, imaging::extract_mean_rgb(attacked, settings.patch_side), settings.k);
      if (watermark::verify(record, key, suspect, calib).authenticated) ++passed[a];
    }
  }
  std::vector<RobustnessRow> rows;
  for (std::size_t a = 0; a < attacks.size(); ++a) {
    rows.push_back({attacks[a].label(), static_cast<double>(passed[a]) / static_cast<double>(corpus.size()),
                    static_cast<int>(corpus.size()), calib.threshold, watermark::to_string(calib.mode)});
  }
  return rows;
}

void write_regression_csv(const std::filesystem::path& path, const std::vector<RegressionRow>& rows) {
  auto out = open_csv(path, "id,alpha,beta,r2,rho,n");
  for (const auto& row : rows) {
    const auto& r = row.report;
    out << row.id << ',' << num(r.alpha) << ',' << num(r.beta) << ',' << num(r.r_squared) << ','
        << num(r.spearman_rho) << ',' << r.n << '\n';
  }
}

void write_residuals_csv(const std::filesystem::path& path, const Histogram& h) {
  auto out = open_csv(path, "bin_lo,bin_hi,count");
  for (std::size_t b = 0; b < h.counts.size(); ++b) {
    out << num(h.edges[b]) << ',' << num(h.edges[b + 1]) << ',' << h.counts[b] << '\n';
  }
}

void write_uniqueness_csv(const std::filesystem::path& path, const UniquenessReport& report,
                          const std::vector<std::string>& ids) {
  auto out = open_csv(path, "id_a,id_b,eta");
  for (const auto& e : report.entries) out << ids.at(e.a) << ',' << ids.at(e.b) << ',' << num(e.eta) << '\n';
}

void write_robustness_csv(const std::filesystem::path& path, const std::vector<RobustnessRow>& rows) {
  auto out = open_csv(path, "attack,tpr,n,threshold_m,calib_mode");
  for (const auto& r : rows) {
    out << r.attack << ',' << num(r.tpr) << ',' << r.n << ',' << r.threshold_m << ',' << r.calib_mode << '\n';
  }
}

void write_ssm_csv(const std::filesystem::path& path, const std::string& id, const SsmResidual& ssm) {
  auto out = open_csv(path, "id,scale,raw_mean,raw_max,adjusted_mean,adjusted_max");
  out << id << ',' << num(ssm.scale) << ',' << num(ssm.raw_summary.mean) << ',' << num(ssm.raw_summary.max) << ','
      << num(ssm.adjusted_summary.mean) << ',' << num(ssm.adjusted_summary.max) << '\n';
}

}  // namespace relzero::analysis
