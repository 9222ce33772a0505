#include "relzero/relational.hpp"

#include <cmath>

#include "relzero/error.hpp"
#include "relzero/kernels.hpp"

namespace relzero::relational {

DistanceMatrix::DistanceMatrix(int patches, std::vector<double> values)
    : patches_(patches), values_(std::move(values)) {
  if (patches_ < 0 || values_.size() != static_cast<std::size_t>(patches_) * patches_) {
    throw Error(Errc::dimension_mismatch, "distance matrix is not P x P");
  }
  for (int i = 0; i < patches_; ++i) {
    if (at(i, i) != 0.0) throw Error(Errc::invalid_argument, "distance matrix diagonal must be zero");
    for (int j = i + 1; j < patches_; ++j) {
      const double v = at(i, j);
      if (!std::isfinite(v) || v < 0.0) throw Error(Errc::invalid_argument, "distance must be finite and >= 0");
      if (v != at(j, i)) throw Error(Errc::invalid_argument, "distance matrix must be symmetric");
    }
  }
}

std::vector<double> DistanceMatrix::upper() const {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(pair_count(patches_)));
  for (int i = 0; i < patches_; ++i) {
    for (int j = i + 1; j < patches_; ++j) out.push_back(at(i, j));
  }
  return out;
}

DistanceMatrix DistanceMatrix::scaled(double factor) const {
  std::vector<double> v(values_);
  for (auto& x : v) x *= factor;
  return DistanceMatrix(patches_, std::move(v));
}

DistanceMatrix pairwise_distances(const imaging::PatchFeatureMap& fm) {
  const auto n = static_cast<std::size_t>(fm.patch_count());
  const auto dim = static_cast<std::size_t>(fm.dim());
  // Feature-major copy so the kernel can stream targets j across lanes.
  std::vector<double> fmajor(dim * n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto f = fm.feature(static_cast<int>(i));
    for (std::size_t d = 0; d < dim; ++d) fmajor[d * n + i] = f[d];
  }
  const auto& k = kernels::active();
  std::vector<double> values(n * n, 0.0);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    double* row = values.data() + i * n;
    k.distances_from(fmajor.data(), n, dim, i, i + 1, n, row + i + 1);
    for (std::size_t j = i + 1; j < n; ++j) values[j * n + i] = row[j];
  }
  return DistanceMatrix(static_cast<int>(n), std::move(values));
}

StabilityScores stability_scores(const DistanceMatrix& before, const DistanceMatrix& after) {
  if (before.patch_count() != after.patch_count()) {
    throw Error(Errc::dimension_mismatch, "stability_scores: matrices over different P");
  }
  const int n = before.patch_count();
  StabilityScores out{n, {}};
  out.scores.reserve(static_cast<std::size_t>(pair_count(n)));
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) out.scores.push_back(std::exp(-std::fabs(before.at(i, j) - after.at(i, j))));
  }
  return out;
}

PairIndexSet top_k_pairs(const StabilityScores& scores, std::int64_t k) {
  if (static_cast<std::int64_t>(scores.scores.size()) != pair_count(scores.patches)) {
    throw Error(Errc::dimension_mismatch, "stability scores do not cover C(P,2) pairs");
  }
  const auto ranks = top_k_ranks(scores.scores, k);
  return PairIndexSet::from_ranks(scores.patches, ranks);
}

PairIndexSet make_ground_truth(const imaging::PatchFeatureMap& original,
                               const imaging::PatchFeatureMap& edited, std::int64_t k) {
  if (original.patch_count() != edited.patch_count() || original.dim() != edited.dim()) {
    throw Error(Errc::dimension_mismatch, "original and edited feature maps differ in P or D");
  }
  return top_k_pairs(stability_scores(pairwise_distances(original), pairwise_distances(edited)), k);
}

}  // namespace relzero::relational
