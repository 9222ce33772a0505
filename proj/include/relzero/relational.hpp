#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "relzero/imaging.hpp"
#include "relzero/pairs.hpp"

namespace relzero::relational {

/// Symmetric P x P matrix of pairwise L2 feature distances with a zero diagonal.
class DistanceMatrix {
 public:
  DistanceMatrix() = default;
  /// Validates symmetry, zero diagonal, finiteness and non-negativity.
  DistanceMatrix(int patches, std::vector<double> values);

  int patch_count() const { return patches_; }
  double at(int i, int j) const { return values_[static_cast<std::size_t>(i) * patches_ + j]; }
  std::span<const double> values() const { return values_; }
  /// Upper-triangle entries in canonical pair-rank order.
  std::vector<double> upper() const;
  DistanceMatrix scaled(double factor) const;

  bool operator==(const DistanceMatrix&) const = default;

 private:
  int patches_ = 0;
  std::vector<double> values_;
};

/// s_ij = exp(-|d_ij - d̂_ij|) per canonical pair, indexed by pair rank.
struct StabilityScores {
  int patches = 0;
  std::vector<double> scores;
};

DistanceMatrix pairwise_distances(const imaging::PatchFeatureMap& fm);

StabilityScores stability_scores(const DistanceMatrix& before, const DistanceMatrix& after);

/// The K highest-scoring pairs; ties go to the smaller canonical index.
PairIndexSet top_k_pairs(const StabilityScores& scores, std::int64_t k);

/// Top-K most stable pairs between an image and its edited counterpart.
PairIndexSet make_ground_truth(const imaging::PatchFeatureMap& original,
                               const imaging::PatchFeatureMap& edited, std::int64_t k);

}  // namespace relzero::relational
