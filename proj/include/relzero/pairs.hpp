#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace relzero {

/// Unordered patch pair in canonical form (i < j).
struct Pair {
  int i = 0;
  int j = 0;
  auto operator<=>(const Pair&) const = default;
};

/// C(P, 2).
std::int64_t pair_count(int patches);

/// Lexicographic rank of (i, j) among canonical pairs of P patches:
/// i*P - i*(i+1)/2 + (j - i - 1). Throws unless 0 <= i < j < P.
std::int64_t pair_index(int i, int j, int patches);

/// Inverse of pair_index.
Pair pair_from_index(std::int64_t rank, int patches);

/// Sorted, duplicate-free set of canonical pairs over P patches.
class PairIndexSet {
 public:
  PairIndexSet() = default;
  /// Canonicalizes order; throws on i >= j, index >= P or duplicates.
  PairIndexSet(int patches, std::vector<Pair> pairs);
  static PairIndexSet from_ranks(int patches, std::span<const std::int64_t> ranks);

  int patch_count() const { return patches_; }
  std::size_t size() const { return pairs_.size(); }
  bool empty() const { return pairs_.empty(); }
  const std::vector<Pair>& pairs() const { return pairs_; }
  std::vector<std::int64_t> ranks() const;
  bool contains(const Pair& p) const;

  auto begin() const { return pairs_.begin(); }
  auto end() const { return pairs_.end(); }

  bool operator==(const PairIndexSet&) const = default;

 private:
  int patches_ = 0;
  std::vector<Pair> pairs_;
};

/// |a ∩ b|; both sets must share P.
std::size_t intersection_size(const PairIndexSet& a, const PairIndexSet& b);

/// Ranks of the k largest values; ties go to the smaller rank. values[r] is the
/// score of the pair with rank r.
std::vector<std::int64_t> top_k_ranks(std::span<const double> values, std::int64_t k);

}  // namespace relzero
