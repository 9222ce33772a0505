#include "relzero/pairs.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "relzero/error.hpp"

namespace relzero {

std::int64_t pair_count(int patches) {
  if (patches < 0) throw Error(Errc::invalid_argument, "negative patch count");
  return static_cast<std::int64_t>(patches) * (patches - 1) / 2;
}

std::int64_t pair_index(int i, int j, int patches) {
  if (i < 0 || i >= j || j >= patches) {
    throw Error(Errc::invalid_argument, "pair (" + std::to_string(i) + "," + std::to_string(j) +
                                            ") violates 0 <= i < j < P");
  }
  const std::int64_t ii = i;
  return ii * patches - ii * (ii + 1) / 2 + (j - i - 1);
}

Pair pair_from_index(std::int64_t rank, int patches) {
  if (rank < 0 || rank >= pair_count(patches)) throw Error(Errc::out_of_range, "pair rank out of range");
  // Row i holds P-1-i pairs; walk rows from a closed-form estimate.
  const double n = patches;
  int i = static_cast<int>(std::floor(n - 0.5 - std::sqrt((n - 0.5) * (n - 0.5) - 2.0 * rank)));
  i = std::clamp(i, 0, patches - 2);
  auto row_start = [&](int row) { return static_cast<std::int64_t>(row) * patches - static_cast<std::int64_t>(row) * (row + 1) / 2; };
  while (i > 0 && row_start(i) > rank) --i;
  while (i + 1 <= patches - 2 && row_start(i + 1) <= rank) ++i;
  return {i, static_cast<int>(rank - row_start(i)) + i + 1};
}

PairIndexSet::PairIndexSet(int patches, std::vector<Pair> pairs) : patches_(patches), pairs_(std::move(pairs)) {
  if (patches_ < 0) throw Error(Errc::invalid_argument, "negative patch count");
  for (auto& p : pairs_) {
    if (p.i > p.j) std::swap(p.i, p.j);
    if (p.i < 0 || p.i == p.j || p.j >= patches_) {
      throw Error(Errc::invalid_argument, "pair (" + std::to_string(p.i) + "," + std::to_string(p.j) +
                                              ") outside canonical range");
    }
  }
  std::sort(pairs_.begin(), pairs_.end());
  if (std::adjacent_find(pairs_.begin(), pairs_.end()) != pairs_.end()) {
    throw Error(Errc::invalid_argument, "duplicate pair in set");
  }
}

PairIndexSet PairIndexSet::from_ranks(int patches, std::span<const std::int64_t> ranks) {
  std::vector<Pair> pairs;
  pairs.reserve(ranks.size());
  for (auto r : ranks) pairs.push_back(pair_from_index(r, patches));
  return PairIndexSet(patches, std::move(pairs));
}

std::vector<std::int64_t> PairIndexSet::ranks() const {
  std::vector<std::int64_t> out;
  out.reserve(pairs_.size());
  for (const auto& p : pairs_) out.push_back(pair_index(p.i, p.j, patches_));
  return out;
}

bool PairIndexSet::contains(const Pair& p) const {
  return std::binary_search(pairs_.begin(), pairs_.end(), p);
}

std::size_t intersection_size(const PairIndexSet& a, const PairIndexSet& b) {
  if (a.patch_count() != b.patch_count()) throw Error(Errc::dimension_mismatch, "pair sets over different P");
  std::size_t count = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++count;
      ++ia;
      ++ib;
    }
  }
  return count;
}

std::vector<std::int64_t> top_k_ranks(std::span<const double> values, std::int64_t k) {
  const auto total = static_cast<std::int64_t>(values.size());
  if (k < 1 || k > total) {
    throw Error(Errc::out_of_range, "K=" + std::to_string(k) + " outside [1, " + std::to_string(total) + "]");
  }
  std::vector<std::int64_t> order(values.size());
  std::iota(order.begin(), order.end(), 0);
  const auto better = [&](std::int64_t a, std::int64_t b) {
    if (values[a] != values[b]) return values[a] > values[b];
    return a < b;
  };
  std::nth_element(order.begin(), order.begin() + (k - 1), order.end(), better);
  order.resize(static_cast<std::size_t>(k));
  std::sort(order.begin(), order.end());
  return order;
}

}  // namespace relzero
