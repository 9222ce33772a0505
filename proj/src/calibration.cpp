#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "relzero/error.hpp"
#include "relzero/watermark.hpp"

namespace relzero::watermark {

namespace {

// Suffix sums of a discrete pmf on [lo, K], normalized by the total mass.
// Weights come from the pmf ratio recurrence in log space relative to the
// mode, which keeps the sum free of under/overflow and makes tail(lo) exactly 1.
struct TailTable {
  int lo = 0;
  int k = 0;
  std::vector<double> suffix;  // suffix[i - lo] = sum_{t >= i} w_t
  double total = 0.0;

  double tail(int m) const {
    if (m <= lo) return 1.0;
    if (m > k) return 0.0;
    return suffix[static_cast<std::size_t>(m - lo)] / total;
  }
};

template <typename LogRatio>
TailTable build(int lo, int k, LogRatio log_ratio) {
  const std::size_t n = static_cast<std::size_t>(k - lo + 1);
  std::vector<double> logw(n, 0.0);
  for (std::size_t t = 1; t < n; ++t) logw[t] = logw[t - 1] + log_ratio(lo + static_cast<int>(t) - 1);
  const double peak = *std::max_element(logw.begin(), logw.end());
  TailTable table{lo, k, std::vector<double>(n, 0.0), 0.0};
  double acc = 0.0;
  for (std::size_t t = n; t-- > 0;) {
    acc += std::exp(logw[t] - peak);
    table.suffix[t] = acc;
  }
  table.total = acc;
  return table;
}

TailTable binomial_table(int k) {
  if (k < 1) throw Error(Errc::invalid_argument, "K must be >= 1");
  // pmf(i+1)/pmf(i) = (K - i) / (i + 1)
  return build(0, k, [k](int i) { return std::log(static_cast<double>(k - i)) - std::log(i + 1.0); });
}

TailTable hypergeometric_table(int k, std::int64_t m_pairs) {
  if (k < 1) throw Error(Errc::invalid_argument, "K must be >= 1");
  if (m_pairs < k) throw Error(Errc::invalid_argument, "hypergeometric calibration requires M >= K");
  const int lo = static_cast<int>(std::max<std::int64_t>(0, 2 * static_cast<std::int64_t>(k) - m_pairs));
  // pmf(i+1)/pmf(i) = (K - i)^2 / ((i + 1) (M - 2K + i + 1))
  return build(lo, k, [k, m_pairs](int i) {
    const double num = static_cast<double>(k - i);
    const double den = static_cast<double>(m_pairs - 2 * static_cast<std::int64_t>(k) + i + 1);
    return 2.0 * std::log(num) - std::log(i + 1.0) - std::log(den);
  });
}

}  // namespace

const char* to_string(CalibrationMode mode) {
  return mode == CalibrationMode::binomial ? "binomial" : "hypergeometric";
}

CalibrationMode calibration_mode_from_string(const std::string& name) {
  if (name == "binomial" || name == "binom") return CalibrationMode::binomial;
  if (name == "hypergeometric" || name == "hyper") return CalibrationMode::hypergeometric;
  throw Error(Errc::invalid_argument, "unknown calibration mode '" + name + "'");
}

double binomial_tail(int k, int m) { return binomial_table(k).tail(m); }

double hypergeometric_tail(int k, std::int64_t m_pairs, int m) { return hypergeometric_table(k, m_pairs).tail(m); }

CalibrationResult calibrate(int k, double target_fpr, CalibrationMode mode, std::int64_t m_pairs) {
  if (!(target_fpr > 0.0 && target_fpr < 1.0)) throw Error(Errc::invalid_argument, "target FPR must be in (0, 1)");
  const TailTable table = mode == CalibrationMode::binomial ? binomial_table(k) : hypergeometric_table(k, m_pairs);
  for (int m = 0; m <= k; ++m) {
    const double fpr = table.tail(m);
    if (fpr <= target_fpr) {
      return {mode, k, mode == CalibrationMode::hypergeometric ? m_pairs : 0, m, static_cast<double>(m) / k, fpr};
    }
  }
  throw Error(Errc::unreachable_target, "unreachable target: P(X >= K) = " + std::to_string(table.tail(k)) +
                                            " exceeds target FPR " + std::to_string(target_fpr));
}

}  // namespace relzero::watermark
