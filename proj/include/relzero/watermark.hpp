#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "relzero/pairs.hpp"

namespace relzero::watermark {

/// Secret key of the iterated lattice map [[1,p],[q,1]] mod N_g.
class ArnoldKey {
 public:
  /// Throws Errc::invalid_argument unless gcd((1 - p*q) mod N_g, N_g) = 1,
  /// T >= 1 and N_g >= 1.
  ArnoldKey(std::int64_t p, std::int64_t q, int iterations, int grid_side);

  std::int64_t p() const { return p_; }
  std::int64_t q() const { return q_; }
  int iterations() const { return t_; }
  int grid_side() const { return n_; }

  static bool valid(std::int64_t p, std::int64_t q, int grid_side);

  bool operator==(const ArnoldKey&) const = default;

 private:
  std::int64_t p_, q_;
  int t_, n_;
};

/// N_g x N_g bits; cell (x, y) lives at y * side + x.
struct BitGrid {
  int side = 0;
  std::vector<std::uint8_t> cells;

  explicit BitGrid(int s = 0) : side(s), cells(static_cast<std::size_t>(s) * s, 0) {}
  std::uint8_t& at(int x, int y) { return cells[static_cast<std::size_t>(y) * side + x]; }
  std::uint8_t at(int x, int y) const { return cells[static_cast<std::size_t>(y) * side + x]; }
  std::size_t popcount() const;

  bool operator==(const BitGrid&) const = default;
};

/// Moves the bit at (x, y) to ((x + p*y) mod N, (q*x + y) mod N), T times.
BitGrid arnold_forward(const BitGrid& grid, const ArnoldKey& key);
BitGrid arnold_inverse(const BitGrid& grid, const ArnoldKey& key);

/// ceil(sqrt(C(P, 2))).
int grid_side_for(int patches);

struct WatermarkRecord {
  int version = 1;
  int patches = 0;      // P
  int k = 0;            // K
  std::int64_t m = 0;   // C(P, 2)
  int grid_side = 0;    // N_g
  int patch_side = 16;
  int image_side = 224;
  std::string feature_source = "mean_rgb";
  std::string cipher_bits;  // lowercase hex, row-major MSB-first
  std::string created;      // ISO-8601 UTC
  std::string content_id;

  bool operator==(const WatermarkRecord&) const = default;
};

struct RecordMeta {
  int patch_side = 16;
  int image_side = 224;
  std::string feature_source = "mean_rgb";
  std::string content_id;
  std::string created;  // empty: current time, or SOURCE_DATE_EPOCH when set
};

/// Scrambles the pair-indicator bitmap of `pairs` into a record.
WatermarkRecord encrypt(const PairIndexSet& pairs, const ArnoldKey& key, const RecordMeta& meta = {});

/// Inverse of encrypt. Errc::wrong_key when a recovered bit lands in the pad or
/// the popcount differs from K; Errc::corrupt_payload for bad hex.
PairIndexSet decrypt(const WatermarkRecord& record, const ArnoldKey& key);

/// |a ∩ b| / K; both sets must have the same size K >= 1.
double overlap(const PairIndexSet& a, const PairIndexSet& b);

/// Canonical JSON: keys sorted, no insignificant whitespace, crc32 last.
std::string to_json(const WatermarkRecord& record);
/// Parses and checks the crc32 field.
WatermarkRecord from_json(const std::string& text);

// ---- calibration -------------------------------------------------------------

enum class CalibrationMode { binomial, hypergeometric };

const char* to_string(CalibrationMode mode);
CalibrationMode calibration_mode_from_string(const std::string& name);

struct CalibrationResult {
  CalibrationMode mode = CalibrationMode::binomial;
  int k = 0;
  std::int64_t m_pairs = 0;  // M; hypergeometric only
  int threshold = 0;         // m
  double tau = 0.0;          // m / K
  double achieved_fpr = 0.0;
};

/// P(X >= m) for X ~ Binomial(K, 1/2).
double binomial_tail(int k, int m);
/// P(X >= m) for X = |A ∩ B|, A, B independent uniform K-subsets of an M-set.
double hypergeometric_tail(int k, std::int64_t m_pairs, int m);

/// Smallest m with tail(m) <= target_fpr. Errc::unreachable_target when even
/// tail(K) exceeds the target.
CalibrationResult calibrate(int k, double target_fpr, CalibrationMode mode, std::int64_t m_pairs = 0);

// ---- verification --------------------------------------------------------------

struct Verdict {
  bool authenticated = false;
  double eta = 0.0;
  int matches = 0;    // |E_p ∩ E_p'|
  int threshold = 0;  // calibrated m
};

/// Authenticated iff |decrypt(record) ∩ suspect| >= calib.threshold.
Verdict verify(const WatermarkRecord& record, const ArnoldKey& key, const PairIndexSet& suspect,
               const CalibrationResult& calib);

// ---- registry ---------------------------------------------------------------------

/// Lowercase hex SHA-256 of the content id plus ".rzw".
std::string record_file_name(const std::string& content_id);

/// Create-exclusive write; Errc::duplicate_record unless force.
std::filesystem::path registry_put(const std::filesystem::path& dir, const WatermarkRecord& record,
                                   bool force = false);
/// Errc::missing_record or Errc::crc_mismatch.
WatermarkRecord registry_get(const std::filesystem::path& dir, const std::string& content_id);

}  // namespace relzero::watermark
