#include "relzero/watermark.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <json.hpp>
#include <numeric>
#include <zlib.h>

#include "relzero/error.hpp"

namespace relzero::watermark {

namespace {

std::int64_t mod(std::int64_t a, std::int64_t n) {
  const std::int64_t r = a % n;
  return r < 0 ? r + n : r;
}

std::string crc_hex(const std::string& text) {
  const auto crc = crc32(crc32(0L, Z_NULL, 0), reinterpret_cast<const Bytef*>(text.data()),
                         static_cast<uInt>(text.size()));
  char buf[16];
  std::snprintf(buf, sizeof buf, "%08lx", static_cast<unsigned long>(crc));
  return buf;
}

std::string iso_timestamp(std::time_t t) {
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string now_timestamp() {
  if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) {
    char* end = nullptr;
    const long long v = std::strtoll(epoch, &end, 10);
    if (end != epoch && *end == '\0') return iso_timestamp(static_cast<std::time_t>(v));
  }
  return iso_timestamp(std::chrono::system_clock::to_time_t(std::chrono::system_clock::now()));
}

// Destination cell index of every source cell after T iterations.
std::vector<std::uint32_t> scramble_map(const ArnoldKey& key) {
  const int n = key.grid_side();
  std::vector<std::uint32_t> dest(static_cast<std::size_t>(n) * n);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      std::int64_t cx = x, cy = y;
      for (int t = 0; t < key.iterations(); ++t) {
        const std::int64_t nx = mod(cx + key.p() * cy, n);
        const std::int64_t ny = mod(key.q() * cx + cy, n);
        cx = nx;
        cy = ny;
      }
      dest[static_cast<std::size_t>(y) * n + x] = static_cast<std::uint32_t>(cy * n + cx);
    }
  }
  return dest;
}

void check_grid(const BitGrid& grid, const ArnoldKey& key) {
  if (grid.side != key.grid_side() || grid.cells.size() != static_cast<std::size_t>(grid.side) * grid.side) {
    throw Error(Errc::dimension_mismatch, "grid side does not match key N_g");
  }
}

}  // namespace

// ---- Arnold map --------------------------------------------------------------------

bool ArnoldKey::valid(std::int64_t p, std::int64_t q, int grid_side) {
  if (grid_side < 1) return false;
  const std::int64_t n = grid_side;
  const std::int64_t det = mod(1 - mod(p, n) * mod(q, n), n);
  return std::gcd(det, n) == 1;
}

ArnoldKey::ArnoldKey(std::int64_t p, std::int64_t q, int iterations, int grid_side)
    : p_(p), q_(q), t_(iterations), n_(grid_side) {
  if (grid_side < 1) throw Error(Errc::invalid_argument, "Arnold grid side must be >= 1");
  if (iterations < 1) throw Error(Errc::invalid_argument, "Arnold iteration count must be >= 1");
  if (!valid(p, q, grid_side)) {
    throw Error(Errc::invalid_argument, "Arnold key not invertible: gcd((1 - p*q) mod N_g, N_g) != 1");
  }
  p_ = mod(p, grid_side);
  q_ = mod(q, grid_side);
}

std::size_t BitGrid::popcount() const {
  return static_cast<std::size_t>(std::count_if(cells.begin(), cells.end(), [](auto c) { return c != 0; }));
}

BitGrid arnold_forward(const BitGrid& grid, const ArnoldKey& key) {
  check_grid(grid, key);
  const auto dest = scramble_map(key);
  BitGrid out(grid.side);
  for (std::size_t s = 0; s < dest.size(); ++s) out.cells[dest[s]] = grid.cells[s];
  return out;
}

BitGrid arnold_inverse(const BitGrid& grid, const ArnoldKey& key) {
  check_grid(grid, key);
  const auto dest = scramble_map(key);
  BitGrid out(grid.side);
  for (std::size_t s = 0; s < dest.size(); ++s) out.cells[s] = grid.cells[dest[s]];
  return out;
}

int grid_side_for(int patches) {
  const std::int64_t m = pair_count(patches);
  if (m < 1) throw Error(Errc::invalid_argument, "watermark needs at least 2 patches");
  auto side = static_cast<std::int64_t>(std::sqrt(static_cast<double>(m)));
  while (side * side < m) ++side;
  while (side > 1 && (side - 1) * (side - 1) >= m) --side;
  return static_cast<int>(side);
}

// ---- encryption ----------------------------------------------------------------------

WatermarkRecord encrypt(const PairIndexSet& pairs, const ArnoldKey& key, const RecordMeta& meta) {
  const int patches = pairs.patch_count();
  const int side = grid_side_for(patches);
  if (key.grid_side() != side) {
    throw Error(Errc::dimension_mismatch, "key N_g=" + std::to_string(key.grid_side()) +
                                              " does not match ceil(sqrt(C(P,2)))=" + std::to_string(side));
  }
  BitGrid plain(side);
  for (auto rank : pairs.ranks()) plain.cells[static_cast<std::size_t>(rank)] = 1;
  const BitGrid scrambled = arnold_forward(plain, key);

  const std::size_t bits = scrambled.cells.size();
  std::vector<unsigned char> bytes((bits + 7) / 8, 0);
  for (std::size_t t = 0; t < bits; ++t) {
    if (scrambled.cells[t]) bytes[t / 8] |= static_cast<unsigned char>(0x80u >> (t % 8));
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  hex.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    hex.push_back(kHex[b >> 4]);
    hex.push_back(kHex[b & 0xF]);
  }

  WatermarkRecord rec;
  rec.patches = patches;
  rec.k = static_cast<int>(pairs.size());
  rec.m = pair_count(patches);
  rec.grid_side = side;
  rec.patch_side = meta.patch_side;
  rec.image_side = meta.image_side;
  rec.feature_source = meta.feature_source;
  rec.cipher_bits = std::move(hex);
  rec.created = meta.created.empty() ? now_timestamp() : meta.created;
  rec.content_id = meta.content_id;
  return rec;
}

PairIndexSet decrypt(const WatermarkRecord& record, const ArnoldKey& key) {
  if (record.version != 1) throw Error(Errc::malformed, "unsupported record version");
  if (record.patches < 2 || record.m != pair_count(record.patches) ||
      record.grid_side != grid_side_for(record.patches) || record.k < 0 || record.k > record.m) {
    throw Error(Errc::corrupt_payload, "record header inconsistent (P, K, M, N_g)");
  }
  if (key.grid_side() != record.grid_side) {
    throw Error(Errc::wrong_key, "decrypt structural check failed: key N_g does not match record");
  }
  const std::size_t bits = static_cast<std::size_t>(record.grid_side) * record.grid_side;
  const std::size_t nbytes = (bits + 7) / 8;
  if (record.cipher_bits.size() != nbytes * 2) throw Error(Errc::corrupt_payload, "cipher payload has wrong length");

  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    throw Error(Errc::corrupt_payload, "cipher payload is not lowercase hex");
  };
  BitGrid scrambled(record.grid_side);
  for (std::size_t byte = 0; byte < nbytes; ++byte) {
    const int v = nibble(record.cipher_bits[2 * byte]) << 4 | nibble(record.cipher_bits[2 * byte + 1]);
    for (int bit = 0; bit < 8; ++bit) {
      const std::size_t t = byte * 8 + bit;
      const bool set = (v >> (7 - bit)) & 1;
      if (t < bits) {
        scrambled.cells[t] = set;
      } else if (set) {
        throw Error(Errc::corrupt_payload, "cipher payload has bits set past N_g^2");
      }
    }
  }

  const BitGrid plain = arnold_inverse(scrambled, key);
  std::vector<std::int64_t> ranks;
  for (std::size_t t = 0; t < bits; ++t) {
    if (!plain.cells[t]) continue;
    if (static_cast<std::int64_t>(t) >= record.m) {
      throw Error(Errc::wrong_key, "decrypt structural check failed: one-bit in padding");
    }
    ranks.push_back(static_cast<std::int64_t>(t));
  }
  if (static_cast<int>(ranks.size()) != record.k) {
    throw Error(Errc::wrong_key, "decrypt structural check failed: popcount != K");
  }
  return PairIndexSet::from_ranks(record.patches, ranks);
}

double overlap(const PairIndexSet& a, const PairIndexSet& b) {
  if (a.size() != b.size()) throw Error(Errc::dimension_mismatch, "overlap: sets differ in size");
  if (a.empty()) throw Error(Errc::invalid_argument, "overlap: K must be >= 1");
  return static_cast<double>(intersection_size(a, b)) / static_cast<double>(a.size());
}

// ---- record serialization ---------------------------------------------------------------

namespace {

constexpr const char* kCrcField = ",\"crc32\":\"";

nlohmann::json fields(const WatermarkRecord& r) {
  return {
      {"cipher_bits", r.cipher_bits}, {"content_id", r.content_id}, {"created", r.created},
      {"feature_source", r.feature_source}, {"grid_side", r.grid_side}, {"image_side", r.image_side},
      {"k", r.k}, {"m", r.m}, {"patch_count", r.patches}, {"patch_side", r.patch_side},
      {"version", r.version},
  };
}

}  // namespace

std::string to_json(const WatermarkRecord& record) {
  std::string body = fields(record).dump();
  const std::string crc = crc_hex(body);
  body.pop_back();
  return body + kCrcField + crc + "\"}";
}

WatermarkRecord from_json(const std::string& text_in) {
  std::string text = text_in;
  while (!text.empty() && (text.back() == '\n' || text.back() == '\r')) text.pop_back();
  const auto pos = text.rfind(kCrcField);
  const std::size_t crc_len = 8;
  if (pos == std::string::npos || text.size() != pos + std::char_traits<char>::length(kCrcField) + crc_len + 2 ||
      text.compare(text.size() - 2, 2, "\"}") != 0) {
    throw Error(Errc::crc_mismatch, "record crc32 field missing or misplaced");
  }
  const std::string stored = text.substr(pos + std::char_traits<char>::length(kCrcField), crc_len);
  const std::string body = text.substr(0, pos) + "}";
  if (crc_hex(body) != stored) throw Error(Errc::crc_mismatch, "record CRC mismatch");

  WatermarkRecord r;
  try {
    const auto j = nlohmann::json::parse(body);
    r.version = j.at("version").get<int>();
    r.patches = j.at("patch_count").get<int>();
    r.k = j.at("k").get<int>();
    r.m = j.at("m").get<std::int64_t>();
    r.grid_side = j.at("grid_side").get<int>();
    r.patch_side = j.at("patch_side").get<int>();
    r.image_side = j.at("image_side").get<int>();
    r.feature_source = j.at("feature_source").get<std::string>();
    r.cipher_bits = j.at("cipher_bits").get<std::string>();
    r.created = j.at("created").get<std::string>();
    r.content_id = j.at("content_id").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::malformed, std::string("record JSON: ") + e.what());
  }
  if (fields(r).dump() != body) throw Error(Errc::malformed, "record is not in canonical form");
  return r;
}

// ---- verification -------------------------------------------------------------------------

Verdict verify(const WatermarkRecord& record, const ArnoldKey& key, const PairIndexSet& suspect,
               const CalibrationResult& calib) {
  if (calib.k != record.k) throw Error(Errc::dimension_mismatch, "calibration K != record K");
  if (static_cast<int>(suspect.size()) != record.k) throw Error(Errc::dimension_mismatch, "suspect set size != K");
  const PairIndexSet registered = decrypt(record, key);
  Verdict v;
  v.matches = static_cast<int>(intersection_size(registered, suspect));
  v.eta = record.k > 0 ? static_cast<double>(v.matches) / record.k : 0.0;
  v.threshold = calib.threshold;
  v.authenticated = v.matches >= calib.threshold;
  return v;
}

}  // namespace relzero::watermark
