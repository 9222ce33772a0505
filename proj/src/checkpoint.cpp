#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <zlib.h>

#include "relzero/error.hpp"
#include "relzero/predictor.hpp"

// Layout (all integers u32 little-endian, reals IEEE-754 binary64 little-endian):
//   "RZMLP1" | D | layer count | per layer: rows, cols, weights[rows*cols], bias[rows]
//   | CRC-32 of every preceding byte

namespace relzero::predictor {
namespace {

constexpr char kMagic[6] = {'R', 'Z', 'M', 'L', 'P', '1'};

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) out.push_back(static_cast<unsigned char>(v >> (8 * b)));
}

void put_f64(std::vector<unsigned char>& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int b = 0; b < 8; ++b) out.push_back(static_cast<unsigned char>(bits >> (8 * b)));
}

class Reader {
 public:
  explicit Reader(std::span<const unsigned char> bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(bytes_[pos_ + b]) << (8 * b);
    pos_ += 4;
    return v;
  }

  double f64() {
    need(8);
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes_[pos_ + b]) << (8 * b);
    pos_ += 8;
    return std::bit_cast<double>(bits);
  }

  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw Error(Errc::corrupt_payload, "checkpoint truncated");
  }
  std::span<const unsigned char> bytes_;
  std::size_t pos_ = 0;
};

std::uint32_t crc_of(std::span<const unsigned char> bytes) {
  return static_cast<std::uint32_t>(
      crc32(crc32(0L, Z_NULL, 0), bytes.data(), static_cast<uInt>(bytes.size())));
}

}  // namespace

std::vector<unsigned char> serialize(const PredictorModel& model) {
  std::vector<unsigned char> out(kMagic, kMagic + sizeof kMagic);
  put_u32(out, static_cast<std::uint32_t>(model.dim()));
  put_u32(out, static_cast<std::uint32_t>(model.layers().size()));
  for (const auto& layer : model.layers()) {
    put_u32(out, static_cast<std::uint32_t>(layer.out));
    put_u32(out, static_cast<std::uint32_t>(layer.in));
    for (double w : layer.weights) put_f64(out, w);
    for (double b : layer.bias) put_f64(out, b);
  }
  put_u32(out, crc_of(out));
  return out;
}

PredictorModel deserialize(std::span<const unsigned char> bytes) {
  if (bytes.size() < sizeof kMagic + 4 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw Error(Errc::malformed, "not an RZMLP1 checkpoint");
  }
  const auto body = bytes.first(bytes.size() - 4);
  Reader crc_reader(bytes.subspan(bytes.size() - 4));
  if (crc_reader.u32() != crc_of(body)) throw Error(Errc::crc_mismatch, "checkpoint CRC mismatch");

  Reader in(body.subspan(sizeof kMagic));
  const auto dim = static_cast<int>(in.u32());
  const auto count = in.u32();
  if (count == 0 || count > 64) throw Error(Errc::malformed, "implausible layer count in checkpoint");
  std::vector<DenseLayer> layers;
  for (std::uint32_t l = 0; l < count; ++l) {
    DenseLayer layer;
    layer.out = static_cast<int>(in.u32());
    layer.in = static_cast<int>(in.u32());
    if (layer.out <= 0 || layer.in <= 0 || static_cast<std::uint64_t>(layer.out) * layer.in > (1u << 26)) {
      throw Error(Errc::malformed, "implausible layer shape in checkpoint");
    }
    layer.weights.resize(static_cast<std::size_t>(layer.out) * layer.in);
    layer.bias.resize(static_cast<std::size_t>(layer.out));
    for (auto& w : layer.weights) w = in.f64();
    for (auto& b : layer.bias) b = in.f64();
    layers.push_back(std::move(layer));
  }
  if (sizeof kMagic + in.pos() != body.size()) throw Error(Errc::malformed, "trailing bytes in checkpoint");
  return PredictorModel(dim, std::move(layers));
}

void save_checkpoint(const PredictorModel& model, const std::filesystem::path& path) {
  const auto bytes = serialize(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::io, "cannot write checkpoint " + path.string());
}

PredictorModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "missing checkpoint " + path.string());
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(bytes);
}

}  // namespace relzero::predictor
