#include "relzero/imaging.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <sstream>

#include "relzero/error.hpp"

namespace relzero::imaging {
namespace {

std::vector<unsigned char> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "unreadable file: " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(Errc::io, "unreadable file: " + path.string());
  return bytes;
}

bool is_png(const std::vector<unsigned char>& b) {
  static constexpr unsigned char kSig[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
  return b.size() >= 8 && std::equal(kSig, kSig + 8, b.begin());
}

bool is_jpeg(const std::vector<unsigned char>& b) {
  return b.size() >= 3 && b[0] == 0xFF && b[1] == 0xD8 && b[2] == 0xFF;
}

ImageBuffer from_bgr8(const cv::Mat& bgr) {
  ImageBuffer img(bgr.cols, bgr.rows);
  for (int y = 0; y < bgr.rows; ++y) {
    const auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr.cols; ++x) {
      for (int ch = 0; ch < 3; ++ch) img.at(x, y, ch) = static_cast<float>(row[x][2 - ch]) / 255.0f;
    }
  }
  return img;
}

unsigned char quantize(float v) {
  return static_cast<unsigned char>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f));
}

cv::Mat to_bgr8(const ImageBuffer& img) {
  cv::Mat bgr(img.height, img.width, CV_8UC3);
  for (int y = 0; y < img.height; ++y) {
    auto* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < img.width; ++x) {
      for (int ch = 0; ch < 3; ++ch) row[x][2 - ch] = quantize(img.at(x, y, ch));
    }
  }
  return bgr;
}

ImageBuffer decode(const std::vector<unsigned char>& bytes, const std::string& what) {
  if (!is_png(bytes) && !is_jpeg(bytes)) throw Error(Errc::unsupported_format, "unsupported format: " + what);
  cv::Mat bgr = cv::imdecode(bytes, cv::IMREAD_COLOR);
  if (bgr.empty()) throw Error(Errc::io, "unreadable file: " + what);
  if (bgr.cols == 0 || bgr.rows == 0) throw Error(Errc::malformed, "zero-dimension image: " + what);
  return from_bgr8(bgr);
}

void write_bytes(const std::vector<unsigned char>& bytes, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
}

}  // namespace

ImageBuffer::ImageBuffer(int w, int h, float fill) : width(w), height(h) {
  if (w < 0 || h < 0) throw Error(Errc::invalid_argument, "negative image dimension");
  pixels.assign(static_cast<std::size_t>(w) * h * 3, fill);
}

const char* to_string(FeatureSource source) {
  return source == FeatureSource::mean_rgb ? "mean_rgb" : "external";
}

FeatureSource feature_source_from_string(const std::string& name) {
  if (name == "mean_rgb") return FeatureSource::mean_rgb;
  if (name == "external") return FeatureSource::external;
  throw Error(Errc::invalid_argument, "unknown feature source: " + name);
}

PatchFeatureMap::PatchFeatureMap(int grid_rows, int grid_cols, int dim, std::vector<double> values,
                                 FeatureSource source)
    : rows_(grid_rows), cols_(grid_cols), dim_(dim), values_(std::move(values)), source_(source) {
  if (rows_ <= 0 || cols_ <= 0 || dim_ <= 0) throw Error(Errc::invalid_argument, "empty patch feature map");
  if (values_.size() != static_cast<std::size_t>(rows_) * cols_ * dim_) {
    throw Error(Errc::dimension_mismatch, "feature buffer size does not match P x D");
  }
  for (double v : values_) {
    if (!std::isfinite(v)) throw Error(Errc::malformed, "non-finite value");
  }
  if (source_ == FeatureSource::mean_rgb) {
    if (dim_ != 3) throw Error(Errc::invalid_argument, "mean_rgb features must be 3-dimensional");
    for (double v : values_) {
      if (v < 0.0 || v > 1.0) throw Error(Errc::out_of_range, "mean_rgb feature outside [0,1]");
    }
  }
}

ImageBuffer load_image_native(const std::filesystem::path& path) {
  return decode(read_bytes(path), path.string());
}

ImageBuffer load_image(const std::filesystem::path& path, int target_side) {
  if (target_side <= 0) throw Error(Errc::invalid_argument, "target side must be positive");
  return resize_bilinear(load_image_native(path), target_side, target_side);
}

void save_png(const ImageBuffer& img, const std::filesystem::path& path) {
  std::vector<unsigned char> bytes;
  if (!cv::imencode(".png", to_bgr8(img), bytes)) throw Error(Errc::io, "PNG encode failed");
  write_bytes(bytes, path);
}

void save_jpeg(const ImageBuffer& img, const std::filesystem::path& path, int quality) {
  std::vector<unsigned char> bytes;
  if (!cv::imencode(".jpg", to_bgr8(img), bytes, {cv::IMWRITE_JPEG_QUALITY, quality})) {
    throw Error(Errc::io, "JPEG encode failed");
  }
  write_bytes(bytes, path);
}

ImageBuffer jpeg_round_trip(const ImageBuffer& img, int quality) {
  if (quality < 1 || quality > 100) throw Error(Errc::out_of_range, "JPEG quality must be in [1,100]");
  std::vector<unsigned char> bytes;
  if (!cv::imencode(".jpg", to_bgr8(img), bytes, {cv::IMWRITE_JPEG_QUALITY, quality})) {
    throw Error(Errc::io, "JPEG encode failed");
  }
  return decode(bytes, "<jpeg round trip>");
}

ImageBuffer resize_bilinear(const ImageBuffer& img, int width, int height) {
  if (img.width == 0 || img.height == 0) throw Error(Errc::malformed, "zero-dimension image");
  if (width <= 0 || height <= 0) throw Error(Errc::invalid_argument, "resize target must be positive");
  if (width == img.width && height == img.height) return img;

  ImageBuffer out(width, height);
  const double sx = static_cast<double>(img.width) / width;
  const double sy = static_cast<double>(img.height) / height;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(img.height - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, img.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(img.width - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, img.width - 1);
      const double wx = fx - x0;
      for (int ch = 0; ch < 3; ++ch) {
        const double top = img.at(x0, y0, ch) * (1.0 - wx) + img.at(x1, y0, ch) * wx;
        const double bottom = img.at(x0, y1, ch) * (1.0 - wx) + img.at(x1, y1, ch) * wx;
        out.at(x, y, ch) = static_cast<float>(std::clamp(top * (1.0 - wy) + bottom * wy, 0.0, 1.0));
      }
    }
  }
  return out;
}

PatchFeatureMap extract_mean_rgb(const ImageBuffer& img, int patch_side) {
  if (patch_side <= 0) throw Error(Errc::invalid_argument, "patch side must be positive");
  if (img.width == 0 || img.height == 0 || img.width % patch_side != 0 || img.height % patch_side != 0) {
    throw Error(Errc::dimension_mismatch, "image dimensions not divisible by patch side");
  }
  const int rows = img.height / patch_side;
  const int cols = img.width / patch_side;
  const double count = static_cast<double>(patch_side) * patch_side;
  std::vector<double> values(static_cast<std::size_t>(rows) * cols * 3);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      double sum[3] = {0.0, 0.0, 0.0};
      for (int y = r * patch_side; y < (r + 1) * patch_side; ++y) {
        for (int x = c * patch_side; x < (c + 1) * patch_side; ++x) {
          for (int ch = 0; ch < 3; ++ch) sum[ch] += img.at(x, y, ch);
        }
      }
      double* dst = values.data() + (static_cast<std::size_t>(r) * cols + c) * 3;
      for (int ch = 0; ch < 3; ++ch) dst[ch] = std::clamp(sum[ch] / count, 0.0, 1.0);
    }
  }
  return PatchFeatureMap(rows, cols, 3, std::move(values), FeatureSource::mean_rgb);
}

// ---- RELZERO-EMB v1 --------------------------------------------------------

namespace {

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> tokens;
  for (std::string t; in >> t;) tokens.push_back(t);
  return tokens;
}

int parse_header_int(const std::string& token) {
  int value = 0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size() || value <= 0) {
    throw Error(Errc::malformed, "malformed header: bad integer '" + token + "'");
  }
  return value;
}

double parse_real(const std::string& token) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec == std::errc::result_out_of_range) throw Error(Errc::malformed, "non-finite value");
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    throw Error(Errc::malformed, "non-numeric entry '" + token + "'");
  }
  if (!std::isfinite(value)) throw Error(Errc::malformed, "non-finite value");
  return value;
}

}  // namespace

PatchFeatureMap parse_embeddings(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "RELZERO-EMB 1") {
    throw Error(Errc::malformed, "malformed header: expected 'RELZERO-EMB 1'");
  }
  // "P D" then "R C"; a single "P D R C" line is accepted too.
  std::vector<std::string> shape;
  while (shape.size() < 4 && std::getline(in, line)) {
    auto tokens = split_ws(line);
    if (tokens.empty() || tokens.size() + shape.size() > 4) {
      throw Error(Errc::malformed, "malformed header: expected 'P D' and 'R C'");
    }
    shape.insert(shape.end(), tokens.begin(), tokens.end());
  }
  if (shape.size() != 4) throw Error(Errc::malformed, "malformed header: expected 'P D' and 'R C'");
  const int patches = parse_header_int(shape[0]);
  const int dim = parse_header_int(shape[1]);
  const int rows = parse_header_int(shape[2]);
  const int cols = parse_header_int(shape[3]);
  if (static_cast<long long>(rows) * cols != patches) {
    throw Error(Errc::malformed, "malformed header: R x C != P");
  }

  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(patches) * dim);
  int row_count = 0;
  while (std::getline(in, line)) {
    const auto tokens = split_ws(line);
    if (tokens.empty()) continue;
    if (++row_count > patches) break;
    if (static_cast<int>(tokens.size()) != dim) {
      throw Error(Errc::malformed, "row " + std::to_string(row_count) + ": expected " +
                                       std::to_string(dim) + " entries");
    }
    for (const auto& t : tokens) values.push_back(parse_real(t));
  }
  if (row_count != patches) throw Error(Errc::malformed, "row count mismatch");
  return PatchFeatureMap(rows, cols, dim, std::move(values), FeatureSource::external);
}

PatchFeatureMap load_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "unreadable file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_embeddings(ss.str());
}

std::string format_embeddings(const PatchFeatureMap& fm) {
  std::string out = "RELZERO-EMB 1\n";
  out += std::to_string(fm.patch_count()) + " " + std::to_string(fm.dim()) + "\n";
  out += std::to_string(fm.grid_rows()) + " " + std::to_string(fm.grid_cols()) + "\n";
  char buf[32];
  for (int i = 0; i < fm.patch_count(); ++i) {
    const auto f = fm.feature(i);
    for (std::size_t d = 0; d < f.size(); ++d) {
      std::snprintf(buf, sizeof buf, "%.9g", f[d]);
      if (d) out += ' ';
      out += buf;
    }
    out += '\n';
  }
  return out;
}

void save_embeddings(const PatchFeatureMap& fm, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << format_embeddings(fm);
  if (!out) throw Error(Errc::io, "cannot write " + path.string());
}

}  // namespace relzero::imaging
