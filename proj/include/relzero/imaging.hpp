#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace relzero::imaging {

/// Interleaved RGB image with channel values in [0, 1], row-major from the top-left.
struct ImageBuffer {
  int width = 0;
  int height = 0;
  std::vector<float> pixels;  // width * height * 3

  ImageBuffer() = default;
  ImageBuffer(int w, int h, float fill = 0.0f);

  std::size_t index(int x, int y) const { return (static_cast<std::size_t>(y) * width + x) * 3; }
  float& at(int x, int y, int ch) { return pixels[index(x, y) + ch]; }
  float at(int x, int y, int ch) const { return pixels[index(x, y) + ch]; }

  bool operator==(const ImageBuffer&) const = default;
};

enum class FeatureSource { mean_rgb, external };

const char* to_string(FeatureSource source);
FeatureSource feature_source_from_string(const std::string& name);

/// P feature vectors of dimension D laid out over a rows x cols patch grid.
class PatchFeatureMap {
 public:
  PatchFeatureMap() = default;
  /// Validates shape and finiteness; mean_rgb maps must also be 3-d and in [0, 1].
  PatchFeatureMap(int grid_rows, int grid_cols, int dim, std::vector<double> values,
                  FeatureSource source);

  int patch_count() const { return rows_ * cols_; }
  int dim() const { return dim_; }
  int grid_rows() const { return rows_; }
  int grid_cols() const { return cols_; }
  FeatureSource source() const { return source_; }

  std::span<const double> feature(int i) const {
    return {values_.data() + static_cast<std::size_t>(i) * dim_, static_cast<std::size_t>(dim_)};
  }
  std::span<const double> values() const { return values_; }

  bool operator==(const PatchFeatureMap&) const = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  int dim_ = 0;
  std::vector<double> values_;
  FeatureSource source_ = FeatureSource::mean_rgb;
};

/// Decodes a PNG or JPEG at its native size.
ImageBuffer load_image_native(const std::filesystem::path& path);

/// Decodes a PNG or JPEG and bilinearly resizes it to target_side x target_side.
ImageBuffer load_image(const std::filesystem::path& path, int target_side);

/// Writes an 8-bit PNG; channel values are rounded to the nearest of 256 levels.
void save_png(const ImageBuffer& img, const std::filesystem::path& path);
void save_jpeg(const ImageBuffer& img, const std::filesystem::path& path, int quality);

/// In-memory baseline JPEG encode/decode at the given quality (1..100).
ImageBuffer jpeg_round_trip(const ImageBuffer& img, int quality);

/// Bilinear resampling with half-pixel centers and edge clamping. Same-size
/// resizes return the input unchanged.
ImageBuffer resize_bilinear(const ImageBuffer& img, int width, int height);

/// Mean RGB of each non-overlapping patch_side x patch_side patch, row-major.
PatchFeatureMap extract_mean_rgb(const ImageBuffer& img, int patch_side);

/// RELZERO-EMB v1 text format.
PatchFeatureMap load_embeddings(const std::filesystem::path& path);
PatchFeatureMap parse_embeddings(const std::string& text);
void save_embeddings(const PatchFeatureMap& fm, const std::filesystem::path& path);
std::string format_embeddings(const PatchFeatureMap& fm);

}  // namespace relzero::imaging
