#include "synthetic_corpus.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "relzero/rng.hpp"

namespace relzero::testkit {

namespace {

using Color = std::array<double, 3>;

Color random_color(Rng& rng) {
  // Bias toward saturated colours so objects separate in RGB.
  Color c{};
  for (auto& v : c) v = rng.uniform();
  const double lo = *std::min_element(c.begin(), c.end());
  const double hi = *std::max_element(c.begin(), c.end());
  if (hi - lo < 0.35) c[rng.below(3)] = lo < 0.5 ? std::min(1.0, lo + 0.6) : std::max(0.0, hi - 0.6);
  return c;
}

// Bilinear value noise on a coarse lattice.
class ValueNoise {
 public:
  ValueNoise(Rng& rng, int width, int height, int cell) : cell_(cell) {
    nx_ = width / cell + 2;
    ny_ = height / cell + 2;
    values_.resize(static_cast<std::size_t>(nx_) * ny_ * 3);
    for (auto& v : values_) v = rng.uniform(-1.0, 1.0);
  }
  double at(int x, int y, int ch) const {
    const double fx = static_cast<double>(x) / cell_;
    const double fy = static_cast<double>(y) / cell_;
    const int x0 = static_cast<int>(fx);
    const int y0 = static_cast<int>(fy);
    const double tx = fx - x0;
    const double ty = fy - y0;
    auto v = [&](int gx, int gy) { return values_[(static_cast<std::size_t>(gy) * nx_ + gx) * 3 + ch]; };
    const double top = v(x0, y0) + (v(x0 + 1, y0) - v(x0, y0)) * tx;
    const double bottom = v(x0, y0 + 1) + (v(x0 + 1, y0 + 1) - v(x0, y0 + 1)) * tx;
    return top + (bottom - top) * ty;
  }

 private:
  int cell_ = 1;
  int nx_ = 0;
  int ny_ = 0;
  std::vector<double> values_;
};

struct Shape {
  bool ellipse = true;
  double cx = 0, cy = 0, rx = 0, ry = 0, cos_a = 1, sin_a = 0;
  Color color{};
  double shade_dx = 0, shade_dy = 0;

  bool contains(double x, double y) const {
    const double dx = x - cx;
    const double dy = y - cy;
    const double u = (dx * cos_a + dy * sin_a) / rx;
    const double v = (-dx * sin_a + dy * cos_a) / ry;
    return ellipse ? u * u + v * v <= 1.0 : std::abs(u) <= 1.0 && std::abs(v) <= 1.0;
  }
};

}  // namespace

imaging::ImageBuffer synthetic_image(std::uint64_t seed, int width, int height) {
  Rng rng(seed);
  const double scale = std::min(width, height);

  const Color bg_a = random_color(rng);
  const Color bg_b = random_color(rng);
  const double angle = rng.uniform(0.0, 2.0 * M_PI);
  const double gx = std::cos(angle), gy = std::sin(angle);

  std::vector<Shape> shapes(4 + rng.below(5));
  for (auto& s : shapes) {
    s.ellipse = rng.uniform() < 0.6;
    s.cx = rng.uniform(0.0, width);
    s.cy = rng.uniform(0.0, height);
    s.rx = rng.uniform(0.07, 0.3) * scale;
    s.ry = rng.uniform(0.07, 0.3) * scale;
    const double a = rng.uniform(0.0, M_PI);
    s.cos_a = std::cos(a);
    s.sin_a = std::sin(a);
    s.color = random_color(rng);
    s.shade_dx = rng.uniform(-0.25, 0.25) / scale;
    s.shade_dy = rng.uniform(-0.25, 0.25) / scale;
  }
  const ValueNoise texture(rng, width, height, 12);
  const double texture_amp = rng.uniform(0.03, 0.08);

  imaging::ImageBuffer img(width, height);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const double t = std::clamp(0.5 + ((x - width / 2.0) * gx + (y - height / 2.0) * gy) / scale, 0.0, 1.0);
      Color c{};
      for (int ch = 0; ch < 3; ++ch) c[ch] = bg_a[ch] + (bg_b[ch] - bg_a[ch]) * t;
      for (const auto& s : shapes) {
        if (!s.contains(x + 0.5, y + 0.5)) continue;
        const double shade = (x - s.cx) * s.shade_dx + (y - s.cy) * s.shade_dy;
        for (int ch = 0; ch < 3; ++ch) c[ch] = s.color[ch] + shade;
      }
      for (int ch = 0; ch < 3; ++ch) {
        const double v = c[ch] + texture_amp * texture.at(x, y, ch) + rng.normal(0.0, 0.015);
        img.at(x, y, ch) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return img;
}

std::vector<analysis::CorpusImage> synthetic_corpus(std::uint64_t corpus_seed, int first, int count, int side) {
  std::vector<analysis::CorpusImage> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int n = first; n < first + count; ++n) {
    out.push_back({"img" + std::to_string(n), synthetic_image(mix_seed(corpus_seed, static_cast<std::uint64_t>(n)), side, side)});
  }
  return out;
}

}  // namespace relzero::testkit
