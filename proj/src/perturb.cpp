#include "relzero/perturb.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <sstream>

#include "relzero/error.hpp"
#include "relzero/rng.hpp"

namespace relzero::perturb {

using imaging::ImageBuffer;

namespace {

struct Range {
  double lo, hi;
  bool lo_open;
};

Range range_of(AttackKind kind) {
  switch (kind) {
    case AttackKind::cropout: return {0.0, 1.0, true};
    case AttackKind::rescale: return {0.0, 1.0, true};
    case AttackKind::contrast: return {0.5, 2.0, false};
    case AttackKind::brightness: return {0.5, 2.0, false};
    case AttackKind::gaussian_noise: return {0.0, 1.0, false};
    case AttackKind::salt_pepper: return {0.0, 1.0, false};
    case AttackKind::jpeg: return {1.0, 100.0, false};
    case AttackKind::rotation: return {-180.0, 180.0, false};
    case AttackKind::surrogate_edit: return {-1e300, 1e300, false};
  }
  return {0.0, 0.0, false};
}

void clip(ImageBuffer& img) {
  for (auto& v : img.pixels) v = std::clamp(v, 0.0f, 1.0f);
}

// Axis-aligned rectangle covering at least `fraction` of the image; the
// overshoot is below one row (or column) of the rectangle.
struct Rect {
  int x, y, w, h;
};

Rect random_rect(int width, int height, double fraction, Rng& rng) {
  const double target = std::ceil(fraction * width * height);
  const int min_w = std::max(1, static_cast<int>(std::ceil(target / height)));
  const int w = min_w + static_cast<int>(rng.below(static_cast<std::uint64_t>(width - min_w + 1)));
  const int h = std::min(height, std::max(1, static_cast<int>(std::ceil(target / w))));
  const int x = static_cast<int>(rng.below(static_cast<std::uint64_t>(width - w + 1)));
  const int y = static_cast<int>(rng.below(static_cast<std::uint64_t>(height - h + 1)));
  return {x, y, w, h};
}

ImageBuffer gaussian_blur3(const ImageBuffer& img) {
  // Normalized 3-tap kernel for sigma = 1, applied separably with edge replication.
  const double side = std::exp(-0.5);
  const double k[3] = {side / (1.0 + 2.0 * side), 1.0 / (1.0 + 2.0 * side), side / (1.0 + 2.0 * side)};
  ImageBuffer tmp(img.width, img.height);
  ImageBuffer out(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int ch = 0; ch < 3; ++ch) {
        double acc = 0.0;
        for (int t = -1; t <= 1; ++t) acc += k[t + 1] * img.at(std::clamp(x + t, 0, img.width - 1), y, ch);
        tmp.at(x, y, ch) = static_cast<float>(acc);
      }
    }
  }
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int ch = 0; ch < 3; ++ch) {
        double acc = 0.0;
        for (int t = -1; t <= 1; ++t) acc += k[t + 1] * tmp.at(x, std::clamp(y + t, 0, img.height - 1), ch);
        out.at(x, y, ch) = static_cast<float>(acc);
      }
    }
  }
  return out;
}

void add_gaussian_noise(ImageBuffer& img, double stddev, Rng& rng) {
  for (auto& v : img.pixels) v = static_cast<float>(v + rng.normal(0.0, stddev));
}

ImageBuffer cropout(const ImageBuffer& img, double fraction, std::uint64_t seed) {
  Rng rng(seed);
  const Rect r = random_rect(img.width, img.height, fraction, rng);
  ImageBuffer out = img;
  for (int y = r.y; y < r.y + r.h; ++y) {
    for (int x = r.x; x < r.x + r.w; ++x) {
      for (int ch = 0; ch < 3; ++ch) out.at(x, y, ch) = 0.0f;
    }
  }
  return out;
}

ImageBuffer rescale(const ImageBuffer& img, double factor) {
  const int w = std::max(1, static_cast<int>(std::lround(img.width * factor)));
  const int h = std::max(1, static_cast<int>(std::lround(img.height * factor)));
  return imaging::resize_bilinear(imaging::resize_bilinear(img, w, h), img.width, img.height);
}

ImageBuffer rotate(const ImageBuffer& img, double degrees) {
  const double theta = degrees * std::numbers::pi / 180.0;
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  const double cx = 0.5 * img.width;
  const double cy = 0.5 * img.height;
  ImageBuffer out(img.width, img.height);
  auto tap = [&](int x, int y, int ch) -> double {
    if (x < 0 || y < 0 || x >= img.width || y >= img.height) return 0.0;
    return img.at(x, y, ch);
  };
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      // Inverse-map the destination pixel center into the source.
      const double dx = x + 0.5 - cx;
      const double dy = y + 0.5 - cy;
      const double sx = c * dx + s * dy + cx - 0.5;
      const double sy = -s * dx + c * dy + cy - 0.5;
      const int x0 = static_cast<int>(std::floor(sx));
      const int y0 = static_cast<int>(std::floor(sy));
      const double wx = sx - x0;
      const double wy = sy - y0;
      for (int ch = 0; ch < 3; ++ch) {
        const double top = tap(x0, y0, ch) * (1.0 - wx) + tap(x0 + 1, y0, ch) * wx;
        const double bottom = tap(x0, y0 + 1, ch) * (1.0 - wx) + tap(x0 + 1, y0 + 1, ch) * wx;
        out.at(x, y, ch) = static_cast<float>(top * (1.0 - wy) + bottom * wy);
      }
    }
  }
  return out;
}

ImageBuffer salt_pepper(const ImageBuffer& img, double probability, std::uint64_t seed) {
  Rng rng(seed);
  ImageBuffer out = img;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      if (rng.uniform() < probability) {
        const float v = rng.uniform() < 0.5 ? 0.0f : 1.0f;
        for (int ch = 0; ch < 3; ++ch) out.at(x, y, ch) = v;
      }
    }
  }
  return out;
}

}  // namespace

AttackConfig::AttackConfig(AttackKind k, double s, std::uint64_t sd) : kind(k), strength(s), seed(sd) {
  const Range r = range_of(kind);
  const bool below = r.lo_open ? !(strength > r.lo) : !(strength >= r.lo);
  if (!std::isfinite(strength) || below || strength > r.hi) {
    std::ostringstream msg;
    msg << kind_name(kind) << " parameter " << strength << " out of range";
    throw Error(Errc::out_of_range, msg.str());
  }
  if (kind == AttackKind::jpeg && strength != std::floor(strength)) {
    throw Error(Errc::out_of_range, "jpeg quality must be an integer");
  }
}

bool AttackConfig::stochastic() const {
  return kind == AttackKind::cropout || kind == AttackKind::gaussian_noise ||
         kind == AttackKind::salt_pepper || kind == AttackKind::surrogate_edit;
}

const char* kind_name(AttackKind kind) {
  switch (kind) {
    case AttackKind::cropout: return "cropout";
    case AttackKind::rescale: return "rescale";
    case AttackKind::contrast: return "contrast";
    case AttackKind::brightness: return "brightness";
    case AttackKind::gaussian_noise: return "gaussian";
    case AttackKind::salt_pepper: return "sp";
    case AttackKind::jpeg: return "jpeg";
    case AttackKind::rotation: return "rot";
    case AttackKind::surrogate_edit: return "surrogate";
  }
  return "?";
}

std::string AttackConfig::label() const {
  if (kind == AttackKind::surrogate_edit) return "surrogate";
  std::ostringstream out;
  out << kind_name(kind) << ':' << strength;
  return out.str();
}

AttackConfig parse_attack(const std::string& spec, std::uint64_t default_seed) {
  std::vector<std::string> parts;
  std::stringstream ss(spec);
  for (std::string part; std::getline(ss, part, ':');) parts.push_back(part);
  if (parts.empty() || parts.size() > 3) throw Error(Errc::invalid_argument, "bad attack spec '" + spec + "'");

  static const std::pair<const char*, AttackKind> kNames[] = {
      {"cropout", AttackKind::cropout},         {"crop", AttackKind::cropout},
      {"rescale", AttackKind::rescale},         {"scale", AttackKind::rescale},
      {"contrast", AttackKind::contrast},       {"brightness", AttackKind::brightness},
      {"bright", AttackKind::brightness},       {"gaussian", AttackKind::gaussian_noise},
      {"noise", AttackKind::gaussian_noise},    {"gaussian_noise", AttackKind::gaussian_noise},
      {"sp", AttackKind::salt_pepper},          {"salt_pepper", AttackKind::salt_pepper},
      {"jpeg", AttackKind::jpeg},               {"rot", AttackKind::rotation},
      {"rotation", AttackKind::rotation},       {"surrogate", AttackKind::surrogate_edit},
      {"surrogate_edit", AttackKind::surrogate_edit},
  };
  const auto it = std::find_if(std::begin(kNames), std::end(kNames),
                               [&](const auto& e) { return parts[0] == e.first; });
  if (it == std::end(kNames)) throw Error(Errc::invalid_argument, "unknown attack kind '" + parts[0] + "'");
  const AttackKind kind = it->second;

  double strength = 0.0;
  std::size_t next = 1;
  if (kind == AttackKind::surrogate_edit) {
    if (parts.size() > 2) throw Error(Errc::invalid_argument, "bad attack spec '" + spec + "'");
  } else {
    if (parts.size() < 2) throw Error(Errc::invalid_argument, "attack '" + parts[0] + "' needs a parameter");
    const auto& p = parts[1];
    const auto [ptr, ec] = std::from_chars(p.data(), p.data() + p.size(), strength);
    if (ec != std::errc() || ptr != p.data() + p.size()) {
      throw Error(Errc::invalid_argument, "bad attack parameter '" + p + "'");
    }
    next = 2;
  }
  std::uint64_t seed = default_seed;
  if (parts.size() > next) {
    const auto& p = parts[next];
    const auto [ptr, ec] = std::from_chars(p.data(), p.data() + p.size(), seed);
    if (ec != std::errc() || ptr != p.data() + p.size()) {
      throw Error(Errc::invalid_argument, "bad attack seed '" + p + "'");
    }
  }
  return AttackConfig(kind, strength, seed);
}

ImageBuffer surrogate_edit(const ImageBuffer& img, std::uint64_t seed) {
  Rng rng(seed);
  ImageBuffer out = gaussian_blur3(img);

  const double fraction = rng.uniform(0.10, 0.30);
  const Rect r = random_rect(img.width, img.height, fraction, rng);
  float offset[3];
  for (auto& o : offset) o = static_cast<float>(rng.uniform(-0.3, 0.3));
  const ImageBuffer reblurred = gaussian_blur3(out);
  for (int y = r.y; y < r.y + r.h; ++y) {
    for (int x = r.x; x < r.x + r.w; ++x) {
      for (int ch = 0; ch < 3; ++ch) out.at(x, y, ch) = reblurred.at(x, y, ch) + offset[ch];
    }
  }
  add_gaussian_noise(out, 0.02, rng);
  clip(out);
  return out;
}

ImageBuffer apply_attack(const ImageBuffer& img, const AttackConfig& cfg) {
  if (img.width == 0 || img.height == 0) throw Error(Errc::invalid_argument, "empty image");
  ImageBuffer out;
  switch (cfg.kind) {
    case AttackKind::cropout: out = cropout(img, cfg.strength, cfg.seed); break;
    case AttackKind::rescale: out = rescale(img, cfg.strength); break;
    case AttackKind::contrast:
      out = img;
      for (auto& v : out.pixels) v = static_cast<float>((v - 0.5) * cfg.strength + 0.5);
      break;
    case AttackKind::brightness:
      out = img;
      for (auto& v : out.pixels) v = static_cast<float>(v * cfg.strength);
      break;
    case AttackKind::gaussian_noise: {
      out = img;
      Rng rng(cfg.seed);
      add_gaussian_noise(out, cfg.strength, rng);
      break;
    }
    case AttackKind::salt_pepper: out = salt_pepper(img, cfg.strength, cfg.seed); break;
    case AttackKind::jpeg: out = imaging::jpeg_round_trip(img, static_cast<int>(cfg.strength)); break;
    case AttackKind::rotation: out = rotate(img, cfg.strength); break;
    case AttackKind::surrogate_edit: out = surrogate_edit(img, cfg.seed); break;
  }
  clip(out);
  return out;
}

std::vector<AttackConfig> attack_matrix(std::uint64_t seed) {
  return {
      {AttackKind::cropout, 0.5, seed},        {AttackKind::rescale, 0.5, seed},
      {AttackKind::contrast, 0.5, seed},       {AttackKind::contrast, 2.0, seed},
      {AttackKind::brightness, 0.5, seed},     {AttackKind::brightness, 2.0, seed},
      {AttackKind::gaussian_noise, 0.10, seed}, {AttackKind::salt_pepper, 0.01, seed},
      {AttackKind::salt_pepper, 0.03, seed},   {AttackKind::jpeg, 90, seed},
      {AttackKind::jpeg, 50, seed},            {AttackKind::rotation, 3, seed},
      {AttackKind::rotation, 5, seed},
  };
}

}  // namespace relzero::perturb
