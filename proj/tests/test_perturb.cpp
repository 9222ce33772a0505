#include <gtest/gtest.h>

#include <cmath>

#include "relzero/error.hpp"
#include "relzero/perturb.hpp"
#include "relzero/rng.hpp"
#include "synthetic_corpus.hpp"

namespace {

using namespace relzero;
using namespace relzero::perturb;
using imaging::ImageBuffer;

ImageBuffer random_image(std::uint64_t seed, int w = 64, int h = 48) {
  Rng rng(seed);
  ImageBuffer img(w, h);
  for (auto& v : img.pixels) v = static_cast<float>(rng.uniform());
  return img;
}

bool in_unit_range(const ImageBuffer& img) {
  for (float v : img.pixels)
    if (!(v >= 0.0f && v <= 1.0f)) return false;
  return true;
}

TEST(Perturb, BrightnessOneIsIdentity) {
  const auto img = random_image(1);
  EXPECT_EQ(apply_attack(img, {AttackKind::brightness, 1.0}), img);
}

TEST(Perturb, ContrastFixesMidGray) {
  const ImageBuffer gray(16, 16, 0.5f);
  for (double c : {0.5, 1.3, 2.0}) EXPECT_EQ(apply_attack(gray, {AttackKind::contrast, c}), gray);
}

TEST(Perturb, ContrastAndBrightnessFormulas) {
  ImageBuffer img(1, 1);
  img.pixels = {0.1f, 0.6f, 0.3f};
  const auto c = apply_attack(img, {AttackKind::contrast, 2.0});
  EXPECT_NEAR(c.pixels[0], 0.0f, 1e-6);  // (0.1-0.5)*2+0.5 = -0.3, clipped
  EXPECT_NEAR(c.pixels[1], 0.7f, 1e-6);
  EXPECT_NEAR(c.pixels[2], 0.1f, 1e-6);
  const auto b = apply_attack(img, {AttackKind::brightness, 2.0});
  EXPECT_NEAR(b.pixels[0], 0.2f, 1e-6);
  EXPECT_EQ(b.pixels[1], 1.0f);
  EXPECT_NEAR(b.pixels[2], 0.6f, 1e-6);
}

TEST(Perturb, CropoutBlackPixelCount) {
  const ImageBuffer white(224, 224, 1.0f);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto out = apply_attack(white, {AttackKind::cropout, 0.5, seed});
    long black = 0;
    for (int y = 0; y < 224; ++y)
      for (int x = 0; x < 224; ++x)
        if (out.at(x, y, 0) == 0.0f) ++black;
    const long target = static_cast<long>(std::ceil(0.5 * 224 * 224));
    EXPECT_GE(black, target);
    EXPECT_LT(black - target, 224);  // overshoot below one row of the rectangle
  }
}

TEST(Perturb, StochasticKindsAreSeeded) {
  const auto img = random_image(2);
  for (const auto& kind : {AttackKind::cropout, AttackKind::gaussian_noise, AttackKind::salt_pepper}) {
    const double s = kind == AttackKind::cropout ? 0.5 : 0.05;
    EXPECT_EQ(apply_attack(img, {kind, s, 9}), apply_attack(img, {kind, s, 9}));
    EXPECT_NE(apply_attack(img, {kind, s, 9}), apply_attack(img, {kind, s, 10}));
  }
  EXPECT_EQ(surrogate_edit(img, 4), surrogate_edit(img, 4));
  EXPECT_NE(surrogate_edit(img, 4), surrogate_edit(img, 5));
}

TEST(Perturb, SaltPepperTouchesWholePixels) {
  const ImageBuffer gray(100, 100, 0.5f);
  const auto out = apply_attack(gray, {AttackKind::salt_pepper, 0.03, 1});
  int hit = 0;
  for (int y = 0; y < 100; ++y)
    for (int x = 0; x < 100; ++x) {
      if (out.at(x, y, 0) == 0.5f) continue;
      ++hit;
      EXPECT_TRUE(out.at(x, y, 0) == 0.0f || out.at(x, y, 0) == 1.0f);
      EXPECT_EQ(out.at(x, y, 0), out.at(x, y, 1));
      EXPECT_EQ(out.at(x, y, 0), out.at(x, y, 2));
    }
  EXPECT_GT(hit, 200);
  EXPECT_LT(hit, 400);
}

TEST(Perturb, GaussianNoiseStatistics) {
  const ImageBuffer gray(128, 128, 0.5f);
  const auto out = apply_attack(gray, {AttackKind::gaussian_noise, 0.1, 3});
  double sum = 0.0, sq = 0.0;
  for (float v : out.pixels) {
    sum += v - 0.5;
    sq += (v - 0.5) * (v - 0.5);
  }
  const double n = static_cast<double>(out.pixels.size());
  EXPECT_NEAR(sum / n, 0.0, 0.003);
  EXPECT_NEAR(std::sqrt(sq / n), 0.1, 0.003);
}

TEST(Perturb, RescaleKeepsConstantsAndSize) {
  const ImageBuffer gray(224, 224, 0.3f);
  const auto out = apply_attack(gray, {AttackKind::rescale, 0.5});
  EXPECT_EQ(out.width, 224);
  for (float v : out.pixels) EXPECT_NEAR(v, 0.3f, 1e-6);
}

TEST(Perturb, RotationKeepsCanvasAndFillsBlack) {
  const ImageBuffer white(64, 64, 1.0f);
  const auto out = apply_attack(white, {AttackKind::rotation, 5});
  EXPECT_EQ(out.width, 64);
  EXPECT_EQ(out.height, 64);
  EXPECT_LT(out.at(0, 0, 0), 0.5f);     // corner leaves the source
  EXPECT_NEAR(out.at(32, 32, 0), 1.0f, 1e-6);
  const auto zero = apply_attack(white, {AttackKind::rotation, 0});
  EXPECT_EQ(zero, white);
}

TEST(Perturb, JpegChangesPixelsButStaysClose) {
  const auto img = testkit::synthetic_image(5, 64, 64);
  auto mean_abs_error = [&](double quality) {
    const auto out = apply_attack(img, {AttackKind::jpeg, quality});
    EXPECT_NE(out, img);
    double err = 0.0;
    for (std::size_t n = 0; n < img.pixels.size(); ++n) err += std::abs(out.pixels[n] - img.pixels[n]);
    return err / img.pixels.size();
  };
  const double q90 = mean_abs_error(90);
  const double q50 = mean_abs_error(50);
  EXPECT_LT(q90, q50);
  EXPECT_LT(q50, 0.08);
}

TEST(Perturb, AllOutputsClippedAndSized) {
  const auto img = random_image(6);
  for (const auto& cfg : attack_matrix(7)) {
    const auto out = apply_attack(img, cfg);
    EXPECT_EQ(out.width, img.width) << cfg.label();
    EXPECT_EQ(out.height, img.height) << cfg.label();
    EXPECT_TRUE(in_unit_range(out)) << cfg.label();
  }
  EXPECT_TRUE(in_unit_range(surrogate_edit(img, 1)));
}

TEST(Perturb, SurrogateEditIsLocalAndMild) {
  const auto img = testkit::synthetic_image(8, 224, 224);
  const auto out = surrogate_edit(img, 12);
  // Outside the rewritten region only blur and faint noise apply.
  int large = 0;
  for (std::size_t n = 0; n < img.pixels.size(); ++n)
    if (std::abs(out.pixels[n] - img.pixels[n]) > 0.15f) ++large;
  const double fraction = static_cast<double>(large) / img.pixels.size();
  EXPECT_LT(fraction, 0.31);
}

TEST(Perturb, AttackMatrixEnumeratesGrid) {
  const auto m = attack_matrix();
  ASSERT_EQ(m.size(), 13u);
  std::vector<std::string> labels;
  for (const auto& a : m) labels.push_back(a.label());
  EXPECT_EQ(labels, (std::vector<std::string>{"cropout:0.5", "rescale:0.5", "contrast:0.5", "contrast:2",
                                              "brightness:0.5", "brightness:2", "gaussian:0.1", "sp:0.01",
                                              "sp:0.03", "jpeg:90", "jpeg:50", "rot:3", "rot:5"}));
}

TEST(Perturb, ParameterRanges) {
  EXPECT_THROW(AttackConfig(AttackKind::contrast, 2.5), Error);
  EXPECT_THROW(AttackConfig(AttackKind::brightness, 0.4), Error);
  EXPECT_THROW(AttackConfig(AttackKind::cropout, 0.0), Error);
  EXPECT_THROW(AttackConfig(AttackKind::jpeg, 0), Error);
  EXPECT_THROW(AttackConfig(AttackKind::jpeg, 90.5), Error);
  EXPECT_THROW(AttackConfig(AttackKind::salt_pepper, 1.5), Error);
  EXPECT_NO_THROW(AttackConfig(AttackKind::rotation, -5));
}

TEST(Perturb, ParseSpecs) {
  EXPECT_EQ(parse_attack("contrast:2.0"), AttackConfig(AttackKind::contrast, 2.0));
  EXPECT_EQ(parse_attack("sp:0.03", 5), AttackConfig(AttackKind::salt_pepper, 0.03, 5));
  EXPECT_EQ(parse_attack("sp:0.03:9", 5), AttackConfig(AttackKind::salt_pepper, 0.03, 9));
  EXPECT_EQ(parse_attack("rot:5"), AttackConfig(AttackKind::rotation, 5));
  EXPECT_EQ(parse_attack("surrogate:3"), AttackConfig(AttackKind::surrogate_edit, 0.0, 3));
  EXPECT_THROW(parse_attack("blur:1"), Error);
  EXPECT_THROW(parse_attack("contrast"), Error);
  EXPECT_THROW(parse_attack("contrast:x"), Error);
  EXPECT_THROW(parse_attack("contrast:3"), Error);
  EXPECT_THROW(parse_attack("sp:0.1:-"), Error);
}

}  // namespace
