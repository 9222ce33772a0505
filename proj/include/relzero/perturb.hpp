#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "relzero/imaging.hpp"

namespace relzero::perturb {

enum class AttackKind {
  cropout,
  rescale,
  contrast,
  brightness,
  gaussian_noise,
  salt_pepper,
  jpeg,
  rotation,
  surrogate_edit,
};

// Parameter ranges (strength):
//   cropout         area fraction in (0, 1]
//   rescale         factor in (0, 1]
//   contrast        c in [0.5, 2.0], pixel <- (pixel - 0.5) * c + 0.5
//   brightness      b in [0.5, 2.0], pixel <- pixel * b
//   gaussian_noise  std in [0, 1]
//   salt_pepper     probability in [0, 1]
//   jpeg            quality in [1, 100] (integer)
//   rotation        degrees in [-180, 180]
//   surrogate_edit  strength unused
struct AttackConfig {
  AttackKind kind = AttackKind::brightness;
  double strength = 1.0;
  std::uint64_t seed = 0;

  AttackConfig() = default;
  /// Throws Errc::out_of_range when strength is outside the kind's range.
  AttackConfig(AttackKind kind, double strength, std::uint64_t seed = 0);

  bool stochastic() const;
  /// "kind:param" form accepted by parse_attack.
  std::string label() const;

  bool operator==(const AttackConfig&) const = default;
};

/// Parses "kind:param[:seed]", e.g. "contrast:2.0", "sp:0.03", "rot:5",
/// "surrogate:7". The seed defaults to default_seed when omitted.
AttackConfig parse_attack(const std::string& spec, std::uint64_t default_seed = 0);

const char* kind_name(AttackKind kind);

/// Applies the attack; output has the input's dimensions and values clipped to [0, 1].
imaging::ImageBuffer apply_attack(const imaging::ImageBuffer& img, const AttackConfig& cfg);

/// Blur + noise + local region rewrite standing in for a VAE reconstruction.
imaging::ImageBuffer surrogate_edit(const imaging::ImageBuffer& img, std::uint64_t seed);

/// The 12-entry evaluation grid.
std::vector<AttackConfig> attack_matrix(std::uint64_t seed = 0);

}  // namespace relzero::perturb
