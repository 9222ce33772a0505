#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace relzero::cli {

/// Settings shared by all commands. Defaults give 224x224 images, 16x16
/// patches (P = 196) and K = 50.
struct RunConfig {
  int image_side = 224;
  int patch_side = 16;
  int k = 50;
  std::string feature_source = "mean_rgb";
  std::filesystem::path checkpoint = "relzero.rzmlp";
  std::filesystem::path registry = "registry";
  std::string key;  // "p,q,T"; falls back to $RELZERO_KEY
  std::string calib = "binomial";
  double fpr = 1e-3;
  std::uint64_t seed = 0;

  int epochs = 50;
  double learning_rate = 1e-3;
  int batch_size = 1024;
  std::vector<int> hidden = {128, 128};
  double pos_weight = 0.0;

  int patch_count() const;
};

/// Applies "key=value" lines ('#' starts a comment) on top of cfg.
void apply_config_text(RunConfig& cfg, const std::string& text);
void apply_config_file(RunConfig& cfg, const std::filesystem::path& path);

/// Exit codes: 0 success / authenticated, 1 rejected, 2 operational error.
int run(int argc, char** argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace relzero::cli
