#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "relzero/imaging.hpp"
#include "relzero/pairs.hpp"

namespace relzero::predictor {

struct DenseLayer {
  int in = 0;
  int out = 0;
  std::vector<double> weights;  // out x in, row-major
  std::vector<double> bias;     // out

  bool operator==(const DenseLayer&) const = default;
};

/// Pair scorer psi: (f_i ⊕ f_j ⊕ ||f_i - f_j||) -> logit, ReLU between layers.
class PredictorModel {
 public:
  static constexpr const char* kVersion = "RZMLP1";

  PredictorModel() = default;
  /// Validates chaining (first layer takes 2D+1 inputs, last emits one logit)
  /// and finiteness of all parameters.
  PredictorModel(int dim, std::vector<DenseLayer> layers);

  /// He-initialized network; zero_final_layer makes every output logit 0.
  static PredictorModel initialize(int dim, const std::vector<int>& hidden, std::uint64_t seed,
                                   bool zero_final_layer = false);

  int dim() const { return dim_; }
  int input_width() const { return 2 * dim_ + 1; }
  std::vector<int> hidden_sizes() const;
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& mutable_layers() { return layers_; }
  std::size_t parameter_count() const;

  bool operator==(const PredictorModel&) const = default;

 private:
  int dim_ = 0;
  std::vector<DenseLayer> layers_;
};

/// Same shape as a model's layers; holds d(loss)/d(parameter).
struct ModelGradient {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> bias;

  static ModelGradient zeros_like(const PredictorModel& model);
};

/// Symmetrized score in (0, 1): sigmoid of the mean logit over both input orders,
/// so predict_pair(a, b) == predict_pair(b, a) exactly.
double predict_pair(const PredictorModel& model, std::span<const double> fi, std::span<const double> fj);

/// Mean logit over both orders for every canonical pair, indexed by pair rank.
std::vector<double> predict_all_logits(const PredictorModel& model, const imaging::PatchFeatureMap& fm);

/// Probabilities for every canonical pair, indexed by pair rank.
std::vector<double> predict_all(const PredictorModel& model, const imaging::PatchFeatureMap& fm);

inline constexpr double kProbEpsilon = 1e-7;

/// Mean over canonical pairs of -[w*y*log p + (1-y)*log(1-p)], with p clamped
/// to [eps, 1-eps] and w = pos_weight on positives.
double bce_loss(std::span<const double> probs, const PairIndexSet& positives, double pos_weight);

struct LabeledPair {
  std::span<const double> fi;
  std::span<const double> fj;
  bool positive = false;
};

/// Mean weighted BCE over the batch; accumulates its gradient into grad when non-null.
double batch_loss(const PredictorModel& model, std::span<const LabeledPair> batch, double pos_weight,
                  ModelGradient* grad);

struct TrainConfig {
  double learning_rate = 1e-3;
  int epochs = 50;
  int batch_size = 1024;  // pairs
  std::uint64_t seed = 0;
  int k = 50;
  /// <= 0 selects (#pairs - K) / K.
  double pos_weight = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::vector<int> hidden = {128, 128};
};

struct TrainingImage {
  imaging::PatchFeatureMap original;
  imaging::PatchFeatureMap edited;
};

struct TrainResult {
  PredictorModel model;
  /// Pooled BCE over all training pairs; entry 0 is the initial model.
  std::vector<double> epoch_loss;
  int best_epoch = 0;
  double pos_weight = 1.0;
};

using EpochCallback = std::function<void(int epoch, double loss)>;

/// Adam on weighted BCE against per-image top-K ground truth. Returns the
/// parameters with the lowest recorded epoch loss. Deterministic given cfg.seed.
TrainResult train(std::span<const TrainingImage> images, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

/// Top-K pairs by predicted score; ties go to the smaller canonical index.
PairIndexSet extract_watermark(const PredictorModel& model, const imaging::PatchFeatureMap& fm,
                               std::int64_t k);

/// Versioned little-endian checkpoint ("RZMLP1" ... CRC-32).
std::vector<unsigned char> serialize(const PredictorModel& model);
PredictorModel deserialize(std::span<const unsigned char> bytes);
void save_checkpoint(const PredictorModel& model, const std::filesystem::path& path);
PredictorModel load_checkpoint(const std::filesystem::path& path);

}  // namespace relzero::predictor
