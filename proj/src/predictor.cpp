#include "relzero/predictor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "relzero/error.hpp"
#include "relzero/kernels.hpp"
#include "relzero/relational.hpp"
#include "relzero/rng.hpp"

namespace relzero::predictor {

namespace {

constexpr std::size_t kChunkPairs = 128;

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double pair_distance(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    const double diff = b[d] - a[d];
    acc = acc + diff * diff;
  }
  return std::sqrt(acc);
}

// Forward/backward over a block of columns. Column t < n scores (a_t, b_t) and
// column n + t scores (b_t, a_t); the pair logit is their mean.
class Evaluator {
 public:
  explicit Evaluator(const PredictorModel& model) : model_(model), kernels_(kernels::active()) {}

  void load(std::span<const std::span<const double>> first, std::span<const std::span<const double>> second) {
    const std::size_t n = first.size();
    cols_ = 2 * n;
    const auto dim = static_cast<std::size_t>(model_.dim());
    const std::size_t in = 2 * dim + 1;
    const auto& layers = model_.layers();
    acts_.resize(layers.size());
    pre_.resize(layers.size());
    acts_[0].resize(in * cols_);
    double* x = acts_[0].data();
    for (std::size_t t = 0; t < n; ++t) {
      const auto a = first[t];
      const auto b = second[t];
      if (a.size() != dim || b.size() != dim) throw Error(Errc::dimension_mismatch, "feature length != model D");
      const double dist = pair_distance(a, b);
      for (std::size_t d = 0; d < dim; ++d) {
        x[d * cols_ + t] = a[d];
        x[(dim + d) * cols_ + t] = b[d];
        x[d * cols_ + n + t] = b[d];
        x[(dim + d) * cols_ + n + t] = a[d];
      }
      x[2 * dim * cols_ + t] = dist;
      x[2 * dim * cols_ + n + t] = dist;
    }
  }

  // Returns the mean logit per pair.
  void forward(std::vector<double>& mean_logits) {
    const auto& layers = model_.layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto& layer = layers[l];
      pre_[l].resize(static_cast<std::size_t>(layer.out) * cols_);
      kernels_.dense_forward(layer.weights.data(), layer.bias.data(), layer.out, layer.in, acts_[l].data(), cols_,
                             pre_[l].data());
      if (l + 1 < layers.size()) {
        acts_[l + 1].resize(pre_[l].size());
        for (std::size_t e = 0; e < pre_[l].size(); ++e) acts_[l + 1][e] = std::max(0.0, pre_[l][e]);
      }
    }
    const std::size_t n = cols_ / 2;
    const auto& logits = pre_.back();
    mean_logits.resize(n);
    for (std::size_t t = 0; t < n; ++t) mean_logits[t] = 0.5 * (logits[t] + logits[n + t]);
  }

  // d_mean[t] = d(loss)/d(mean logit of pair t); accumulates into grad.
  void backward(std::span<const double> d_mean, ModelGradient& grad) {
    const auto& layers = model_.layers();
    const std::size_t n = cols_ / 2;
    std::vector<double> dy(cols_);
    for (std::size_t t = 0; t < n; ++t) dy[t] = dy[n + t] = 0.5 * d_mean[t];
    std::vector<double> xt;
    std::vector<double> dx;
    for (std::size_t l = layers.size(); l-- > 0;) {
      const auto& layer = layers[l];
      const auto in = static_cast<std::size_t>(layer.in);
      const auto out = static_cast<std::size_t>(layer.out);
      const auto& x = acts_[l];
      xt.resize(cols_ * in);
      for (std::size_t c = 0; c < in; ++c) {
        for (std::size_t b = 0; b < cols_; ++b) xt[b * in + c] = x[c * cols_ + b];
      }
      kernels_.dense_grad_weights(dy.data(), xt.data(), out, in, cols_, grad.weights[l].data());
      for (std::size_t o = 0; o < out; ++o) {
        double acc = grad.bias[l][o];
        for (std::size_t b = 0; b < cols_; ++b) acc = acc + dy[o * cols_ + b];
        grad.bias[l][o] = acc;
      }
      if (l == 0) break;
      dx.resize(in * cols_);
      kernels_.dense_backward_input(layer.weights.data(), out, in, dy.data(), cols_, dx.data());
      const auto& z = pre_[l - 1];
      for (std::size_t e = 0; e < dx.size(); ++e) {
        if (!(z[e] > 0.0)) dx[e] = 0.0;
      }
      dy.swap(dx);
    }
  }

 private:
  const PredictorModel& model_;
  const kernels::KernelSet& kernels_;
  std::size_t cols_ = 0;
  std::vector<std::vector<double>> acts_;  // input of layer l, in x cols
  std::vector<std::vector<double>> pre_;   // output of layer l before activation
};

struct SampleLoss {
  double loss;
  double d_logit;
};

SampleLoss weighted_bce(double mean_logit, bool positive, double pos_weight) {
  const double p = sigmoid(mean_logit);
  const double pc = std::clamp(p, kProbEpsilon, 1.0 - kProbEpsilon);
  const bool clamped = pc != p;
  if (positive) return {-pos_weight * std::log(pc), clamped ? 0.0 : -pos_weight * (1.0 - p)};
  return {-std::log(1.0 - pc), clamped ? 0.0 : p};
}

}  // namespace

// ---- model -------------------------------------------------------------------

PredictorModel::PredictorModel(int dim, std::vector<DenseLayer> layers) : dim_(dim), layers_(std::move(layers)) {
  if (dim_ <= 0) throw Error(Errc::invalid_argument, "model feature dimension must be positive");
  if (layers_.empty()) throw Error(Errc::invalid_argument, "model needs at least one layer");
  int expected_in = input_width();
  for (const auto& layer : layers_) {
    if (layer.in != expected_in || layer.out <= 0) throw Error(Errc::dimension_mismatch, "model layers do not chain");
    if (layer.weights.size() != static_cast<std::size_t>(layer.in) * layer.out ||
        layer.bias.size() != static_cast<std::size_t>(layer.out)) {
      throw Error(Errc::dimension_mismatch, "layer parameter count mismatch");
    }
    for (double v : layer.weights) {
      if (!std::isfinite(v)) throw Error(Errc::malformed, "non-finite model parameter");
    }
    for (double v : layer.bias) {
      if (!std::isfinite(v)) throw Error(Errc::malformed, "non-finite model parameter");
    }
    expected_in = layer.out;
  }
  if (layers_.back().out != 1) throw Error(Errc::dimension_mismatch, "model must emit a single logit");
}

PredictorModel PredictorModel::initialize(int dim, const std::vector<int>& hidden, std::uint64_t seed,
                                          bool zero_final_layer) {
  Rng rng(seed);
  std::vector<DenseLayer> layers;
  int in = 2 * dim + 1;
  for (std::size_t l = 0; l <= hidden.size(); ++l) {
    const bool last = l == hidden.size();
    const int out = last ? 1 : hidden[l];
    if (out <= 0) throw Error(Errc::invalid_argument, "hidden layer widths must be positive");
    DenseLayer layer{in, out, std::vector<double>(static_cast<std::size_t>(in) * out), std::vector<double>(out, 0.0)};
    const double scale = last ? std::sqrt(1.0 / in) : std::sqrt(2.0 / in);
    for (auto& w : layer.weights) w = (last && zero_final_layer) ? 0.0 : rng.normal(0.0, scale);
    layers.push_back(std::move(layer));
    in = out;
  }
  return PredictorModel(dim, std::move(layers));
}

std::vector<int> PredictorModel::hidden_sizes() const {
  std::vector<int> out;
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l) out.push_back(layers_[l].out);
  return out;
}

std::size_t PredictorModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weights.size() + l.bias.size();
  return n;
}

ModelGradient ModelGradient::zeros_like(const PredictorModel& model) {
  ModelGradient g;
  for (const auto& l : model.layers()) {
    g.weights.emplace_back(l.weights.size(), 0.0);
    g.bias.emplace_back(l.bias.size(), 0.0);
  }
  return g;
}

// ---- inference -----------------------------------------------------------------

double predict_pair(const PredictorModel& model, std::span<const double> fi, std::span<const double> fj) {
  if (fi.size() != static_cast<std::size_t>(model.dim()) || fj.size() != fi.size()) {
    throw Error(Errc::dimension_mismatch, "predict_pair: feature length != model D");
  }
  Evaluator eval(model);
  const std::span<const double> a[1] = {fi};
  const std::span<const double> b[1] = {fj};
  eval.load(a, b);
  std::vector<double> logit;
  eval.forward(logit);
  return sigmoid(logit[0]);
}

std::vector<double> predict_all_logits(const PredictorModel& model, const imaging::PatchFeatureMap& fm) {
  if (fm.dim() != model.dim()) throw Error(Errc::dimension_mismatch, "feature map D != model D");
  const int patches = fm.patch_count();
  const auto total = static_cast<std::size_t>(pair_count(patches));
  std::vector<double> out;
  out.reserve(total);
  Evaluator eval(model);
  std::vector<std::span<const double>> first, second;
  std::vector<double> logits;
  auto flush = [&] {
    if (first.empty()) return;
    eval.load(first, second);
    eval.forward(logits);
    out.insert(out.end(), logits.begin(), logits.end());
    first.clear();
    second.clear();
  };
  for (int i = 0; i < patches; ++i) {
    for (int j = i + 1; j < patches; ++j) {
      first.push_back(fm.feature(i));
      second.push_back(fm.feature(j));
      if (first.size() == kChunkPairs) flush();
    }
  }
  flush();
  return out;
}

std::vector<double> predict_all(const PredictorModel& model, const imaging::PatchFeatureMap& fm) {
  auto values = predict_all_logits(model, fm);
  for (auto& v : values) v = sigmoid(v);
  return values;
}

PairIndexSet extract_watermark(const PredictorModel& model, const imaging::PatchFeatureMap& fm, std::int64_t k) {
  const auto logits = predict_all_logits(model, fm);
  return PairIndexSet::from_ranks(fm.patch_count(), top_k_ranks(logits, k));
}

// ---- loss ------------------------------------------------------------------------

double bce_loss(std::span<const double> probs, const PairIndexSet& positives, double pos_weight) {
  const auto total = pair_count(positives.patch_count());
  if (static_cast<std::int64_t>(probs.size()) != total || total == 0) {
    throw Error(Errc::dimension_mismatch, "bce_loss: probabilities must cover C(P,2) pairs");
  }
  std::vector<unsigned char> label(probs.size(), 0);
  for (auto r : positives.ranks()) label[static_cast<std::size_t>(r)] = 1;
  double sum = 0.0;
  for (std::size_t r = 0; r < probs.size(); ++r) {
    const double p = std::clamp(probs[r], kProbEpsilon, 1.0 - kProbEpsilon);
    sum += label[r] ? -pos_weight * std::log(p) : -std::log(1.0 - p);
  }
  return sum / static_cast<double>(total);
}

double batch_loss(const PredictorModel& model, std::span<const LabeledPair> batch, double pos_weight,
                  ModelGradient* grad) {
  if (batch.empty()) return 0.0;
  Evaluator eval(model);
  const double inv = 1.0 / static_cast<double>(batch.size());
  double sum = 0.0;
  std::vector<std::span<const double>> first, second;
  std::vector<double> logits, d_mean;
  for (std::size_t start = 0; start < batch.size(); start += kChunkPairs) {
    const std::size_t stop = std::min(batch.size(), start + kChunkPairs);
    first.clear();
    second.clear();
    for (std::size_t t = start; t < stop; ++t) {
      first.push_back(batch[t].fi);
      second.push_back(batch[t].fj);
    }
    eval.load(first, second);
    eval.forward(logits);
    d_mean.resize(logits.size());
    for (std::size_t t = 0; t < logits.size(); ++t) {
      const auto s = weighted_bce(logits[t], batch[start + t].positive, pos_weight);
      sum += s.loss;
      d_mean[t] = s.d_logit * inv;
    }
    if (grad) eval.backward(d_mean, *grad);
  }
  return sum * inv;
}

// ---- training --------------------------------------------------------------------

namespace {

struct Adam {
  std::vector<std::vector<double>> m, v;
  long step = 0;

  explicit Adam(const PredictorModel& model) {
    for (const auto& l : model.layers()) {
      m.emplace_back(l.weights.size() + l.bias.size(), 0.0);
      v.emplace_back(l.weights.size() + l.bias.size(), 0.0);
    }
  }

  void apply(PredictorModel& model, const ModelGradient& g, const TrainConfig& cfg) {
    ++step;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
    auto& layers = model.mutable_layers();
    for (std::size_t l = 0; l < layers.size(); ++l) {
      auto update = [&](double& param, double grad, std::size_t idx) {
        m[l][idx] = cfg.beta1 * m[l][idx] + (1.0 - cfg.beta1) * grad;
        v[l][idx] = cfg.beta2 * v[l][idx] + (1.0 - cfg.beta2) * grad * grad;
        param -= cfg.learning_rate * (m[l][idx] / c1) / (std::sqrt(v[l][idx] / c2) + cfg.adam_epsilon);
      };
      const std::size_t nw = layers[l].weights.size();
      for (std::size_t e = 0; e < nw; ++e) update(layers[l].weights[e], g.weights[l][e], e);
      for (std::size_t e = 0; e < layers[l].bias.size(); ++e) update(layers[l].bias[e], g.bias[l][e], nw + e);
    }
  }
};

}  // namespace

TrainResult train(std::span<const TrainingImage> images, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  if (images.empty()) throw Error(Errc::invalid_argument, "empty training set");
  if (cfg.learning_rate <= 0 || cfg.epochs < 0 || cfg.batch_size <= 0 || cfg.k <= 0) {
    throw Error(Errc::invalid_argument, "training hyperparameters must be positive");
  }
  const int dim = images[0].original.dim();
  std::vector<PairIndexSet> truth;
  std::vector<std::vector<Pair>> all_pairs;
  std::vector<std::vector<unsigned char>> labels;
  std::int64_t total_pairs = 0, total_positive = 0;
  for (const auto& img : images) {
    if (img.original.dim() != dim) throw Error(Errc::dimension_mismatch, "inconsistent feature dimension");
    truth.push_back(relational::make_ground_truth(img.original, img.edited, cfg.k));
    const int patches = img.original.patch_count();
    std::vector<Pair> pairs;
    pairs.reserve(static_cast<std::size_t>(pair_count(patches)));
    for (int i = 0; i < patches; ++i) {
      for (int j = i + 1; j < patches; ++j) pairs.push_back({i, j});
    }
    std::vector<unsigned char> lab(pairs.size(), 0);
    for (auto r : truth.back().ranks()) lab[static_cast<std::size_t>(r)] = 1;
    total_pairs += static_cast<std::int64_t>(pairs.size());
    total_positive += static_cast<std::int64_t>(truth.back().size());
    all_pairs.push_back(std::move(pairs));
    labels.push_back(std::move(lab));
  }
  const double pos_weight = cfg.pos_weight > 0
                                ? cfg.pos_weight
                                : static_cast<double>(total_pairs - total_positive) / static_cast<double>(total_positive);

  PredictorModel model = PredictorModel::initialize(dim, cfg.hidden, mix_seed(cfg.seed, 1));

  auto pooled_loss = [&](const PredictorModel& m) {
    double sum = 0.0;
    for (std::size_t n = 0; n < images.size(); ++n) {
      const auto probs = predict_all(m, images[n].original);
      sum += bce_loss(probs, truth[n], pos_weight) * static_cast<double>(probs.size());
    }
    return sum / static_cast<double>(total_pairs);
  };

  TrainResult result{model, {}, 0, pos_weight};
  result.epoch_loss.push_back(pooled_loss(model));
  if (!std::isfinite(result.epoch_loss.back())) {
    throw Error(Errc::divergence, "training diverged (non-finite loss) at epoch 0");
  }
  if (on_epoch) on_epoch(0, result.epoch_loss.back());

  struct Ref {
    std::uint32_t image;
    std::uint32_t rank;
  };
  std::vector<Ref> order;
  order.reserve(static_cast<std::size_t>(total_pairs));
  for (std::size_t n = 0; n < images.size(); ++n) {
    for (std::size_t r = 0; r < all_pairs[n].size(); ++r) {
      order.push_back({static_cast<std::uint32_t>(n), static_cast<std::uint32_t>(r)});
    }
  }

  Rng shuffler(mix_seed(cfg.seed, 2));
  Adam adam(model);
  std::vector<LabeledPair> batch;
  const auto batch_size = static_cast<std::size_t>(cfg.batch_size);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffler.shuffle(std::span<Ref>(order));
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t stop = std::min(order.size(), start + batch_size);
      batch.clear();
      for (std::size_t t = start; t < stop; ++t) {
        const auto& ref = order[t];
        const auto& pair = all_pairs[ref.image][ref.rank];
        const auto& fm = images[ref.image].original;
        batch.push_back({fm.feature(pair.i), fm.feature(pair.j), labels[ref.image][ref.rank] != 0});
      }
      auto grad = ModelGradient::zeros_like(model);
      const double loss = batch_loss(model, batch, pos_weight, &grad);
      if (!std::isfinite(loss)) {
        throw Error(Errc::divergence, "training diverged (non-finite loss) at epoch " + std::to_string(epoch));
      }
      adam.apply(model, grad, cfg);
    }
    const double loss = pooled_loss(model);
    if (!std::isfinite(loss)) {
      throw Error(Errc::divergence, "training diverged (non-finite loss) at epoch " + std::to_string(epoch));
    }
    result.epoch_loss.push_back(loss);
    if (loss < result.epoch_loss[result.best_epoch]) {
      result.best_epoch = epoch;
      result.model = model;
    }
    if (on_epoch) on_epoch(epoch, loss);
  }
  return result;
}

}  // namespace relzero::predictor
