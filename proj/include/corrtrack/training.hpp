#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "corrtrack/cf_layer.hpp"
#include "corrtrack/features.hpp"
#include "corrtrack/image.hpp"

namespace corrtrack {

struct LabelConfig {
  // Gaussian sigma as a fraction of the target size in feature cells.
  double bandwidth = 0.1;
};

struct OptimizerConfig {
  double learning_rate = 1e-5;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  std::size_t batch_size = 16;
  std::size_t epochs = 20;
  std::uint64_t seed = 1;

  void validate() const;
};

struct TrainConfig {
  OptimizerConfig optimizer;
  LabelConfig label;
  CfConfig cf;
  Architecture arch = Architecture::Conv1;
  double padding = 1.5;
  std::size_t input_size = 125;
  bool cosine_window = true;
  // Uniform translation jitter of the search crop, in feature cells. 0 = off.
  int jitter = 0;
  std::size_t max_pairs = 0;  // 0 = use every sampled pair
  // GEMM precision of the feature network; the CF layer is always double.
  Precision precision = Precision::Single;

  void validate() const;
};

/// Parses `key = value` lines. Blank lines and lines starting with '#' are
/// ignored; unknown keys and malformed values throw std::invalid_argument
/// naming the line.
TrainConfig parse_train_config(const std::string& text);
TrainConfig load_train_config(const std::string& path);

/// y(u, v) = exp(-(du^2 + dv^2) / (2 sigma^2)) with du, dv the wrapped
/// distances to the center cell (M / 2, N / 2).
RealPlane gaussian_label(std::size_t rows, std::size_t cols, double sigma);

/// bandwidth * sqrt(target_w * target_h) with the target spanning
/// input_size / padding cells on each side.
double label_sigma(const TrainConfig& cfg);

/// Outer product of raised-cosine windows, nonzero at the borders.
RealPlane hann_window(std::size_t rows, std::size_t cols);
/// Multiplies every channel by `window`.
FeatureMap apply_window(const FeatureMap& features, const RealPlane& window);

struct PairSpec {
  std::size_t sequence = 0;
  std::size_t first = 0;
  std::size_t second = 0;
  bool operator==(const PairSpec&) const = default;
};

inline constexpr std::size_t kMaxPairGap = 10;

/// Every ordered pair (i, j) with 1 <= j - i <= 10, in (sequence, i, j) order.
std::vector<PairSpec> sample_pairs(std::span<const std::size_t> sequence_lengths);

/// v <- momentum * v - lr * (grad + weight_decay * param); param <- param + v.
/// A non-finite gradient aborts the step before anything is modified.
void sgd_step(std::span<double> params, std::span<const double> grads, std::span<double> velocity,
              const OptimizerConfig& cfg);

struct Clip {
  std::vector<Image> frames;
  std::vector<BoundingBox> boxes;
};

struct SyntheticConfig {
  std::size_t frame_size = 128;
  std::size_t length = 20;
  double min_object = 28.0;
  double max_object = 44.0;
  double max_step_fraction = 0.1;  // per-frame displacement bound, fraction of min(w, h)
  bool scale_drift = true;
  double pixel_noise = 0.02;
};

std::vector<Clip> make_synthetic_dataset(std::size_t count, std::uint64_t seed,
                                         const SyntheticConfig& cfg = {});

/// Per-channel mean of every pixel of every frame.
std::array<double, 3> dataset_mean(std::span<const Clip> clips);

/// Everything the Siamese graph needs that does not depend on the pair.
struct PairGraph {
  RealPlane label;
  RealPlane window;
  CfConfig cf;
  Precision precision = Precision::Double;
  bool image_grads = false;  // also return gradients w.r.t. both input images
};

PairGraph make_pair_graph(const TrainConfig& cfg);

struct PairResult {
  double loss = 0.0;
  NetworkParams grads;
  FeatureMap template_grad;  // d loss / d normalized template image, if requested
  FeatureMap search_grad;    // d loss / d normalized search image, if requested
};

/// Forward and backward through image -> features -> window -> CF layer ->
/// loss for one (template, search) pair of normalized images. Parameter
/// gradients of the two branches are summed.
PairResult pair_gradient(const NetworkParams& model, const FeatureMap& template_image,
                         const FeatureMap& search_image, const RealPlane& target,
                         const PairGraph& graph);
double pair_loss(const NetworkParams& model, const FeatureMap& template_image,
                 const FeatureMap& search_image, const RealPlane& target, const PairGraph& graph);

struct TrainingSample {
  FeatureMap template_image;
  FeatureMap search_image;
  RealPlane target;
};

TrainingSample make_sample(const NetworkParams& model, std::span<const Clip> clips,
                           const PairSpec& pair, const TrainConfig& cfg, const PairGraph& graph,
                           std::mt19937_64& rng);

struct SgdState {
  std::vector<double> velocity;
};

/// One pass over `pairs` in a seeded random order. Returns the mean per-pair
/// loss, measured before each mini-batch update.
double train_epoch(NetworkParams& model, SgdState& state, std::span<const Clip> clips,
                   std::span<const PairSpec> pairs, const TrainConfig& cfg, std::mt19937_64& rng);

/// Mean per-pair loss without updating anything.
double evaluate_loss(const NetworkParams& model, std::span<const Clip> clips,
                     std::span<const PairSpec> pairs, const TrainConfig& cfg);

struct TrainReport {
  std::vector<double> epoch_losses;
};

/// Full run: sets the model's input mean from the data, samples pairs
/// (optionally subsampled to cfg.max_pairs with the optimizer seed) and runs
/// cfg.optimizer.epochs epochs. `on_epoch` is called after every epoch.
TrainReport train_model(NetworkParams& model, std::span<const Clip> clips, const TrainConfig& cfg,
                        const std::function<void(std::size_t, double)>& on_epoch = {});

std::vector<PairSpec> select_pairs(std::span<const Clip> clips, const TrainConfig& cfg);

}  // namespace corrtrack
