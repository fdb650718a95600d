#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "corrtrack/kernels.hpp"
#include "corrtrack/spectral.hpp"

namespace corrtrack {

enum class Architecture { Conv1, Conv1Dilation, Conv2 };

std::string_view architecture_name(Architecture a);
Architecture parse_architecture(std::string_view name);

struct ConvLayerParams {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  int dilation = 1;
  bool relu = false;
  std::vector<double> kernels;  // (ky, kx, in, out), out fastest
  std::vector<double> biases;

  kernels::ConvShape shape() const { return {in_channels, out_channels, dilation}; }
  void validate() const;
};

struct LrnParams {
  int window = 5;
  double kappa = 1.0;
  double alpha = 1e-4 / 5.0;
  double beta = 0.75;

  kernels::LrnShape shape() const { return {window, kappa, alpha, beta}; }
  void validate() const;
};

inline constexpr std::size_t kFeatureChannels = 32;

/// Parameters of the feature extractor. Also used, with identical layout, to
/// carry parameter gradients.
struct NetworkParams {
  Architecture arch = Architecture::Conv1;
  std::vector<ConvLayerParams> layers;
  LrnParams lrn;
  // Per-channel RGB mean subtracted from [0,1] pixels before the first layer.
  std::array<double, 3> input_mean{0.5, 0.5, 0.5};

  std::size_t parameter_count() const;
  /// Checks the layer sequence against the declared architecture.
  void validate() const;
  std::vector<double> flatten() const;
  void assign(std::span<const double> flat);
  NetworkParams zeros_like() const;
  std::uint64_t fingerprint() const;
};

/// Layer table for each architecture: (out channels, dilation, relu).
struct LayerSpec {
  std::size_t out_channels;
  int dilation;
  bool relu;
};
std::vector<LayerSpec> architecture_layers(Architecture a);

/// Zero-mean normal kernels with variance 2 / (fan_in + fan_out), zero
/// biases. Values are drawn in single precision so they survive a float32
/// model file unchanged.
NetworkParams init_network(Architecture a, std::uint64_t seed, const LrnParams& lrn = {});

struct FeatureTape {
  std::uint64_t params_fingerprint = 0;
  std::size_t layer_count = 0;
  std::vector<FeatureMap> conv_inputs;
  std::vector<FeatureMap> conv_outputs;  // after relu where applicable
};

struct NetForward {
  FeatureMap features;
  FeatureTape tape;
};

struct NetBackward {
  FeatureMap input_grad;
  NetworkParams param_grads;
};

/// Scales an RGB patch from [0,1] by subtracting the per-channel mean.
FeatureMap normalize_input(const FeatureMap& rgb, const NetworkParams& params);

using kernels::Precision;

FeatureMap conv2d(const FeatureMap& input, const ConvLayerParams& layer,
                  Precision precision = Precision::Double);
FeatureMap relu(const FeatureMap& input);
FeatureMap lrn(const FeatureMap& input, const LrnParams& p);

NetForward net_forward(const FeatureMap& image, const NetworkParams& params,
                       Precision precision = Precision::Double);
/// Forward pass without recording a tape.
FeatureMap net_features(const FeatureMap& image, const NetworkParams& params,
                        Precision precision = Precision::Double);
/// With input_grad = false the image gradient is skipped and left empty.
NetBackward net_backward(const FeatureMap& grad_features, const FeatureTape& tape,
                         const NetworkParams& params, Precision precision = Precision::Double,
                         bool input_grad = true);

}  // namespace corrtrack
