#include "corrtrack/features.hpp"

#include <cmath>
#include <cstring>
#include <random>
#include <stdexcept>

namespace corrtrack {

std::string_view architecture_name(Architecture a) {
  switch (a) {
    case Architecture::Conv1:
      return "conv1";
    case Architecture::Conv1Dilation:
      return "conv1-dilation";
    case Architecture::Conv2:
      return "conv2";
  }
  return "unknown";
}

Architecture parse_architecture(std::string_view name) {
  if (name == "conv1") return Architecture::Conv1;
  if (name == "conv1-dilation") return Architecture::Conv1Dilation;
  if (name == "conv2") return Architecture::Conv2;
  throw std::invalid_argument("unknown architecture '" + std::string(name) + "'");
}

std::vector<LayerSpec> architecture_layers(Architecture a) {
  switch (a) {
    case Architecture::Conv1:
      return {{64, 1, true}, {32, 1, false}};
    case Architecture::Conv1Dilation:
      return {{64, 1, true}, {32, 2, false}};
    case Architecture::Conv2:
      return {{64, 1, true}, {64, 1, true}, {128, 1, true}, {32, 1, false}};
  }
  throw std::invalid_argument("unknown architecture");
}

void ConvLayerParams::validate() const {
  if (dilation != 1 && dilation != 2) throw std::invalid_argument("conv layer: dilation must be 1 or 2");
  if (in_channels == 0 || out_channels == 0) throw std::invalid_argument("conv layer: empty");
  if (kernels.size() != 9 * in_channels * out_channels || biases.size() != out_channels) {
    throw std::invalid_argument("conv layer: tensor sizes do not match channel counts");
  }
}

void LrnParams::validate() const {
  if (window < 1 || window % 2 == 0) throw std::invalid_argument("LRN: window must be odd and >= 1");
  if (!(kappa > 0.0) || alpha < 0.0 || !(beta > 0.0)) {
    throw std::invalid_argument("LRN: requires kappa > 0, alpha >= 0, beta > 0");
  }
}

std::size_t NetworkParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.kernels.size() + l.biases.size();
  return n;
}

void NetworkParams::validate() const {
  const auto expected = architecture_layers(arch);
  if (layers.size() != expected.size()) {
    throw std::invalid_argument("network: " + std::string(architecture_name(arch)) + " expects " +
                                std::to_string(expected.size()) + " conv layers, got " +
                                std::to_string(layers.size()));
  }
  std::size_t in = 3;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    l.validate();
    if (l.in_channels != in || l.out_channels != expected[i].out_channels ||
        l.dilation != expected[i].dilation || l.relu != expected[i].relu) {
      throw std::invalid_argument("network: layer " + std::to_string(i) + " does not match " +
                                  std::string(architecture_name(arch)));
    }
    in = l.out_channels;
  }
  lrn.validate();
}

std::vector<double> NetworkParams::flatten() const {
  std::vector<double> flat;
  flat.reserve(parameter_count());
  for (const auto& l : layers) {
    flat.insert(flat.end(), l.kernels.begin(), l.kernels.end());
    flat.insert(flat.end(), l.biases.begin(), l.biases.end());
  }
  return flat;
}

void NetworkParams::assign(std::span<const double> flat) {
  if (flat.size() != parameter_count()) throw std::invalid_argument("network: flat size mismatch");
  std::size_t at = 0;
  for (auto& l : layers) {
    std::copy(flat.begin() + at, flat.begin() + at + l.kernels.size(), l.kernels.begin());
    at += l.kernels.size();
    std::copy(flat.begin() + at, flat.begin() + at + l.biases.size(), l.biases.begin());
    at += l.biases.size();
  }
}

NetworkParams NetworkParams::zeros_like() const {
  NetworkParams z = *this;
  for (auto& l : z.layers) {
    std::fill(l.kernels.begin(), l.kernels.end(), 0.0);
    std::fill(l.biases.begin(), l.biases.end(), 0.0);
  }
  return z;
}

std::uint64_t NetworkParams::fingerprint() const {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ull;
    }
  };
  const int a = static_cast<int>(arch);
  mix(&a, sizeof a);
  for (const auto& l : layers) {
    mix(l.kernels.data(), l.kernels.size() * sizeof(double));
    mix(l.biases.data(), l.biases.size() * sizeof(double));
  }
  return h;
}

NetworkParams init_network(Architecture a, std::uint64_t seed, const LrnParams& lrn) {
  NetworkParams p;
  p.arch = a;
  p.lrn = lrn;
  std::mt19937_64 rng(seed);
  std::size_t in = 3;
  for (const auto& spec : architecture_layers(a)) {
    ConvLayerParams l;
    l.in_channels = in;
    l.out_channels = spec.out_channels;
    l.dilation = spec.dilation;
    l.relu = spec.relu;
    const double fan_in = 9.0 * static_cast<double>(in);
    const double fan_out = 9.0 * static_cast<double>(spec.out_channels);
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / (fan_in + fan_out)));
    l.kernels.resize(9 * in * spec.out_channels);
    for (double& w : l.kernels) w = static_cast<double>(static_cast<float>(normal(rng)));
    l.biases.assign(spec.out_channels, 0.0);
    p.layers.push_back(std::move(l));
    in = spec.out_channels;
  }
  p.validate();
  return p;
}

FeatureMap normalize_input(const FeatureMap& rgb, const NetworkParams& params) {
  if (rgb.channels() != 3) throw std::invalid_argument("normalize_input: expected 3 channels");
  FeatureMap out = rgb;
  for (std::size_t c = 0; c < 3; ++c) {
    for (double& v : out.channel(c)) v -= params.input_mean[c];
  }
  return out;
}

FeatureMap conv2d(const FeatureMap& input, const ConvLayerParams& layer, Precision precision) {
  layer.validate();
  return kernels::conv2d_forward(input, layer.shape(), layer.kernels, layer.biases, precision);
}

FeatureMap relu(const FeatureMap& input) {
  FeatureMap out = input;
  kernels::relu_inplace(out);
  return out;
}

FeatureMap lrn(const FeatureMap& input, const LrnParams& p) {
  return kernels::lrn_forward(input, p.shape());
}

NetForward net_forward(const FeatureMap& image, const NetworkParams& params, Precision precision) {
  params.validate();
  if (image.channels() != params.layers.front().in_channels) {
    throw std::invalid_argument("net_forward: input must have 3 channels");
  }
  NetForward out;
  out.tape.params_fingerprint = params.fingerprint();
  out.tape.layer_count = params.layers.size();
  FeatureMap x = image;
  for (const auto& layer : params.layers) {
    FeatureMap y = kernels::conv2d_forward(x, layer.shape(), layer.kernels, layer.biases, precision);
    if (layer.relu) kernels::relu_inplace(y);
    out.tape.conv_inputs.push_back(std::move(x));
    x = y;
    out.tape.conv_outputs.push_back(std::move(y));
  }
  out.features = kernels::lrn_forward(x, params.lrn.shape());
  return out;
}

FeatureMap net_features(const FeatureMap& image, const NetworkParams& params, Precision precision) {
  params.validate();
  if (image.channels() != params.layers.front().in_channels) {
    throw std::invalid_argument("net_forward: input must have 3 channels");
  }
  FeatureMap x = image;
  for (const auto& layer : params.layers) {
    x = kernels::conv2d_forward(x, layer.shape(), layer.kernels, layer.biases, precision);
    if (layer.relu) kernels::relu_inplace(x);
  }
  return kernels::lrn_forward(x, params.lrn.shape());
}

NetBackward net_backward(const FeatureMap& grad_features, const FeatureTape& tape,
                         const NetworkParams& params, Precision precision, bool input_grad) {
  params.validate();
  if (tape.layer_count != params.layers.size() || tape.conv_inputs.size() != tape.layer_count ||
      tape.conv_outputs.size() != tape.layer_count) {
    throw std::invalid_argument("net_backward: tape does not match the network");
  }
  if (tape.params_fingerprint != params.fingerprint()) {
    throw std::invalid_argument("net_backward: tape was recorded with different parameters");
  }
  if (!grad_features.same_shape(tape.conv_outputs.back())) {
    throw std::invalid_argument("net_backward: upstream gradient shape mismatch");
  }
  NetBackward out{FeatureMap(), params.zeros_like()};
  FeatureMap grad = kernels::lrn_backward(tape.conv_outputs.back(), grad_features,
                                          params.lrn.shape());
  for (std::size_t i = params.layers.size(); i-- > 0;) {
    const auto& layer = params.layers[i];
    if (layer.relu) grad = kernels::relu_backward(tape.conv_outputs[i], grad);
    auto g = kernels::conv2d_backward(tape.conv_inputs[i], grad, layer.shape(), layer.kernels,
                                      precision, input_grad || i > 0);
    out.param_grads.layers[i].kernels = std::move(g.kernels);
    out.param_grads.layers[i].biases = std::move(g.biases);
    grad = std::move(g.input);
  }
  out.input_grad = std::move(grad);
  return out;
}

}  // namespace corrtrack
