#pragma once

// Compute kernels for the feature extractor. Every kernel has a parallel fast
// path and a literal serial reference; tests pin the fast path to the
// reference and bench/ measures the difference.

#include <span>

#include "corrtrack/spectral.hpp"

namespace corrtrack::kernels {

/// 3x3 convolution geometry. Kernel layout is (ky, kx, in, out) with `out`
/// fastest: tap t = ky * 3 + kx holds a column-major out x in matrix.
struct ConvShape {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  int dilation = 1;

  std::size_t kernel_size() const { return 9 * in_channels * out_channels; }
  std::size_t kernel_index(int ky, int kx, std::size_t ci, std::size_t co) const {
    return ((static_cast<std::size_t>(ky) * 3 + static_cast<std::size_t>(kx)) * in_channels + ci) *
               out_channels +
           co;
  }
};

struct ConvGrads {
  FeatureMap input;
  std::vector<double> kernels;
  std::vector<double> biases;
};

/// Scalar type of the fast-path GEMMs. Inputs, outputs and parameters stay
/// double either way; Single trades about 1e-7 relative accuracy for speed.
enum class Precision { Double, Single };

// Stride 1, zero padding of `dilation` cells on every side (spatial size kept).
FeatureMap conv2d_forward(const FeatureMap& input, const ConvShape& shape,
                          std::span<const double> kernels, std::span<const double> biases,
                          Precision precision = Precision::Double);
/// With input_grad = false the returned input gradient is left empty.
ConvGrads conv2d_backward(const FeatureMap& input, const FeatureMap& grad_output,
                          const ConvShape& shape, std::span<const double> kernels,
                          Precision precision = Precision::Double, bool input_grad = true);

FeatureMap conv2d_forward_reference(const FeatureMap& input, const ConvShape& shape,
                                    std::span<const double> kernels,
                                    std::span<const double> biases);
ConvGrads conv2d_backward_reference(const FeatureMap& input, const FeatureMap& grad_output,
                                    const ConvShape& shape, std::span<const double> kernels);

struct LrnShape {
  int window = 5;
  double kappa = 1.0;
  double alpha = 1e-4 / 5.0;
  double beta = 0.75;
};

// b_c = a_c * (kappa + alpha * sum_{c' in window(c)} a_{c'}^2)^(-beta); the
// window is centred on c and clipped at the first and last channel.
FeatureMap lrn_forward(const FeatureMap& input, const LrnShape& p);
FeatureMap lrn_backward(const FeatureMap& input, const FeatureMap& grad_output, const LrnShape& p);
FeatureMap lrn_forward_reference(const FeatureMap& input, const LrnShape& p);
FeatureMap lrn_backward_reference(const FeatureMap& input, const FeatureMap& grad_output,
                                  const LrnShape& p);

void relu_inplace(FeatureMap& x);
/// Zeroes grad where the forward input was <= 0 (gradient at 0 is 0).
FeatureMap relu_backward(const FeatureMap& forward_input, const FeatureMap& grad_output);

}  // namespace corrtrack::kernels
