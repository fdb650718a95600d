#include "corrtrack/kernels.hpp"

#include <Eigen/Core>
#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

namespace corrtrack::kernels {
namespace {

void check_conv(const FeatureMap& input, const ConvShape& shape, std::size_t kernel_len,
                std::size_t bias_len) {
  if (shape.dilation < 1) throw std::invalid_argument("conv2d: dilation must be >= 1");
  if (input.channels() != shape.in_channels) {
    throw std::invalid_argument("conv2d: input has " + std::to_string(input.channels()) +
                                " channels, layer expects " +
                                std::to_string(shape.in_channels));
  }
  if (kernel_len != shape.kernel_size()) throw std::invalid_argument("conv2d: kernel size");
  if (bias_len != shape.out_channels) throw std::invalid_argument("conv2d: bias size");
}

// Every channel is stored zero-padded by `d` on each side, row-major with
// padded width W = cols + 2d. Output pixel (r, c) of tap (ky, kx) reads padded
// index r * W + c + ky * d * W + kx * d, so each tap is a GEMM over a strided
// view of the padded buffer. The view also covers columns c >= cols of every
// row; those rows of the product are discarded (forward) or fed zeros
// (backward). Channel stride carries 2d slack so views never overlap.
struct PaddedGeometry {
  long rows, cols, d, width, plane, stride, view_rows;

  PaddedGeometry(std::size_t r, std::size_t c, int dilation)
      : rows(static_cast<long>(r)),
        cols(static_cast<long>(c)),
        d(dilation),
        width(cols + 2 * d),
        plane((rows + 2 * d) * width),
        stride(plane + 2 * d),
        view_rows(rows * width) {}

  long tap_offset(int ky, int kx) const { return ky * d * width + kx * d; }
  long interior(long r, long c) const { return (r + d) * width + c + d; }
};

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using View = Eigen::Map<const Mat<T>, 0, Eigen::OuterStride<>>;
template <typename T>
using MutView = Eigen::Map<Mat<T>, 0, Eigen::OuterStride<>>;

template <typename T>
std::vector<T> pad_channels(const FeatureMap& x, const PaddedGeometry& g) {
  std::vector<T> buf(static_cast<std::size_t>(g.stride) * x.channels(), T(0));
  const long channels = static_cast<long>(x.channels());
#pragma omp parallel for schedule(static)
  for (long ch = 0; ch < channels; ++ch) {
    const double* src = x.data() + ch * g.rows * g.cols;
    T* dst = buf.data() + ch * g.stride;
    for (long r = 0; r < g.rows; ++r) {
      for (long c = 0; c < g.cols; ++c) dst[g.interior(r, c)] = static_cast<T>(src[r * g.cols + c]);
    }
  }
  return buf;
}

// Upstream gradient laid out like a forward product: view_rows x channels,
// zero in the discarded columns.
template <typename T>
Mat<T> spread_rows(const FeatureMap& x, const PaddedGeometry& g) {
  Mat<T> m = Mat<T>::Zero(g.view_rows, static_cast<long>(x.channels()));
  const long channels = static_cast<long>(x.channels());
#pragma omp parallel for schedule(static)
  for (long ch = 0; ch < channels; ++ch) {
    const double* src = x.data() + ch * g.rows * g.cols;
    T* dst = m.data() + ch * g.view_rows;
    for (long r = 0; r < g.rows; ++r) {
      for (long c = 0; c < g.cols; ++c) dst[r * g.width + c] = static_cast<T>(src[r * g.cols + c]);
    }
  }
  return m;
}

// Tap weights as an in x out matrix.
template <typename T>
Mat<T> tap_weights(std::span<const double> kernels, const ConvShape& shape, int ky, int kx) {
  const long in_c = static_cast<long>(shape.in_channels), out_c = static_cast<long>(shape.out_channels);
  Mat<T> w(in_c, out_c);
  const std::size_t off = shape.kernel_index(ky, kx, 0, 0);
  for (long ci = 0; ci < in_c; ++ci) {
    for (long co = 0; co < out_c; ++co) w(ci, co) = static_cast<T>(kernels[off + ci * out_c + co]);
  }
  return w;
}

// Narrow inputs (the RGB layer) make per-tap GEMMs too thin; gather all nine
// taps into one view_rows x 9*in matrix instead.
constexpr std::size_t kGatherMaxChannels = 8;

template <typename T>
Mat<T> gather_taps(const std::vector<T>& xp, const PaddedGeometry& g, long in_c) {
  Mat<T> cols(g.view_rows, 9 * in_c);
  for (int ky = 0; ky < 3; ++ky) {
    for (int kx = 0; kx < 3; ++kx) {
      const long t = ky * 3 + kx;
      cols.middleCols(t * in_c, in_c) =
          View<T>(xp.data() + g.tap_offset(ky, kx), g.view_rows, in_c, Eigen::OuterStride<>(g.stride));
    }
  }
  return cols;
}

// All kernels as a (9 * in) x out matrix; row t * in + ci holds tap t.
template <typename T>
Mat<T> all_weights(std::span<const double> kernels, const ConvShape& shape) {
  const long rows = static_cast<long>(9 * shape.in_channels), out_c = static_cast<long>(shape.out_channels);
  return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
             kernels.data(), rows, out_c)
      .template cast<T>();
}

template <typename T>
FeatureMap conv_forward_padded(const FeatureMap& input, const ConvShape& shape,
                               std::span<const double> kernels, std::span<const double> biases) {
  const PaddedGeometry g(input.rows(), input.cols(), shape.dilation);
  const long in_c = static_cast<long>(shape.in_channels), out_c = static_cast<long>(shape.out_channels);
  const std::vector<T> xp = pad_channels<T>(input, g);
  Mat<T> y(g.view_rows, out_c);
  for (long co = 0; co < out_c; ++co) y.col(co).setConstant(static_cast<T>(biases[co]));
  if (shape.in_channels <= kGatherMaxChannels) {
    y.noalias() += gather_taps(xp, g, in_c) * all_weights<T>(kernels, shape);
  } else {
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const View<T> x(xp.data() + g.tap_offset(ky, kx), g.view_rows, in_c, Eigen::OuterStride<>(g.stride));
        y.noalias() += x * tap_weights<T>(kernels, shape, ky, kx);
      }
    }
  }
  FeatureMap out(input.rows(), input.cols(), shape.out_channels);
#pragma omp parallel for schedule(static)
  for (long co = 0; co < out_c; ++co) {
    double* dst = out.data() + co * g.rows * g.cols;
    const T* src = y.data() + co * g.view_rows;
    for (long r = 0; r < g.rows; ++r) {
      for (long c = 0; c < g.cols; ++c) dst[r * g.cols + c] = static_cast<double>(src[r * g.width + c]);
    }
  }
  return out;
}

template <typename T>
ConvGrads conv_backward_padded(const FeatureMap& input, const FeatureMap& grad_output,
                               const ConvShape& shape, std::span<const double> kernels,
                               bool input_grad) {
  const PaddedGeometry g(input.rows(), input.cols(), shape.dilation);
  const long in_c = static_cast<long>(shape.in_channels), out_c = static_cast<long>(shape.out_channels);
  ConvGrads out{FeatureMap(), std::vector<double>(shape.kernel_size(), 0.0),
                std::vector<double>(shape.out_channels, 0.0)};
  for (long co = 0; co < out_c; ++co) {
    double s = 0.0;
    for (double v : grad_output.channel(static_cast<std::size_t>(co))) s += v;
    out.biases[co] = s;
  }
  const std::vector<T> xp = pad_channels<T>(input, g);
  const Mat<T> dy = spread_rows<T>(grad_output, g);
  std::vector<T> dxp;
  if (input_grad) dxp.assign(xp.size(), T(0));
  const bool gathered = shape.in_channels <= kGatherMaxChannels;
  if (gathered) {
    const Mat<T> dw = gather_taps(xp, g, in_c).transpose() * dy;
    for (long r = 0; r < 9 * in_c; ++r) {
      for (long co = 0; co < out_c; ++co) out.kernels[r * out_c + co] = static_cast<double>(dw(r, co));
    }
  }
  Mat<T> dw(in_c, out_c);
  for (int ky = 0; ky < 3; ++ky) {
    for (int kx = 0; kx < 3; ++kx) {
      const long off = g.tap_offset(ky, kx);
      if (!gathered) {
        const View<T> x(xp.data() + off, g.view_rows, in_c, Eigen::OuterStride<>(g.stride));
        dw.noalias() = x.transpose() * dy;
        const std::size_t k0 = shape.kernel_index(ky, kx, 0, 0);
        for (long ci = 0; ci < in_c; ++ci) {
          for (long co = 0; co < out_c; ++co) out.kernels[k0 + ci * out_c + co] = static_cast<double>(dw(ci, co));
        }
      }
      if (input_grad) {
        MutView<T> dx(dxp.data() + off, g.view_rows, in_c, Eigen::OuterStride<>(g.stride));
        dx.noalias() += dy * tap_weights<T>(kernels, shape, ky, kx).transpose();
      }
    }
  }
  if (input_grad) {
    out.input = FeatureMap(input.rows(), input.cols(), input.channels());
#pragma omp parallel for schedule(static)
    for (long ci = 0; ci < in_c; ++ci) {
      double* dst = out.input.data() + ci * g.rows * g.cols;
      const T* src = dxp.data() + ci * g.stride;
      for (long r = 0; r < g.rows; ++r) {
        for (long c = 0; c < g.cols; ++c) dst[r * g.cols + c] = static_cast<double>(src[g.interior(r, c)]);
      }
    }
  }
  return out;
}

}  // namespace

FeatureMap conv2d_forward(const FeatureMap& input, const ConvShape& shape,
                          std::span<const double> kernels, std::span<const double> biases,
                          Precision precision) {
  check_conv(input, shape, kernels.size(), biases.size());
  return precision == Precision::Single ? conv_forward_padded<float>(input, shape, kernels, biases)
                                        : conv_forward_padded<double>(input, shape, kernels, biases);
}

ConvGrads conv2d_backward(const FeatureMap& input, const FeatureMap& grad_output,
                          const ConvShape& shape, std::span<const double> kernels,
                          Precision precision, bool input_grad) {
  check_conv(input, shape, kernels.size(), shape.out_channels);
  if (grad_output.rows() != input.rows() || grad_output.cols() != input.cols() ||
      grad_output.channels() != shape.out_channels) {
    throw std::invalid_argument("conv2d_backward: upstream gradient shape mismatch");
  }
  return precision == Precision::Single
             ? conv_backward_padded<float>(input, grad_output, shape, kernels, input_grad)
             : conv_backward_padded<double>(input, grad_output, shape, kernels, input_grad);
}

FeatureMap conv2d_forward_reference(const FeatureMap& input, const ConvShape& shape,
                                    std::span<const double> kernels,
                                    std::span<const double> biases) {
  check_conv(input, shape, kernels.size(), biases.size());
  const long rows = static_cast<long>(input.rows()), cols = static_cast<long>(input.cols());
  FeatureMap out(input.rows(), input.cols(), shape.out_channels);
  for (std::size_t co = 0; co < shape.out_channels; ++co) {
    for (long y = 0; y < rows; ++y) {
      for (long x = 0; x < cols; ++x) {
        double acc = biases[co];
        for (std::size_t ci = 0; ci < shape.in_channels; ++ci) {
          for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
              const long sy = y + (ky - 1) * shape.dilation;
              const long sx = x + (kx - 1) * shape.dilation;
              if (sy < 0 || sy >= rows || sx < 0 || sx >= cols) continue;
              acc += kernels[shape.kernel_index(ky, kx, ci, co)] * input(ci, sy, sx);
            }
          }
        }
        out(co, y, x) = acc;
      }
    }
  }
  return out;
}

ConvGrads conv2d_backward_reference(const FeatureMap& input, const FeatureMap& grad_output,
                                    const ConvShape& shape, std::span<const double> kernels) {
  check_conv(input, shape, kernels.size(), shape.out_channels);
  const long rows = static_cast<long>(input.rows()), cols = static_cast<long>(input.cols());
  ConvGrads g{FeatureMap(input.rows(), input.cols(), input.channels(), 0.0),
              std::vector<double>(shape.kernel_size(), 0.0),
              std::vector<double>(shape.out_channels, 0.0)};
  for (std::size_t co = 0; co < shape.out_channels; ++co) {
    for (long y = 0; y < rows; ++y) {
      for (long x = 0; x < cols; ++x) {
        const double up = grad_output(co, y, x);
        g.biases[co] += up;
        for (std::size_t ci = 0; ci < shape.in_channels; ++ci) {
          for (int ky = 0; ky < 3; ++ky) {
            for (int kx = 0; kx < 3; ++kx) {
              const long sy = y + (ky - 1) * shape.dilation;
              const long sx = x + (kx - 1) * shape.dilation;
              if (sy < 0 || sy >= rows || sx < 0 || sx >= cols) continue;
              const std::size_t k = shape.kernel_index(ky, kx, ci, co);
              g.kernels[k] += up * input(ci, sy, sx);
              g.input(ci, sy, sx) += up * kernels[k];
            }
          }
        }
      }
    }
  }
  return g;
}

namespace {

void check_lrn(const LrnShape& p) {
  if (p.window < 1 || p.window % 2 == 0) throw std::invalid_argument("lrn: window must be odd");
  if (!(p.kappa > 0.0) || p.alpha < 0.0 || !(p.beta > 0.0)) {
    throw std::invalid_argument("lrn: requires kappa > 0, alpha >= 0, beta > 0");
  }
}

// o[i] = scale[i] * s[i]^-beta with s[i] = kappa + alpha * max(sum[i], 0), and
// optionally t[i] = o[i] / s[i]. The default beta = 0.75 goes through square
// roots so the loop vectorizes.
template <bool WithT>
void scaled_neg_pow(const double* __restrict scale, const double* __restrict sum, std::size_t n,
                    const LrnShape& p, double* __restrict o, double* __restrict t) {
  const double kappa = p.kappa, alpha = p.alpha, beta = p.beta;
  if (beta == 0.75) {
    for (std::size_t i = 0; i < n; ++i) {
      const double s = kappa + alpha * std::max(sum[i], 0.0);
      const double r = std::sqrt(s);
      const double v = scale[i] / (r * std::sqrt(r));
      o[i] = v;
      if constexpr (WithT) t[i] = v / s;
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const double s = kappa + alpha * std::max(sum[i], 0.0);
      const double v = scale[i] * std::pow(s, -beta);
      o[i] = v;
      if constexpr (WithT) t[i] = v / s;
    }
  }
}

// Calls visit(c, window_sum) for every channel c, where window_sum holds
// sum_{k in window(c)} f(k)[i] per pixel. The sum slides across channels.
template <typename F, typename Visit>
void sliding_channel_sum(std::size_t channels, std::size_t n, long half, const F& f,
                         const Visit& visit) {
  const long last = static_cast<long>(channels) - 1;
  std::vector<double> sum(n, 0.0);
  for (long k = 0; k <= std::min(half, last); ++k) f(k, sum, 1.0);
  for (long c = 0; c <= last; ++c) {
    visit(c, sum);
    if (c + half + 1 <= last) f(c + half + 1, sum, 1.0);
    if (c - half >= 0) f(c - half, sum, -1.0);
  }
}

}  // namespace

FeatureMap lrn_forward(const FeatureMap& input, const LrnShape& p) {
  check_lrn(p);
  const std::size_t n = input.plane_size();
  FeatureMap out(input.rows(), input.cols(), input.channels());
  const auto add_squares = [&](long k, std::vector<double>& sum, double sign) {
    const double* __restrict a = input.data() + k * n;
    double* __restrict acc = sum.data();
    for (std::size_t i = 0; i < n; ++i) acc[i] += sign * a[i] * a[i];
  };
  sliding_channel_sum(input.channels(), n, p.window / 2, add_squares,
                      [&](long c, const std::vector<double>& sum) {
                        scaled_neg_pow<false>(input.data() + c * n, sum.data(), n, p,
                                              out.data() + c * n, nullptr);
                      });
  return out;
}

FeatureMap lrn_backward(const FeatureMap& input, const FeatureMap& grad_output,
                        const LrnShape& p) {
  check_lrn(p);
  if (!input.same_shape(grad_output)) throw std::invalid_argument("lrn_backward: shape mismatch");
  const std::size_t n = input.plane_size();
  const long half = p.window / 2;
  // out(j) = g(j) s(j)^-beta - 2 alpha beta a(j) sum_{c in window(j)} t(c)
  // with t(c) = g(c) a(c) s(c)^(-beta - 1); windows are symmetric.
  FeatureMap out(input.rows(), input.cols(), input.channels());
  FeatureMap t(input.rows(), input.cols(), input.channels());
  const auto add_squares = [&](long k, std::vector<double>& sum, double sign) {
    const double* __restrict a = input.data() + k * n;
    double* __restrict acc = sum.data();
    for (std::size_t i = 0; i < n; ++i) acc[i] += sign * a[i] * a[i];
  };
  sliding_channel_sum(input.channels(), n, half, add_squares,
                      [&](long c, const std::vector<double>& sum) {
                        const double* __restrict a = input.data() + c * n;
                        double* __restrict tc = t.data() + c * n;
                        scaled_neg_pow<true>(grad_output.data() + c * n, sum.data(), n, p,
                                             out.data() + c * n, tc);
                        for (std::size_t i = 0; i < n; ++i) tc[i] *= a[i];
                      });
  const double k2 = 2.0 * p.alpha * p.beta;
  const auto add_t = [&](long k, std::vector<double>& sum, double sign) {
    const double* __restrict tk = t.data() + k * n;
    double* __restrict acc = sum.data();
    for (std::size_t i = 0; i < n; ++i) acc[i] += sign * tk[i];
  };
  sliding_channel_sum(input.channels(), n, half, add_t, [&](long c, const std::vector<double>& sum) {
    const double* __restrict a = input.data() + c * n;
    const double* __restrict acc = sum.data();
    double* __restrict o = out.data() + c * n;
    for (std::size_t i = 0; i < n; ++i) o[i] -= k2 * a[i] * acc[i];
  });
  return out;
}

FeatureMap lrn_forward_reference(const FeatureMap& input, const LrnShape& p) {
  check_lrn(p);
  const long channels = static_cast<long>(input.channels());
  const long half = p.window / 2;
  FeatureMap out(input.rows(), input.cols(), input.channels());
  for (long c = 0; c < channels; ++c) {
    for (std::size_t y = 0; y < input.rows(); ++y) {
      for (std::size_t x = 0; x < input.cols(); ++x) {
        double sum = 0.0;
        for (long k = c - half; k <= c + half; ++k) {
          if (k < 0 || k >= channels) continue;
          sum += input(k, y, x) * input(k, y, x);
        }
        out(c, y, x) = input(c, y, x) * std::pow(p.kappa + p.alpha * sum, -p.beta);
      }
    }
  }
  return out;
}

FeatureMap lrn_backward_reference(const FeatureMap& input, const FeatureMap& grad_output,
                                  const LrnShape& p) {
  check_lrn(p);
  const long channels = static_cast<long>(input.channels());
  const long half = p.window / 2;
  FeatureMap out(input.rows(), input.cols(), input.channels(), 0.0);
  for (std::size_t y = 0; y < input.rows(); ++y) {
    for (std::size_t x = 0; x < input.cols(); ++x) {
      for (long c = 0; c < channels; ++c) {
        double sum = 0.0;
        for (long k = c - half; k <= c + half; ++k) {
          if (k < 0 || k >= channels) continue;
          sum += input(k, y, x) * input(k, y, x);
        }
        const double s = p.kappa + p.alpha * sum;
        const double g = grad_output(c, y, x);
        // d b_c / d a_j for every j in the window of c.
        for (long j = c - half; j <= c + half; ++j) {
          if (j < 0 || j >= channels) continue;
          double db = -2.0 * p.alpha * p.beta * input(c, y, x) * input(j, y, x) *
                      std::pow(s, -p.beta - 1.0);
          if (j == c) db += std::pow(s, -p.beta);
          out(j, y, x) += g * db;
        }
      }
    }
  }
  return out;
}

void relu_inplace(FeatureMap& x) {
  for (double& v : x.values()) v = v > 0.0 ? v : 0.0;
}

FeatureMap relu_backward(const FeatureMap& forward_input, const FeatureMap& grad_output) {
  if (!forward_input.same_shape(grad_output)) {
    throw std::invalid_argument("relu_backward: shape mismatch");
  }
  FeatureMap out(grad_output.rows(), grad_output.cols(), grad_output.channels());
  const double* __restrict x = forward_input.data();
  const double* __restrict g = grad_output.data();
  double* __restrict o = out.data();
  for (std::size_t i = 0; i < out.size(); ++i) o[i] = x[i] > 0.0 ? g[i] : 0.0;
  return out;
}

}  // namespace corrtrack::kernels
