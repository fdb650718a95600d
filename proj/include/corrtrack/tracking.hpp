#pragma once

#include <memory>
#include <utility>
#include <vector>

#include "corrtrack/cf_layer.hpp"
#include "corrtrack/features.hpp"
#include "corrtrack/image.hpp"

namespace corrtrack {

struct HyperParams {
  double lambda = 1e-4;
  double online_rate = 0.008;
  double padding = 1.5;
  std::size_t input_size = 125;
  double scale_base = 1.0375;
  int scale_levels = 3;
  double label_bandwidth = 0.1;
  // Multiplies the peak of every non-unit scale before the argmax. 1 = off.
  double scale_penalty = 1.0;
  bool cosine_window = true;
  Precision precision = Precision::Single;

  void validate() const;
};

/// a^s for s = floor(-(S-1)/2) ... floor((S-1)/2).
std::vector<double> scale_factors(const HyperParams& p);

/// Numerator and denominator of the running filter. The filter applied at
/// detection time is numerator / (denominator + lambda).
struct FilterState {
  FeatureSpectrum numerator;
  RealPlane denominator;
  std::size_t frames = 0;
};

/// Statistics of a single frame: numerator conj(y_hat) * x_hat, denominator
/// sum_k |x_hat^k|^2, frames = 1.
FilterState frame_statistics(const FeatureSpectrum& features, const ComplexPlane& label_spec_conj);

/// Exponential forgetting with rate beta: both accumulators become
/// (1 - beta) * old + beta * new and the frame counter advances.
FilterState update_filter_state(const FilterState& state, const FeatureSpectrum& features,
                                const ComplexPlane& label_spec_conj, double beta);

FeatureSpectrum filter_from_state(const FilterState& state, double lambda);

/// Signed cell offset of a response peak relative to the label center,
/// wrapped into [-floor(M/2), ceil(M/2)).
std::pair<long, long> peak_to_displacement(std::size_t u, std::size_t v, std::size_t rows,
                                           std::size_t cols);

struct TrackerState {
  BoundingBox box;
  FilterState filter;
  HyperParams params;
  std::shared_ptr<const NetworkParams> model;
  RealPlane window;
  ComplexPlane label_spec_conj;
  std::size_t frame_rows = 0;
  std::size_t frame_cols = 0;
};

struct ScalePeak {
  double scale = 1.0;
  std::size_t row = 0;
  std::size_t col = 0;
  double value = 0.0;
};

/// Global argmax over per-scale responses; earlier scales and lower indices
/// win ties.
ScalePeak select_peak(const std::vector<RealPlane>& responses, const std::vector<double>& scales,
                      double scale_penalty = 1.0);

/// Features of the window centred at (cx, cy), resized to input_size,
/// windowed and transformed.
FeatureSpectrum patch_spectrum(const Image& frame, double cx, double cy, double window_w,
                               double window_h, const TrackerState& state);

TrackerState tracker_init(const Image& frame, const BoundingBox& box, const HyperParams& params,
                          std::shared_ptr<const NetworkParams> model);

struct StepResult {
  BoundingBox box;
  ScalePeak peak;
};

/// Detects over the scale pyramid, moves the box, then updates the filter
/// with a patch cropped at the new box.
StepResult tracker_step(TrackerState& state, const Image& frame);

}  // namespace corrtrack
