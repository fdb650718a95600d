#include "corrtrack/tracking.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "corrtrack/training.hpp"

namespace corrtrack {

void HyperParams::validate() const {
  if (!(lambda > 0.0)) throw std::invalid_argument("tracker: lambda must be > 0");
  if (!(online_rate >= 0.0 && online_rate <= 1.0)) {
    throw std::invalid_argument("tracker: online rate must lie in [0, 1]");
  }
  if (scale_levels < 1 || scale_levels % 2 == 0) {
    throw std::invalid_argument("tracker: scale levels must be odd");
  }
  if (!(scale_base > 1.0)) throw std::invalid_argument("tracker: scale base must be > 1");
  if (!(padding > 0.0) || input_size < 1 || !(label_bandwidth > 0.0) || !(scale_penalty > 0.0)) {
    throw std::invalid_argument("tracker: invalid window parameters");
  }
}

std::vector<double> scale_factors(const HyperParams& p) {
  p.validate();
  std::vector<double> out;
  const int half = (p.scale_levels - 1) / 2;
  for (int s = -half; s <= half; ++s) out.push_back(std::pow(p.scale_base, s));
  return out;
}

FilterState frame_statistics(const FeatureSpectrum& features,
                             const ComplexPlane& label_spec_conj) {
  if (features.rows() != label_spec_conj.rows() || features.cols() != label_spec_conj.cols()) {
    throw std::invalid_argument("frame_statistics: label and feature shapes differ");
  }
  FilterState s;
  s.numerator = FeatureSpectrum(features.rows(), features.cols(), features.channels());
  const std::size_t n = features.plane_size();
  for (std::size_t ch = 0; ch < features.channels(); ++ch) {
    auto f = features.channel(ch);
    auto num = s.numerator.channel(ch);
    for (std::size_t i = 0; i < n; ++i) num[i] = label_spec_conj[i] * f[i];
  }
  s.denominator = spectral_energy(features);
  s.frames = 1;
  return s;
}

FilterState update_filter_state(const FilterState& state, const FeatureSpectrum& features,
                                const ComplexPlane& label_spec_conj, double beta) {
  if (!(beta >= 0.0 && beta <= 1.0)) throw std::invalid_argument("update: beta must be in [0, 1]");
  if (!state.numerator.same_shape(features)) {
    throw std::invalid_argument("update: feature shape differs from the filter state");
  }
  const FilterState cur = frame_statistics(features, label_spec_conj);
  FilterState out = state;
  for (std::size_t i = 0; i < out.numerator.size(); ++i) {
    out.numerator[i] = (1.0 - beta) * out.numerator[i] + beta * cur.numerator[i];
  }
  for (std::size_t i = 0; i < out.denominator.size(); ++i) {
    out.denominator[i] = (1.0 - beta) * out.denominator[i] + beta * cur.denominator[i];
  }
  out.frames = state.frames + 1;
  return out;
}

FeatureSpectrum filter_from_state(const FilterState& state, double lambda) {
  FeatureSpectrum w = state.numerator;
  const std::size_t n = w.plane_size();
  for (std::size_t ch = 0; ch < w.channels(); ++ch) {
    auto c = w.channel(ch);
    for (std::size_t i = 0; i < n; ++i) c[i] /= state.denominator[i] + lambda;
  }
  return w;
}

std::pair<long, long> peak_to_displacement(std::size_t u, std::size_t v, std::size_t rows,
                                           std::size_t cols) {
  if (u >= rows || v >= cols) throw std::invalid_argument("peak_to_displacement: index out of range");
  auto wrap = [](std::size_t i, std::size_t n) {
    const long half = static_cast<long>(n / 2);
    const long upper = static_cast<long>((n + 1) / 2);
    long d = static_cast<long>(i) - half;
    if (d >= upper) d -= static_cast<long>(n);
    if (d < -half) d += static_cast<long>(n);
    return d;
  };
  return {wrap(u, rows), wrap(v, cols)};
}

ScalePeak select_peak(const std::vector<RealPlane>& responses, const std::vector<double>& scales,
                      double scale_penalty) {
  if (responses.empty() || responses.size() != scales.size()) {
    throw std::invalid_argument("select_peak: one response per scale required");
  }
  ScalePeak best;
  bool found = false;
  for (std::size_t s = 0; s < responses.size(); ++s) {
    const double factor = scales[s] == 1.0 ? 1.0 : scale_penalty;
    const RealPlane& r = responses[s];
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (!std::isfinite(r[i])) throw std::runtime_error("tracker: non-finite response");
      const double v = r[i] * factor;
      if (!found || v > best.value) {
        best = {scales[s], i / r.cols(), i % r.cols(), v};
        found = true;
      }
    }
  }
  return best;
}

FeatureSpectrum patch_spectrum(const Image& frame, double cx, double cy, double window_w,
                               double window_h, const TrackerState& state) {
  const std::size_t n = state.params.input_size;
  const FeatureMap rgb = crop_window(frame, cx, cy, window_w, window_h, n, n);
  const FeatureMap feats = net_features(normalize_input(rgb, *state.model), *state.model, state.params.precision);
  return fft2(apply_window(feats, state.window));
}

namespace {

BoundingBox clamp_box(BoundingBox b, std::size_t rows, std::size_t cols) {
  b.cx = std::clamp(b.cx, 1.0, static_cast<double>(cols));
  b.cy = std::clamp(b.cy, 1.0, static_cast<double>(rows));
  b.width = std::clamp(b.width, 4.0, static_cast<double>(cols));
  b.height = std::clamp(b.height, 4.0, static_cast<double>(rows));
  return b;
}

}  // namespace

TrackerState tracker_init(const Image& frame, const BoundingBox& box, const HyperParams& params,
                          std::shared_ptr<const NetworkParams> model) {
  params.validate();
  if (!box.valid()) throw std::invalid_argument("tracker_init: box must have positive size");
  if (frame.empty()) throw std::invalid_argument("tracker_init: empty frame");
  if (!model) throw std::invalid_argument("tracker_init: no model");
  model->validate();

  TrackerState st;
  st.box = box;
  st.params = params;
  st.model = std::move(model);
  st.frame_rows = frame.rows();
  st.frame_cols = frame.cols();
  const std::size_t n = params.input_size;
  st.window = params.cosine_window ? hann_window(n, n) : RealPlane(n, n, 1.0);
  TrainConfig label_cfg;
  label_cfg.input_size = n;
  label_cfg.padding = params.padding;
  label_cfg.label.bandwidth = params.label_bandwidth;
  const ComplexPlane label_spec = fft2(gaussian_label(n, n, label_sigma(label_cfg)));
  st.label_spec_conj = ComplexPlane(n, n);
  for (std::size_t i = 0; i < label_spec.size(); ++i) st.label_spec_conj[i] = std::conj(label_spec[i]);

  const FeatureSpectrum spec = patch_spectrum(frame, box.cx, box.cy, params.padding * box.width,
                                              params.padding * box.height, st);
  st.filter = frame_statistics(spec, st.label_spec_conj);
  return st;
}

StepResult tracker_step(TrackerState& state, const Image& frame) {
  if (state.filter.frames == 0 || !state.model) {
    throw std::logic_error("tracker_step: tracker is not initialized");
  }
  const auto& p = state.params;
  const std::vector<double> scales = scale_factors(p);
  const FeatureSpectrum filter = filter_from_state(state.filter, p.lambda);
  const double base_w = p.padding * state.box.width;
  const double base_h = p.padding * state.box.height;

  std::vector<RealPlane> responses;
  responses.reserve(scales.size());
  for (double s : scales) {
    const FeatureSpectrum z =
        patch_spectrum(frame, state.box.cx, state.box.cy, base_w * s, base_h * s, state);
    responses.push_back(detect(filter, z));
  }
  const ScalePeak peak = select_peak(responses, scales, p.scale_penalty);
  const auto [du, dv] = peak_to_displacement(peak.row, peak.col, p.input_size, p.input_size);
  const double cell_w = base_w * peak.scale / static_cast<double>(p.input_size);
  const double cell_h = base_h * peak.scale / static_cast<double>(p.input_size);

  BoundingBox next = state.box;
  next.cx += static_cast<double>(dv) * cell_w;
  next.cy += static_cast<double>(du) * cell_h;
  next.width *= peak.scale;
  next.height *= peak.scale;
  next = clamp_box(next, frame.rows(), frame.cols());

  const FeatureSpectrum update = patch_spectrum(frame, next.cx, next.cy, p.padding * next.width,
                                                p.padding * next.height, state);
  state.filter = update_filter_state(state.filter, update, state.label_spec_conj, p.online_rate);
  state.box = next;
  return {next, peak};
}

}  // namespace corrtrack
