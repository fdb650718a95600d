#include "corrtrack/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace corrtrack {

FeatureMap crop_window(const Image& image, double cx, double cy, double window_w,
                       double window_h, std::size_t out_rows, std::size_t out_cols) {
  if (image.empty()) throw std::invalid_argument("crop: empty image");
  if (!(window_w > 0.0) || !(window_h > 0.0) || !std::isfinite(window_w) ||
      !std::isfinite(window_h) || !std::isfinite(cx) || !std::isfinite(cy)) {
    throw std::invalid_argument("crop: degenerate window");
  }
  const long rows = static_cast<long>(image.rows());
  const long cols = static_cast<long>(image.cols());
  // Continuous 0-based coordinates: pixel i covers [i - 0.5, i + 0.5].
  const double left = (cx - 1.0) - window_w / 2.0;
  const double top = (cy - 1.0) - window_h / 2.0;
  const double step_x = window_w / static_cast<double>(out_cols);
  const double step_y = window_h / static_cast<double>(out_rows);

  std::vector<long> x0(out_cols), x1(out_cols);
  std::vector<double> fx(out_cols);
  for (std::size_t c = 0; c < out_cols; ++c) {
    const double sx = left + (static_cast<double>(c) + 0.5) * step_x;
    const double fl = std::floor(sx);
    fx[c] = sx - fl;
    x0[c] = std::clamp(static_cast<long>(fl), 0L, cols - 1);
    x1[c] = std::clamp(static_cast<long>(fl) + 1, 0L, cols - 1);
  }

  FeatureMap out(out_rows, out_cols, 3);
  const long n_rows = static_cast<long>(out_rows);
#pragma omp parallel for schedule(static)
  for (long r = 0; r < n_rows; ++r) {
    const double sy = top + (static_cast<double>(r) + 0.5) * step_y;
    const double fl = std::floor(sy);
    const double fy = sy - fl;
    const long y0 = std::clamp(static_cast<long>(fl), 0L, rows - 1);
    const long y1 = std::clamp(static_cast<long>(fl) + 1, 0L, rows - 1);
    for (std::size_t ch = 0; ch < 3; ++ch) {
      for (std::size_t c = 0; c < out_cols; ++c) {
        const double a = image.at(ch, y0, x0[c]), b = image.at(ch, y0, x1[c]);
        const double d = image.at(ch, y1, x0[c]), e = image.at(ch, y1, x1[c]);
        const double top_row = a + (b - a) * fx[c];
        const double bottom_row = d + (e - d) * fx[c];
        out(ch, r, c) = top_row + (bottom_row - top_row) * fy;
      }
    }
  }
  return out;
}

FeatureMap crop_patch(const Image& image, const BoundingBox& box, double padding,
                      std::size_t out_size) {
  if (!box.valid()) throw std::invalid_argument("crop_patch: box must have positive size");
  if (!(padding > 0.0)) throw std::invalid_argument("crop_patch: padding must be > 0");
  if (out_size == 0) throw std::invalid_argument("crop_patch: output size must be >= 1");
  return crop_window(image, box.cx, box.cy, padding * box.width, padding * box.height, out_size,
                     out_size);
}

}  // namespace corrtrack
