#pragma once

#include <cstddef>
#include <vector>

#include "corrtrack/spectral.hpp"

namespace corrtrack {

/// Axis-aligned box. Centers use the 1-based pixel convention of OTB
/// annotations: the top-left pixel of a frame is (1, 1), so a box with
/// top-left (x, y) and size (w, h) has center (x + (w - 1) / 2, y + (h - 1) / 2).
struct BoundingBox {
  double cx = 0.0;
  double cy = 0.0;
  double width = 0.0;
  double height = 0.0;

  static BoundingBox from_top_left(double x, double y, double w, double h) {
    return {x + (w - 1.0) / 2.0, y + (h - 1.0) / 2.0, w, h};
  }
  double left() const { return cx - (width - 1.0) / 2.0; }
  double top() const { return cy - (height - 1.0) / 2.0; }
  bool valid() const { return width > 0.0 && height > 0.0; }
  bool operator==(const BoundingBox&) const = default;
};

/// Planar RGB frame with values in [0, 1].
class Image {
 public:
  Image() = default;
  Image(std::size_t rows, std::size_t cols, float fill = 0.0f)
      : rows_(rows), cols_(cols), data_(3 * rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return data_.empty(); }

  float& at(std::size_t ch, std::size_t r, std::size_t c) { return data_[(ch * rows_ + r) * cols_ + c]; }
  float at(std::size_t ch, std::size_t r, std::size_t c) const {
    return data_[(ch * rows_ + r) * cols_ + c];
  }
  std::vector<float>& values() { return data_; }
  const std::vector<float>& values() const { return data_; }
  bool operator==(const Image&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<float> data_;
};

/// Samples a window of `window_w` x `window_h` pixels centred on the 1-based
/// center (cx, cy), bilinearly resampled to out_rows x out_cols. Pixels
/// outside the frame replicate the nearest border pixel.
FeatureMap crop_window(const Image& image, double cx, double cy, double window_w,
                       double window_h, std::size_t out_rows, std::size_t out_cols);

/// crop_window with a (padding * width) x (padding * height) window and a
/// square out_size x out_size result.
FeatureMap crop_patch(const Image& image, const BoundingBox& box, double padding,
                      std::size_t out_size);

}  // namespace corrtrack
