#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace corrtrack {

using Complex = std::complex<double>;

/// Single M x N grid stored row-major.
template <typename T>
class Plane {
 public:
  Plane() = default;
  Plane(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(checked_size(rows, cols), fill) {}
  Plane(std::size_t rows, std::size_t cols, std::vector<T> values)
      : rows_(rows), cols_(cols), data_(std::move(values)) {
    if (data_.size() != checked_size(rows, cols)) {
      throw std::invalid_argument("Plane: value count does not match shape");
    }
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  bool same_shape(const Plane& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
  bool operator==(const Plane&) const = default;

 private:
  static std::size_t checked_size(std::size_t rows, std::size_t cols) {
    if (rows == 0 || cols == 0) throw std::invalid_argument("Plane: rows and cols must be >= 1");
    return rows * cols;
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

/// M x N x D stack of planes, channel-major (each channel is a contiguous
/// row-major plane).
template <typename T>
class Stack {
 public:
  Stack() = default;
  Stack(std::size_t rows, std::size_t cols, std::size_t channels, T fill = T{})
      : rows_(rows), cols_(cols), channels_(channels),
        data_(checked_size(rows, cols, channels), fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t channels() const { return channels_; }
  std::size_t plane_size() const { return rows_ * cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(std::size_t ch, std::size_t r, std::size_t c) {
    return data_[(ch * rows_ + r) * cols_ + c];
  }
  const T& operator()(std::size_t ch, std::size_t r, std::size_t c) const {
    return data_[(ch * rows_ + r) * cols_ + c];
  }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> channel(std::size_t ch) { return {data_.data() + ch * plane_size(), plane_size()}; }
  std::span<const T> channel(std::size_t ch) const {
    return {data_.data() + ch * plane_size(), plane_size()};
  }

  Plane<T> plane(std::size_t ch) const {
    auto c = channel(ch);
    return Plane<T>(rows_, cols_, std::vector<T>(c.begin(), c.end()));
  }
  void set_plane(std::size_t ch, const Plane<T>& p) {
    if (p.rows() != rows_ || p.cols() != cols_) {
      throw std::invalid_argument("Stack::set_plane: shape mismatch");
    }
    std::copy(p.values().begin(), p.values().end(), channel(ch).begin());
  }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  bool same_shape(const Stack& o) const {
    return rows_ == o.rows_ && cols_ == o.cols_ && channels_ == o.channels_;
  }
  bool operator==(const Stack&) const = default;

 private:
  static std::size_t checked_size(std::size_t rows, std::size_t cols, std::size_t channels) {
    if (rows == 0 || cols == 0 || channels == 0) {
      throw std::invalid_argument("Stack: rows, cols and channels must be >= 1");
    }
    return rows * cols * channels;
  }

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::size_t channels_ = 0;
  std::vector<T> data_;
};

using RealPlane = Plane<double>;
using ComplexPlane = Plane<Complex>;
using FeatureMap = Stack<double>;
using FeatureSpectrum = Stack<Complex>;

class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Forward transforms are unnormalized; inverse transforms carry 1/(MN).
// Any size >= 1 is supported.
ComplexPlane fft2(const RealPlane& plane);
ComplexPlane fft2(const ComplexPlane& plane);
ComplexPlane ifft2(const ComplexPlane& spectrum);

// Per-channel transforms; channels are processed in parallel.
FeatureSpectrum fft2(const FeatureMap& stack);
FeatureSpectrum ifft2(const FeatureSpectrum& spectrum);

/// Real part of `plane` after checking that the imaginary residue is below
/// `rel_tol * (max|real| + 1e-30)`. Throws std::logic_error otherwise.
RealPlane real_part_checked(const ComplexPlane& plane, double rel_tol, const char* what);
FeatureMap real_part_checked(const FeatureSpectrum& stack, double rel_tol, const char* what);

/// real_part_checked(ifft2(spectrum)) in one pass without the complex result.
RealPlane ifft2_real(const ComplexPlane& spectrum, double rel_tol, const char* what);
FeatureMap ifft2_real(const FeatureSpectrum& spectrum, double rel_tol, const char* what);

/// x shifted circularly so that out(r, c) = x(r - dr, c - dc).
template <typename T>
Plane<T> circshift(const Plane<T>& x, long dr, long dc) {
  Plane<T> out(x.rows(), x.cols());
  const long m = static_cast<long>(x.rows());
  const long n = static_cast<long>(x.cols());
  for (long r = 0; r < m; ++r) {
    for (long c = 0; c < n; ++c) {
      const long rr = ((r + dr) % m + m) % m;
      const long cc = ((c + dc) % n + n) % n;
      out(rr, cc) = x(r, c);
    }
  }
  return out;
}

template <typename T>
Stack<T> circshift(const Stack<T>& x, long dr, long dc) {
  Stack<T> out(x.rows(), x.cols(), x.channels());
  for (std::size_t ch = 0; ch < x.channels(); ++ch) out.set_plane(ch, circshift(x.plane(ch), dr, dc));
  return out;
}

double max_abs(std::span<const double> v);
double max_abs(std::span<const Complex> v);

}  // namespace corrtrack
