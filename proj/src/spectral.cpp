#include "corrtrack/spectral.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <tuple>

namespace corrtrack {
namespace {

// FFTW planning is not thread-safe; execution of an existing plan is.
enum class PlanKind { Forward, Backward, RealForward };

class PlanCache {
 public:
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  fftw_plan get(std::size_t rows, std::size_t cols, PlanKind kind) {
    std::lock_guard lock(mutex_);
    const auto key = std::make_tuple(rows, cols, kind);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    const int m = static_cast<int>(rows), n = static_cast<int>(cols);
    std::vector<Complex> in(rows * cols), out(rows * cols);
    auto* cin = reinterpret_cast<fftw_complex*>(in.data());
    auto* cout = reinterpret_cast<fftw_complex*>(out.data());
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    fftw_plan plan = nullptr;
    switch (kind) {
      case PlanKind::Forward:
        plan = fftw_plan_dft_2d(m, n, cin, cout, FFTW_FORWARD, flags);
        break;
      case PlanKind::Backward:
        plan = fftw_plan_dft_2d(m, n, cin, cout, FFTW_BACKWARD, flags);
        break;
      case PlanKind::RealForward:
        plan = fftw_plan_dft_r2c_2d(m, n, reinterpret_cast<double*>(in.data()), cout, flags);
        break;
    }
    if (plan == nullptr) throw std::runtime_error("fft2: FFTW planning failed");
    plans_.emplace(key, plan);
    return plan;
  }

 private:
  std::mutex mutex_;
  std::map<std::tuple<std::size_t, std::size_t, PlanKind>, fftw_plan> plans_;
};

PlanCache& plan_cache() {
  static PlanCache cache;
  return cache;
}

void require_finite(std::span<const double> v, const char* what) {
  for (double x : v) {
    if (!std::isfinite(x)) throw NonFiniteError(std::string(what) + ": non-finite input value");
  }
}

void require_finite(std::span<const Complex> v, const char* what) {
  for (const Complex& x : v) {
    if (!std::isfinite(x.real()) || !std::isfinite(x.imag())) {
      throw NonFiniteError(std::string(what) + ": non-finite input value");
    }
  }
}

void execute(const Complex* in, Complex* out, std::size_t rows, std::size_t cols, PlanKind kind) {
  fftw_plan plan = plan_cache().get(rows, cols, kind);
  // Out-of-place complex transforms leave the input untouched.
  fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(const_cast<Complex*>(in)),
                   reinterpret_cast<fftw_complex*>(out));
}

// Half spectrum by r2c (columns 0..cols/2), then the rest from
// X(r, c) = conj(X(-r, -c)).
void forward_real(std::span<const double> in, std::span<Complex> out, std::size_t rows,
                  std::size_t cols) {
  const std::size_t half = cols / 2 + 1;
  thread_local std::vector<Complex> buf;
  buf.resize(rows * half);
  fftw_plan plan = plan_cache().get(rows, cols, PlanKind::RealForward);
  // Out-of-place r2c transforms preserve their input.
  fftw_execute_dft_r2c(plan, const_cast<double*>(in.data()),
                       reinterpret_cast<fftw_complex*>(buf.data()));
  for (std::size_t r = 0; r < rows; ++r) {
    const Complex* src = buf.data() + r * half;
    Complex* dst = out.data() + r * cols;
    std::copy(src, src + half, dst);
    const Complex* mirror = buf.data() + ((rows - r) % rows) * half;
    for (std::size_t c = half; c < cols; ++c) dst[c] = std::conj(mirror[cols - c]);
  }
}

void inverse(std::span<const Complex> in, std::span<Complex> out, std::size_t rows,
             std::size_t cols) {
  execute(in.data(), out.data(), rows, cols, PlanKind::Backward);
  const double scale = 1.0 / static_cast<double>(rows * cols);
  for (Complex& v : out) v *= scale;
}

// Unnormalized inverse of one plane; writes the real part scaled by 1/(MN)
// and raises the running maxima of |real| and |imag| (both unscaled).
void inverse_real(std::span<const Complex> in, double* out, std::size_t rows, std::size_t cols,
                  double& max_re, double& max_im) {
  thread_local std::vector<Complex> buf;
  buf.resize(rows * cols);
  execute(in.data(), buf.data(), rows, cols, PlanKind::Backward);
  const double scale = 1.0 / static_cast<double>(rows * cols);
  double re = max_re, im = max_im;
  for (std::size_t i = 0; i < buf.size(); ++i) {
    re = std::max(re, std::abs(buf[i].real()));
    im = std::max(im, std::abs(buf[i].imag()));
    out[i] = buf[i].real() * scale;
  }
  max_re = re;
  max_im = im;
}

void check_residue(double max_re, double max_im, double rel_tol, double scale, const char* what) {
  if (max_im >= rel_tol * (max_re + 1e-30)) {
    throw std::logic_error(std::string(what) + ": imaginary residue " + std::to_string(max_im * scale) +
                           " exceeds tolerance (max real " + std::to_string(max_re * scale) + ")");
  }
}

}  // namespace

ComplexPlane fft2(const RealPlane& plane) {
  require_finite(plane.values(), "fft2");
  ComplexPlane out(plane.rows(), plane.cols());
  forward_real(plane.values(), out.values(), plane.rows(), plane.cols());
  return out;
}

ComplexPlane fft2(const ComplexPlane& plane) {
  require_finite(plane.values(), "fft2");
  ComplexPlane out(plane.rows(), plane.cols());
  execute(plane.data(), out.data(), plane.rows(), plane.cols(), PlanKind::Forward);
  return out;
}

ComplexPlane ifft2(const ComplexPlane& spectrum) {
  require_finite(spectrum.values(), "ifft2");
  ComplexPlane out(spectrum.rows(), spectrum.cols());
  inverse(spectrum.values(), out.values(), spectrum.rows(), spectrum.cols());
  return out;
}

FeatureSpectrum fft2(const FeatureMap& stack) {
  require_finite(stack.values(), "fft2");
  FeatureSpectrum out(stack.rows(), stack.cols(), stack.channels());
  const long channels = static_cast<long>(stack.channels());
  plan_cache().get(stack.rows(), stack.cols(), PlanKind::RealForward);
#pragma omp parallel for schedule(static)
  for (long ch = 0; ch < channels; ++ch) {
    forward_real(stack.channel(ch), out.channel(ch), stack.rows(), stack.cols());
  }
  return out;
}

FeatureSpectrum ifft2(const FeatureSpectrum& spectrum) {
  require_finite(spectrum.values(), "ifft2");
  FeatureSpectrum out(spectrum.rows(), spectrum.cols(), spectrum.channels());
  const long channels = static_cast<long>(spectrum.channels());
  plan_cache().get(spectrum.rows(), spectrum.cols(), PlanKind::Backward);
#pragma omp parallel for schedule(static)
  for (long ch = 0; ch < channels; ++ch) {
    inverse(spectrum.channel(ch), out.channel(ch), spectrum.rows(), spectrum.cols());
  }
  return out;
}

RealPlane ifft2_real(const ComplexPlane& spectrum, double rel_tol, const char* what) {
  require_finite(spectrum.values(), what);
  RealPlane out(spectrum.rows(), spectrum.cols());
  double max_re = 0.0, max_im = 0.0;
  inverse_real(spectrum.values(), out.data(), spectrum.rows(), spectrum.cols(), max_re, max_im);
  check_residue(max_re, max_im, rel_tol, 1.0 / static_cast<double>(out.size()), what);
  return out;
}

FeatureMap ifft2_real(const FeatureSpectrum& spectrum, double rel_tol, const char* what) {
  require_finite(spectrum.values(), what);
  FeatureMap out(spectrum.rows(), spectrum.cols(), spectrum.channels());
  const long channels = static_cast<long>(spectrum.channels());
  plan_cache().get(spectrum.rows(), spectrum.cols(), PlanKind::Backward);
  double max_re = 0.0, max_im = 0.0;
#pragma omp parallel for schedule(static) reduction(max : max_re, max_im)
  for (long ch = 0; ch < channels; ++ch) {
    inverse_real(spectrum.channel(ch), out.channel(ch).data(), spectrum.rows(), spectrum.cols(),
                 max_re, max_im);
  }
  check_residue(max_re, max_im, rel_tol, 1.0 / static_cast<double>(out.plane_size()), what);
  return out;
}

RealPlane real_part_checked(const ComplexPlane& plane, double rel_tol, const char* what) {
  double max_re = 0.0, max_im = 0.0;
  RealPlane out(plane.rows(), plane.cols());
  for (std::size_t i = 0; i < plane.size(); ++i) {
    max_re = std::max(max_re, std::abs(plane[i].real()));
    max_im = std::max(max_im, std::abs(plane[i].imag()));
    out[i] = plane[i].real();
  }
  if (max_im >= rel_tol * (max_re + 1e-30)) {
    throw std::logic_error(std::string(what) + ": imaginary residue " + std::to_string(max_im) +
                           " exceeds tolerance (max real " + std::to_string(max_re) + ")");
  }
  return out;
}

FeatureMap real_part_checked(const FeatureSpectrum& stack, double rel_tol, const char* what) {
  double max_re = 0.0, max_im = 0.0;
  FeatureMap out(stack.rows(), stack.cols(), stack.channels());
  for (std::size_t i = 0; i < stack.size(); ++i) {
    max_re = std::max(max_re, std::abs(stack[i].real()));
    max_im = std::max(max_im, std::abs(stack[i].imag()));
    out[i] = stack[i].real();
  }
  if (max_im >= rel_tol * (max_re + 1e-30)) {
    throw std::logic_error(std::string(what) + ": imaginary residue " + std::to_string(max_im) +
                           " exceeds tolerance (max real " + std::to_string(max_re) + ")");
  }
  return out;
}

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double max_abs(std::span<const Complex> v) {
  double m = 0.0;
  for (const Complex& x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace corrtrack
