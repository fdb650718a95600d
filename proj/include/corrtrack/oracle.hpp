#pragma once

// Brute-force references for the fast paths. Nothing in this header may call
// into the FFT or the per-bin filter solver.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "corrtrack/spectral.hpp"

namespace corrtrack::oracle {

inline constexpr std::size_t kMaxDirectDftCells = 4096;
inline constexpr std::size_t kMaxRidgeSide = 8;
inline constexpr std::size_t kMaxRidgeChannels = 3;

/// Literal double-sum DFT, forward and unnormalized.
ComplexPlane direct_dft2(const ComplexPlane& plane);
ComplexPlane direct_dft2(const RealPlane& plane);

/// g(m, n) = sum_l sum_{i,j} w^l(i, j) z^l(m + i, n + j), indices wrapped.
RealPlane circular_correlation(const FeatureMap& filter, const FeatureMap& features);

struct DenseRidgeProblem {
  FeatureMap features;
  RealPlane label;
  double lambda = 1e-4;
};

/// Minimizes ||sum_l w^l * x^l - y||^2 + lambda sum_l ||w^l||^2 by forming
/// the explicit circular-correlation operator and factorizing the normal
/// equations.
FeatureMap dense_ridge_solve(const DenseRidgeProblem& p);

/// Ridge objective evaluated in the spatial domain.
double ridge_loss(const DenseRidgeProblem& p, const FeatureMap& filter);

struct GradCheckReport {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t evaluations = 0;
  bool finite = true;
  bool directional = false;
  std::size_t straddled = 0;  // probes that still crossed a region boundary at the smallest step
  std::string detail;
};

using ScalarFn = std::function<double(std::span<const double>)>;

/// Value plus an identifier of the smooth piece the point lies in (for a ReLU
/// network, a hash of the activation masks).
struct Sample {
  double value = 0.0;
  std::uint64_t region = 0;
};
using PiecewiseFn = std::function<Sample(std::span<const double>)>;

inline constexpr std::size_t kExhaustiveLimit = 2000;

/// Central differences (f(x + eps e) - f(x - eps e)) / 2eps compared with an
/// analytic gradient. Per-coordinate for vectors of at most kExhaustiveLimit
/// entries, otherwise along `directions` seeded random unit directions.
/// Relative error is ||a - n||_inf / max(||a||_inf, ||n||_inf) in the
/// exhaustive case and |<a,v> - fd| / max(|<a,v>|, |fd|) per direction.
GradCheckReport finite_diff_check(const ScalarFn& f, std::span<const double> point,
                                  std::span<const double> analytic, double eps = 1e-5,
                                  std::size_t directions = 100, std::uint64_t seed = 7);

GradCheckReport exhaustive_check(const ScalarFn& f, std::span<const double> point,
                                 std::span<const double> analytic, double eps = 1e-5);

GradCheckReport directional_check(const ScalarFn& f, std::span<const double> point,
                                  std::span<const double> analytic, std::size_t directions,
                                  std::uint64_t seed, double eps = 1e-5);

/// Same checks for piecewise-smooth functions. A probe whose region differs
/// from the base point's is retried with a step 10x smaller, up to four times.
GradCheckReport finite_diff_check(const PiecewiseFn& f, std::span<const double> point,
                                  std::span<const double> analytic, double eps = 1e-5,
                                  std::size_t directions = 100, std::uint64_t seed = 7);
GradCheckReport exhaustive_check(const PiecewiseFn& f, std::span<const double> point,
                                 std::span<const double> analytic, double eps = 1e-5);
GradCheckReport directional_check(const PiecewiseFn& f, std::span<const double> point,
                                  std::span<const double> analytic, std::size_t directions,
                                  std::uint64_t seed, double eps = 1e-5);

}  // namespace corrtrack::oracle
