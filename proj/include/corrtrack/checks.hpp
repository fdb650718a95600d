#pragma once
// Self-verification suites run by the `gradcheck` and `selftest` commands and
// by the acceptance runner. Each check compares a fast path against an oracle
// on seeded random instances.

#include <cstdint>
#include <string>
#include <vector>

namespace corrtrack::checks {

struct CheckResult {
  std::string name;
  double value = 0.0;  // worst error observed
  double bound = 0.0;  // pass iff value < bound
  std::size_t cases = 0;
  double seconds = 0.0;
  std::string detail;

  bool pass() const { return value < bound; }
};

/// ifft2(solve_filter) against the dense ridge solve, M, N <= 8, D <= 3.
CheckResult ridge_equivalence(std::size_t instances, std::uint64_t seed);
/// cf_forward response against spatial correlation with the oracle filter.
CheckResult detection_equivalence(std::size_t instances, std::uint64_t seed);
/// fft2 against the definition-literal DFT on planes up to 16x16.
CheckResult dft_equivalence(std::size_t planes, std::uint64_t seed);
/// Dense ridge optimum against random perturbations; value is the largest
/// loss decrease found (0 when the optimum holds).
CheckResult ridge_optimality(std::size_t perturbations, std::uint64_t seed);

/// Both CF-layer backward branches on random 5x5x2 instances, per coordinate.
CheckResult cf_gradients(std::size_t instances, std::uint64_t seed);
/// 3x3 convolution, 7x7x2 input, 2 -> 3 channels, dilation 1 and 2.
CheckResult conv_gradients(std::uint64_t seed);
CheckResult relu_gradients(std::uint64_t seed);
/// 4x4x8 input with the default constants and with a strong alpha.
CheckResult lrn_gradients(std::uint64_t seed);
/// Every parameter block and the input of each architecture on a 9x9x3 image.
CheckResult network_gradients(std::uint64_t seed);
/// Image -> features -> window -> CF layer -> loss on 9x9x3 pairs, along
/// random directions in parameter and image space.
CheckResult end_to_end_gradients(std::uint64_t seed);

/// Recursive filter state after `frames` random frames against the explicit
/// geometrically weighted sum.
CheckResult incremental_update(std::size_t frames, std::uint64_t seed);
/// Decoded displacement of every principal shift of a size x size response;
/// value is the number of mismatches.
CheckResult shift_decoding(std::size_t size);

std::vector<CheckResult> gradcheck_suite(std::uint64_t seed);
std::vector<CheckResult> selftest_suite(std::uint64_t seed);

std::string format_result(const CheckResult& r);

}  // namespace corrtrack::checks
