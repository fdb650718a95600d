#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "corrtrack/oracle.hpp"
#include "corrtrack/spectral.hpp"
#include "test_util.hpp"

using namespace corrtrack;
using corrtrack::testing::random_plane;
using corrtrack::testing::rel_error;

TEST_CASE("fft2 of a constant plane is DC only") {
  const auto f = fft2(RealPlane(2, 2, 1.0));
  CHECK(f(0, 0) == Complex(4.0, 0.0));
  CHECK(std::abs(f(0, 1)) == 0.0);
  CHECK(std::abs(f(1, 0)) == 0.0);
  CHECK(std::abs(f(1, 1)) == 0.0);
}

TEST_CASE("fft2 of an impulse is flat") {
  RealPlane p(5, 3, 0.0);
  p(0, 0) = 1.0;
  const auto f = fft2(p);
  for (const Complex& v : f.values()) {
    CHECK(std::abs(v - Complex(1.0, 0.0)) < 1e-15);
  }
}

TEST_CASE("fft2 of [[1,2],[3,4]]") {
  RealPlane p(2, 2, std::vector<double>{1, 2, 3, 4});
  const ComplexPlane expected(2, 2, std::vector<Complex>{10.0, -2.0, -4.0, 0.0});
  const auto direct = oracle::direct_dft2(p);
  const auto fast = fft2(p);
  CHECK(rel_error(direct, expected) < 1e-14);
  CHECK(rel_error(fast, expected) < 1e-14);
}

TEST_CASE("ifft2 inverts fft2 and maps zero to zero") {
  std::mt19937_64 rng(11);
  for (auto [m, n] : {std::pair{1, 1}, {4, 4}, {7, 5}, {16, 9}, {125, 125}}) {
    const auto p = random_plane(m, n, rng);
    const auto back = ifft2(fft2(p));
    double err = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) err = std::max(err, std::abs(back[i] - p[i]));
    CHECK(err < 1e-12 * max_abs(p.values()));
  }
  const auto z = ifft2(ComplexPlane(3, 4));
  CHECK(max_abs(z.values()) == 0.0);
}

TEST_CASE("inverse of a conjugate-symmetric spectrum is real") {
  std::mt19937_64 rng(12);
  const auto spec = fft2(random_plane(9, 12, rng));
  const auto back = ifft2(spec);
  double max_re = 0.0, max_im = 0.0;
  for (const auto& v : back.values()) {
    max_re = std::max(max_re, std::abs(v.real()));
    max_im = std::max(max_im, std::abs(v.imag()));
  }
  CHECK(max_im < 1e-12 * max_re);
}

TEST_CASE("non-finite input is rejected") {
  RealPlane p(3, 3, 0.0);
  p(1, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(fft2(p), NonFiniteError);
  ComplexPlane c(2, 2);
  c(0, 1) = Complex(std::numeric_limits<double>::infinity(), 0.0);
  CHECK_THROWS_AS(ifft2(c), NonFiniteError);
  CHECK_THROWS_AS(RealPlane(0, 3), std::invalid_argument);
}

TEST_CASE("properties over random planes") {
  std::mt19937_64 rng(13);
  std::uniform_int_distribution<int> side(1, 20);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t m = side(rng), n = side(rng);
    const auto x = random_plane(m, n, rng);
    const auto z = random_plane(m, n, rng);
    const auto fx = fft2(x);
    const auto fz = fft2(z);

    // Parseval
    double e_space = 0.0, e_freq = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      e_space += x[i] * x[i];
      e_freq += std::norm(fx[i]);
    }
    CHECK(std::abs(e_space - e_freq / static_cast<double>(m * n)) < 1e-10 * e_space);

    // Linearity
    const double a = 0.7, b = -1.3;
    RealPlane combo(m, n);
    for (std::size_t i = 0; i < x.size(); ++i) combo[i] = a * x[i] + b * z[i];
    const auto fc = fft2(combo);
    ComplexPlane expected(m, n);
    for (std::size_t i = 0; i < x.size(); ++i) expected[i] = a * fx[i] + b * fz[i];
    CHECK(rel_error(fc, expected) < 1e-10);

    // Conjugate symmetry for real input
    double sym = 0.0;
    for (std::size_t u = 0; u < m; ++u) {
      for (std::size_t v = 0; v < n; ++v) {
        sym = std::max(sym, std::abs(fx(u, v) - std::conj(fx((m - u) % m, (n - v) % n))));
      }
    }
    CHECK(sym < 1e-12 * max_abs(fx.values()));

    // Shift theorem
    const long dm = static_cast<long>(trial % m), dn = static_cast<long>((3 * trial) % n);
    const auto fs = fft2(circshift(x, dm, dn));
    ComplexPlane shifted(m, n);
    for (std::size_t u = 0; u < m; ++u) {
      for (std::size_t v = 0; v < n; ++v) {
        const double ph = -2.0 * std::numbers::pi *
                          (static_cast<double>(u * dm) / m + static_cast<double>(v * dn) / n);
        shifted(u, v) = fx(u, v) * Complex(std::cos(ph), std::sin(ph));
      }
    }
    CHECK(rel_error(fs, shifted) < 1e-10);
  }
}

TEST_CASE("fft2 agrees with the direct DFT on 50 random planes") {
  std::mt19937_64 rng(14);
  std::uniform_int_distribution<int> side(1, 16);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    ComplexPlane p(side(rng), side(rng));
    std::uniform_real_distribution<double> u(-1, 1);
    for (auto& v : p.values()) v = Complex(u(rng), u(rng));
    worst = std::max(worst, rel_error(fft2(p), oracle::direct_dft2(p)));
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("stack transforms match per-plane transforms") {
  std::mt19937_64 rng(15);
  const auto stack = corrtrack::testing::random_map(6, 7, 4, rng);
  const auto spec = fft2(stack);
  for (std::size_t ch = 0; ch < 4; ++ch) {
    CHECK(rel_error(spec.plane(ch), fft2(stack.plane(ch))) == 0.0);
  }
  const auto back = real_part_checked(ifft2(spec), 1e-8, "test");
  CHECK(rel_error(back, stack) < 1e-12);
}

TEST_CASE("real_part_checked rejects imaginary residue") {
  ComplexPlane p(2, 2, Complex(1.0, 0.0));
  p(1, 1) = Complex(1.0, 1e-3);
  CHECK_THROWS_AS(real_part_checked(p, 1e-8, "test"), std::logic_error);
}

TEST_CASE("real-input transform matches the complex transform") {
  std::mt19937_64 rng(14);
  for (auto [m, n] : {std::pair{1, 1}, {1, 6}, {6, 1}, {5, 8}, {8, 5}, {13, 13}}) {
    const auto p = random_plane(m, n, rng);
    ComplexPlane c(m, n);
    for (std::size_t i = 0; i < p.size(); ++i) c[i] = p[i];
    CHECK(rel_error(fft2(p), fft2(c)) < 1e-14);
  }
}

TEST_CASE("fused inverse agrees with ifft2 and rejects complex output") {
  std::mt19937_64 rng(15);
  FeatureMap stack(7, 6, 3);
  for (std::size_t ch = 0; ch < 3; ++ch) stack.set_plane(ch, random_plane(7, 6, rng));
  const auto spec = fft2(stack);
  CHECK(rel_error(ifft2_real(spec, 1e-8, "t"), real_part_checked(ifft2(spec), 1e-8, "t")) < 1e-15);
  CHECK(rel_error(ifft2_real(spec, 1e-8, "t"), stack) < 1e-13);

  ComplexPlane skew(4, 4);
  skew(0, 1) = Complex(1.0, 0.0);
  CHECK_THROWS_AS(ifft2_real(skew, 1e-8, "t"), std::logic_error);
  CHECK_THROWS_AS(real_part_checked(ifft2(skew), 1e-8, "t"), std::logic_error);
}
