#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "corrtrack/oracle.hpp"
#include "test_util.hpp"

using namespace corrtrack;
using corrtrack::testing::random_map;
using corrtrack::testing::random_plane;
using corrtrack::testing::rel_error;

namespace {

FeatureMap single(const RealPlane& p) {
  FeatureMap f(p.rows(), p.cols(), 1);
  f.set_plane(0, p);
  return f;
}

}  // namespace

TEST_CASE("direct DFT of a unit impulse at (0, 1)") {
  RealPlane p(2, 3, 0.0);
  p(0, 1) = 1.0;
  const auto f = oracle::direct_dft2(p);
  for (std::size_t u = 0; u < 2; ++u) {
    for (std::size_t v = 0; v < 3; ++v) {
      const double angle = -2.0 * std::numbers::pi * static_cast<double>(v) / 3.0;
      CHECK(std::abs(f(u, v) - std::polar(1.0, angle)) < 1e-15);
    }
  }
  CHECK_THROWS_AS(oracle::direct_dft2(RealPlane(65, 65)), std::invalid_argument);
}

TEST_CASE("correlation with a delta filter reads shifted features") {
  std::mt19937_64 rng(1);
  const auto z = random_plane(5, 4, rng);
  RealPlane w(5, 4, 0.0);
  w(2, 1) = 1.0;
  const auto g = oracle::circular_correlation(single(w), single(z));
  for (std::size_t m = 0; m < 5; ++m) {
    for (std::size_t n = 0; n < 4; ++n) CHECK(g(m, n) == z((m + 2) % 5, (n + 1) % 4));
  }
  CHECK_THROWS_AS(oracle::circular_correlation(random_map(3, 3, 2, rng), random_map(3, 3, 1, rng)),
                  std::invalid_argument);
}

TEST_CASE("correlation sums over channels") {
  std::mt19937_64 rng(2);
  const auto w = random_map(4, 3, 2, rng);
  const auto z = random_map(4, 3, 2, rng);
  const auto g = oracle::circular_correlation(w, z);
  const auto g0 = oracle::circular_correlation(single(w.plane(0)), single(z.plane(0)));
  const auto g1 = oracle::circular_correlation(single(w.plane(1)), single(z.plane(1)));
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(std::abs(g[i] - g0[i] - g1[i]) < 1e-14);
}

TEST_CASE("dense ridge solution is a stationary point of the ridge loss") {
  std::mt19937_64 rng(3);
  for (std::size_t d = 1; d <= 3; ++d) {
    oracle::DenseRidgeProblem p{random_map(5, 4, d, rng), random_plane(5, 4, rng), 1e-2};
    const auto w = oracle::dense_ridge_solve(p);
    const double base = oracle::ridge_loss(p, w);
    for (std::size_t i = 0; i < w.size(); ++i) {
      for (double step : {1e-3, -1e-3}) {
        FeatureMap moved = w;
        moved[i] += step;
        // Quadratic: any move raises the loss by a positive second-order term.
        CHECK(oracle::ridge_loss(p, moved) > base);
      }
    }
  }
}

TEST_CASE("dense ridge reproduces the label when features are a delta") {
  std::mt19937_64 rng(4);
  RealPlane delta(4, 4, 0.0);
  delta(0, 0) = 1.0;
  oracle::DenseRidgeProblem p{single(delta), random_plane(4, 4, rng), 1e-10};
  const auto w = oracle::dense_ridge_solve(p);
  const auto g = oracle::circular_correlation(w, single(delta));
  CHECK(rel_error(g, p.label) < 1e-8);
}

TEST_CASE("dense ridge rejects oversized and malformed problems") {
  std::mt19937_64 rng(5);
  CHECK_THROWS_AS(oracle::dense_ridge_solve({random_map(9, 8, 1, rng), random_plane(9, 8, rng)}),
                  std::invalid_argument);
  CHECK_THROWS_AS(oracle::dense_ridge_solve({random_map(4, 4, 4, rng), random_plane(4, 4, rng)}),
                  std::invalid_argument);
  CHECK_THROWS_AS(oracle::dense_ridge_solve({random_map(4, 4, 1, rng), random_plane(4, 3, rng)}),
                  std::invalid_argument);
  CHECK_THROWS_AS(
      oracle::dense_ridge_solve({random_map(4, 4, 1, rng), random_plane(4, 4, rng), 0.0}),
      std::invalid_argument);
}

TEST_CASE("finite differences accept a correct gradient and flag a wrong one") {
  const oracle::ScalarFn f = [](std::span<const double> x) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += (i + 1.0) * x[i] * x[i] * x[i];
    return s;
  };
  const std::vector<double> x{0.3, -0.7, 1.1, 0.2};
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) g[i] = 3.0 * (i + 1.0) * x[i] * x[i];
  const auto ok = oracle::finite_diff_check(f, x, g);
  CHECK(ok.max_rel_error < 1e-8);
  CHECK_FALSE(ok.directional);
  CHECK(ok.finite);

  g[2] *= 1.01;
  CHECK(oracle::finite_diff_check(f, x, g).max_rel_error > 1e-3);
  CHECK(oracle::directional_check(f, x, g, 20, 1).max_rel_error > 1e-4);
  CHECK_THROWS_AS(oracle::finite_diff_check(f, x, std::vector<double>(3)), std::invalid_argument);
}

TEST_CASE("large inputs switch to random directions") {
  const oracle::ScalarFn f = [](std::span<const double> x) {
    return std::inner_product(x.begin(), x.end(), x.begin(), 0.0);
  };
  std::vector<double> x(oracle::kExhaustiveLimit + 1);
  std::iota(x.begin(), x.end(), 0.0);
  for (double& v : x) v = std::sin(v);
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) g[i] = 2.0 * x[i];
  const auto r = oracle::finite_diff_check(f, x, g, 1e-5, 10);
  CHECK(r.directional);
  CHECK(r.evaluations >= 20);
  CHECK(r.max_rel_error < 1e-6);
}

TEST_CASE("region-aware probes shrink the step near a kink") {
  // |x - 3e-5|: the default step of 1e-5 from x = 4e-5 still stays on one side,
  // but from x = 3.5e-5 it crosses the kink.
  const oracle::PiecewiseFn f = [](std::span<const double> x) {
    const double d = x[0] - 3e-5;
    return oracle::Sample{std::abs(d), d > 0.0 ? 1u : 0u};
  };
  const std::vector<double> x{3.5e-5};
  const std::vector<double> g{1.0};
  const auto r = oracle::finite_diff_check(f, x, g);
  CHECK(r.max_rel_error < 1e-9);
  CHECK(r.straddled == 0);

  const oracle::ScalarFn plain = [](std::span<const double> v) { return std::abs(v[0] - 3e-5); };
  CHECK(oracle::finite_diff_check(plain, x, g).max_rel_error > 0.1);
}
