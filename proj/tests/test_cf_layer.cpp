#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "corrtrack/cf_layer.hpp"
#include "corrtrack/oracle.hpp"
#include "corrtrack/training.hpp"
#include "test_util.hpp"

using namespace corrtrack;
using corrtrack::testing::random_map;
using corrtrack::testing::random_plane;
using corrtrack::testing::rel_error;

namespace {

double loss_of(const FeatureMap& x, const FeatureMap& z, const RealPlane& label,
               const RealPlane& target, const CfConfig& cfg) {
  return cf_loss(cf_forward(x, z, label, cfg).response, target).loss;
}

FeatureMap unflatten(std::span<const double> v, const FeatureMap& like) {
  FeatureMap out(like.rows(), like.cols(), like.channels());
  std::copy(v.begin(), v.end(), out.values().begin());
  return out;
}

}  // namespace

TEST_CASE("solve_filter with an impulse template returns the conjugate label") {
  std::mt19937_64 rng(1);
  const auto y = random_plane(4, 5, rng);
  RealPlane impulse(4, 5, 0.0);
  impulse(0, 0) = 1.0;
  FeatureMap x(4, 5, 1);
  x.set_plane(0, impulse);
  const CfConfig cfg{1e-12};
  const auto ys = fft2(y);
  const auto w = solve_filter(fft2(x), ys, cfg);
  for (std::size_t i = 0; i < ys.size(); ++i) {
    CHECK(std::abs(w[i] - std::conj(ys[i]) / (1.0 + cfg.lambda)) < 1e-14);
  }
}

TEST_CASE("solve_filter vanishes under huge regularization") {
  std::mt19937_64 rng(2);
  const auto x = random_map(6, 6, 2, rng);
  const auto y = random_plane(6, 6, rng);
  const auto w = solve_filter(fft2(x), fft2(y), CfConfig{1e12});
  CHECK(max_abs(w.values()) < 1e-10);
}

TEST_CASE("solve_filter rejects mismatched shapes and bad lambda") {
  std::mt19937_64 rng(3);
  const auto x = random_map(4, 4, 2, rng);
  CHECK_THROWS_AS(solve_filter(fft2(x), fft2(random_plane(4, 5, rng)), CfConfig{}),
                  std::invalid_argument);
  CHECK_THROWS_AS(solve_filter(fft2(x), fft2(random_plane(4, 4, rng)), CfConfig{0.0}),
                  std::invalid_argument);
  CHECK_THROWS_AS(cf_forward(x, random_map(4, 4, 3, rng), random_plane(4, 4, rng), CfConfig{}),
                  std::invalid_argument);
}

TEST_CASE("solve_filter matches the dense ridge oracle on a random 4x4x2 instance") {
  std::mt19937_64 rng(4);
  const auto x = random_map(4, 4, 2, rng);
  const auto y = random_plane(4, 4, rng);
  const auto w_fast = real_part_checked(ifft2(solve_filter(fft2(x), fft2(y), CfConfig{1e-4})),
                                        1e-8, "test");
  const auto w_dense = oracle::dense_ridge_solve({x, y, 1e-4});
  CHECK(rel_error(w_fast, w_dense) < 1e-9);
}

TEST_CASE("self-correlation reproduces the label in the small-lambda limit") {
  std::mt19937_64 rng(5);
  const auto x = random_map(8, 8, 1, rng);
  const auto y = gaussian_label(8, 8, 1.5);
  const auto g = cf_forward(x, x, y, CfConfig{1e-13}).response;
  CHECK(rel_error(g, y) < 1e-9);
}

TEST_CASE("shifted search patch moves the response peak by the same shift") {
  std::mt19937_64 rng(6);
  const auto x = random_map(12, 10, 2, rng);
  const auto y = gaussian_label(12, 10, 1.0);
  const CfConfig cfg{1e-4};
  const auto self = cf_forward(x, x, y, cfg).response;
  for (auto [dr, dc] : {std::pair{1L, 0L}, {0L, 3L}, {-2L, 4L}, {5L, -4L}}) {
    const auto g = cf_forward(x, circshift(x, dr, dc), y, cfg).response;
    CHECK(rel_error(g, circshift(self, dr, dc)) < 1e-9);
  }
}

TEST_CASE("cf_forward matches explicit spatial correlation with the filter") {
  std::mt19937_64 rng(7);
  const auto x = random_map(4, 4, 2, rng);
  const auto z = random_map(4, 4, 2, rng);
  const auto y = random_plane(4, 4, rng);
  const auto fwd = cf_forward(x, z, y, CfConfig{1e-4});
  const auto w = oracle::dense_ridge_solve({x, y, 1e-4});
  CHECK(rel_error(fwd.response, oracle::circular_correlation(w, z)) < 1e-9);
}

TEST_CASE("cf_loss data term and gradient") {
  std::mt19937_64 rng(8);
  const auto g = random_plane(5, 6, rng);
  const auto same = cf_loss(g, g);
  CHECK(same.loss == 0.0);
  CHECK(max_abs(same.dloss_dresponse.values()) == 0.0);

  const auto zero = cf_loss(g, RealPlane(5, 6, 0.0));
  double sq = 0.0;
  for (double v : g.values()) sq += v * v;
  CHECK(zero.loss == doctest::Approx(sq).epsilon(1e-15));
  for (std::size_t i = 0; i < g.size(); ++i) CHECK(zero.dloss_dresponse[i] == 2.0 * g[i]);

  const auto target = random_plane(5, 6, rng);
  const auto l = cf_loss(g, target);
  const auto rep = oracle::exhaustive_check(
      [&](std::span<const double> v) {
        return cf_loss(RealPlane(5, 6, std::vector<double>(v.begin(), v.end())), target).loss;
      },
      g.values(), l.dloss_dresponse.values(), 1e-5);
  CHECK(rep.max_rel_error < 1e-7);
  CHECK_THROWS_AS(cf_loss(g, RealPlane(6, 5)), std::invalid_argument);
}

TEST_CASE("backward passes on trivial inputs") {
  std::mt19937_64 rng(9);
  const auto x = random_map(5, 5, 2, rng);
  const auto z = random_map(5, 5, 2, rng);
  const auto y = random_plane(5, 5, rng);
  const auto fwd = cf_forward(x, z, y, CfConfig{});
  const RealPlane zero(5, 5, 0.0);
  CHECK(max_abs(cf_backward_z(zero, fwd.ctx).values()) == 0.0);
  CHECK(max_abs(cf_backward_x(zero, fwd.ctx).values()) == 0.0);
  CHECK_THROWS_AS(cf_backward_z(RealPlane(4, 5), fwd.ctx), std::invalid_argument);
  CHECK_THROWS_AS(cf_backward_x(RealPlane(5, 4), fwd.ctx), std::invalid_argument);
}

TEST_CASE("identity filter passes the gradient through unchanged") {
  std::mt19937_64 rng(10);
  const auto dldg = random_plane(6, 7, rng);
  CfForwardContext ctx;
  ctx.x_spec = FeatureSpectrum(6, 7, 1, Complex(1.0, 0.0));
  ctx.z_spec = ctx.x_spec;
  ctx.filter_spec = FeatureSpectrum(6, 7, 1, Complex(1.0, 0.0));
  ctx.label_spec_conj = ComplexPlane(6, 7);
  ctx.denom = RealPlane(6, 7, 1.0);
  ctx.resp_spec = ComplexPlane(6, 7);
  const auto g = cf_backward_z(dldg, ctx);
  CHECK(rel_error(g.plane(0), dldg) < 1e-15);
}

TEST_CASE("learning-branch gradient vanishes in the regularization limit") {
  std::mt19937_64 rng(11);
  const auto x = random_map(5, 5, 2, rng);
  const auto z = random_map(5, 5, 2, rng);
  const auto y = random_plane(5, 5, rng);
  const auto fwd = cf_forward(x, z, y, CfConfig{1e12});
  const auto l = cf_loss(fwd.response, random_plane(5, 5, rng));
  CHECK(max_abs(cf_backward_x(l.dloss_dresponse, fwd.ctx).values()) < 1e-6);
}

TEST_CASE("both backward branches match finite differences on random 5x5x2 instances") {
  std::mt19937_64 rng(12);
  const CfConfig cfg{1e-4};
  double worst_x = 0.0, worst_z = 0.0;
  for (int trial = 0; trial < 10; ++trial) {
    const auto x = random_map(5, 5, 2, rng);
    const auto z = random_map(5, 5, 2, rng);
    const auto y = gaussian_label(5, 5, 1.0);
    const auto target = random_plane(5, 5, rng, 0.0, 1.0);
    const auto fwd = cf_forward(x, z, y, cfg);
    const auto l = cf_loss(fwd.response, target);
    const auto gx = cf_backward_x(l.dloss_dresponse, fwd.ctx);
    const auto gz = cf_backward_z(l.dloss_dresponse, fwd.ctx);
    worst_z = std::max(worst_z, oracle::exhaustive_check(
                                    [&](std::span<const double> v) {
                                      return loss_of(x, unflatten(v, z), y, target, cfg);
                                    },
                                    z.values(), gz.values())
                                    .max_rel_error);
    worst_x = std::max(worst_x, oracle::exhaustive_check(
                                    [&](std::span<const double> v) {
                                      return loss_of(unflatten(v, x), z, y, target, cfg);
                                    },
                                    x.values(), gx.values())
                                    .max_rel_error);
  }
  MESSAGE("worst relative error: x-branch " << worst_x << ", z-branch " << worst_z);
  CHECK(worst_x < 1e-5);
  CHECK(worst_z < 1e-5);
}

TEST_CASE("directional derivatives along 100 random directions") {
  std::mt19937_64 rng(13);
  const CfConfig cfg{1e-4};
  const auto x = random_map(6, 6, 3, rng);
  const auto z = random_map(6, 6, 3, rng);
  const auto y = gaussian_label(6, 6, 1.0);
  const auto target = gaussian_label(6, 6, 1.5);
  const auto fwd = cf_forward(x, z, y, cfg);
  const auto l = cf_loss(fwd.response, target);
  const auto gx = cf_backward_x(l.dloss_dresponse, fwd.ctx);
  const auto gz = cf_backward_z(l.dloss_dresponse, fwd.ctx);
  const auto rx = oracle::directional_check(
      [&](std::span<const double> v) { return loss_of(unflatten(v, x), z, y, target, cfg); },
      x.values(), gx.values(), 100, 99);
  const auto rz = oracle::directional_check(
      [&](std::span<const double> v) { return loss_of(x, unflatten(v, z), y, target, cfg); },
      z.values(), gz.values(), 100, 98);
  CHECK(rx.max_rel_error < 1e-5);
  CHECK(rz.max_rel_error < 1e-5);
}

TEST_CASE("backward maps are linear in the upstream gradient") {
  std::mt19937_64 rng(14);
  const auto x = random_map(7, 5, 2, rng);
  const auto z = random_map(7, 5, 2, rng);
  const auto fwd = cf_forward(x, z, gaussian_label(7, 5, 1.0), CfConfig{});
  const auto up = random_plane(7, 5, rng);
  RealPlane scaled = up;
  for (double& v : scaled.values()) v *= 3.5;
  const auto gx = cf_backward_x(up, fwd.ctx), gx3 = cf_backward_x(scaled, fwd.ctx);
  const auto gz = cf_backward_z(up, fwd.ctx), gz3 = cf_backward_z(scaled, fwd.ctx);
  for (std::size_t i = 0; i < gx.size(); ++i) {
    CHECK(gx3[i] == doctest::Approx(3.5 * gx[i]).epsilon(1e-12).scale(max_abs(gx.values())));
    CHECK(gz3[i] == doctest::Approx(3.5 * gz[i]).epsilon(1e-12).scale(max_abs(gz.values())));
  }
}

TEST_CASE("brute-force equivalence on random small instances") {
  std::mt19937_64 rng(15);
  std::uniform_int_distribution<int> side(1, 8), chans(1, 3);
  double worst_w = 0.0, worst_g = 0.0;
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t m = side(rng), n = side(rng), d = chans(rng);
    const auto x = random_map(m, n, d, rng);
    const auto z = random_map(m, n, d, rng);
    const auto y = random_plane(m, n, rng);
    const auto w_dense = oracle::dense_ridge_solve({x, y, 1e-4});
    const auto w_fast =
        real_part_checked(ifft2(solve_filter(fft2(x), fft2(y), CfConfig{})), 1e-8, "test");
    worst_w = std::max(worst_w, rel_error(w_fast, w_dense));
    worst_g = std::max(worst_g, rel_error(cf_forward(x, z, y, CfConfig{}).response,
                                          oracle::circular_correlation(w_dense, z)));
  }
  CHECK(worst_w < 1e-9);
  CHECK(worst_g < 1e-9);
}

TEST_CASE("denominator never drops below lambda") {
  std::mt19937_64 rng(16);
  const auto x = random_map(6, 6, 2, rng);
  FeatureMap zeros(6, 6, 2, 0.0);
  const auto fwd = cf_forward(zeros, x, gaussian_label(6, 6, 1.0), CfConfig{1e-4});
  for (double d : fwd.ctx.denom.values()) CHECK(d >= 1e-4);
  for (double g : fwd.response.values()) CHECK(std::isfinite(g));
}
