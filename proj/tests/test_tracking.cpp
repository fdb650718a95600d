#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "corrtrack/evalkit.hpp"
#include "corrtrack/tracking.hpp"
#include "corrtrack/training.hpp"
#include "test_util.hpp"

using namespace corrtrack;
using corrtrack::testing::random_map;
using corrtrack::testing::rel_error;

namespace {

FilterState random_state(std::mt19937_64& rng, const ComplexPlane& label_conj) {
  return frame_statistics(fft2(random_map(6, 6, 2, rng)), label_conj);
}

ComplexPlane label_conj(std::size_t n) {
  auto s = fft2(gaussian_label(n, n, 1.0));
  for (auto& v : s.values()) v = std::conj(v);
  return s;
}

// Shifts the picture content right by dx and down by dy, replicating edges.
Image translate(const Image& img, int dx, int dy) {
  Image out(img.rows(), img.cols());
  const long rows = static_cast<long>(img.rows()), cols = static_cast<long>(img.cols());
  for (std::size_t ch = 0; ch < 3; ++ch) {
    for (long r = 0; r < rows; ++r) {
      for (long c = 0; c < cols; ++c) {
        const long sr = std::clamp(r - dy, 0L, rows - 1), sc = std::clamp(c - dx, 0L, cols - 1);
        out.at(ch, r, c) = img.at(ch, sr, sc);
      }
    }
  }
  return out;
}

HyperParams fast_params() {
  HyperParams p;
  p.input_size = 63;
  return p;
}

}  // namespace

TEST_CASE("update with beta 0 keeps the state, beta 1 replaces it") {
  std::mt19937_64 rng(1);
  const auto y = label_conj(6);
  const auto s = random_state(rng, y);
  const auto x = fft2(random_map(6, 6, 2, rng));
  const auto keep = update_filter_state(s, x, y, 0.0);
  CHECK(rel_error(keep.numerator, s.numerator) == 0.0);
  CHECK(rel_error(keep.denominator, s.denominator) == 0.0);
  CHECK(keep.frames == 2);
  const auto fresh = frame_statistics(x, y);
  const auto replace = update_filter_state(s, x, y, 1.0);
  CHECK(rel_error(replace.numerator, fresh.numerator) == 0.0);
  CHECK(rel_error(replace.denominator, fresh.denominator) == 0.0);
  CHECK_THROWS_AS(update_filter_state(s, x, y, 1.5), std::invalid_argument);
  CHECK_THROWS_AS(update_filter_state(s, fft2(random_map(6, 6, 3, rng)), y, 0.5),
                  std::invalid_argument);
}

TEST_CASE("five frames of updates equal the explicit weighted sum") {
  std::mt19937_64 rng(2);
  const auto y = label_conj(6);
  const double beta = 0.3;
  std::vector<FeatureSpectrum> frames;
  for (int i = 0; i < 5; ++i) frames.push_back(fft2(random_map(6, 6, 2, rng)));
  FilterState s = frame_statistics(frames[0], y);
  for (int i = 1; i < 5; ++i) s = update_filter_state(s, frames[i], y, beta);
  CHECK(s.frames == 5);

  FeatureSpectrum num(6, 6, 2);
  RealPlane den(6, 6, 0.0);
  for (int i = 0; i < 5; ++i) {
    const double w = i == 0 ? std::pow(1 - beta, 4) : beta * std::pow(1 - beta, 4 - i);
    const auto f = frame_statistics(frames[i], y);
    for (std::size_t k = 0; k < num.size(); ++k) num[k] += w * f.numerator[k];
    for (std::size_t k = 0; k < den.size(); ++k) den[k] += w * f.denominator[k];
  }
  CHECK(rel_error(s.numerator, num) < 1e-13);
  CHECK(rel_error(s.denominator, den) < 1e-13);
  const auto w = filter_from_state(s, 1e-4);
  CHECK(std::abs(w[7] - num[7] / (den[7] + 1e-4)) < 1e-12 * std::abs(w[7]));
}

TEST_CASE("peak positions decode to wrapped displacements") {
  using P = std::pair<long, long>;
  CHECK(peak_to_displacement(62, 62, 125, 125) == P{0, 0});
  CHECK(peak_to_displacement(63, 60, 125, 125) == P{1, -2});
  CHECK(peak_to_displacement(0, 124, 125, 125) == P{-62, 62});
  CHECK(peak_to_displacement(8, 8, 16, 16) == P{0, 0});
  CHECK(peak_to_displacement(0, 15, 16, 16) == P{-8, 7});
  CHECK(peak_to_displacement(0, 0, 1, 1) == P{0, 0});
  CHECK_THROWS_AS(peak_to_displacement(16, 0, 16, 16), std::invalid_argument);
}

TEST_CASE("scale pyramid factors") {
  HyperParams p;
  const auto s = scale_factors(p);
  REQUIRE(s.size() == 3);
  CHECK(std::abs(s[0] - 1.0 / 1.0375) < 1e-15);
  CHECK(s[1] == 1.0);
  CHECK(s[2] == 1.0375);
  p.scale_levels = 1;
  CHECK(scale_factors(p) == std::vector<double>{1.0});
  p.scale_levels = 5;
  CHECK(std::abs(scale_factors(p)[0] - std::pow(1.0375, -2)) < 1e-15);
  p.scale_levels = 2;
  CHECK_THROWS_AS(scale_factors(p), std::invalid_argument);
}

TEST_CASE("peak selection: scaling invariance and tie order") {
  std::mt19937_64 rng(3);
  std::vector<RealPlane> r{testing::random_plane(5, 5, rng), testing::random_plane(5, 5, rng),
                           testing::random_plane(5, 5, rng)};
  const std::vector<double> scales{0.9, 1.0, 1.1};
  const auto a = select_peak(r, scales);
  for (auto& plane : r) {
    for (double& v : plane.values()) v = 3.0 * v + 0.0;
  }
  const auto b = select_peak(r, scales);
  CHECK(a.scale == b.scale);
  CHECK(a.row == b.row);
  CHECK(a.col == b.col);

  const std::vector<RealPlane> flat(3, RealPlane(4, 4, 1.0));
  const auto tie = select_peak(flat, scales);
  CHECK(tie.scale == 0.9);
  CHECK(tie.row == 0);
  CHECK(tie.col == 0);
  // A penalty below 1 hands the tie to the unit scale.
  CHECK(select_peak(flat, scales, 0.99).scale == 1.0);
  CHECK_THROWS_AS(select_peak(flat, {1.0}), std::invalid_argument);
}

TEST_CASE("a freshly initialized filter peaks at the center of its own patch") {
  const auto clips = make_synthetic_dataset(1, 4);
  auto model = std::make_shared<const NetworkParams>(init_network(Architecture::Conv1, 5));
  const HyperParams p = fast_params();
  const auto st = tracker_init(clips[0].frames[0], clips[0].boxes[0], p, model);
  const auto& b = clips[0].boxes[0];
  const auto z = patch_spectrum(clips[0].frames[0], b.cx, b.cy, p.padding * b.width,
                                p.padding * b.height, st);
  const auto g = detect(filter_from_state(st.filter, p.lambda), z);
  const auto peak = select_peak({g}, {1.0});
  CHECK(peak.row == 31);
  CHECK(peak.col == 31);
}

TEST_CASE("static frames leave the center in place") {
  const auto clips = make_synthetic_dataset(1, 6);
  const auto& box = clips[0].boxes[0];
  auto model = std::make_shared<const NetworkParams>(init_network(Architecture::Conv1, 5));
  auto st = tracker_init(clips[0].frames[0], box, fast_params(), model);
  for (int i = 0; i < 3; ++i) {
    const auto r = tracker_step(st, clips[0].frames[0]);
    CHECK(r.box.cx == box.cx);
    CHECK(r.box.cy == box.cy);
  }
  // With a penalty on the off-unit scales nothing moves at all.
  HyperParams damped = fast_params();
  damped.scale_penalty = 0.95;
  auto sd = tracker_init(clips[0].frames[0], box, damped, model);
  for (int i = 0; i < 3; ++i) {
    const auto r = tracker_step(sd, clips[0].frames[0]);
    CHECK(r.box == box);
    CHECK(r.peak.scale == 1.0);
  }
}

TEST_CASE("an 8 pixel translation is recovered") {
  const auto clips = make_synthetic_dataset(1, 7);
  auto model = std::make_shared<const NetworkParams>(init_network(Architecture::Conv1, 5));
  const auto& box = clips[0].boxes[0];
  auto st = tracker_init(clips[0].frames[0], box, fast_params(), model);
  const auto r = tracker_step(st, translate(clips[0].frames[0], 8, -3));
  const double cell = 1.5 * box.width / 63.0;
  CHECK(std::abs(r.box.cx - (box.cx + 8.0)) <= cell);
  CHECK(std::abs(r.box.cy - (box.cy - 3.0)) <= cell);
}

TEST_CASE("tracking is deterministic") {
  SyntheticConfig sc;
  sc.length = 6;
  const auto clips = make_synthetic_dataset(1, 8, sc);
  auto model = std::make_shared<const NetworkParams>(init_network(Architecture::Conv1, 5));
  const auto a = run_tracker(clips[0], model, fast_params());
  const auto b = run_tracker(clips[0], model, fast_params());
  CHECK(a.trajectory == b.trajectory);
  CHECK(a.trajectory.size() == 6);
  CHECK(a.trajectory.front() == clips[0].boxes.front());
}

TEST_CASE("tracker rejects bad inputs") {
  const auto clips = make_synthetic_dataset(1, 9);
  auto model = std::make_shared<const NetworkParams>(init_network(Architecture::Conv1, 5));
  CHECK_THROWS_AS(tracker_init(clips[0].frames[0], BoundingBox{10, 10, 0, 5}, fast_params(), model),
                  std::invalid_argument);
  CHECK_THROWS_AS(tracker_init(clips[0].frames[0], clips[0].boxes[0], fast_params(), nullptr),
                  std::invalid_argument);
  HyperParams bad = fast_params();
  bad.online_rate = -0.1;
  CHECK_THROWS_AS(tracker_init(clips[0].frames[0], clips[0].boxes[0], bad, model),
                  std::invalid_argument);
  TrackerState empty;
  CHECK_THROWS_AS(tracker_step(empty, clips[0].frames[0]), std::logic_error);
}
