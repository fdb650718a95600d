#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>
#include <zlib.h>

#include <algorithm>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "corrtrack/evalkit.hpp"
#include "corrtrack/training.hpp"

using namespace corrtrack;
namespace fs = std::filesystem;

namespace {

BoundingBox tl(double x, double y, double w, double h) { return BoundingBox::from_top_left(x, y, w, h); }

void put_u32(std::vector<unsigned char>& b, std::size_t at, std::uint32_t v) {
  std::memcpy(b.data() + at, &v, 4);
}

void reseal(std::vector<unsigned char>& b) {
  const std::size_t body = b.size() - 4;
  const auto crc = static_cast<std::uint32_t>(crc32(crc32(0L, Z_NULL, 0), b.data(), static_cast<uInt>(body)));
  put_u32(b, body, crc);
}

ModelErrorKind kind_of(const std::vector<unsigned char>& b) {
  try {
    deserialize_model(b);
  } catch (const ModelFileError& e) {
    return e.kind();
  }
  FAIL("model accepted");
  return ModelErrorKind::Io;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("corrtrack_evalkit_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("box line parsing") {
  const auto b = parse_box_line("198,214,34,81", 1);
  CHECK(b.cx == doctest::Approx(214.5));
  CHECK(b.cy == doctest::Approx(254.0));
  CHECK(b.width == 34.0);
  CHECK(b.height == 81.0);
  CHECK(parse_box_line("198\t214\t34\t81", 1) == b);
  CHECK(parse_box_line("198 214 34 81", 1) == b);
  CHECK(parse_box_line("198, 214,\t34 81\r", 1) == b);
}

TEST_CASE("malformed ground truth names the line") {
  try {
    parse_boxes("1,1,2,2\n\n1,2,3\n");
    FAIL("no throw");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  CHECK_THROWS(parse_box_line("1,1,0,2", 1));
  CHECK_THROWS(parse_box_line("1,1,2,2,5", 1));
  CHECK(parse_boxes("1,1,2,2\n\n  \n3,3,4,4\n").size() == 2);
}

TEST_CASE("iou and center error") {
  CHECK(iou(tl(1, 1, 2, 2), tl(2, 1, 2, 2)) == doctest::Approx(1.0 / 3.0));
  CHECK(iou(tl(1, 1, 2, 2), tl(1, 1, 2, 2)) == doctest::Approx(1.0));
  CHECK(iou(tl(1, 1, 2, 2), tl(10, 10, 2, 2)) == 0.0);
  CHECK(iou(tl(0, 0, 10, 10), tl(5, 0, 10, 10)) == doctest::Approx(1.0 / 3.0));
  CHECK(cle(tl(1, 1, 10, 10), tl(4, 5, 10, 10)) == doctest::Approx(5.0));
  CHECK(cle(tl(0, 0, 10, 10), tl(0, 0, 10, 10)) == 0.0);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 50.0);
  for (int i = 0; i < 50; ++i) {
    const auto a = tl(u(rng), u(rng), 1 + u(rng), 1 + u(rng));
    const auto b = tl(u(rng), u(rng), 1 + u(rng), 1 + u(rng));
    CHECK(cle(a, b) == cle(b, a));
    CHECK(iou(a, b) == doctest::Approx(iou(b, a)));
  }
}

TEST_CASE("perfect and disjoint trajectories") {
  const std::vector<BoundingBox> gt{tl(1, 1, 10, 10), tl(3, 2, 12, 9), tl(5, 5, 20, 20)};
  const auto r = evaluate(gt, gt);
  CHECK(r.op == 1.0);
  CHECK(r.dp == 1.0);
  CHECK(r.cle == 0.0);
  CHECK(r.auc == 1.0);

  std::vector<BoundingBox> far;
  for (const auto& b : gt) far.push_back({b.cx + 100.0, b.cy, b.width, b.height});
  const auto d = evaluate(far, gt);
  CHECK(d.op == 0.0);
  CHECK(d.success[0] == 1.0);
  for (std::size_t i = 1; i < kSuccessPoints; ++i) CHECK(d.success[i] == 0.0);
}

TEST_CASE("two-frame evaluation") {
  const std::vector<BoundingBox> gt{tl(1, 1, 10, 10), tl(1, 1, 10, 10)};
  const std::vector<BoundingBox> tr{tl(1, 1, 10, 10), tl(4, 5, 10, 10)};
  const auto r = evaluate(tr, gt);
  CHECK(r.frames == 2);
  CHECK(r.op == 0.5);
  CHECK(r.dp == 1.0);
  CHECK(r.cle == 2.5);
  CHECK(r.success[0] == doctest::Approx(1.0));
  CHECK(r.success.back() == 0.5);
  CHECK(r.precision[4] == doctest::Approx(0.5));
  CHECK(r.precision[5] == doctest::Approx(1.0));
}

TEST_CASE("curves are monotone and order independent") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-30.0, 30.0), s(10.0, 60.0);
  std::vector<BoundingBox> gt, tr;
  for (int i = 0; i < 200; ++i) {
    gt.push_back(tl(100 + u(rng), 100 + u(rng), s(rng), s(rng)));
    tr.push_back(tl(100 + u(rng), 100 + u(rng), s(rng), s(rng)));
  }
  const auto r = evaluate(tr, gt);
  for (std::size_t i = 1; i < kSuccessPoints; ++i) CHECK(r.success[i] <= r.success[i - 1]);
  for (std::size_t i = 1; i < kPrecisionPoints; ++i) CHECK(r.precision[i] >= r.precision[i - 1]);
  CHECK(r.dp == doctest::Approx(r.precision[20]));

  std::vector<std::size_t> idx(gt.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<BoundingBox> gt2, tr2;
  for (auto i : idx) {
    gt2.push_back(gt[i]);
    tr2.push_back(tr[i]);
  }
  const auto p = evaluate(tr2, gt2);
  CHECK(p.op == doctest::Approx(r.op));
  CHECK(p.dp == doctest::Approx(r.dp));
  CHECK(p.cle == doctest::Approx(r.cle));
  CHECK(p.auc == doctest::Approx(r.auc));
}

TEST_CASE("length mismatch names both lengths") {
  const std::vector<BoundingBox> a(3, tl(1, 1, 2, 2)), b(5, tl(1, 1, 2, 2));
  try {
    evaluate(a, b);
    FAIL("no throw");
  } catch (const std::invalid_argument& e) {
    const std::string msg = e.what();
    CHECK(msg.find('3') != std::string::npos);
    CHECK(msg.find('5') != std::string::npos);
  }
  CHECK_THROWS(evaluate({}, {}));
}

TEST_CASE("mean over sequences and json") {
  const std::vector<BoundingBox> gt{tl(1, 1, 10, 10), tl(1, 1, 10, 10)};
  const auto a = evaluate(gt, gt);
  const auto b = evaluate({tl(1, 1, 10, 10), tl(4, 5, 10, 10)}, gt);
  const auto m = mean_result({a, b});
  CHECK(m.op == doctest::Approx(0.75));
  CHECK(m.cle == doctest::Approx(1.25));
  CHECK(m.frames == 4);
  const auto j = nlohmann::json::parse(to_json(m));
  for (const char* key : {"frames", "op", "dp", "cle", "auc", "success_thresholds", "success_curve",
                          "precision_thresholds", "precision_curve"}) {
    CHECK(j.contains(key));
  }
  CHECK(j["success_curve"].size() == kSuccessPoints);
  CHECK(j["precision_thresholds"].back() == 50.0);
}

TEST_CASE("trajectory text round trip") {
  const std::vector<BoundingBox> boxes{tl(1, 2, 30, 40), tl(10.5, 20.25, 31, 41)};
  const auto back = parse_boxes(format_boxes(boxes));
  REQUIRE(back.size() == boxes.size());
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    CHECK(back[i].cx == doctest::Approx(boxes[i].cx));
    CHECK(back[i].cy == doctest::Approx(boxes[i].cy));
    CHECK(back[i].width == boxes[i].width);
  }
}

TEST_CASE("model round trip is byte identical") {
  for (auto arch : {Architecture::Conv1, Architecture::Conv1Dilation, Architecture::Conv2}) {
    const auto p = init_network(arch, 3);
    const auto bytes = serialize_model(p);
    const auto q = deserialize_model(bytes);
    CHECK(q.arch == arch);
    CHECK(q.flatten() == p.flatten());
    CHECK(serialize_model(q) == bytes);
  }
  TempDir tmp;
  const auto p = init_network(Architecture::Conv1, 4);
  save_model(p, tmp.path / "m.bin");
  CHECK(load_model(tmp.path / "m.bin").flatten() == p.flatten());
  CHECK_THROWS_AS(load_model(tmp.path / "missing.bin"), ModelFileError);
}

TEST_CASE("corrupt model files are classified") {
  const auto good = serialize_model(init_network(Architecture::Conv1, 3));

  auto truncated = good;
  truncated.resize(truncated.size() - 100);
  CHECK(kind_of(truncated) == ModelErrorKind::BadChecksum);

  auto flipped = good;
  flipped[200] ^= 0x10;
  CHECK(kind_of(flipped) == ModelErrorKind::BadChecksum);

  auto magic = good;
  magic[0] = 'X';
  CHECK(kind_of(magic) == ModelErrorKind::BadMagic);

  auto version = good;
  put_u32(version, 8, kModelFormatVersion + 1);
  reseal(version);
  CHECK(kind_of(version) == ModelErrorKind::BadVersion);

  // conv1 payload under a conv2 header
  auto arch = good;
  const std::string to = "conv2";
  std::memcpy(arch.data() + 16, to.data(), to.size());
  reseal(arch);
  CHECK(kind_of(arch) == ModelErrorKind::BadDims);
}

TEST_CASE("sequence directory round trip") {
  TempDir tmp;
  SyntheticConfig cfg;
  cfg.length = 4;
  cfg.frame_size = 64;
  cfg.min_object = 12.0;
  cfg.max_object = 18.0;
  const auto clips = make_synthetic_dataset(1, 9, cfg);
  write_sequence(tmp.path / "s", clips[0]);
  const auto seq = load_sequence(tmp.path / "s");
  REQUIRE(seq.frames.size() == 4);
  REQUIRE(seq.ground_truth.size() == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(std::abs(seq.ground_truth[i].cx - clips[0].boxes[i].cx) < 0.01);
    CHECK(std::abs(seq.ground_truth[i].height - clips[0].boxes[i].height) < 0.01);
  }
  const Image f = load_frame(seq.frames[0]);
  REQUIRE(f.rows() == clips[0].frames[0].rows());
  double worst = 0.0;
  for (std::size_t ch = 0; ch < 3; ++ch)
    for (std::size_t r = 0; r < f.rows(); ++r)
      for (std::size_t c = 0; c < f.cols(); ++c)
        worst = std::max(worst, double(std::abs(f.at(ch, r, c) - clips[0].frames[0].at(ch, r, c))));
  CHECK(worst <= 0.5 / 255.0 + 1e-6);
  CHECK_THROWS(load_sequence(tmp.path / "nope"));

  std::ofstream(tmp.path / "s" / "groundtruth_rect.txt").close();
  const auto bare = load_sequence(tmp.path / "s");
  CHECK(bare.frames.size() == 4);
  CHECK_FALSE(bare.has_ground_truth());
}
