#include "corrtrack/evalkit.hpp"

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <zlib.h>

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "corrtrack/training.hpp"

namespace corrtrack {

namespace fs = std::filesystem;

BoundingBox parse_box_line(const std::string& line, std::size_t line_number) {
  std::string s = line;
  std::replace(s.begin(), s.end(), ',', ' ');
  std::replace(s.begin(), s.end(), '\t', ' ');
  std::istringstream in(s);
  double v[4];
  for (double& x : v) {
    if (!(in >> x)) {
      throw std::runtime_error("ground truth line " + std::to_string(line_number) +
                               ": expected four numbers x,y,w,h");
    }
  }
  std::string rest;
  if (in >> rest) {
    throw std::runtime_error("ground truth line " + std::to_string(line_number) +
                             ": trailing data '" + rest + "'");
  }
  if (!(v[2] > 0.0) || !(v[3] > 0.0)) {
    throw std::runtime_error("ground truth line " + std::to_string(line_number) +
                             ": width and height must be positive");
  }
  return BoundingBox::from_top_left(v[0], v[1], v[2], v[3]);
}

std::vector<BoundingBox> parse_boxes(const std::string& text) {
  std::vector<BoundingBox> boxes;
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    boxes.push_back(parse_box_line(line, n));
  }
  return boxes;
}

std::vector<BoundingBox> read_boxes(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_boxes(ss.str());
}

std::string format_boxes(const std::vector<BoundingBox>& boxes) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2);
  for (const auto& b : boxes) {
    os << b.left() << ',' << b.top() << ',' << b.width << ',' << b.height << '\n';
  }
  return os.str();
}

void write_boxes(const fs::path& path, const std::vector<BoundingBox>& boxes) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << format_boxes(boxes);
}

namespace {

bool is_image(const fs::path& p) {
  std::string ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".jpg" || ext == ".jpeg" || ext == ".png" || ext == ".bmp" || ext == ".ppm" ||
         ext == ".pgm";
}

}  // namespace

Sequence load_sequence(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw std::runtime_error("sequence directory not found: " + dir.string());
  Sequence seq;
  seq.root = dir;
  const fs::path img_dir = fs::is_directory(dir / "img") ? dir / "img" : dir;
  for (const auto& entry : fs::directory_iterator(img_dir)) {
    if (entry.is_regular_file() && is_image(entry.path())) seq.frames.push_back(entry.path());
  }
  std::sort(seq.frames.begin(), seq.frames.end());
  if (seq.frames.empty()) throw std::runtime_error("no frames found in " + img_dir.string());
  const fs::path gt = dir / "groundtruth_rect.txt";
  if (fs::exists(gt)) {
    seq.ground_truth = read_boxes(gt);
    if (!seq.ground_truth.empty() && seq.ground_truth.size() != seq.frames.size()) {
      throw std::runtime_error("ground truth has " + std::to_string(seq.ground_truth.size()) +
                               " boxes but the sequence has " + std::to_string(seq.frames.size()) +
                               " frames");
    }
  }
  return seq;
}

Image load_frame(const fs::path& path) {
  const cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw std::runtime_error("cannot decode image " + path.string());
  Image img(static_cast<std::size_t>(bgr.rows), static_cast<std::size_t>(bgr.cols));
  for (int r = 0; r < bgr.rows; ++r) {
    const auto* row = bgr.ptr<cv::Vec3b>(r);
    for (int c = 0; c < bgr.cols; ++c) {
      for (int ch = 0; ch < 3; ++ch) img.at(ch, r, c) = row[c][2 - ch] / 255.0f;
    }
  }
  return img;
}

void save_frame(const fs::path& path, const Image& image) {
  cv::Mat bgr(static_cast<int>(image.rows()), static_cast<int>(image.cols()), CV_8UC3);
  for (int r = 0; r < bgr.rows; ++r) {
    auto* row = bgr.ptr<cv::Vec3b>(r);
    for (int c = 0; c < bgr.cols; ++c) {
      for (int ch = 0; ch < 3; ++ch) {
        row[c][2 - ch] = cv::saturate_cast<unsigned char>(std::lround(image.at(ch, r, c) * 255.0f));
      }
    }
  }
  if (!cv::imwrite(path.string(), bgr)) throw std::runtime_error("cannot write " + path.string());
}

void write_sequence(const fs::path& dir, const Clip& clip) {
  fs::create_directories(dir / "img");
  for (std::size_t i = 0; i < clip.frames.size(); ++i) {
    std::ostringstream name;
    name << std::setw(4) << std::setfill('0') << (i + 1) << ".png";
    save_frame(dir / "img" / name.str(), clip.frames[i]);
  }
  write_boxes(dir / "groundtruth_rect.txt", clip.boxes);
}

double iou(const BoundingBox& a, const BoundingBox& b) {
  const double ix = std::min(a.cx + a.width / 2, b.cx + b.width / 2) -
                    std::max(a.cx - a.width / 2, b.cx - b.width / 2);
  const double iy = std::min(a.cy + a.height / 2, b.cy + b.height / 2) -
                    std::max(a.cy - a.height / 2, b.cy - b.height / 2);
  if (ix <= 0.0 || iy <= 0.0) return 0.0;
  const double inter = ix * iy;
  return inter / (a.width * a.height + b.width * b.height - inter);
}

double cle(const BoundingBox& a, const BoundingBox& b) { return std::hypot(a.cx - b.cx, a.cy - b.cy); }

double success_threshold(std::size_t i) { return static_cast<double>(i) * 0.05; }
double precision_threshold(std::size_t i) { return static_cast<double>(i); }

EvalResult evaluate(const std::vector<BoundingBox>& trajectory,
                    const std::vector<BoundingBox>& ground_truth) {
  if (trajectory.size() != ground_truth.size()) {
    throw std::invalid_argument("evaluate: trajectory has " + std::to_string(trajectory.size()) +
                                " boxes, ground truth has " + std::to_string(ground_truth.size()));
  }
  if (trajectory.empty()) throw std::invalid_argument("evaluate: empty trajectory");
  EvalResult r;
  r.frames = trajectory.size();
  const double n = static_cast<double>(r.frames);
  for (std::size_t f = 0; f < trajectory.size(); ++f) {
    const double o = iou(trajectory[f], ground_truth[f]);
    const double e = cle(trajectory[f], ground_truth[f]);
    if (o > 0.5) r.op += 1.0;
    if (e <= 20.0) r.dp += 1.0;
    r.cle += e;
    for (std::size_t i = 0; i < kSuccessPoints; ++i) {
      // inclusive, so a perfect frame still counts at 1.0 and a miss at 0.0
      if (o >= success_threshold(i)) r.success[i] += 1.0;
    }
    for (std::size_t i = 0; i < kPrecisionPoints; ++i) {
      if (e <= precision_threshold(i)) r.precision[i] += 1.0;
    }
  }
  r.op /= n;
  r.dp /= n;
  r.cle /= n;
  for (double& s : r.success) s /= n;
  for (double& p : r.precision) p /= n;
  double auc = 0.0;
  for (double s : r.success) auc += s;
  r.auc = auc / static_cast<double>(kSuccessPoints);
  return r;
}

EvalResult mean_result(const std::vector<EvalResult>& results) {
  if (results.empty()) throw std::invalid_argument("mean_result: no results");
  EvalResult m;
  const double n = static_cast<double>(results.size());
  for (const auto& r : results) {
    m.frames += r.frames;
    m.op += r.op / n;
    m.dp += r.dp / n;
    m.cle += r.cle / n;
    m.auc += r.auc / n;
    for (std::size_t i = 0; i < kSuccessPoints; ++i) m.success[i] += r.success[i] / n;
    for (std::size_t i = 0; i < kPrecisionPoints; ++i) m.precision[i] += r.precision[i] / n;
  }
  return m;
}

std::string to_json(const EvalResult& r, int indent) {
  nlohmann::ordered_json j;
  j["frames"] = r.frames;
  j["op"] = r.op;
  j["dp"] = r.dp;
  j["cle"] = r.cle;
  j["auc"] = r.auc;
  std::vector<double> st, pt;
  for (std::size_t i = 0; i < kSuccessPoints; ++i) st.push_back(success_threshold(i));
  for (std::size_t i = 0; i < kPrecisionPoints; ++i) pt.push_back(precision_threshold(i));
  j["success_thresholds"] = st;
  j["success_curve"] = r.success;
  j["precision_thresholds"] = pt;
  j["precision_curve"] = r.precision;
  return j.dump(indent);
}

// Model file layout (little-endian):
//   "CTRKMODL" | u32 version | u32 len, arch name | i32 lrn window |
//   f64 kappa, alpha, beta | u32 tensor count |
//   per tensor: u32 len, name | u32 rank | u32 dims[rank] | f32 values |
//   u32 CRC-32 of everything above.
namespace {

constexpr char kMagic[8] = {'C', 'T', 'R', 'K', 'M', 'O', 'D', 'L'};
static_assert(std::endian::native == std::endian::little, "model files assume little-endian hosts");

class Writer {
 public:
  template <typename T>
  void put(T v) {
    const auto* p = reinterpret_cast<const unsigned char*>(&v);
    bytes_.insert(bytes_.end(), p, p + sizeof(T));
  }
  void put_string(const std::string& s) {
    put<std::uint32_t>(static_cast<std::uint32_t>(s.size()));
    bytes_.insert(bytes_.end(), s.begin(), s.end());
  }
  void put_raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    bytes_.insert(bytes_.end(), b, b + n);
  }
  std::vector<unsigned char>& bytes() { return bytes_; }

 private:
  std::vector<unsigned char> bytes_;
};

class Reader {
 public:
  Reader(const unsigned char* data, std::size_t size) : data_(data), size_(size) {}
  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, data_ + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string get_string() {
    const auto n = get<std::uint32_t>();
    need(n);
    std::string s(reinterpret_cast<const char*>(data_ + pos_), n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == size_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > size_) throw ModelFileError(ModelErrorKind::BadDims, "model file: payload shorter than declared dims");
  }
  const unsigned char* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

void put_tensor(Writer& w, const std::string& name, const std::vector<std::uint32_t>& dims,
                std::span<const double> values) {
  w.put_string(name);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(dims.size()));
  for (auto d : dims) w.put<std::uint32_t>(d);
  for (double v : values) w.put<float>(static_cast<float>(v));
}

struct TensorSlot {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::span<double> values;
};

std::vector<TensorSlot> tensor_slots(NetworkParams& p) {
  std::vector<TensorSlot> slots;
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    auto& l = p.layers[i];
    const std::string prefix = "conv" + std::to_string(i + 1);
    slots.push_back({prefix + ".kernels",
                     {3, 3, static_cast<std::uint32_t>(l.in_channels),
                      static_cast<std::uint32_t>(l.out_channels)},
                     l.kernels});
    slots.push_back({prefix + ".biases", {static_cast<std::uint32_t>(l.out_channels)}, l.biases});
  }
  slots.push_back({"input_mean", {3}, p.input_mean});
  return slots;
}

std::uint32_t crc_of(const unsigned char* p, std::size_t n) {
  return static_cast<std::uint32_t>(crc32(crc32(0L, Z_NULL, 0), p, static_cast<uInt>(n)));
}

}  // namespace

std::vector<unsigned char> serialize_model(const NetworkParams& params) {
  params.validate();
  NetworkParams copy = params;
  Writer w;
  w.put_raw(kMagic, sizeof kMagic);
  w.put<std::uint32_t>(kModelFormatVersion);
  w.put_string(std::string(architecture_name(params.arch)));
  w.put<std::int32_t>(params.lrn.window);
  w.put<double>(params.lrn.kappa);
  w.put<double>(params.lrn.alpha);
  w.put<double>(params.lrn.beta);
  const auto slots = tensor_slots(copy);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(slots.size()));
  for (const auto& s : slots) put_tensor(w, s.name, s.dims, s.values);
  const std::uint32_t crc = crc_of(w.bytes().data(), w.bytes().size());
  w.put<std::uint32_t>(crc);
  return std::move(w.bytes());
}

NetworkParams deserialize_model(const std::vector<unsigned char>& bytes) {
  if (bytes.size() < sizeof kMagic || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
    throw ModelFileError(ModelErrorKind::BadMagic, "model file: bad magic");
  }
  if (bytes.size() < sizeof kMagic + 8) {
    throw ModelFileError(ModelErrorKind::BadChecksum, "model file: truncated (checksum missing)");
  }
  const std::size_t body = bytes.size() - 4;
  std::uint32_t stored;
  std::memcpy(&stored, bytes.data() + body, 4);
  if (crc_of(bytes.data(), body) != stored) {
    throw ModelFileError(ModelErrorKind::BadChecksum, "model file: checksum mismatch");
  }
  Reader r(bytes.data() + sizeof kMagic, body - sizeof kMagic);
  const auto version = r.get<std::uint32_t>();
  if (version != kModelFormatVersion) {
    throw ModelFileError(ModelErrorKind::BadVersion,
                         "model file: unsupported version " + std::to_string(version));
  }
  Architecture arch;
  const std::string arch_name = r.get_string();
  try {
    arch = parse_architecture(arch_name);
  } catch (const std::invalid_argument&) {
    throw ModelFileError(ModelErrorKind::BadDims, "model file: unknown architecture '" + arch_name + "'");
  }
  LrnParams lrn;
  lrn.window = r.get<std::int32_t>();
  lrn.kappa = r.get<double>();
  lrn.alpha = r.get<double>();
  lrn.beta = r.get<double>();

  NetworkParams p = init_network(arch, 0, {});
  p.lrn = lrn;
  auto slots = tensor_slots(p);
  const auto count = r.get<std::uint32_t>();
  if (count != slots.size()) {
    throw ModelFileError(ModelErrorKind::BadDims,
                         "model file: " + std::string(architecture_name(arch)) + " expects " +
                             std::to_string(slots.size()) + " tensors, file has " +
                             std::to_string(count));
  }
  for (auto& slot : slots) {
    const std::string name = r.get_string();
    const auto rank = r.get<std::uint32_t>();
    std::vector<std::uint32_t> dims(rank);
    for (auto& d : dims) d = r.get<std::uint32_t>();
    if (name != slot.name || dims != slot.dims) {
      throw ModelFileError(ModelErrorKind::BadDims, "model file: tensor '" + name +
                                                        "' does not match architecture " +
                                                        std::string(architecture_name(arch)));
    }
    for (double& v : slot.values) v = static_cast<double>(r.get<float>());
  }
  if (!r.done()) throw ModelFileError(ModelErrorKind::BadDims, "model file: trailing payload");
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw ModelFileError(ModelErrorKind::BadDims, std::string("model file: ") + e.what());
  }
  return p;
}

void save_model(const NetworkParams& params, const fs::path& path) {
  const auto bytes = serialize_model(params);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ModelFileError(ModelErrorKind::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ModelFileError(ModelErrorKind::Io, "write failed for " + path.string());
}

NetworkParams load_model(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelFileError(ModelErrorKind::Io, "cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_model(bytes);
}

namespace {

template <typename FrameAt>
TrackRun run_frames(std::size_t count, const FrameAt& frame_at, const BoundingBox& initial,
                    std::shared_ptr<const NetworkParams> model, const HyperParams& params) {
  TrackRun run;
  run.trajectory.reserve(count);
  TrackerState state = tracker_init(frame_at(0), initial, params, std::move(model));
  run.trajectory.push_back(initial);
  double seconds = 0.0;
  for (std::size_t f = 1; f < count; ++f) {
    const Image& frame = frame_at(f);
    const auto t0 = std::chrono::steady_clock::now();
    run.trajectory.push_back(tracker_step(state, frame).box);
    seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  if (count > 1 && seconds > 0.0) run.steady_fps = static_cast<double>(count - 1) / seconds;
  return run;
}

}  // namespace

TrackRun run_tracker(const Sequence& seq, std::shared_ptr<const NetworkParams> model,
                     const HyperParams& params, std::optional<BoundingBox> initial) {
  if (!initial) {
    if (!seq.has_ground_truth()) {
      throw std::invalid_argument("run_tracker: no initial box and no ground truth");
    }
    initial = seq.ground_truth.front();
  }
  Image current;
  auto frame_at = [&](std::size_t i) -> const Image& {
    current = load_frame(seq.frames[i]);
    return current;
  };
  return run_frames(seq.frames.size(), frame_at, *initial, std::move(model), params);
}

TrackRun run_tracker(const Clip& clip, std::shared_ptr<const NetworkParams> model,
                     const HyperParams& params) {
  auto frame_at = [&](std::size_t i) -> const Image& { return clip.frames[i]; };
  return run_frames(clip.frames.size(), frame_at, clip.boxes.front(), std::move(model), params);
}

}  // namespace corrtrack
