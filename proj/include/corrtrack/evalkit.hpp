#pragma once

#include <array>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "corrtrack/features.hpp"
#include "corrtrack/image.hpp"
#include "corrtrack/tracking.hpp"

namespace corrtrack {

struct Clip;

/// OTB-style sequence: numbered frames in `<dir>/img/` (or directly in
/// `<dir>`) and an optional `groundtruth_rect.txt`.
struct Sequence {
  std::filesystem::path root;
  std::vector<std::filesystem::path> frames;
  std::vector<BoundingBox> ground_truth;  // empty for inference-only sequences

  bool has_ground_truth() const { return !ground_truth.empty(); }
};

/// Parses one `x,y,w,h` line (comma, tab or space separated; 1-based
/// top-left corner).
BoundingBox parse_box_line(const std::string& line, std::size_t line_number);
std::vector<BoundingBox> parse_boxes(const std::string& text);
std::vector<BoundingBox> read_boxes(const std::filesystem::path& path);
std::string format_boxes(const std::vector<BoundingBox>& boxes);
void write_boxes(const std::filesystem::path& path, const std::vector<BoundingBox>& boxes);

Sequence load_sequence(const std::filesystem::path& dir);
Image load_frame(const std::filesystem::path& path);
void save_frame(const std::filesystem::path& path, const Image& image);
/// Writes frames as img/0001.png ... and groundtruth_rect.txt.
void write_sequence(const std::filesystem::path& dir, const Clip& clip);

double iou(const BoundingBox& a, const BoundingBox& b);
double cle(const BoundingBox& a, const BoundingBox& b);

inline constexpr std::size_t kSuccessPoints = 21;    // 0.00 : 0.05 : 1.00
inline constexpr std::size_t kPrecisionPoints = 51;  // 0 : 1 : 50 px

struct EvalResult {
  std::size_t frames = 0;
  double op = 0.0;   // fraction of frames with IoU > 0.5
  double dp = 0.0;   // fraction of frames with CLE <= 20 px
  double cle = 0.0;  // mean center location error, px
  double auc = 0.0;  // mean of the success curve
  std::array<double, kSuccessPoints> success{};
  std::array<double, kPrecisionPoints> precision{};
};

double success_threshold(std::size_t i);
double precision_threshold(std::size_t i);

EvalResult evaluate(const std::vector<BoundingBox>& trajectory,
                    const std::vector<BoundingBox>& ground_truth);
/// Unweighted mean over sequences, as in per-benchmark OP/DP/CLE tables.
EvalResult mean_result(const std::vector<EvalResult>& results);
std::string to_json(const EvalResult& r, int indent = 2);

enum class ModelErrorKind { Io, BadMagic, BadVersion, BadChecksum, BadDims };

class ModelFileError : public std::runtime_error {
 public:
  ModelFileError(ModelErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ModelErrorKind kind() const { return kind_; }

 private:
  ModelErrorKind kind_;
};

inline constexpr std::uint32_t kModelFormatVersion = 1;

std::vector<unsigned char> serialize_model(const NetworkParams& params);
NetworkParams deserialize_model(const std::vector<unsigned char>& bytes);
void save_model(const NetworkParams& params, const std::filesystem::path& path);
NetworkParams load_model(const std::filesystem::path& path);

struct TrackRun {
  std::vector<BoundingBox> trajectory;
  double steady_fps = 0.0;  // frames after the first, tracker time only
};

/// Runs the tracker over every frame, starting from `initial` (or the first
/// ground-truth box).
TrackRun run_tracker(const Sequence& seq, std::shared_ptr<const NetworkParams> model,
                     const HyperParams& params, std::optional<BoundingBox> initial = {});
TrackRun run_tracker(const Clip& clip, std::shared_ptr<const NetworkParams> model,
                     const HyperParams& params);

}  // namespace corrtrack
