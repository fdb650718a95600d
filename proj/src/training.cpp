#include "corrtrack/training.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <tuple>

namespace corrtrack {

void OptimizerConfig::validate() const {
  if (!(learning_rate >= 0.0) || !(momentum >= 0.0) || !(weight_decay >= 0.0)) {
    throw std::invalid_argument("optimizer: rates must be non-negative");
  }
  if (batch_size < 1) throw std::invalid_argument("optimizer: batch_size must be >= 1");
}

void TrainConfig::validate() const {
  optimizer.validate();
  cf.validate();
  if (!(label.bandwidth > 0.0)) throw std::invalid_argument("config: bandwidth must be > 0");
  if (!(padding > 0.0)) throw std::invalid_argument("config: padding must be > 0");
  if (input_size < 1) throw std::invalid_argument("config: input_size must be >= 1");
  if (jitter < 0) throw std::invalid_argument("config: jitter must be >= 0");
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

double parse_double(const std::string& v, std::size_t line) {
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw std::invalid_argument("config line " + std::to_string(line) + ": '" + v +
                                "' is not a number");
  }
  return out;
}

std::uint64_t parse_uint(const std::string& v, std::size_t line) {
  std::uint64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size()) {
    throw std::invalid_argument("config line " + std::to_string(line) + ": '" + v +
                                "' is not a non-negative integer");
  }
  return out;
}

bool parse_bool(const std::string& v, std::size_t line) {
  if (v == "true" || v == "1" || v == "on") return true;
  if (v == "false" || v == "0" || v == "off") return false;
  throw std::invalid_argument("config line " + std::to_string(line) + ": '" + v +
                              "' is not a boolean");
}

}  // namespace

TrainConfig parse_train_config(const std::string& text) {
  TrainConfig cfg;
  std::istringstream in(text);
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string s = trim(raw);
    if (s.empty() || s[0] == '#') continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(line) + ": expected key = value");
    }
    const std::string key = trim(std::string_view(s).substr(0, eq));
    const std::string value = trim(std::string_view(s).substr(eq + 1));
    if (key == "learning_rate") cfg.optimizer.learning_rate = parse_double(value, line);
    else if (key == "momentum") cfg.optimizer.momentum = parse_double(value, line);
    else if (key == "weight_decay") cfg.optimizer.weight_decay = parse_double(value, line);
    else if (key == "batch_size") cfg.optimizer.batch_size = parse_uint(value, line);
    else if (key == "epochs") cfg.optimizer.epochs = parse_uint(value, line);
    else if (key == "seed") cfg.optimizer.seed = parse_uint(value, line);
    else if (key == "bandwidth") cfg.label.bandwidth = parse_double(value, line);
    else if (key == "lambda") cfg.cf.lambda = parse_double(value, line);
    else if (key == "architecture") {
      try {
        cfg.arch = parse_architecture(value);
      } catch (const std::invalid_argument& e) {
        throw std::invalid_argument("config line " + std::to_string(line) + ": " + e.what());
      }
    }
    else if (key == "padding") cfg.padding = parse_double(value, line);
    else if (key == "input_size") cfg.input_size = parse_uint(value, line);
    else if (key == "cosine_window") cfg.cosine_window = parse_bool(value, line);
    else if (key == "jitter") cfg.jitter = static_cast<int>(parse_uint(value, line));
    else if (key == "max_pairs") cfg.max_pairs = parse_uint(value, line);
    else if (key == "precision") {
      if (value == "single") cfg.precision = Precision::Single;
      else if (value == "double") cfg.precision = Precision::Double;
      else throw std::invalid_argument("config line " + std::to_string(line) + ": precision must be single or double");
    }
    else {
      throw std::invalid_argument("config line " + std::to_string(line) + ": unknown key '" +
                                  key + "'");
    }
  }
  cfg.validate();
  return cfg;
}

TrainConfig load_train_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_train_config(ss.str());
}

RealPlane gaussian_label(std::size_t rows, std::size_t cols, double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("gaussian_label: sigma must be > 0");
  RealPlane y(rows, cols);
  const std::size_t cr = rows / 2, cc = cols / 2;
  auto wrapped = [](std::size_t i, std::size_t center, std::size_t n) {
    const std::size_t d = i > center ? i - center : center - i;
    return static_cast<double>(std::min(d, n - d));
  };
  for (std::size_t r = 0; r < rows; ++r) {
    const double du = wrapped(r, cr, rows);
    for (std::size_t c = 0; c < cols; ++c) {
      const double dv = wrapped(c, cc, cols);
      y(r, c) = std::exp(-(du * du + dv * dv) / (2.0 * sigma * sigma));
    }
  }
  return y;
}

double label_sigma(const TrainConfig& cfg) {
  const double target = static_cast<double>(cfg.input_size) / cfg.padding;
  return cfg.label.bandwidth * std::sqrt(target * target);
}

RealPlane hann_window(std::size_t rows, std::size_t cols) {
  auto hann = [](std::size_t n) {
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) {
      w[i] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(i + 1) /
                                   static_cast<double>(n + 1)));
    }
    return w;
  };
  const auto wr = hann(rows), wc = hann(cols);
  RealPlane out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out(r, c) = wr[r] * wc[c];
  }
  return out;
}

FeatureMap apply_window(const FeatureMap& features, const RealPlane& window) {
  if (features.rows() != window.rows() || features.cols() != window.cols()) {
    throw std::invalid_argument("apply_window: shape mismatch");
  }
  FeatureMap out = features;
  for (std::size_t ch = 0; ch < out.channels(); ++ch) {
    auto c = out.channel(ch);
    for (std::size_t i = 0; i < c.size(); ++i) c[i] *= window[i];
  }
  return out;
}

std::vector<PairSpec> sample_pairs(std::span<const std::size_t> sequence_lengths) {
  std::vector<PairSpec> pairs;
  for (std::size_t s = 0; s < sequence_lengths.size(); ++s) {
    const std::size_t n = sequence_lengths[s];
    if (n < 1) throw std::invalid_argument("sample_pairs: sequence lengths must be >= 1");
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n && j - i <= kMaxPairGap; ++j) pairs.push_back({s, i, j});
    }
  }
  return pairs;
}

void sgd_step(std::span<double> params, std::span<const double> grads, std::span<double> velocity,
              const OptimizerConfig& cfg) {
  if (params.size() != grads.size() || params.size() != velocity.size()) {
    throw std::invalid_argument("sgd_step: parameter, gradient and velocity sizes differ");
  }
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      throw std::runtime_error("sgd_step: non-finite gradient at index " + std::to_string(i));
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    velocity[i] = cfg.momentum * velocity[i] -
                  cfg.learning_rate * (grads[i] + cfg.weight_decay * params[i]);
    params[i] += velocity[i];
  }
}

namespace {

double clamp_step(double& vx, double& vy, double bound) {
  const double n = std::hypot(vx, vy);
  if (n > bound) {
    vx *= bound / n;
    vy *= bound / n;
  }
  return std::hypot(vx, vy);
}

Image make_texture(std::size_t size, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image tex(size, size);
  const double s = static_cast<double>(size);
  // A few coloured blobs over a tinted grating.
  const double freq = 2.0 + 4.0 * u(rng), angle = std::numbers::pi * u(rng);
  const double base[3] = {u(rng), u(rng), u(rng)};
  struct Blob {
    double x, y, r, col[3];
  };
  std::vector<Blob> blobs(6);
  for (auto& b : blobs) b = {u(rng) * s, u(rng) * s, (0.08 + 0.15 * u(rng)) * s, {u(rng), u(rng), u(rng)}};
  for (std::size_t r = 0; r < size; ++r) {
    for (std::size_t c = 0; c < size; ++c) {
      const double t = (std::cos(angle) * c + std::sin(angle) * r) / s;
      const double grating = 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * freq * t);
      for (std::size_t ch = 0; ch < 3; ++ch) {
        double v = 0.5 * base[ch] + 0.3 * grating;
        for (const auto& b : blobs) {
          const double d2 = (r - b.y) * (r - b.y) + (c - b.x) * (c - b.x);
          v += 0.6 * (b.col[ch] - 0.5) * std::exp(-d2 / (2.0 * b.r * b.r));
        }
        tex.at(ch, r, c) = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
    }
  }
  return tex;
}

Image make_background(std::size_t size, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::size_t grid = 9;
  std::vector<double> coarse(3 * grid * grid);
  for (double& v : coarse) v = 0.3 + 0.4 * u(rng);
  Image bg(size, size);
  std::normal_distribution<double> fine(0.0, 0.04);
  const double scale = static_cast<double>(grid - 1) / static_cast<double>(size - 1);
  for (std::size_t ch = 0; ch < 3; ++ch) {
    for (std::size_t r = 0; r < size; ++r) {
      for (std::size_t c = 0; c < size; ++c) {
        const double gy = r * scale, gx = c * scale;
        const std::size_t y0 = std::min<std::size_t>(static_cast<std::size_t>(gy), grid - 2);
        const std::size_t x0 = std::min<std::size_t>(static_cast<std::size_t>(gx), grid - 2);
        const double fy = gy - y0, fx = gx - x0;
        auto at = [&](std::size_t y, std::size_t x) { return coarse[(ch * grid + y) * grid + x]; };
        const double v = (1 - fy) * ((1 - fx) * at(y0, x0) + fx * at(y0, x0 + 1)) +
                         fy * ((1 - fx) * at(y0 + 1, x0) + fx * at(y0 + 1, x0 + 1));
        bg.at(ch, r, c) = static_cast<float>(std::clamp(v + fine(rng), 0.0, 1.0));
      }
    }
  }
  return bg;
}

Image render(const Image& background, const Image& texture, const BoundingBox& box,
             double noise, std::mt19937_64& rng) {
  Image frame = background;
  const double cx0 = box.cx - 1.0, cy0 = box.cy - 1.0;
  const double left = cx0 - box.width / 2.0, top = cy0 - box.height / 2.0;
  const double ts = static_cast<double>(texture.rows());
  const long rows = static_cast<long>(frame.rows()), cols = static_cast<long>(frame.cols());
  for (long r = std::max(0L, static_cast<long>(std::floor(top)));
       r < std::min(rows, static_cast<long>(std::ceil(top + box.height)) + 1); ++r) {
    const double v = (static_cast<double>(r) - top) / box.height;
    if (v < 0.0 || v > 1.0) continue;
    for (long c = std::max(0L, static_cast<long>(std::floor(left)));
         c < std::min(cols, static_cast<long>(std::ceil(left + box.width)) + 1); ++c) {
      const double u = (static_cast<double>(c) - left) / box.width;
      if (u < 0.0 || u > 1.0) continue;
      const double tx = std::clamp(u * ts - 0.5, 0.0, ts - 1.0);
      const double ty = std::clamp(v * ts - 0.5, 0.0, ts - 1.0);
      const std::size_t x0 = static_cast<std::size_t>(tx), y0 = static_cast<std::size_t>(ty);
      const std::size_t x1 = std::min(x0 + 1, texture.cols() - 1);
      const std::size_t y1 = std::min(y0 + 1, texture.rows() - 1);
      const double fx = tx - x0, fy = ty - y0;
      for (std::size_t ch = 0; ch < 3; ++ch) {
        const double val = (1 - fy) * ((1 - fx) * texture.at(ch, y0, x0) + fx * texture.at(ch, y0, x1)) +
                           fy * ((1 - fx) * texture.at(ch, y1, x0) + fx * texture.at(ch, y1, x1));
        frame.at(ch, r, c) = static_cast<float>(val);
      }
    }
  }
  if (noise > 0.0) {
    std::normal_distribution<double> n(0.0, noise);
    for (float& p : frame.values()) p = static_cast<float>(std::clamp(p + n(rng), 0.0, 1.0));
  }
  return frame;
}

}  // namespace

std::vector<Clip> make_synthetic_dataset(std::size_t count, std::uint64_t seed,
                                         const SyntheticConfig& cfg) {
  if (count < 1) throw std::invalid_argument("make_synthetic_dataset: count must be >= 1");
  if (cfg.length < 1 || cfg.frame_size < 8 || cfg.max_object * 1.2 >= cfg.frame_size) {
    throw std::invalid_argument("make_synthetic_dataset: inconsistent configuration");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double frame = static_cast<double>(cfg.frame_size);
  std::vector<Clip> clips;
  clips.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    Clip clip;
    const Image background = make_background(cfg.frame_size, rng);
    const Image texture = make_texture(48, rng);
    const double base_w = cfg.min_object + (cfg.max_object - cfg.min_object) * u(rng);
    const double base_h = cfg.min_object + (cfg.max_object - cfg.min_object) * u(rng);
    double scale = 1.0;
    const double max_scale = cfg.frame_size / (1.1 * std::max(base_w, base_h));
    // 1-based centers; a box is inside when its extent stays in [1, frame].
    double cx = 1.0 + (frame - 1.0) / 2.0 + (u(rng) - 0.5) * 0.3 * frame;
    double cy = 1.0 + (frame - 1.0) / 2.0 + (u(rng) - 0.5) * 0.3 * frame;
    double vx = 0.0, vy = 0.0;
    for (std::size_t f = 0; f < cfg.length; ++f) {
      const double w = base_w * scale, h = base_h * scale;
      if (f > 0) {
        const double bound = cfg.max_step_fraction * std::min(w, h);
        vx += 0.4 * bound * gauss(rng);
        vy += 0.4 * bound * gauss(rng);
        clamp_step(vx, vy, bound);
        if (cx + vx - (w - 1) / 2 < 1.0 || cx + vx + (w - 1) / 2 > frame) vx = -vx;
        if (cy + vy - (h - 1) / 2 < 1.0 || cy + vy + (h - 1) / 2 > frame) vy = -vy;
        cx += vx;
        cy += vy;
      }
      const BoundingBox box{cx, cy, w, h};
      clip.frames.push_back(render(background, texture, box, cfg.pixel_noise, rng));
      clip.boxes.push_back(box);
      if (cfg.scale_drift) {
        // Drift is applied for the next frame; sizes shrink or grow slowly.
        const double next = std::clamp(scale * std::exp(0.005 * gauss(rng)), 0.85,
                                       std::min(1.2, max_scale));
        // The grown box must still fit around the current center.
        const double nw = base_w * next, nh = base_h * next;
        const double margin = cfg.max_step_fraction * std::min(nw, nh);
        if (cx - (nw - 1) / 2 - margin >= 1.0 && cx + (nw - 1) / 2 + margin <= frame &&
            cy - (nh - 1) / 2 - margin >= 1.0 && cy + (nh - 1) / 2 + margin <= frame) {
          scale = next;
        }
      }
    }
    clips.push_back(std::move(clip));
  }
  return clips;
}

std::array<double, 3> dataset_mean(std::span<const Clip> clips) {
  std::array<double, 3> sum{0.0, 0.0, 0.0};
  double count = 0.0;
  for (const auto& clip : clips) {
    for (const auto& f : clip.frames) {
      const std::size_t n = f.rows() * f.cols();
      for (std::size_t ch = 0; ch < 3; ++ch) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += f.values()[ch * n + i];
        sum[ch] += s;
      }
      count += static_cast<double>(n);
    }
  }
  if (count == 0.0) return {0.5, 0.5, 0.5};
  for (double& s : sum) s /= count;
  return sum;
}

PairGraph make_pair_graph(const TrainConfig& cfg) {
  cfg.validate();
  PairGraph g;
  g.label = gaussian_label(cfg.input_size, cfg.input_size, label_sigma(cfg));
  g.window = cfg.cosine_window ? hann_window(cfg.input_size, cfg.input_size)
                               : RealPlane(cfg.input_size, cfg.input_size, 1.0);
  g.cf = cfg.cf;
  g.precision = cfg.precision;
  return g;
}

PairResult pair_gradient(const NetworkParams& model, const FeatureMap& template_image,
                         const FeatureMap& search_image, const RealPlane& target,
                         const PairGraph& graph) {
  const NetForward fx = net_forward(template_image, model, graph.precision);
  const NetForward fz = net_forward(search_image, model, graph.precision);
  const FeatureMap wx = apply_window(fx.features, graph.window);
  const FeatureMap wz = apply_window(fz.features, graph.window);
  const CfForwardResult cf = cf_forward(wx, wz, graph.label, graph.cf);
  const CfLoss loss = cf_loss(cf.response, target);
  const FeatureMap dx = apply_window(cf_backward_x(loss.dloss_dresponse, cf.ctx), graph.window);
  const FeatureMap dz = apply_window(cf_backward_z(loss.dloss_dresponse, cf.ctx), graph.window);
  NetBackward bx = net_backward(dx, fx.tape, model, graph.precision, graph.image_grads);
  NetBackward bz = net_backward(dz, fz.tape, model, graph.precision, graph.image_grads);
  for (std::size_t l = 0; l < bx.param_grads.layers.size(); ++l) {
    auto& a = bx.param_grads.layers[l];
    const auto& b = bz.param_grads.layers[l];
    for (std::size_t i = 0; i < a.kernels.size(); ++i) a.kernels[i] += b.kernels[i];
    for (std::size_t i = 0; i < a.biases.size(); ++i) a.biases[i] += b.biases[i];
  }
  return {loss.loss, std::move(bx.param_grads), std::move(bx.input_grad),
          std::move(bz.input_grad)};
}

double pair_loss(const NetworkParams& model, const FeatureMap& template_image,
                 const FeatureMap& search_image, const RealPlane& target,
                 const PairGraph& graph) {
  const FeatureMap wx = apply_window(net_features(template_image, model, graph.precision), graph.window);
  const FeatureMap wz = apply_window(net_features(search_image, model, graph.precision), graph.window);
  return cf_loss(cf_forward(wx, wz, graph.label, graph.cf).response, target).loss;
}

TrainingSample make_sample(const NetworkParams& model, std::span<const Clip> clips,
                           const PairSpec& pair, const TrainConfig& cfg, const PairGraph& graph,
                           std::mt19937_64& rng) {
  const Clip& clip = clips[pair.sequence];
  const BoundingBox& bx = clip.boxes[pair.first];
  BoundingBox bz = clip.boxes[pair.second];
  RealPlane target = graph.label;
  if (cfg.jitter > 0) {
    std::uniform_int_distribution<int> j(-cfg.jitter, cfg.jitter);
    const int jr = j(rng), jc = j(rng);
    const double cell_w = cfg.padding * bz.width / static_cast<double>(cfg.input_size);
    const double cell_h = cfg.padding * bz.height / static_cast<double>(cfg.input_size);
    bz.cx += jc * cell_w;
    bz.cy += jr * cell_h;
    // Moving the crop by +j cells moves the object by -j cells inside it.
    target = circshift(graph.label, -jr, -jc);
  }
  return {normalize_input(crop_patch(clip.frames[pair.first], bx, cfg.padding, cfg.input_size), model),
          normalize_input(crop_patch(clip.frames[pair.second], bz, cfg.padding, cfg.input_size), model),
          std::move(target)};
}

double train_epoch(NetworkParams& model, SgdState& state, std::span<const Clip> clips,
                   std::span<const PairSpec> pairs, const TrainConfig& cfg, std::mt19937_64& rng) {
  if (pairs.empty()) throw std::invalid_argument("train_epoch: no training pairs");
  cfg.validate();
  model.validate();
  const PairGraph graph = make_pair_graph(cfg);
  std::vector<std::size_t> order(pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);

  if (state.velocity.size() != model.parameter_count()) {
    state.velocity.assign(model.parameter_count(), 0.0);
  }
  std::vector<double> flat = model.flatten();
  double total = 0.0;
  for (std::size_t start = 0; start < order.size(); start += cfg.optimizer.batch_size) {
    const std::size_t end = std::min(order.size(), start + cfg.optimizer.batch_size);
    std::vector<double> grad(flat.size(), 0.0);
    for (std::size_t k = start; k < end; ++k) {
      const TrainingSample s = make_sample(model, clips, pairs[order[k]], cfg, graph, rng);
      const PairResult r = pair_gradient(model, s.template_image, s.search_image, s.target, graph);
      total += r.loss;
      const std::vector<double> g = r.grads.flatten();
      for (std::size_t i = 0; i < g.size(); ++i) grad[i] += g[i];
    }
    const double inv = 1.0 / static_cast<double>(end - start);
    for (double& g : grad) g *= inv;
    sgd_step(flat, grad, state.velocity, cfg.optimizer);
    model.assign(flat);
  }
  return total / static_cast<double>(pairs.size());
}

double evaluate_loss(const NetworkParams& model, std::span<const Clip> clips,
                     std::span<const PairSpec> pairs, const TrainConfig& cfg) {
  if (pairs.empty()) throw std::invalid_argument("evaluate_loss: no pairs");
  const PairGraph graph = make_pair_graph(cfg);
  std::mt19937_64 rng(cfg.optimizer.seed);
  double total = 0.0;
  for (const auto& p : pairs) {
    const TrainingSample s = make_sample(model, clips, p, cfg, graph, rng);
    total += pair_loss(model, s.template_image, s.search_image, s.target, graph);
  }
  return total / static_cast<double>(pairs.size());
}

std::vector<PairSpec> select_pairs(std::span<const Clip> clips, const TrainConfig& cfg) {
  std::vector<std::size_t> lengths;
  for (const auto& c : clips) lengths.push_back(c.frames.size());
  std::vector<PairSpec> pairs = sample_pairs(lengths);
  if (cfg.max_pairs > 0 && pairs.size() > cfg.max_pairs) {
    std::mt19937_64 rng(cfg.optimizer.seed ^ 0x5eedULL);
    std::shuffle(pairs.begin(), pairs.end(), rng);
    pairs.resize(cfg.max_pairs);
    std::sort(pairs.begin(), pairs.end(), [](const PairSpec& a, const PairSpec& b) {
      return std::tie(a.sequence, a.first, a.second) < std::tie(b.sequence, b.first, b.second);
    });
  }
  return pairs;
}

TrainReport train_model(NetworkParams& model, std::span<const Clip> clips, const TrainConfig& cfg,
                        const std::function<void(std::size_t, double)>& on_epoch) {
  cfg.validate();
  model.input_mean = dataset_mean(clips);
  const std::vector<PairSpec> pairs = select_pairs(clips, cfg);
  SgdState state;
  std::mt19937_64 rng(cfg.optimizer.seed);
  TrainReport report;
  for (std::size_t e = 0; e < cfg.optimizer.epochs; ++e) {
    const double loss = train_epoch(model, state, clips, pairs, cfg, rng);
    report.epoch_losses.push_back(loss);
    if (on_epoch) on_epoch(e, loss);
  }
  return report;
}

}  // namespace corrtrack
