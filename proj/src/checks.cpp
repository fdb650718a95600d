#include "corrtrack/checks.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <sstream>

#include "corrtrack/cf_layer.hpp"
#include "corrtrack/features.hpp"
#include "corrtrack/kernels.hpp"
#include "corrtrack/oracle.hpp"
#include "corrtrack/tracking.hpp"
#include "corrtrack/training.hpp"

namespace corrtrack::checks {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

template <typename A, typename B>
double rel_error(const A& a, const B& b) {
  double diff = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(a[i] - b[i]));
    scale = std::max({scale, std::abs(a[i]), std::abs(b[i])});
  }
  return scale > 0.0 ? diff / scale : diff;
}

FeatureMap random_map(std::size_t m, std::size_t n, std::size_t d, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  FeatureMap f(m, n, d);
  for (double& v : f.values()) v = u(rng);
  return f;
}

RealPlane random_plane(std::size_t m, std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  RealPlane p(m, n);
  for (double& v : p.values()) v = u(rng);
  return p;
}

std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (double& e : v) e = u(rng);
  return v;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

FeatureMap like(const FeatureMap& shape, std::span<const double> values) {
  FeatureMap out(shape.rows(), shape.cols(), shape.channels());
  std::copy(values.begin(), values.end(), out.values().begin());
  return out;
}

void absorb(CheckResult& r, const oracle::GradCheckReport& rep, const std::string& what) {
  ++r.cases;
  if (rep.max_rel_error > r.value || !std::isfinite(rep.max_rel_error)) {
    r.value = std::isfinite(rep.max_rel_error) ? rep.max_rel_error
                                                : std::numeric_limits<double>::infinity();
    r.detail = what + (rep.detail.empty() ? "" : " (" + rep.detail + ")");
  }
}

CheckResult start(std::string name, double bound) {
  CheckResult r;
  r.name = std::move(name);
  r.bound = bound;
  return r;
}

// FNV-1a over the ReLU activation pattern recorded in a forward tape.
std::uint64_t relu_region(const FeatureTape& tape, const NetworkParams& params,
                          std::uint64_t h = 1469598103934665603ull) {
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    if (!params.layers[l].relu) continue;
    for (double v : tape.conv_outputs[l].values()) {
      h ^= v > 0.0 ? 1u : 0u;
      h *= 1099511628211ull;
    }
  }
  return h;
}

oracle::Sample probe_features(const FeatureMap& image, const NetworkParams& params,
                              const FeatureMap& probe) {
  const NetForward f = net_forward(image, params);
  return {dot(f.features.values(), probe.values()), relu_region(f.tape, params)};
}

oracle::Sample probe_pair(const NetworkParams& params, const FeatureMap& x, const FeatureMap& z,
                          const RealPlane& target, const PairGraph& graph) {
  const NetForward fx = net_forward(x, params);
  const NetForward fz = net_forward(z, params);
  const FeatureMap wx = apply_window(fx.features, graph.window);
  const FeatureMap wz = apply_window(fz.features, graph.window);
  const double loss = cf_loss(cf_forward(wx, wz, graph.label, graph.cf).response, target).loss;
  return {loss, relu_region(fz.tape, params, relu_region(fx.tape, params))};
}

struct SizeDraw {
  std::size_t m, n, d;
};

SizeDraw draw_size(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> side(2, oracle::kMaxRidgeSide);
  std::uniform_int_distribution<std::size_t> chan(1, oracle::kMaxRidgeChannels);
  return {side(rng), side(rng), chan(rng)};
}

}  // namespace

CheckResult ridge_equivalence(std::size_t instances, std::uint64_t seed) {
  const auto t0 = Clock::now();
  CheckResult r = start("ridge solve vs dense oracle", 1e-9);
  std::mt19937_64 rng(seed);
  const CfConfig cfg{1e-4};
  for (std::size_t k = 0; k < instances; ++k) {
    const auto [m, n, d] = draw_size(rng);
    const FeatureMap x = random_map(m, n, d, rng);
    const RealPlane y = random_plane(m, n, rng);
    const FeatureMap fast =
        real_part_checked(ifft2(solve_filter(fft2(x), fft2(y), cfg)), kImagResidueTol, "filter");
    const FeatureMap dense = oracle::dense_ridge_solve({x, y, cfg.lambda});
    const double e = rel_error(fast, dense);
    if (e > r.value) {
      r.value = e;
      r.detail = "instance " + std::to_string(k) + " (" + std::to_string(m) + "x" +
                 std::to_string(n) + "x" + std::to_string(d) + ")";
    }
    ++r.cases;
  }
  r.seconds = seconds_since(t0);
  return r;
}

CheckResult detection_equivalence(std::size_t instances, std::uint64_t seed) {
  const auto t0 = Clock::now();
  CheckResult r = start("detection vs spatial correlation", 1e-9);
  std::mt19937_64 rng(seed);
  const CfConfig cfg{1e-4};
  for (std::size_t k = 0; k < instances; ++k) {
    const auto [m, n, d] = draw_size(rng);
    const FeatureMap x = random_map(m, n, d, rng);
    const RealPlane y = random_plane(m, n, rng);
    const FeatureMap z = random_map(m, n, d, rng);
    const RealPlane fast = cf_forward(x, z, y, cfg).response;
    const RealPlane slow =
        oracle::circular_correlation(oracle::dense_ridge_solve({x, y, cfg.lambda}), z);
    const double e = rel_error(fast, slow);
    if (e > r.value) {
      r.value = e;
      r.detail = "instance " + std::to_string(k);
    }
    ++r.cases;
  }
  r.seconds = seconds_since(t0);
  return r;
}

CheckResult dft_equivalence(std::size_t planes, std::uint64_t seed) {
  const auto t0 = Clock::now();
  CheckResult r = start("fft2 vs direct DFT", 1e-10);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> side(1, 16);
  for (std::size_t k = 0; k < planes; ++k) {
    const RealPlane p = random_plane(side(rng), side(rng), rng);
    r.value = std::max(r.value, rel_error(fft2(p), oracle::direct_dft2(p)));
    ++r.cases;
  }
  r.seconds = seconds_since(t0);
  return r;
}

CheckResult ridge_optimality(std::size_t perturbations, std::uint64_t seed) {
  const auto t0 = Clock::now();
  CheckResult r = start("ridge optimum vs perturbations", 1e-12);
  std::mt19937_64 rng(seed);
  const oracle::DenseRidgeProblem p{random_map(6, 5, 2, rng), random_plane(6, 5, rng), 1e-4};
  const FeatureMap w = oracle::dense_ridge_solve(p);
  const double best = oracle::ridge_loss(p, w);
  for (std::size_t k = 0; k < perturbations; ++k) {
    FeatureMap q = w;
    const double eps = std::pow(10.0, -1.0 - 4.0 * static_cast<double>(k) / perturbations);
    std::uniform_real_distribution<double> u(-eps, eps);
    for (double& v : q.values()) v += u(rng);
    const double gain = (best - oracle::ridge_loss(p, q)) / std::max(best, 1e-300);
    r.value = std::max(r.value, gain);
    ++r.cases;
  }
  r.seconds = seconds_since(t0);
  return r;
}

CheckResult cf_gradients(std::size_t instances, std::uint64_t seed) {
  const auto t0 = Clock::now();
  CheckResult r = start("cf layer backward (x and z branches)", 1e-5);
  std::mt19937_64 rng(seed);
  const CfConfig cfg{1e-4};
  for (std::size_t k = 0; k < instances; ++k) {
    const FeatureMap x = random_map(5, 5, 2, rng);
    const FeatureMap z = random_map(5, 5, 2, rng);
    const RealPlane y = gaussian_label(5, 5, 1.0);
    const RealPlane target = random_plane(5, 5, rng);
    const auto fwd = cf_forward(x, z, y, cfg);
    const auto loss = cf_loss(fwd.response, target);
    const FeatureMap dz = cf_backward_z(loss.dloss_dresponse, fwd.ctx);
    const FeatureMap dx = cf_backward_x(loss.dloss_dresponse, fwd.ctx);
    const oracle::ScalarFn fz = [&](std::span<const double> v) {
      return cf_loss(cf_forward(x, like(z, v), y, cfg).response, target).loss;
    };
    const oracle::ScalarFn fx = [&](std::span<const double> v) {
      return cf_loss(cf_forward(like(x, v), z, y, cfg).response, target).loss;
    };
    absorb(r, oracle::exhaustive_check(fz, z.values(), dz.values()), "z branch #" + std::to_string(k));
    absorb(r, oracle::exhaustive_check(fx, x.values(), dx.values()), "x branch #" + std::to_string(k));
  }
  r.seconds = seconds_since(t0);
  return r;
}

CheckResult conv_gradients(std::uint64_t seed) {
  const auto t0 = Clock::now();
  CheckResult r = start("conv3x3 backward", 1e-6);
  std::mt19937_64 rng(seed);
  for (int dilation : {1, 2}) {
    const kernels::ConvShape shape{2, 3, dilation};
    const FeatureMap in = random_map(7, 7, 2, rng);
    const std::vector<double> k = random_vector(shape.kernel_size(), rng);
    const std::vector<double> b = random_vector(3, rng);
    const FeatureMap probe = random_map(7, 7, 3, rng);
    const auto g = kernels::conv2d_backward(in, probe, shape, k);
    const auto out_dot = [&](const FeatureMap& i, std::span<const double> kk, std::span<const double> bb) {
      return dot(kernels::conv2d_forward(i, shape, kk, bb).values(), probe.values());
    };
    const std::string tag = " (dilation " + std::to_string(dilation) + ")";
    absorb(r, oracle::exhaustive_check([&](std::span<const double> v) { return out_dot(like(in, v), k, b); },
                                       in.values(), g.input.values()),
           "input" + tag);
    absorb(r, oracle::exhaustive_check([&](std::span<const double> v) { return out_dot(in, v, b); }, k,
                                       g.kernels),
           "kernels" + tag);
    absorb(r, oracle::exhaustive_check([&](std::span<const double> v) { return out_dot(in, k, v); }, b,
                                       g.biases),
           "biases" + tag);
  }
  r.seconds = seconds_since(t0);
  return r;
}

CheckResult relu_gradients(std::uint64_t seed) {
  const auto t0 = Clock::now();
  CheckResult r = start("relu backward", 1e-6);
  std::mt19937_64 rng(seed);
  FeatureMap in = random_map(6, 6, 4, rng);
  // Keep every entry away from the kink so central differences are exact.
  for (double& v : in.values()) {
    if (std::abs(v) <= 1e-3) v = v < 0.0 ? -0.5 : 0.5;
  }
  const FeatureMap probe = random_map(6, 6, 4, rng);
  const FeatureMap g = kernels::relu_backward(in, probe);
  const oracle::ScalarFn f = [&](std::span<const double> v) {
    FeatureMap x = like(in, v);
    kernels::relu_inplace(x);
    return dot(x.values(), probe.values());
  };
  absorb(r, oracle::exhaustive_check(f, in.values(), g.values()), "relu");
  r.seconds = seconds_since(t0);
  return r;
}

CheckResult lrn_gradients(std::uint64_t seed) {
  const auto t0 = Clock::now();
  CheckResult r = start("lrn backward", 1e-6);
  std::mt19937_64 rng(seed);
  const kernels::LrnShape defaults{};
  const kernels::LrnShape strong{5, 1.0, 0.5, 0.75};
  for (const auto& [p, tag] : {std::pair{defaults, "default constants"}, {strong, "alpha 0.5"}}) {
    const FeatureMap in = random_map(4, 4, 8, rng);
    const FeatureMap probe = random_map(4, 4, 8, rng);
    const FeatureMap g = kernels::lrn_backward(in, probe, p);
    const oracle::ScalarFn f = [&](std::span<const double> v) {
      return dot(kernels::lrn_forward(like(in, v), p).values(), probe.values());
    };
    absorb(r, oracle::exhaustive_check(f, in.values(), g.values()), tag);
  }
  r.seconds = seconds_since(t0);
  return r;
}

CheckResult network_gradients(std::uint64_t seed) {
  const auto t0 = Clock::now();
  CheckResult r = start("network backward, per parameter block", 1e-5);
  std::mt19937_64 rng(seed);
  for (Architecture arch : {Architecture::Conv1, Architecture::Conv1Dilation, Architecture::Conv2}) {
    NetworkParams params = init_network(arch, seed + static_cast<std::uint64_t>(arch));
    for (auto& l : params.layers) {
      for (double& b : l.biases) b = 0.05 * std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
    }
    const FeatureMap image = random_map(9, 9, 3, rng);
    const NetForward fwd = net_forward(image, params);
    const FeatureMap probe = random_map(9, 9, kFeatureChannels, rng);
    const NetBackward back = net_backward(probe, fwd.tape, params);
    const std::string name(architecture_name(arch));

    const oracle::PiecewiseFn f_image = [&](std::span<const double> v) {
      return probe_features(like(image, v), params, probe);
    };
    absorb(r, oracle::exhaustive_check(f_image, image.values(), back.input_grad.values()),
           name + " input");

    for (std::size_t l = 0; l < params.layers.size(); ++l) {
      for (bool kernels_block : {true, false}) {
        auto block = [&](auto& p) -> auto& {
          return kernels_block ? p.layers[l].kernels : p.layers[l].biases;
        };
        const std::vector<double> point = block(params);
        const std::vector<double>& analytic = block(back.param_grads);
        const oracle::PiecewiseFn f = [&](std::span<const double> v) {
          NetworkParams q = params;
          std::copy(v.begin(), v.end(), block(q).begin());
          return probe_features(image, q, probe);
        };
        const std::string what =
            name + " layer " + std::to_string(l + 1) + (kernels_block ? " kernels" : " biases");
        absorb(r, oracle::finite_diff_check(f, point, analytic, 1e-5, 20, seed + l), what);
      }
    }
  }
  r.seconds = seconds_since(t0);
  return r;
}

CheckResult end_to_end_gradients(std::uint64_t seed) {
  const auto t0 = Clock::now();
  CheckResult r = start("end-to-end pair loss, directional", 1e-5);
  std::mt19937_64 rng(seed);
  TrainConfig cfg;
  cfg.input_size = 9;
  cfg.precision = Precision::Double;
  PairGraph graph = make_pair_graph(cfg);
  graph.image_grads = true;
  NetworkParams params = init_network(Architecture::Conv1, seed);
  const FeatureMap x = random_map(9, 9, 3, rng);
  const FeatureMap z = random_map(9, 9, 3, rng);
  const PairResult res = pair_gradient(params, x, z, graph.label, graph);

  const std::vector<double> theta = params.flatten();
  const std::vector<double> grad = res.grads.flatten();
  const oracle::PiecewiseFn f_theta = [&](std::span<const double> v) {
    NetworkParams q = params;
    q.assign(v);
    return probe_pair(q, x, z, graph.label, graph);
  };
  absorb(r, oracle::directional_check(f_theta, theta, grad, 30, seed), "parameters");
  const oracle::PiecewiseFn f_x = [&](std::span<const double> v) {
    return probe_pair(params, like(x, v), z, graph.label, graph);
  };
  absorb(r, oracle::directional_check(f_x, x.values(), res.template_grad.values(), 30, seed + 1),
         "template image");
  const oracle::PiecewiseFn f_z = [&](std::span<const double> v) {
    return probe_pair(params, x, like(z, v), graph.label, graph);
  };
  absorb(r, oracle::directional_check(f_z, z.values(), res.search_grad.values(), 30, seed + 2),
         "search image");
  r.seconds = seconds_since(t0);
  return r;
}

CheckResult incremental_update(std::size_t frames, std::uint64_t seed) {
  const auto t0 = Clock::now();
  CheckResult r = start("recursive update vs explicit weighted sum", 1e-10);
  std::mt19937_64 rng(seed);
  const ComplexPlane label_conj = [] {
    ComplexPlane s = fft2(gaussian_label(8, 8, 1.5));
    for (Complex& c : s.values()) c = std::conj(c);
    return s;
  }();
  for (double beta : {0.008, 0.25}) {
    std::vector<FilterState> stats;
    FilterState state;
    for (std::size_t t = 0; t < frames; ++t) {
      const FeatureSpectrum spec = fft2(random_map(8, 8, 3, rng));
      stats.push_back(frame_statistics(spec, label_conj));
      state = t == 0 ? stats.back() : update_filter_state(state, spec, label_conj, beta);
    }
    FeatureSpectrum num(8, 8, 3, Complex{});
    RealPlane den(8, 8, 0.0);
    const std::size_t p = frames;
    for (std::size_t t = 1; t <= p; ++t) {
      const double w = t == 1 ? std::pow(1.0 - beta, static_cast<double>(p - 1))
                              : beta * std::pow(1.0 - beta, static_cast<double>(p - t));
      for (std::size_t i = 0; i < num.size(); ++i) num[i] += w * stats[t - 1].numerator[i];
      for (std::size_t i = 0; i < den.size(); ++i) den[i] += w * stats[t - 1].denominator[i];
    }
    r.value = std::max({r.value, rel_error(state.numerator, num), rel_error(state.denominator, den)});
    if (state.frames != p) r.value = std::numeric_limits<double>::infinity();
    ++r.cases;
  }
  r.seconds = seconds_since(t0);
  return r;
}

CheckResult shift_decoding(std::size_t size) {
  const auto t0 = Clock::now();
  CheckResult r = start("wrapped displacement decoding", 0.5);
  std::mt19937_64 rng(size);
  const FeatureMap x = random_map(size, size, 3, rng);
  const RealPlane y = gaussian_label(size, size, 1.0);
  const auto filter = solve_filter(fft2(x), fft2(y), CfConfig{1e-4});
  const long half = static_cast<long>(size / 2);
  const long upper = static_cast<long>((size + 1) / 2);
  std::size_t mismatches = 0;
  for (long dr = -half; dr < upper; ++dr) {
    for (long dc = -half; dc < upper; ++dc) {
      const RealPlane g = detect(filter, fft2(circshift(x, dr, dc)));
      const auto it = std::max_element(g.values().begin(), g.values().end());
      const std::size_t idx = static_cast<std::size_t>(it - g.values().begin());
      const auto [du, dv] = peak_to_displacement(idx / size, idx % size, size, size);
      if (du != dr || dv != dc) {
        if (mismatches == 0) {
          r.detail = "shift (" + std::to_string(dr) + ", " + std::to_string(dc) + ") decoded as (" +
                     std::to_string(du) + ", " + std::to_string(dv) + ")";
        }
        ++mismatches;
      }
      ++r.cases;
    }
  }
  r.value = static_cast<double>(mismatches);
  r.seconds = seconds_since(t0);
  return r;
}

std::vector<CheckResult> gradcheck_suite(std::uint64_t seed) {
  return {cf_gradients(50, seed),       conv_gradients(seed + 1),    relu_gradients(seed + 2),
          lrn_gradients(seed + 3),      network_gradients(seed + 4), end_to_end_gradients(seed + 5)};
}

std::vector<CheckResult> selftest_suite(std::uint64_t seed) {
  return {dft_equivalence(50, seed),          ridge_equivalence(100, seed + 1),
          detection_equivalence(100, seed + 1), ridge_optimality(100, seed + 2),
          incremental_update(20, seed + 3),   shift_decoding(16)};
}

std::string format_result(const CheckResult& r) {
  std::ostringstream os;
  os << (r.pass() ? "ok   " : "FAIL ") << r.name << ": max error " << r.value << " (bound " << r.bound
     << ", " << r.cases << " cases, " << std::fixed;
  os.precision(2);
  os << r.seconds << " s)";
  if (!r.pass() && !r.detail.empty()) os << " worst: " << r.detail;
  return os.str();
}

}  // namespace corrtrack::checks
