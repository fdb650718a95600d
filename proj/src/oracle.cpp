#include "corrtrack/oracle.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

namespace corrtrack::oracle {

ComplexPlane direct_dft2(const ComplexPlane& plane) {
  const std::size_t m = plane.rows(), n = plane.cols();
  if (m * n > kMaxDirectDftCells) {
    throw std::invalid_argument("direct_dft2: plane exceeds the brute-force budget");
  }
  ComplexPlane out(m, n);
  for (std::size_t u = 0; u < m; ++u) {
    for (std::size_t v = 0; v < n; ++v) {
      Complex acc{};
      for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t c = 0; c < n; ++c) {
          // Reduce the phase numerators mod M and N before scaling to keep
          // the angle small.
          const double phase = -2.0 * std::numbers::pi *
                               (static_cast<double>((u * r) % m) / static_cast<double>(m) +
                                static_cast<double>((v * c) % n) / static_cast<double>(n));
          acc += plane(r, c) * Complex(std::cos(phase), std::sin(phase));
        }
      }
      out(u, v) = acc;
    }
  }
  return out;
}

ComplexPlane direct_dft2(const RealPlane& plane) {
  ComplexPlane c(plane.rows(), plane.cols());
  for (std::size_t i = 0; i < plane.size(); ++i) c[i] = plane[i];
  return direct_dft2(c);
}

RealPlane circular_correlation(const FeatureMap& filter, const FeatureMap& features) {
  if (!filter.same_shape(features)) {
    throw std::invalid_argument("circular_correlation: shape mismatch");
  }
  const std::size_t m = features.rows(), n = features.cols();
  RealPlane g(m, n, 0.0);
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      double acc = 0.0;
      for (std::size_t l = 0; l < features.channels(); ++l) {
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < n; ++j) {
            acc += filter(l, i, j) * features(l, (r + i) % m, (c + j) % n);
          }
        }
      }
      g(r, c) = acc;
    }
  }
  return g;
}

namespace {

void check_budget(const DenseRidgeProblem& p) {
  const auto& x = p.features;
  if (x.rows() > kMaxRidgeSide || x.cols() > kMaxRidgeSide || x.channels() > kMaxRidgeChannels) {
    throw std::invalid_argument("dense_ridge_solve: problem exceeds the brute-force budget");
  }
  if (p.label.rows() != x.rows() || p.label.cols() != x.cols()) {
    throw std::invalid_argument("dense_ridge_solve: label shape mismatch");
  }
  if (!(p.lambda > 0.0)) throw std::invalid_argument("dense_ridge_solve: lambda must be > 0");
}

// Row (r, c) of the operator holds x^l((r + i) mod M, (c + j) mod N) at
// column (l, i, j).
Eigen::MatrixXd correlation_operator(const FeatureMap& x) {
  const std::size_t m = x.rows(), n = x.cols(), d = x.channels();
  Eigen::MatrixXd a(m * n, d * m * n);
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      for (std::size_t l = 0; l < d; ++l) {
        for (std::size_t i = 0; i < m; ++i) {
          for (std::size_t j = 0; j < n; ++j) {
            a(r * n + c, (l * m + i) * n + j) = x(l, (r + i) % m, (c + j) % n);
          }
        }
      }
    }
  }
  return a;
}

}  // namespace

FeatureMap dense_ridge_solve(const DenseRidgeProblem& p) {
  check_budget(p);
  const auto& x = p.features;
  const std::size_t cells = x.rows() * x.cols();
  const std::size_t unknowns = cells * x.channels();
  const Eigen::MatrixXd a = correlation_operator(x);

  // Normal equations (A^T A + lambda I) w = A^T y, factorized through the
  // equivalent stacked least-squares system [A; sqrt(lambda) I] for accuracy.
  Eigen::MatrixXd stacked(cells + unknowns, unknowns);
  stacked.topRows(cells) = a;
  stacked.bottomRows(unknowns) =
      std::sqrt(p.lambda) * Eigen::MatrixXd::Identity(unknowns, unknowns);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(cells + unknowns);
  for (std::size_t i = 0; i < cells; ++i) rhs(i) = p.label[i];
  const Eigen::VectorXd w = stacked.householderQr().solve(rhs);

  FeatureMap out(x.rows(), x.cols(), x.channels());
  for (std::size_t i = 0; i < unknowns; ++i) out[i] = w(i);
  return out;
}

double ridge_loss(const DenseRidgeProblem& p, const FeatureMap& filter) {
  const RealPlane g = circular_correlation(filter, p.features);
  double loss = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) loss += (g[i] - p.label[i]) * (g[i] - p.label[i]);
  double reg = 0.0;
  for (double v : filter.values()) reg += v * v;
  return loss + p.lambda * reg;
}

namespace {

constexpr int kMaxStepHalvings = 4;  // eps shrinks by 10x per retry, down to eps * 1e-4

struct Difference {
  double value = 0.0;
  bool finite = true;
  bool straddles = false;  // no step kept both probes in the point's region
};

// Central difference along `dir`. When a probe leaves the region of the base
// point the step shrinks, so kinks of piecewise-smooth functions are not
// differenced across.
Difference central_difference(const PiecewiseFn& f, std::vector<double>& x,
                              std::span<const double> dir, double eps, std::uint64_t region,
                              std::size_t& evaluations) {
  const std::vector<double> saved(x);
  Difference d;
  double h = eps;
  for (int attempt = 0; attempt <= kMaxStepHalvings; ++attempt, h *= 0.1) {
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = saved[i] + h * dir[i];
    const Sample fp = f(x);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = saved[i] - h * dir[i];
    const Sample fm = f(x);
    evaluations += 2;
    d.value = (fp.value - fm.value) / (2.0 * h);
    d.finite = std::isfinite(fp.value) && std::isfinite(fm.value);
    d.straddles = fp.region != region || fm.region != region;
    if (!d.straddles || !d.finite) break;
  }
  x = saved;
  return d;
}

PiecewiseFn smooth(const ScalarFn& f) {
  return [&f](std::span<const double> x) { return Sample{f(x), 0}; };
}

void check_lengths(std::span<const double> point, std::span<const double> analytic) {
  if (point.size() != analytic.size()) {
    throw std::invalid_argument("finite_diff_check: gradient length mismatch");
  }
}

void finish(GradCheckReport& rep) {
  if (!rep.finite) {
    rep.max_rel_error = std::numeric_limits<double>::infinity();
    rep.detail = "non-finite function evaluation";
  } else if (rep.straddled > 0) {
    rep.detail += (rep.detail.empty() ? "" : "; ") + std::to_string(rep.straddled) +
                  " probes could not avoid a kink";
  }
}

}  // namespace

GradCheckReport exhaustive_check(const PiecewiseFn& f, std::span<const double> point,
                                 std::span<const double> analytic, double eps) {
  check_lengths(point, analytic);
  GradCheckReport rep;
  std::vector<double> x(point.begin(), point.end());
  const std::uint64_t region = f(x).region;
  ++rep.evaluations;
  std::vector<double> numeric(x.size());
  std::vector<double> e(x.size(), 0.0);
  for (std::size_t i = 0; i < x.size(); ++i) {
    e[i] = 1.0;
    const Difference d = central_difference(f, x, e, eps, region, rep.evaluations);
    e[i] = 0.0;
    numeric[i] = d.value;
    rep.finite = rep.finite && d.finite;
    if (d.straddles) ++rep.straddled;
  }
  double scale = 0.0, diff = 0.0;
  std::size_t worst = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    scale = std::max({scale, std::abs(analytic[i]), std::abs(numeric[i])});
    const double d = std::abs(analytic[i] - numeric[i]);
    if (d > diff) {
      diff = d;
      worst = i;
    }
  }
  rep.max_abs_error = diff;
  rep.max_rel_error = scale > 0.0 ? diff / scale : 0.0;
  if (!x.empty()) {
    std::ostringstream os;
    os << "worst coordinate " << worst << ": analytic " << analytic[worst] << ", numeric "
       << numeric[worst];
    rep.detail = os.str();
  }
  finish(rep);
  return rep;
}

GradCheckReport directional_check(const PiecewiseFn& f, std::span<const double> point,
                                  std::span<const double> analytic, std::size_t directions,
                                  std::uint64_t seed, double eps) {
  check_lengths(point, analytic);
  GradCheckReport rep;
  rep.directional = true;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> x(point.begin(), point.end());
  const std::uint64_t region = f(x).region;
  ++rep.evaluations;
  std::vector<double> v(x.size());
  for (std::size_t k = 0; k < directions; ++k) {
    double norm = 0.0;
    for (double& e : v) {
      e = normal(rng);
      norm += e * e;
    }
    norm = std::sqrt(norm);
    double projected = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      v[i] /= norm;
      projected += analytic[i] * v[i];
    }
    const Difference fd = central_difference(f, x, v, eps, region, rep.evaluations);
    rep.finite = rep.finite && fd.finite;
    if (fd.straddles) ++rep.straddled;
    const double d = std::abs(projected - fd.value);
    const double scale = std::max(std::abs(projected), std::abs(fd.value));
    rep.max_abs_error = std::max(rep.max_abs_error, d);
    if (scale > 0.0) rep.max_rel_error = std::max(rep.max_rel_error, d / scale);
  }
  finish(rep);
  return rep;
}

GradCheckReport finite_diff_check(const PiecewiseFn& f, std::span<const double> point,
                                  std::span<const double> analytic, double eps,
                                  std::size_t directions, std::uint64_t seed) {
  if (point.size() > kExhaustiveLimit) {
    return directional_check(f, point, analytic, directions, seed, eps);
  }
  return exhaustive_check(f, point, analytic, eps);
}

GradCheckReport exhaustive_check(const ScalarFn& f, std::span<const double> point,
                                 std::span<const double> analytic, double eps) {
  return exhaustive_check(smooth(f), point, analytic, eps);
}

GradCheckReport directional_check(const ScalarFn& f, std::span<const double> point,
                                  std::span<const double> analytic, std::size_t directions,
                                  std::uint64_t seed, double eps) {
  return directional_check(smooth(f), point, analytic, directions, seed, eps);
}

GradCheckReport finite_diff_check(const ScalarFn& f, std::span<const double> point,
                                  std::span<const double> analytic, double eps,
                                  std::size_t directions, std::uint64_t seed) {
  return finite_diff_check(smooth(f), point, analytic, eps, directions, seed);
}

}  // namespace corrtrack::oracle
