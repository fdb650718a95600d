#pragma once

#include <algorithm>
#include <cmath>
#include <random>

#include "corrtrack/spectral.hpp"

namespace corrtrack::testing {

inline RealPlane random_plane(std::size_t m, std::size_t n, std::mt19937_64& rng,
                              double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  RealPlane p(m, n);
  for (double& v : p.values()) v = u(rng);
  return p;
}

inline FeatureMap random_map(std::size_t m, std::size_t n, std::size_t d, std::mt19937_64& rng,
                             double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  FeatureMap f(m, n, d);
  for (double& v : f.values()) v = u(rng);
  return f;
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

}  // namespace corrtrack::testing
