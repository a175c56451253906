#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "model.hpp"
#include "pattern.hpp"
#include "random.hpp"

namespace compclust {

struct SimulatedPattern {
  PointPattern pattern;
  Matching truth;
  std::vector<Point2> centers;  ///< latent, one per cluster in truth order
};

struct SimulateOptions {
  bool crop_to_window = false;  ///< drop points outside W (clusters may shrink)
};

/// Draws (x, rho) from the generative model: N ~ Poisson(lambda) clusters,
/// size s ~ p, centre z ~ g, offsets N(0, sigma^2/pi I) centred to mean 0,
/// marks a uniform s-subset of the k colours.
inline SimulatedPattern simulate_model(const ModelParams& params, const CenterDensity& g, const Window& w, Rng& rng,
                                       SimulateOptions opt = {}) {
  params.validate();
  const int k = params.k();
  SimulatedPattern out;
  out.pattern.k = k;
  out.pattern.window = w;
  const int n_clusters = sample_poisson(params.lambda, rng);
  const double sd = params.sigma / std::sqrt(kPi);
  std::discrete_distribution<int> size_dist(params.p.begin(), params.p.end());
  std::vector<int> colours(k);
  std::vector<int> labels;
  for (int c = 0; c < n_clusters; ++c) {
    const int s = size_dist(rng) + 1;
    const Point2 z = g.sample(rng);
    std::vector<Point2> off(s);
    Point2 mean{};
    for (auto& o : off) {
      o = {sd * standard_normal(rng), sd * standard_normal(rng)};
      mean = mean + o;
    }
    mean = (1.0 / s) * mean;
    std::iota(colours.begin(), colours.end(), 0);
    for (int a = 0; a < s; ++a) std::swap(colours[a], colours[std::uniform_int_distribution<int>(a, k - 1)(rng)]);
    bool any = false;
    int first = -1;
    for (int a = 0; a < s; ++a) {
      const Point2 p = z + (off[a] - mean);
      if (opt.crop_to_window && !w.contains(p)) continue;
      if (first < 0) first = static_cast<int>(out.pattern.points.size());
      out.pattern.points.push_back({p, colours[a]});
      labels.push_back(first);
      any = true;
    }
    if (any) out.centers.push_back(z);
  }
  out.truth = Matching::from_labels(labels);
  return out;
}

/// Independent uniform components with fixed counts per type.
inline PointPattern simulate_csri(const std::vector<int>& counts, const Window& w, Rng& rng) {
  PointPattern x;
  x.k = static_cast<int>(counts.size());
  x.window = w;
  const Rect& b = w.bounding_box();
  for (int t = 0; t < x.k; ++t) {
    if (counts[t] < 0) throw std::invalid_argument("negative count");
    for (int s = 0; s < counts[t];) {
      const Point2 u{b.x0 + uniform01(rng) * b.width(), b.y0 + uniform01(rng) * b.height()};
      if (!w.contains(u)) continue;
      x.points.push_back({u, t});
      ++s;
    }
  }
  return x;
}

/// Independent homogeneous Poisson components with intensities lambda_t.
inline PointPattern simulate_csri_poisson(const std::vector<double>& intensity, const Window& w, Rng& rng) {
  std::vector<int> counts;
  for (double l : intensity) counts.push_back(sample_poisson(l * w.area(), rng));
  return simulate_csri(counts, w, rng);
}

}  // namespace compclust
