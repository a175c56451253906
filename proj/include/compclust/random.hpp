#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace compclust {

using Rng = std::mt19937_64;

/// Independent stream for (seed, stream) pairs, e.g. one per chain.
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32), 0x9e3779b9u};
  return Rng(seq);
}

inline double uniform01(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

inline double standard_normal(Rng& rng) { return std::normal_distribution<double>(0.0, 1.0)(rng); }

/// log of a Gamma(shape, 1) draw; stays finite for very small shapes, where
/// the draw itself underflows.
inline double log_gamma_draw(double shape, Rng& rng) {
  if (shape >= 1.0) return std::log(std::gamma_distribution<double>(shape, 1.0)(rng));
  // Gamma(a) = Gamma(a + 1) * U^(1/a)
  const double g = std::gamma_distribution<double>(shape + 1.0, 1.0)(rng);
  double u = uniform01(rng);
  while (u <= 0.0) u = uniform01(rng);
  return std::log(g) + std::log(u) / shape;
}

/// Dirichlet(alpha) draw.
inline std::vector<double> sample_dirichlet(const std::vector<double>& alpha, Rng& rng) {
  std::vector<double> lg(alpha.size());
  double mx = -INFINITY;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    lg[i] = log_gamma_draw(alpha[i], rng);
    mx = std::max(mx, lg[i]);
  }
  double sum = 0.0;
  for (auto& v : lg) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (auto& v : lg) v /= sum;
  return lg;
}

inline int sample_poisson(double mean, Rng& rng) {
  if (mean <= 0.0) return 0;
  return std::poisson_distribution<int>(mean)(rng);
}

/// Index drawn with probability proportional to weights (non-negative).
inline int sample_discrete(const std::vector<double>& weights, Rng& rng) {
  double total = 0.0;
  for (double w : weights) total += w;
  double u = uniform01(rng) * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (u < weights[i]) return static_cast<int>(i);
    u -= weights[i];
  }
  for (std::size_t i = weights.size(); i-- > 0;)
    if (weights[i] > 0.0) return static_cast<int>(i);
  return -1;
}

}  // namespace compclust
