#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "pattern.hpp"
#include "random.hpp"

namespace compclust {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Fixed hyperparameters of the complementary clustering model.
struct Hyperparams {
  double sigma_max = 50.0;     ///< km, upper end of the flat prior on sigma
  double k_lambda = 300.0;     ///< Gamma shape for lambda
  double theta_lambda = 1.0;   ///< Gamma scale for lambda
  std::vector<double> alpha;   ///< Dirichlet concentrations for cluster sizes 1..k

  static Hyperparams defaults(int k) {
    Hyperparams h;
    h.alpha.assign(k, 1.0 / k);
    return h;
  }

  void validate(int k) const {
    if (!(sigma_max > 0.0) || !(k_lambda > 0.0) || !(theta_lambda > 0.0))
      throw std::invalid_argument("hyperparameters must be strictly positive");
    if (static_cast<int>(alpha.size()) != k) throw std::invalid_argument("alpha must have k entries");
    for (double a : alpha)
      if (!(a > 0.0)) throw std::invalid_argument("alpha entries must be strictly positive");
  }
};

/// Continuous unknowns: dispersion sigma (km), cluster-size distribution p
/// (p[s-1] for size s) and expected cluster count lambda.
struct ModelParams {
  double sigma = 1.0;
  std::vector<double> p;
  double lambda = 1.0;

  int k() const { return static_cast<int>(p.size()); }

  void validate(double sigma_max = std::numeric_limits<double>::infinity()) const {
    if (!(sigma > 0.0) || !(sigma < sigma_max)) throw std::invalid_argument("sigma outside (0, sigma_max)");
    if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
    double s = 0.0;
    for (double v : p) {
      if (v < 0.0) throw std::invalid_argument("negative cluster-size probability");
      s += v;
    }
    if (p.empty() || std::abs(s - 1.0) > 1e-9) throw std::invalid_argument("cluster-size probabilities must sum to 1");
  }
};

/// Density g of unobserved cluster centres over the window.
class CenterDensity {
 public:
  using Fn = std::function<double(Point2)>;

  CenterDensity() = default;

  /// `sup` must bound fn over the bounding box; it drives rejection sampling.
  CenterDensity(Fn fn, Rect bbox, double sup, bool normalized = true)
      : fn_(std::move(fn)), bbox_(bbox), sup_(sup), normalized_(normalized) {}

  static CenterDensity uniform(const Window& w) {
    const double v = 1.0 / w.area();
    return CenterDensity([w, v](Point2 p) { return w.contains(p) ? v : 0.0; }, w.bounding_box(), v, true);
  }

  double operator()(Point2 p) const { return fn_(p); }
  double log(Point2 p) const {
    const double v = fn_(p);
    return v > 0.0 ? std::log(v) : kNegInf;
  }
  bool normalized() const { return normalized_; }
  const Rect& bounding_box() const { return bbox_; }
  double sup() const { return sup_; }

  /// Draw a centre from g by rejection from the bounding box.
  Point2 sample(Rng& rng) const {
    for (int attempt = 0; attempt < 10'000'000; ++attempt) {
      Point2 p{bbox_.x0 + uniform01(rng) * bbox_.width(), bbox_.y0 + uniform01(rng) * bbox_.height()};
      if (uniform01(rng) * sup_ < fn_(p)) return p;
    }
    throw std::runtime_error("center density rejection sampler failed");
  }

 private:
  Fn fn_;
  Rect bbox_;
  double sup_ = 0.0;
  bool normalized_ = false;
};

/// log C(k, s)
inline double log_binomial(int k, int s) {
  return std::lgamma(k + 1.0) - std::lgamma(s + 1.0) - std::lgamma(k - s + 1.0);
}

/// log c_s with c_s = C(k, s) * s * 2^(s-1).
inline double log_size_constant(int s, int k) {
  return log_binomial(k, s) + std::log(static_cast<double>(s)) + (s - 1) * std::numbers::ln2;
}

/// log h_(s, sigma)(x_C): density of one cluster's locations and marks.
inline double cluster_log_likelihood(const ClusterSummary& c, double sigma, int k, const CenterDensity& g) {
  if (!(sigma > 0.0)) throw std::domain_error("sigma must be positive");
  if (c.size < 1 || c.size > k) throw std::invalid_argument("cluster size outside 1..k");
  const double s = c.size;
  return g.log(c.centroid) - log_binomial(k, c.size) - std::log(s) - (s - 1.0) * std::log(2.0 * sigma * sigma) -
         kPi * c.scatter / (2.0 * sigma * sigma);
}

/// Per-cluster factor of the conditional posterior of the partition:
/// log[g(xbar) lambda p_s / (c_s sigma^(2(s-1)))] - pi delta^2 / (2 sigma^2).
inline double cluster_log_factor(const ClusterSummary& c, const ModelParams& params, const CenterDensity& g) {
  const int k = params.k();
  if (c.size < 1 || c.size > k) return kNegInf;
  const double ps = params.p[c.size - 1];
  if (!(ps > 0.0)) return kNegInf;
  const double s2 = params.sigma * params.sigma;
  return g.log(c.centroid) + std::log(params.lambda) + std::log(ps) - log_size_constant(c.size, k) -
         (c.size - 1) * std::log(s2) - kPi * c.scatter / (2.0 * s2);
}

/// Logarithm of the hyperedge weight w(e): the posterior ratio gained by
/// merging the (singleton) points of e into one cluster.
template <class Range>
double hyperedge_log_weight(const PointPattern& x, const Range& members, const ModelParams& params,
                            const CenterDensity& g) {
  int s = 0;
  std::vector<char> seen(x.k, 0);
  for (int i : members) {
    if (seen[x[i].mark]) throw std::invalid_argument("hyperedge has duplicate marks");
    seen[x[i].mark] = 1;
    ++s;
  }
  if (s < 2) throw std::invalid_argument("hyperedge needs at least two points");
  double lw = cluster_log_factor(summarize_cluster(x, members), params, g);
  for (int i : members) {
    const int one[1] = {i};
    lw -= cluster_log_factor(summarize_cluster(x, one), params, g);
  }
  return lw;
}

inline double hyperedge_log_weight(const PointPattern& x, std::initializer_list<int> members,
                                   const ModelParams& params, const CenterDensity& g) {
  return hyperedge_log_weight(x, std::vector<int>(members), params, g);
}

/// Unnormalised log pi(rho | x, sigma, p, lambda).
inline double log_posterior_partition(const PointPattern& x, const Matching& rho, const ModelParams& params,
                                      const CenterDensity& g) {
  double lp = 0.0;
  for (const auto& c : rho.clusters()) lp += cluster_log_factor(summarize_cluster(x, c), params, g);
  return lp;
}

/// Sufficient statistics of the partition for the parameter updates.
struct PartitionStats {
  int n = 0;                 ///< number of points
  int num_clusters = 0;      ///< N(rho)
  double total_scatter = 0;  ///< sum of delta^2 over clusters (km^2)
  SizeCounts counts;
};

inline PartitionStats partition_summary(const PointPattern& x, const Matching& rho) {
  PartitionStats st;
  st.n = static_cast<int>(x.size());
  st.num_clusters = static_cast<int>(rho.num_clusters());
  for (int id : rho.edge_ids()) st.total_scatter += summarize_cluster(x, rho.edge(id)).scatter;
  st.counts = cluster_size_counts(rho, x.k);
  return st;
}

/// Unnormalised log conditional density of sigma. The exponent is
/// -pi sum(delta^2) / (2 sigma^2), which is what makes the density proper.
inline double sigma_log_conditional(double sigma, int n, int num_clusters, double total_scatter, double sigma_max) {
  if (!(sigma > 0.0) || !(sigma < sigma_max)) return kNegInf;
  return -2.0 * (n - num_clusters) * std::log(sigma) - kPi * total_scatter / (2.0 * sigma * sigma);
}

inline double sigma_log_conditional(double sigma, const PartitionStats& st, double sigma_max) {
  return sigma_log_conditional(sigma, st.n, st.num_clusters, st.total_scatter, sigma_max);
}

/// p | rho ~ Dir(alpha_1 + N_1, ..., alpha_k + N_k).
inline std::vector<double> gibbs_update_p(const SizeCounts& counts, const std::vector<double>& alpha, Rng& rng) {
  std::vector<double> a(alpha);
  for (std::size_t l = 0; l < a.size(); ++l) a[l] += counts.clusters.at(l);
  return sample_dirichlet(a, rng);
}

/// lambda | rho ~ Gamma(shape k_lambda + N, scale theta / (theta + 1)).
inline double gibbs_update_lambda(int num_clusters, double k_lambda, double theta_lambda, Rng& rng) {
  const double shape = k_lambda + num_clusters;
  const double scale = theta_lambda / (theta_lambda + 1.0);
  return std::gamma_distribution<double>(shape, scale)(rng);
}

struct SigmaUpdate {
  double sigma;
  int accepted = 0;
};

/// Random-walk Metropolis on log sigma targeting sigma_log_conditional.
inline SigmaUpdate mh_update_sigma(double sigma, const PartitionStats& st, double sigma_max, double step_scale,
                                   int n_inner, Rng& rng) {
  SigmaUpdate out{sigma};
  double cur = sigma_log_conditional(sigma, st, sigma_max);
  for (int t = 0; t < n_inner; ++t) {
    const double eps = step_scale * standard_normal(rng);
    const double prop = out.sigma * std::exp(eps);
    const double lp = sigma_log_conditional(prop, st, sigma_max);
    // proposal is symmetric in log sigma; eps is the log-Jacobian term
    const double log_alpha = lp - cur + eps;
    if (std::log(uniform01(rng)) < log_alpha) {
      out.sigma = prop;
      cur = lp;
      ++out.accepted;
    }
  }
  return out;
}

}  // namespace compclust
