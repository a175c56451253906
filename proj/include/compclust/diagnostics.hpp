#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "pattern.hpp"
#include "random.hpp"

namespace compclust {

struct IatResult {
  double iat = 1.0;
  double ess = 0.0;
  bool constant = false;  ///< zero variance: IAT undefined (NaN), ESS = length
};

/// Integrated autocorrelation time by Geyer's initial monotone positive
/// sequence, and ESS = n / IAT (capped at n).
inline IatResult iat_ess(const std::vector<double>& series) {
  const std::size_t n = series.size();
  if (n < 2) throw std::invalid_argument("series too short for autocorrelation");
  IatResult res;
  const double mean = std::accumulate(series.begin(), series.end(), 0.0) / n;
  std::vector<double> c(n);
  for (std::size_t t = 0; t < n; ++t) c[t] = series[t] - mean;
  auto autocov = [&](std::size_t lag) {
    double s = 0.0;
    for (std::size_t t = 0; t + lag < n; ++t) s += c[t] * c[t + lag];
    return s / n;
  };
  const double g0 = autocov(0);
  if (!(g0 > 1e-300 * (1.0 + mean * mean))) {
    res.constant = true;
    res.iat = std::numeric_limits<double>::quiet_NaN();
    res.ess = static_cast<double>(n);
    return res;
  }
  double sum = 0.0, prev = std::numeric_limits<double>::infinity();
  for (std::size_t m = 0; 2 * m + 1 < n; ++m) {
    double pair = autocov(2 * m) + autocov(2 * m + 1);
    if (pair <= 0.0) break;
    pair = std::min(pair, prev);
    prev = pair;
    sum += pair;
  }
  res.iat = -1.0 + 2.0 * sum / g0;
  res.ess = std::min(static_cast<double>(n), n / res.iat);
  return res;
}

struct PsrfResult {
  double psrf = 1.0;
  bool ridge = false;
  std::string warning;
};

/// Multivariate potential scale reduction factor of Brooks and Gelman:
/// (n-1)/n + (m+1)/m * lambda_max(W^-1 B/n). chains[c][t] is the d-vector
/// recorded at step t of chain c.
inline PsrfResult brooks_gelman_psrf(const std::vector<std::vector<std::vector<double>>>& chains) {
  const std::size_t m = chains.size();
  if (m < 2) throw std::invalid_argument("PSRF needs at least two chains");
  const std::size_t n = chains[0].size();
  if (n < 2) throw std::invalid_argument("chains too short");
  const std::size_t d = chains[0][0].size();
  if (d < 1) throw std::invalid_argument("summary dimension must be at least 1");
  for (const auto& ch : chains) {
    if (ch.size() != n) throw std::invalid_argument("chains must have equal lengths");
    for (const auto& v : ch)
      if (v.size() != d) throw std::invalid_argument("summary vectors must have equal dimension");
  }
  Eigen::MatrixXd means(m, d);
  Eigen::MatrixXd W = Eigen::MatrixXd::Zero(d, d);
  for (std::size_t c = 0; c < m; ++c) {
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(d);
    for (const auto& v : chains[c]) mu += Eigen::Map<const Eigen::VectorXd>(v.data(), d);
    mu /= static_cast<double>(n);
    means.row(c) = mu.transpose();
    for (const auto& v : chains[c]) {
      const Eigen::VectorXd dv = Eigen::Map<const Eigen::VectorXd>(v.data(), d) - mu;
      W += dv * dv.transpose();
    }
  }
  W /= static_cast<double>(m * (n - 1));
  const Eigen::RowVectorXd grand = means.colwise().mean();
  const Eigen::MatrixXd centred = means.rowwise() - grand;
  const Eigen::MatrixXd b_over_n = centred.transpose() * centred / static_cast<double>(m - 1);

  PsrfResult res;
  Eigen::LLT<Eigen::MatrixXd> llt(W);
  if (llt.info() != Eigen::Success || W.diagonal().minCoeff() <= 0.0) {
    const double scale = std::max(W.trace() / d, 1e-12);
    W += 1e-8 * scale * Eigen::MatrixXd::Identity(d, d);
    res.ridge = true;
    res.warning = "within-chain covariance is singular; ridge added";
  }
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(b_over_n, W);
  if (es.info() != Eigen::Success) throw std::runtime_error("PSRF eigenproblem failed");
  const double lmax = es.eigenvalues().maxCoeff();
  res.psrf = (n - 1.0) / n + (m + 1.0) / m * lmax;
  return res;
}

/// Running counts of co-membership over sampled partitions.
class CoMembership {
 public:
  explicit CoMembership(std::size_t n) : n_(n), counts_(n * n, 0.0) {}

  void add(const Matching& rho) {
    if (rho.size() != n_) throw std::invalid_argument("matching size differs from co-membership size");
    for (int id : rho.edge_ids()) {
      const auto& e = rho.edge(id);
      for (std::size_t a = 0; a < e.size(); ++a)
        for (std::size_t b = a + 1; b < e.size(); ++b) {
          counts_[e[a] * n_ + e[b]] += 1.0;
          counts_[e[b] * n_ + e[a]] += 1.0;
        }
    }
    ++samples_;
  }

  std::size_t samples() const { return samples_; }
  std::size_t size() const { return n_; }
  double probability(std::size_t u, std::size_t v) const {
    return samples_ > 0 ? counts_[u * n_ + v] / static_cast<double>(samples_) : 0.0;
  }

  std::vector<std::vector<double>> matrix() const {
    std::vector<std::vector<double>> p(n_, std::vector<double>(n_, 0.0));
    for (std::size_t u = 0; u < n_; ++u)
      for (std::size_t v = 0; v < n_; ++v) p[u][v] = probability(u, v);
    return p;
  }

 private:
  std::size_t n_;
  std::vector<double> counts_;
  std::size_t samples_ = 0;
};

/// p_uv = fraction of samples with u and v in one cluster (diagonal 0).
inline std::vector<std::vector<double>> comembership_matrix(const std::vector<Matching>& samples) {
  if (samples.empty()) throw std::invalid_argument("need at least one sample");
  CoMembership cm(samples.front().size());
  for (const auto& s : samples) cm.add(s);
  return cm.matrix();
}

/// D = max |p1 - p2| over all entries.
inline double proximity_D(const std::vector<std::vector<double>>& p1, const std::vector<std::vector<double>>& p2) {
  if (p1.size() != p2.size()) throw std::invalid_argument("co-membership matrices differ in size");
  double d = 0.0;
  for (std::size_t u = 0; u < p1.size(); ++u) {
    if (p1[u].size() != p2[u].size()) throw std::invalid_argument("co-membership matrices differ in size");
    for (std::size_t v = 0; v < p1[u].size(); ++v) d = std::max(d, std::abs(p1[u][v] - p2[u][v]));
  }
  return d;
}

inline double proximity_D(const CoMembership& a, const CoMembership& b) {
  if (a.size() != b.size()) throw std::invalid_argument("co-membership matrices differ in size");
  double d = 0.0;
  for (std::size_t u = 0; u < a.size(); ++u)
    for (std::size_t v = 0; v < a.size(); ++v) d = std::max(d, std::abs(a.probability(u, v) - b.probability(u, v)));
  return d;
}

/// Number of hyperedges present in exactly one of the two matchings.
inline int edge_difference(const Matching& a, const Matching& b) {
  if (a.size() != b.size()) throw std::invalid_argument("matchings differ in size");
  int diff = 0;
  for (int id : a.edge_ids()) {
    const auto& e = a.edge(id);
    const int other = b.edge_of(e.front());
    if (other == Matching::kSingleton || b.edge(other) != e) ++diff;
  }
  for (int id : b.edge_ids()) {
    const auto& e = b.edge(id);
    const int other = a.edge_of(e.front());
    if (other == Matching::kSingleton || a.edge(other) != e) ++diff;
  }
  return diff;
}

struct AssociationResult {
  int k = 0;
  std::vector<std::vector<double>> raw;       ///< Pr[A and B] / (Pr[A] Pr[B])
  std::vector<std::vector<double>> null;      ///< the same under mark resampling
  std::vector<std::vector<double>> relative;  ///< raw / null
  std::vector<char> undefined;                ///< per type: absent from all samples
};

namespace detail {

/// Per-type occurrence rates in a uniformly chosen cluster, accumulated over
/// partitions: single[a] += #clusters holding a / N, joint[a][b] likewise.
struct ClusterRates {
  std::vector<double> single;
  std::vector<std::vector<double>> joint;
  double weight = 0.0;

  explicit ClusterRates(int k) : single(k, 0.0), joint(k, std::vector<double>(k, 0.0)) {}

  void add(const std::vector<std::vector<int>>& cluster_marks) {
    if (cluster_marks.empty()) return;
    const double inv = 1.0 / cluster_marks.size();
    for (const auto& c : cluster_marks) {
      for (std::size_t a = 0; a < c.size(); ++a) {
        single[c[a]] += inv;
        for (std::size_t b = a + 1; b < c.size(); ++b) {
          joint[c[a]][c[b]] += inv;
          joint[c[b]][c[a]] += inv;
        }
      }
    }
    weight += 1.0;
  }

  std::vector<std::vector<double>> measure() const {
    const int k = static_cast<int>(single.size());
    std::vector<std::vector<double>> m(k, std::vector<double>(k, std::numeric_limits<double>::quiet_NaN()));
    for (int a = 0; a < k; ++a)
      for (int b = 0; b < k; ++b) {
        if (a == b || single[a] <= 0.0 || single[b] <= 0.0) continue;
        m[a][b] = (joint[a][b] / weight) / ((single[a] / weight) * (single[b] / weight));
      }
    return m;
  }
};

/// s distinct types drawn by sampling s points without replacement from the
/// whole population and rejecting draws that repeat a type.
inline std::vector<int> draw_distinct_marks(const std::vector<int>& population, int k, int s, Rng& rng) {
  std::vector<int> pick(s);
  std::vector<char> seen(k, 0);
  const std::size_t n = population.size();
  for (int attempt = 0; attempt < 100000; ++attempt) {
    bool ok = true;
    std::fill(seen.begin(), seen.end(), 0);
    std::vector<std::size_t> chosen;
    for (int a = 0; a < s && ok; ++a) {
      std::size_t idx;
      do {
        idx = std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
      } while (std::find(chosen.begin(), chosen.end(), idx) != chosen.end());
      chosen.push_back(idx);
      const int t = population[idx];
      if (seen[t]) ok = false;
      seen[t] = 1;
      pick[a] = t;
    }
    if (ok) return pick;
  }
  throw std::runtime_error("mark resampling by rejection failed for cluster size " + std::to_string(s));
}

}  // namespace detail

/// Association between types (placenames) from sampled partitions, relative
/// to a null where each cluster's marks are redrawn in proportion to type
/// numerosity, conditioned on being distinct. `null_reps` redraws per sample.
inline AssociationResult association_measure(const std::vector<Matching>& samples, const std::vector<int>& marks, int k,
                                             Rng& rng, int null_reps = 10) {
  if (samples.empty()) throw std::invalid_argument("need at least one sample");
  detail::ClusterRates obs(k), nul(k);
  for (const auto& rho : samples) {
    if (rho.size() != marks.size()) throw std::invalid_argument("matching size differs from mark count");
    std::vector<std::vector<int>> cm;
    for (const auto& c : rho.clusters()) {
      std::vector<int> m;
      for (int i : c) m.push_back(marks[i]);
      cm.push_back(std::move(m));
    }
    obs.add(cm);
    for (int rep = 0; rep < null_reps; ++rep) {
      std::vector<std::vector<int>> redrawn;
      redrawn.reserve(cm.size());
      for (const auto& c : cm) redrawn.push_back(detail::draw_distinct_marks(marks, k, static_cast<int>(c.size()), rng));
      nul.add(redrawn);
    }
  }
  AssociationResult res;
  res.k = k;
  res.raw = obs.measure();
  res.null = nul.weight > 0.0 ? nul.measure() : res.raw;
  res.relative.assign(k, std::vector<double>(k, std::numeric_limits<double>::quiet_NaN()));
  for (int a = 0; a < k; ++a)
    for (int b = 0; b < k; ++b)
      if (a != b && std::isfinite(res.raw[a][b]) && std::isfinite(res.null[a][b]) && res.null[a][b] > 0.0)
        res.relative[a][b] = res.raw[a][b] / res.null[a][b];
  res.undefined.assign(k, 0);
  for (int a = 0; a < k; ++a) res.undefined[a] = obs.single[a] <= 0.0;
  return res;
}

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Shortest interval holding `mass` of the samples.
inline Interval hpd_interval(std::vector<double> x, double mass = 0.95) {
  if (x.empty()) throw std::invalid_argument("HPD of an empty sample");
  std::sort(x.begin(), x.end());
  const std::size_t n = x.size();
  const std::size_t w = std::min(n - 1, static_cast<std::size_t>(std::ceil(mass * n)) - 1);
  Interval best{x.front(), x.back()};
  double width = std::numeric_limits<double>::infinity();
  for (std::size_t a = 0; a + w < n; ++a)
    if (x[a + w] - x[a] < width) {
      width = x[a + w] - x[a];
      best = {x[a], x[a + w]};
    }
  return best;
}

inline double quantile(std::vector<double> x, double q) {
  if (x.empty()) throw std::invalid_argument("quantile of an empty sample");
  std::sort(x.begin(), x.end());
  const double pos = q * (x.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, x.size() - 1);
  return x[lo] + (pos - lo) * (x[hi] - x[lo]);
}

struct PosteriorSummary {
  double mean = 0.0;
  double sd = 0.0;
  double q025 = 0.0, q50 = 0.0, q975 = 0.0;
  Interval hpd95;
};

inline PosteriorSummary summarize(const std::vector<double>& x) {
  if (x.empty()) throw std::invalid_argument("summary of an empty sample");
  PosteriorSummary s;
  s.mean = std::accumulate(x.begin(), x.end(), 0.0) / x.size();
  double v = 0.0;
  for (double a : x) v += (a - s.mean) * (a - s.mean);
  s.sd = x.size() > 1 ? std::sqrt(v / (x.size() - 1)) : 0.0;
  s.q025 = quantile(x, 0.025);
  s.q50 = quantile(x, 0.5);
  s.q975 = quantile(x, 0.975);
  s.hpd95 = hpd_interval(x, 0.95);
  return s;
}

/// Posterior summaries of the recorded scalars of a k-colour run.
struct ClusterSizePosterior {
  std::vector<PosteriorSummary> y;  ///< Y_1..Y_k
  std::vector<PosteriorSummary> p;  ///< p_1..p_k
  PosteriorSummary sigma;
  PosteriorSummary lambda;
};

inline ClusterSizePosterior cluster_size_posterior(const std::vector<std::vector<int>>& y_samples,
                                                   const std::vector<std::vector<double>>& p_samples,
                                                   const std::vector<double>& sigma, const std::vector<double>& lambda) {
  if (y_samples.empty() || y_samples.size() != p_samples.size() || sigma.size() != y_samples.size() ||
      lambda.size() != y_samples.size())
    throw std::invalid_argument("posterior samples must be non-empty and aligned");
  const std::size_t k = y_samples.front().size();
  ClusterSizePosterior out;
  for (std::size_t l = 0; l < k; ++l) {
    std::vector<double> ys, ps;
    for (std::size_t t = 0; t < y_samples.size(); ++t) {
      ys.push_back(y_samples[t].at(l));
      ps.push_back(p_samples[t].at(l));
    }
    out.y.push_back(summarize(ys));
    out.p.push_back(summarize(ps));
  }
  out.sigma = summarize(sigma);
  out.lambda = summarize(lambda);
  return out;
}

}  // namespace compclust
