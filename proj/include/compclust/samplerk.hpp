#pragma once

#include <algorithm>
#include <limits>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "model.hpp"
#include "pattern.hpp"
#include "random.hpp"
#include "sampler2.hpp"
#include "weight_table.hpp"

namespace compclust {

/// Uniform subset of floor(k/2) colours, sorted.
inline std::vector<int> sample_color_subset(int k, Rng& rng) {
  if (k < 1) throw std::invalid_argument("need at least one colour");
  std::vector<int> all(k);
  std::iota(all.begin(), all.end(), 0);
  const int m = k / 2;
  for (int a = 0; a < m; ++a) {
    const int b = std::uniform_int_distribution<int>(a, k - 1)(rng);
    std::swap(all[a], all[b]);
  }
  all.resize(m);
  std::sort(all.begin(), all.end());
  return all;
}

/// The part of one cluster lying on one side of the colour split.
struct Superpoint {
  Point2 centroid;
  int mult = 0;
  double scatter = 0.0;
  std::vector<int> members;  ///< sorted point indices
};

/// Two-colour reduction of a k-colour matching: red superpoints carry the
/// colours in A, blue ones the rest. An edge joins the two parts of a cluster
/// that has points on both sides.
struct ProjectedPattern {
  std::vector<char> in_a;  ///< per colour
  std::vector<Superpoint> red;
  std::vector<Superpoint> blue;
  BipartiteMatching rho;

  int total_points() const {
    int n = 0;
    for (const auto& s : red) n += s.mult;
    for (const auto& s : blue) n += s.mult;
    return n;
  }
};

namespace detail {

inline Superpoint make_superpoint(const PointPattern& x, std::vector<int> members) {
  const auto cs = summarize_cluster(x, members);
  return {cs.centroid, cs.size, cs.scatter, std::move(members)};
}

}  // namespace detail

inline ProjectedPattern project(const PointPattern& x, const Matching& rho, const std::vector<int>& subset_a) {
  if (rho.size() != x.size()) throw std::invalid_argument("matching and pattern sizes differ");
  ProjectedPattern pp;
  pp.in_a.assign(x.k, 0);
  for (int c : subset_a) {
    if (c < 0 || c >= x.k) throw std::out_of_range("colour outside 0..k-1");
    pp.in_a[c] = 1;
  }
  // clusters() is ordered by smallest member; within each side the parts
  // inherit that order after the stable sort below
  struct Part {
    std::vector<int> a, b;
  };
  std::vector<std::pair<int, int>> links;
  for (const auto& c : rho.clusters()) {
    Part part;
    for (int i : c) (pp.in_a[x[i].mark] ? part.a : part.b).push_back(i);
    int r = -1, s = -1;
    if (!part.a.empty()) {
      r = static_cast<int>(pp.red.size());
      pp.red.push_back(detail::make_superpoint(x, std::move(part.a)));
    }
    if (!part.b.empty()) {
      s = static_cast<int>(pp.blue.size());
      pp.blue.push_back(detail::make_superpoint(x, std::move(part.b)));
    }
    if (r >= 0 && s >= 0) links.emplace_back(r, s);
  }
  auto reorder = [](std::vector<Superpoint>& side) {
    std::vector<int> idx(side.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](int u, int v) { return side[u].members.front() < side[v].members.front(); });
    std::vector<int> pos(side.size());
    std::vector<Superpoint> out;
    out.reserve(side.size());
    for (std::size_t t = 0; t < idx.size(); ++t) {
      pos[idx[t]] = static_cast<int>(t);
      out.push_back(std::move(side[idx[t]]));
    }
    side = std::move(out);
    return pos;
  };
  const auto red_pos = reorder(pp.red);
  const auto blue_pos = reorder(pp.blue);
  pp.rho = BipartiteMatching(pp.red.size(), pp.blue.size());
  for (auto [r, s] : links) pp.rho.link(red_pos[r], blue_pos[s]);
  return pp;
}

/// Back to a k-colour matching: joined superpoints merge into one cluster.
inline Matching lift(const ProjectedPattern& pp, std::size_t n) {
  std::vector<int> label(n, -1);
  auto mark = [&](const Superpoint& s, int lab) {
    for (int i : s.members) {
      if (i < 0 || static_cast<std::size_t>(i) >= n) throw std::out_of_range("superpoint member outside pattern");
      label[i] = lab;
    }
  };
  for (int r = 0; r < static_cast<int>(pp.red.size()); ++r) {
    const int lab = pp.red[r].members.front();
    mark(pp.red[r], lab);
    const int b = pp.rho.red_partner[r];
    if (b >= 0) mark(pp.blue[b], lab);
  }
  for (int b = 0; b < static_cast<int>(pp.blue.size()); ++b)
    if (pp.rho.blue_partner[b] < 0) mark(pp.blue[b], pp.blue[b].members.front());
  for (int l : label)
    if (l < 0) throw std::invalid_argument("projected pattern does not cover every point");
  return Matching::from_labels(label);
}

/// log w2D for joining superpoints a and b: the posterior ratio of the
/// merged cluster against the two separate ones.
inline double projected_edge_log_weight(const Superpoint& a, const Superpoint& b, const ModelParams& params,
                                        const CenterDensity& g) {
  const int k = params.k();
  const int s = a.mult + b.mult;
  if (a.mult < 1 || b.mult < 1 || s > k) return kNegInf;
  const double ps = params.p[s - 1], pa = params.p[a.mult - 1], pb = params.p[b.mult - 1];
  if (!(ps > 0.0) || !(pa > 0.0) || !(pb > 0.0)) return kNegInf;
  const double ga = g.log(a.centroid), gb = g.log(b.centroid);
  if (!(ga > kNegInf) || !(gb > kNegInf)) return kNegInf;
  const double ds = s;
  const Point2 merged = (1.0 / ds) * (static_cast<double>(a.mult) * a.centroid + static_cast<double>(b.mult) * b.centroid);
  const double s2 = params.sigma * params.sigma;
  return std::log(ps) + log_size_constant(a.mult, k) + log_size_constant(b.mult, k) - std::log(params.lambda) -
         std::log(pa) - std::log(pb) - log_size_constant(s, k) + g.log(merged) - ga - gb - std::log(s2) -
         kPi * a.mult * b.mult * squared_distance(a.centroid, b.centroid) / (2.0 * s2 * ds);
}

/// Weight table over red x blue superpoints. With `r_max`, pairs at centroid
/// distance >= r_max are dropped except those joined in pp.rho.
inline WeightTable projected_weight_table(const ProjectedPattern& pp, const ModelParams& params, const CenterDensity& g,
                                          std::optional<double> r_max = std::nullopt) {
  std::vector<WeightEntry> es;
  const int nr = static_cast<int>(pp.red.size()), nb = static_cast<int>(pp.blue.size());
  if (r_max) {
    std::vector<Point2> bc(nb);
    for (int j = 0; j < nb; ++j) bc[j] = pp.blue[j].centroid;
    detail::CellIndex idx(bc, *r_max);
    for (int i = 0; i < nr; ++i) {
      const int partner = pp.rho.red_partner[i];
      bool partner_seen = false;
      idx.for_each_within(pp.red[i].centroid, *r_max, [&](int j) {
        partner_seen |= j == partner;
        es.push_back({i, j, projected_edge_log_weight(pp.red[i], pp.blue[j], params, g)});
      });
      if (partner >= 0 && !partner_seen)
        es.push_back({i, partner, projected_edge_log_weight(pp.red[i], pp.blue[partner], params, g)});
    }
  } else {
    es.reserve(static_cast<std::size_t>(nr) * nb);
    for (int i = 0; i < nr; ++i)
      for (int j = 0; j < nb; ++j) es.push_back({i, j, projected_edge_log_weight(pp.red[i], pp.blue[j], params, g)});
  }
  return WeightTable(nr, nb, std::move(es));
}

struct ProjectionOptions {
  int n_moves = 200;
  Proposal proposal{ProposalKind::P3, 1e-3};
  std::optional<double> r_max;  ///< truncation of the projected table; off by default
};

/// One application of the projection kernel for the colour subset A.
inline Matching projection_kernel_step(const PointPattern& x, const Matching& rho, const std::vector<int>& subset_a,
                                       const ModelParams& params, const CenterDensity& g,
                                       const ProjectionOptions& opt, Rng& rng, std::size_t* accepted = nullptr) {
  ProjectedPattern full = project(x, rho, subset_a);
  // A superpoint with a zero singleton factor (g = 0 at its centroid, or
  // p = 0 at its size) cannot be left unmatched. It keeps its current partner
  // and the pair drops out of this step; the rest moves under the conditional
  // law given those pairs.
  auto alone_ok = [&](const Superpoint& s) {
    return params.p[s.mult - 1] > 0.0 && g.log(s.centroid) > kNegInf;
  };
  std::vector<char> keep_red(full.red.size(), 1), keep_blue(full.blue.size(), 1);
  for (std::size_t i = 0; i < full.red.size(); ++i)
    if (!alone_ok(full.red[i])) {
      const int j = full.rho.red_partner[i];
      if (j < 0) return rho;
      keep_red[i] = keep_blue[j] = 0;
    }
  for (std::size_t j = 0; j < full.blue.size(); ++j)
    if (!alone_ok(full.blue[j])) {
      const int i = full.rho.blue_partner[j];
      if (i < 0) return rho;
      keep_red[i] = keep_blue[j] = 0;
    }
  ProjectedPattern pp;
  pp.in_a = full.in_a;
  std::vector<int> red_idx, blue_idx, blue_pos(full.blue.size(), -1);
  for (std::size_t i = 0; i < full.red.size(); ++i)
    if (keep_red[i]) {
      red_idx.push_back(static_cast<int>(i));
      pp.red.push_back(full.red[i]);
    }
  for (std::size_t j = 0; j < full.blue.size(); ++j)
    if (keep_blue[j]) {
      blue_pos[j] = static_cast<int>(blue_idx.size());
      blue_idx.push_back(static_cast<int>(j));
      pp.blue.push_back(full.blue[j]);
    }
  if (pp.red.empty() || pp.blue.empty()) return rho;
  pp.rho = BipartiteMatching(pp.red.size(), pp.blue.size());
  for (std::size_t r = 0; r < red_idx.size(); ++r) {
    const int j = full.rho.red_partner[red_idx[r]];
    if (j >= 0) pp.rho.link(static_cast<int>(r), blue_pos[j]);
  }
  WeightTable table = projected_weight_table(pp, params, g, opt.r_max);
  Proposal prop = opt.proposal;
  if (prop.kind == ProposalKind::P1) {
    // the current edges must stay in the support
    table = table.thresholded(prop.delta);
    prop.delta = 0.0;
    for (auto [i, j] : pp.rho.edges())
      if (table.entry(i, j) < 0) return rho;
  }
  BipartiteChain chain(std::move(table), prop, pp.rho);
  for (int t = 0; t < opt.n_moves; ++t) chain.step(rng);
  if (accepted) *accepted += chain.accepted();
  for (std::size_t r = 0; r < red_idx.size(); ++r) {
    const int j = full.rho.red_partner[red_idx[r]];
    if (j >= 0) full.rho.unlink(red_idx[r], j);
  }
  for (auto [r, b] : chain.state().edges()) full.rho.link(red_idx[r], blue_idx[b]);
  return lift(full, x.size());
}

/// One MCMC state: partition, continuous parameters and cached statistics.
struct ChainState {
  Matching rho;
  ModelParams params;
  PartitionStats stats;

  ChainState() = default;
  ChainState(const PointPattern& x, Matching r, ModelParams p) : rho(std::move(r)), params(std::move(p)) {
    rho.validate(x);
    refresh(x);
  }

  void refresh(const PointPattern& x) { stats = partition_summary(x, rho); }
};

struct SweepConfig {
  Hyperparams hyper;
  ProjectionOptions projection;
  double sigma_step = 0.1;
  int sigma_inner = 5;
  bool update_partition = true;
  bool update_sigma = true;
  bool update_p = true;
  bool update_lambda = true;
};

struct SweepInfo {
  std::vector<int> subset_a;
  std::size_t moves_accepted = 0;
  int sigma_accepted = 0;
};

/// Metropolis-within-Gibbs sweep: colour subset, projection kernel, sigma,
/// p, lambda.
inline SweepInfo gibbs_sweep_k(const PointPattern& x, ChainState& s, const SweepConfig& cfg, const CenterDensity& g,
                               Rng& rng) {
  SweepInfo info;
  if (cfg.update_partition) {
    info.subset_a = sample_color_subset(x.k, rng);
    s.rho = projection_kernel_step(x, s.rho, info.subset_a, s.params, g, cfg.projection, rng, &info.moves_accepted);
    s.refresh(x);
  }
  if (cfg.update_sigma) {
    const auto up = mh_update_sigma(s.params.sigma, s.stats, cfg.hyper.sigma_max, cfg.sigma_step, cfg.sigma_inner, rng);
    s.params.sigma = up.sigma;
    info.sigma_accepted = up.accepted;
  }
  if (cfg.update_p) s.params.p = gibbs_update_p(s.stats.counts, cfg.hyper.alpha, rng);
  if (cfg.update_lambda)
    s.params.lambda = gibbs_update_lambda(s.stats.num_clusters, cfg.hyper.k_lambda, cfg.hyper.theta_lambda, rng);
  return info;
}

/// A start with positive centre density at every cluster centroid. Points
/// whose own position has g = 0 (simulated points outside W, say) cannot be
/// singletons, so each is joined to the nearest cluster lacking its type whose
/// new centroid has g > 0. Throws if some point has no such cluster.
inline Matching feasible_start(const PointPattern& x, const CenterDensity& g) {
  const int n = static_cast<int>(x.size());
  std::vector<std::vector<int>> blocks(n);
  std::vector<int> block_of(n);
  for (int u = 0; u < n; ++u) {
    blocks[u] = {u};
    block_of[u] = u;
  }
  auto centroid = [&](const std::vector<int>& b) {
    Point2 c{0, 0};
    for (int v : b) c = c + x[v].x;
    return Point2{c.x / b.size(), c.y / b.size()};
  };
  for (int u = 0; u < n; ++u) {
    const int bu = block_of[u];
    if (g(centroid(blocks[bu])) > 0.0) continue;
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (int b = 0; b < n; ++b) {
      if (b == bu || blocks[b].empty()) continue;
      bool clash = false;
      for (int v : blocks[b])
        for (int w : blocks[bu]) clash |= x[v].mark == x[w].mark;
      if (clash) continue;
      std::vector<int> joined = blocks[b];
      joined.insert(joined.end(), blocks[bu].begin(), blocks[bu].end());
      if (!(g(centroid(joined)) > 0.0)) continue;
      const double d = distance(centroid(blocks[b]), centroid(blocks[bu]));
      if (d < best_d) {
        best_d = d;
        best = b;
      }
    }
    if (best < 0) throw std::runtime_error("no cluster gives point " + std::to_string(u) + " positive centre density");
    for (int v : blocks[bu]) {
      blocks[best].push_back(v);
      block_of[v] = best;
    }
    blocks[bu].clear();
  }
  return Matching::from_labels(block_of);
}

}  // namespace compclust
