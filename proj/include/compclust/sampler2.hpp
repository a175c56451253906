#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "pattern.hpp"
#include "random.hpp"
#include "weight_table.hpp"

namespace compclust {

/// Edge-selection distribution q_rho(i, j) of the two-colour sampler.
///
///  - P1: uniform over edges with w_ij > delta (targets the thresholded model)
///  - P2: proportional to pi(rho o (i, j))
///  - P3: proportional to pi(new) / (pi(old) + pi(new))
///  - P4: q_add(i, j) for edges outside rho, q_rem(i, j) = w_ij^(-1/2) inside
enum class ProposalKind { P1, P2, P3, P4 };

struct Proposal {
  ProposalKind kind = ProposalKind::P3;
  double delta = 1e-3;  ///< P1 threshold
};

inline const char* to_string(ProposalKind k) {
  switch (k) {
    case ProposalKind::P1: return "P1";
    case ProposalKind::P2: return "P2";
    case ProposalKind::P3: return "P3";
    case ProposalKind::P4: return "P4";
  }
  return "?";
}

inline ProposalKind parse_proposal_kind(const std::string& s) {
  if (s == "P1" || s == "p1") return ProposalKind::P1;
  if (s == "P2" || s == "p2") return ProposalKind::P2;
  if (s == "P3" || s == "p3") return ProposalKind::P3;
  if (s == "P4" || s == "p4") return ProposalKind::P4;
  throw std::invalid_argument("unknown proposal kind '" + s + "'");
}

/// log pi(rho o (i, j)) - log pi(rho) for the edge (i, j).
inline double move_log_ratio(const BipartiteMatching& rho, const WeightTable& t, int i, int j) {
  const int jp = rho.red_partner[i];
  const int ip = rho.blue_partner[j];
  if (jp == j) return -t.log_weight(i, j);
  double lr = t.log_weight(i, j);
  if (jp >= 0) lr -= t.log_weight(i, jp);
  if (ip >= 0) lr -= t.log_weight(ip, j);
  if (jp >= 0 && ip >= 0) lr += t.log_weight(ip, jp);
  return lr;
}

/// Unnormalised proposal mass of an edge given its move log-ratio.
inline double proposal_mass(ProposalKind kind, double log_ratio, bool in_rho, double q_add, double q_rem) {
  switch (kind) {
    case ProposalKind::P1: return 1.0;
    case ProposalKind::P2: return std::exp(std::min(log_ratio, 700.0));
    case ProposalKind::P3: return log_ratio > 0 ? 1.0 / (1.0 + std::exp(-log_ratio)) : std::exp(log_ratio) / (1.0 + std::exp(log_ratio));
    case ProposalKind::P4: return in_rho ? q_rem : q_add;
  }
  return 0.0;
}

inline double proposal_mass(ProposalKind kind, const BipartiteMatching& rho, const WeightTable& t, int e) {
  const int i = t.entry_red(e), j = t.entry_blue(e);
  const double lr = kind == ProposalKind::P2 || kind == ProposalKind::P3 ? move_log_ratio(rho, t, i, j) : 0.0;
  return proposal_mass(kind, lr, rho.contains(i, j), t.entry_q_add(e), t.entry_q_rem(e));
}

struct DrawnEdge {
  bool held = false;  ///< q has no mass: the chain holds
  int i = -1;
  int j = -1;
  double log_q = 0.0;  ///< normalised log q_rho(i, j)
};

/// Draws an edge from the normalised q_rho by a direct O(nnz) pass. `table`
/// must already be thresholded for P1. Reference path for the chain below.
inline DrawnEdge draw_proposal(const BipartiteMatching& rho, const WeightTable& table, ProposalKind kind, Rng& rng) {
  std::vector<double> q(table.nnz());
  double z = 0.0;
  for (std::size_t e = 0; e < q.size(); ++e) z += q[e] = proposal_mass(kind, rho, table, static_cast<int>(e));
  DrawnEdge d;
  if (!(z > 0.0)) {
    d.held = true;
    return d;
  }
  const int e = sample_discrete(q, rng);
  d.i = table.entry_red(e);
  d.j = table.entry_blue(e);
  d.log_q = std::log(q[e] / z);
  return d;
}

struct StepResult {
  bool held = false;
  bool accepted = false;
  Move move;
  double log_ratio = 0.0;  ///< log pi(new) - log pi(old)
};

/// One MH step computed from scratch in O(nnz); the reference for
/// BipartiteChain. `table` must already be thresholded for P1.
inline StepResult mh_step2(BipartiteMatching& rho, const WeightTable& table, ProposalKind kind, Rng& rng) {
  StepResult r;
  const DrawnEdge d = draw_proposal(rho, table, kind, rng);
  if (d.held) {
    r.held = true;
    return r;
  }
  auto normalised = [&](const BipartiteMatching& state, const std::vector<std::pair<int, int>>& pairs) {
    double z = 0.0, q = 0.0;
    for (std::size_t e = 0; e < table.nnz(); ++e) z += proposal_mass(kind, state, table, static_cast<int>(e));
    for (auto [a, b] : pairs) {
      const int e = table.entry(a, b);
      if (e >= 0) q += proposal_mass(kind, state, table, e);
    }
    return std::log(q) - std::log(z);
  };
  r.move = move_classify(rho, d.i, d.j);
  r.log_ratio = move_log_ratio(rho, table, d.i, d.j);
  const double fwd = normalised(rho, forward_pairs(r.move));
  BipartiteMatching next = rho;
  apply_move(next, r.move);
  const double rev = normalised(next, reverse_pairs(r.move));
  if (std::log(uniform01(rng)) < r.log_ratio + rev - fwd) {
    rho = std::move(next);
    r.accepted = true;
  }
  return r;
}

namespace detail {

/// Binary tree of partial sums: O(log n) point updates and proportional draws.
/// Internal nodes are recomputed from their children, so totals do not drift.
class SumTree {
 public:
  SumTree() = default;
  explicit SumTree(const std::vector<double>& values) { build(values); }

  void build(const std::vector<double>& values) {
    leaves_ = 1;
    while (leaves_ < values.size()) leaves_ <<= 1;
    tree_.assign(2 * leaves_, 0.0);
    for (std::size_t i = 0; i < values.size(); ++i) tree_[leaves_ + i] = values[i];
    for (std::size_t p = leaves_ - 1; p >= 1; --p) tree_[p] = tree_[2 * p] + tree_[2 * p + 1];
  }

  void set(std::size_t i, double v) {
    std::size_t p = leaves_ + i;
    tree_[p] = v;
    for (p >>= 1; p >= 1; p >>= 1) tree_[p] = tree_[2 * p] + tree_[2 * p + 1];
  }

  double get(std::size_t i) const { return tree_[leaves_ + i]; }
  double total() const { return tree_.size() > 1 ? tree_[1] : 0.0; }

  /// Leaf index whose cumulative interval contains u, 0 <= u < total().
  std::size_t find(double u) const {
    std::size_t p = 1;
    while (p < leaves_) {
      if (u < tree_[2 * p] || tree_[2 * p + 1] <= 0.0) {
        p = 2 * p;
      } else {
        u -= tree_[2 * p];
        p = 2 * p + 1;
      }
    }
    return p - leaves_;
  }

 private:
  std::size_t leaves_ = 1;
  std::vector<double> tree_;
};

}  // namespace detail


/// Metropolis-Hastings chain over matchings of a weighted bipartite graph.
///
/// Proposal masses are kept in a sum tree; after a move only the rows of the
/// reds and the columns of the blues whose partner changed are refreshed. The
/// acceptance ratio uses the exact normalised proposal probabilities in both
/// directions, summed over every edge choice that realises the transition.
class BipartiteChain {
 public:
  BipartiteChain(WeightTable table, Proposal proposal, BipartiteMatching init = {})
      : table_(proposal.kind == ProposalKind::P1 ? table.thresholded(proposal.delta) : std::move(table)),
        proposal_(proposal),
        rho_(std::move(init)) {
    if (rho_.red_partner.empty() && rho_.blue_partner.empty())
      rho_ = BipartiteMatching(table_.n_red(), table_.n_blue());
    if (rho_.n_red() != table_.n_red() || rho_.n_blue() != table_.n_blue())
      throw std::invalid_argument("initial matching does not fit the weight table");
    matched_log_w_.assign(table_.n_red(), 0.0);
    for (auto [i, j] : rho_.edges()) {
      const double lw = table_.log_weight(i, j);
      if (!(lw > kNegInf)) throw std::invalid_argument("initial matching uses a zero-weight edge");
      matched_log_w_[i] = lw;
      log_weight_ += lw;
    }
    std::vector<double> q(table_.nnz());
    for (std::size_t e = 0; e < q.size(); ++e) q[e] = mass(static_cast<int>(e));
    tree_.build(q);
  }

  const BipartiteMatching& state() const { return rho_; }
  BipartiteMatching& mutable_state_for_testing() { return rho_; }
  const WeightTable& table() const { return table_; }
  const Proposal& proposal() const { return proposal_; }
  /// log of the matching weight, i.e. log pi(rho) - log pi(empty).
  double log_weight() const { return log_weight_; }
  double normalizer() const { return tree_.total(); }
  double mass_of(int i, int j) const {
    const int e = table_.entry(i, j);
    return e < 0 ? 0.0 : tree_.get(e);
  }

  std::size_t steps() const { return steps_; }
  std::size_t accepted() const { return accepted_; }
  std::size_t held() const { return held_; }
  double acceptance_rate() const { return steps_ > 0 ? static_cast<double>(accepted_) / steps_ : 0.0; }

  StepResult step(Rng& rng) {
    ++steps_;
    StepResult r;
    const double z_old = tree_.total();
    if (!(z_old > 0.0)) {
      ++held_;
      r.held = true;
      return r;
    }
    int e;
    do {
      e = static_cast<int>(tree_.find(uniform01(rng) * z_old));
    } while (!(tree_.get(e) > 0.0));

    const int i = table_.entry_red(e), j = table_.entry_blue(e);
    r.move = move_classify(rho_, i, j);
    r.log_ratio = move_log_ratio(rho_, table_, i, j);
    if (!(r.log_ratio > kNegInf)) return r;

    double fwd = 0.0;
    for (auto [a, b] : forward_pairs(r.move)) fwd += mass_of(a, b);

    apply_move(rho_, r.move);
    refresh(r.move);
    const double z_new = tree_.total();
    double rev = 0.0;
    for (auto [a, b] : reverse_pairs(r.move)) rev += mass_of(a, b);

    const double log_alpha =
        r.log_ratio + std::log(rev) - std::log(z_new) - (std::log(fwd) - std::log(z_old));
    if (rev > 0.0 && std::log(uniform01(rng)) < log_alpha) {
      r.accepted = true;
      ++accepted_;
      log_weight_ += r.log_ratio;
    } else {
      revert_move(rho_, r.move);
      refresh(r.move);
    }
    return r;
  }

  /// Recomputes every proposal mass and the cached weight sum from scratch.
  void rebuild() {
    log_weight_ = 0.0;
    for (auto [i, j] : rho_.edges()) {
      matched_log_w_[i] = table_.log_weight(i, j);
      log_weight_ += matched_log_w_[i];
    }
    std::vector<double> q(table_.nnz());
    for (std::size_t e = 0; e < q.size(); ++e) q[e] = mass(static_cast<int>(e));
    tree_.build(q);
  }

 private:
  double entry_log_ratio(int e) const {
    const int i = table_.entry_red(e), j = table_.entry_blue(e);
    const int jp = rho_.red_partner[i];
    const int ip = rho_.blue_partner[j];
    const double lw = table_.entry_log_weight(e);
    if (jp == j) return -lw;
    double lr = lw;
    if (jp >= 0) lr -= matched_log_w_[i];
    if (ip >= 0) lr -= matched_log_w_[ip];
    if (jp >= 0 && ip >= 0) lr += table_.log_weight(ip, jp);
    return lr;
  }

  double mass(int e) const {
    switch (proposal_.kind) {
      case ProposalKind::P1: return 1.0;
      case ProposalKind::P2:
      case ProposalKind::P3: return proposal_mass(proposal_.kind, entry_log_ratio(e), false, 0.0, 0.0);
      case ProposalKind::P4: {
        const int i = table_.entry_red(e);
        return rho_.red_partner[i] == table_.entry_blue(e) ? table_.entry_q_rem(e) : table_.entry_q_add(e);
      }
    }
    return 0.0;
  }

  void refresh_entry(int i, int j) {
    const int e = table_.entry(i, j);
    if (e >= 0) tree_.set(e, mass(e));
  }

  void refresh_row(int i) {
    auto [a, b] = table_.row_range(i);
    for (int e = a; e < b; ++e) tree_.set(e, mass(e));
  }

  void refresh_col(int j) {
    for (int e : table_.column(j)) tree_.set(e, mass(e));
  }

  void refresh(const Move& m) {
    int reds[2] = {m.i, m.red_prime};
    for (int i : reds)
      if (i >= 0) {
        const int j = rho_.red_partner[i];
        matched_log_w_[i] = j >= 0 ? table_.log_weight(i, j) : 0.0;
      }
    switch (proposal_.kind) {
      case ProposalKind::P1: break;
      case ProposalKind::P4: {
        refresh_entry(m.i, m.j);
        if (m.blue_prime >= 0) refresh_entry(m.i, m.blue_prime);
        if (m.red_prime >= 0) refresh_entry(m.red_prime, m.j);
        if (m.red_prime >= 0 && m.blue_prime >= 0) refresh_entry(m.red_prime, m.blue_prime);
        break;
      }
      case ProposalKind::P2:
      case ProposalKind::P3: {
        refresh_row(m.i);
        if (m.red_prime >= 0) refresh_row(m.red_prime);
        refresh_col(m.j);
        if (m.blue_prime >= 0) refresh_col(m.blue_prime);
        break;
      }
    }
  }

  WeightTable table_;
  Proposal proposal_;
  BipartiteMatching rho_;
  std::vector<double> matched_log_w_;
  detail::SumTree tree_;
  double log_weight_ = 0.0;
  std::size_t steps_ = 0, accepted_ = 0, held_ = 0;
};

}  // namespace compclust
