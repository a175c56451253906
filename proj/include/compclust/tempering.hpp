#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "sampler2.hpp"

namespace compclust {

/// Inverse temperatures 1 = beta_0 > beta_1 > ... > beta_m > 0 with one
/// pseudo-prior log-weight per rung.
struct TemperingLadder {
  std::vector<double> beta{1.0};
  std::vector<double> log_pseudo_prior{0.0};
  int rung = 0;

  /// `rungs` temperatures spaced geometrically from 1 down to beta_min.
  static TemperingLadder geometric(int rungs = 5, double beta_min = 0.2) {
    if (rungs < 1) throw std::invalid_argument("ladder needs at least one rung");
    if (!(beta_min > 0.0) || !(beta_min <= 1.0)) throw std::invalid_argument("beta_min must lie in (0, 1]");
    TemperingLadder l;
    l.beta.resize(rungs);
    for (int r = 0; r < rungs; ++r) l.beta[r] = rungs == 1 ? 1.0 : std::pow(beta_min, static_cast<double>(r) / (rungs - 1));
    l.log_pseudo_prior.assign(rungs, 0.0);
    l.validate();
    return l;
  }

  int size() const { return static_cast<int>(beta.size()); }

  void validate() const {
    if (beta.empty() || beta[0] != 1.0) throw std::invalid_argument("ladder must start at beta = 1");
    for (std::size_t r = 1; r < beta.size(); ++r)
      if (!(beta[r] < beta[r - 1]) || !(beta[r] > 0.0))
        throw std::invalid_argument("inverse temperatures must be strictly decreasing and positive");
    if (log_pseudo_prior.size() != beta.size()) throw std::invalid_argument("one pseudo-prior per rung");
    if (rung < 0 || rung >= size()) throw std::out_of_range("current rung outside the ladder");
  }
};

/// log acceptance of a rung move at fixed matching with log weight `log_w`.
inline double rung_move_log_acceptance(double beta_from, double beta_to, double c_from, double c_to, double log_w) {
  return (beta_to - beta_from) * log_w + c_to - c_from;
}

struct TemperingOptions {
  int rung_interval = 10;  ///< within-rung steps between rung proposals
  bool adapt = true;       ///< Wang-Landau style pseudo-prior updates
  double gamma0 = 1.0;
  double t0 = 1000.0;
};

/// Simulated tempering over the two-colour target pi^beta.
///
/// Within a rung the chain is a BipartiteChain on the tempered table w^beta.
/// Every `rung_interval` steps a move to a neighbouring rung is proposed with
/// the matching held fixed. While adapting, the pseudo-prior of the occupied
/// rung is lowered by a decreasing gain so that rung occupancy equalises;
/// stop adapting after burn-in to get an exact chain.
class TemperedSampler {
 public:
  TemperedSampler(const WeightTable& base, Proposal proposal, TemperingLadder ladder, BipartiteMatching init = {},
                  TemperingOptions options = {})
      : ladder_(std::move(ladder)), options_(options), proposal_(proposal) {
    ladder_.validate();
    if (options_.rung_interval < 1) throw std::invalid_argument("rung interval must be at least 1");
    base_ = proposal.kind == ProposalKind::P1 ? base.thresholded(proposal.delta) : base;
    inner_ = proposal;
    inner_.delta = 0.0;  // thresholding already applied to base_
    for (double b : ladder_.beta) tables_.push_back(base_.tempered(b));
    occupancy_.assign(ladder_.size(), 0);
    chain_.emplace(tables_[ladder_.rung], inner_, std::move(init));
  }

  StepResult step(Rng& rng) {
    StepResult r = chain_->step(rng);
    ++occupancy_[ladder_.rung];
    if (ladder_.size() > 1 && ++since_rung_ >= options_.rung_interval) {
      since_rung_ = 0;
      rung_move(rng);
    }
    return r;
  }

  void set_adapting(bool on) { options_.adapt = on; }
  bool adapting() const { return options_.adapt; }

  int rung() const { return ladder_.rung; }
  const TemperingLadder& ladder() const { return ladder_; }
  const BipartiteMatching& state() const { return chain_->state(); }
  /// Untempered log weight of the current matching.
  double log_weight() const { return base_.log_matching_weight(chain_->state()); }
  const BipartiteChain& chain() const { return *chain_; }
  const std::vector<std::size_t>& occupancy() const { return occupancy_; }
  std::size_t rung_moves_proposed() const { return rung_proposed_; }
  std::size_t rung_moves_accepted() const { return rung_accepted_; }

 private:
  void rung_move(Rng& rng) {
    ++rung_proposed_;
    const int cur = ladder_.rung;
    const int to = uniform01(rng) < 0.5 ? cur - 1 : cur + 1;
    if (to >= 0 && to < ladder_.size()) {
      const double lw = log_weight();
      const double la = rung_move_log_acceptance(ladder_.beta[cur], ladder_.beta[to], ladder_.log_pseudo_prior[cur],
                                                 ladder_.log_pseudo_prior[to], lw);
      if (std::log(uniform01(rng)) < la) {
        ++rung_accepted_;
        ladder_.rung = to;
        BipartiteMatching rho = chain_->state();
        chain_.emplace(tables_[to], inner_, std::move(rho));
      }
    }
    if (options_.adapt) {
      ++adapt_t_;
      const double gain = options_.gamma0 * std::min(1.0, options_.t0 / static_cast<double>(adapt_t_));
      ladder_.log_pseudo_prior[ladder_.rung] -= gain;
    }
  }

  TemperingLadder ladder_;
  TemperingOptions options_;
  Proposal proposal_;
  Proposal inner_;
  WeightTable base_;
  std::vector<WeightTable> tables_;
  std::optional<BipartiteChain> chain_;
  std::vector<std::size_t> occupancy_;
  int since_rung_ = 0;
  std::size_t adapt_t_ = 0;
  std::size_t rung_proposed_ = 0, rung_accepted_ = 0;
};

}  // namespace compclust
