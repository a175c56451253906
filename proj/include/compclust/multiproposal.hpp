#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <utility>
#include <vector>

#include "sampler2.hpp"

namespace compclust {

/// Square tiles with a classes x classes colouring. Tiles of one class are
/// (classes - 1) * tile_side apart, so with 3 classes per axis and
/// tile_side >= r_max any two same-class tiles are >= 2 r_max apart and
/// moves inside them touch disjoint points and weights.
struct ProposalGrid {
  double tile_side = 1.0;  ///< km; infinity means a single tile
  int classes_per_axis = 3;
  int max_active = 0;      ///< l, cap on simultaneous proposals (0 = no cap)
  bool random_offset = true;

  static ProposalGrid single_tile() {
    ProposalGrid g;
    g.tile_side = std::numeric_limits<double>::infinity();
    g.classes_per_axis = 1;
    return g;
  }

  void validate(const WeightTable& t) const {
    if (!t.r_max()) throw std::invalid_argument("multiple proposals need a table truncated at r_max");
    if (!(tile_side >= *t.r_max())) throw std::invalid_argument("tile side must be at least r_max");
    if (classes_per_axis < 1) throw std::invalid_argument("need at least one tile class per axis");
    if (std::isfinite(tile_side) && classes_per_axis < 3)
      throw std::invalid_argument("same-class tiles must be separated by 2 r_max: use 3 classes per axis");
    if (max_active < 0) throw std::invalid_argument("max_active must be non-negative");
  }
};

struct MultiproposalResult {
  int tiles = 0;  ///< active tiles (= proposals made)
  int accepted = 0;
  int held = 0;
};

/// Grid-parallel MH on a truncated two-colour model.
///
/// Each step draws a random grid offset and one tile class, then proposes one
/// move per active tile from q restricted to pairs with both points inside
/// the tile. All accept/reject decisions are taken on the pre-step state and
/// the accepted moves applied together.
class MultiproposalSampler {
 public:
  MultiproposalSampler(const WeightTable& table, std::vector<Point2> red, std::vector<Point2> blue, Proposal proposal,
                       ProposalGrid grid, BipartiteMatching init = {})
      : table_(proposal.kind == ProposalKind::P1 ? table.thresholded(proposal.delta) : table),
        red_(std::move(red)),
        blue_(std::move(blue)),
        kind_(proposal.kind),
        grid_(grid),
        rho_(std::move(init)) {
    grid_.validate(table_);
    if (static_cast<int>(red_.size()) != table_.n_red() || static_cast<int>(blue_.size()) != table_.n_blue())
      throw std::invalid_argument("point lists do not match the weight table");
    if (rho_.red_partner.empty() && rho_.blue_partner.empty()) rho_ = BipartiteMatching(table_.n_red(), table_.n_blue());
    for (auto [i, j] : rho_.edges())
      if (table_.entry(i, j) < 0) throw std::invalid_argument("initial matching uses a zero-weight edge");
    for (const auto& p : red_) origin_ = {std::min(origin_.x, p.x), std::min(origin_.y, p.y)};
    for (const auto& p : blue_) origin_ = {std::min(origin_.x, p.x), std::min(origin_.y, p.y)};
    red_tile_.resize(red_.size());
    blue_tile_.resize(blue_.size());
  }

  const BipartiteMatching& state() const { return rho_; }
  const WeightTable& table() const { return table_; }
  double log_weight() const { return table_.log_matching_weight(rho_); }

  MultiproposalResult step(Rng& rng) {
    MultiproposalResult res;
    assign_tiles(rng);

    std::map<long long, std::vector<int>> tiles;
    for (std::size_t e = 0; e < table_.nnz(); ++e) {
      const long long t = red_tile_[table_.entry_red(static_cast<int>(e))];
      if (t == blue_tile_[table_.entry_blue(static_cast<int>(e))]) tiles[t].push_back(static_cast<int>(e));
    }
    if (tiles.empty()) {
      res.held = 1;
      return res;
    }
    std::vector<int> classes;
    for (const auto& [t, _] : tiles) classes.push_back(tile_class(t));
    std::sort(classes.begin(), classes.end());
    classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
    const int cls =
        classes.size() == 1 ? classes[0] : classes[std::uniform_int_distribution<std::size_t>(0, classes.size() - 1)(rng)];

    std::vector<long long> active;
    for (const auto& [t, _] : tiles)
      if (tile_class(t) == cls) active.push_back(t);
    if (grid_.max_active > 0 && static_cast<int>(active.size()) > grid_.max_active) {
      for (int a = 0; a < grid_.max_active; ++a) {
        const std::size_t b = std::uniform_int_distribution<std::size_t>(a, active.size() - 1)(rng);
        std::swap(active[a], active[b]);
      }
      active.resize(grid_.max_active);
      std::sort(active.begin(), active.end());
    }

    std::vector<Move> accepted;
    for (long long t : active) {
      ++res.tiles;
      Move m;
      const int outcome = tile_decision(t, tiles[t], rng, m);
      if (outcome < 0) ++res.held;
      if (outcome > 0) accepted.push_back(m);
    }
    for (const Move& m : accepted) apply_move(rho_, m);
    res.accepted = static_cast<int>(accepted.size());
    return res;
  }

  /// Tile id of every point under the current offset (for tests).
  const std::vector<long long>& red_tiles() const { return red_tile_; }
  const std::vector<long long>& blue_tiles() const { return blue_tile_; }

 private:
  static constexpr long long kSpan = 1LL << 30;

  long long tile_of(Point2 p) const {
    if (!std::isfinite(grid_.tile_side)) return 0;
    const long long tx = static_cast<long long>(std::floor((p.x - origin_.x + offset_.x) / grid_.tile_side));
    const long long ty = static_cast<long long>(std::floor((p.y - origin_.y + offset_.y) / grid_.tile_side));
    return tx * kSpan + ty;
  }

  int tile_class(long long t) const {
    const int c = grid_.classes_per_axis;
    const long long tx = t / kSpan, ty = t % kSpan;
    return static_cast<int>(((tx % c + c) % c) * c + ((ty % c + c) % c));
  }

  void assign_tiles(Rng& rng) {
    if (grid_.random_offset && std::isfinite(grid_.tile_side))
      offset_ = {uniform01(rng) * grid_.tile_side, uniform01(rng) * grid_.tile_side};
    for (std::size_t i = 0; i < red_.size(); ++i) red_tile_[i] = tile_of(red_[i]);
    for (std::size_t j = 0; j < blue_.size(); ++j) blue_tile_[j] = tile_of(blue_[j]);
  }

  bool in_tile(long long t, int a, int b) const { return red_tile_[a] == t && blue_tile_[b] == t; }

  double pair_mass(long long t, const std::vector<std::pair<int, int>>& pairs) const {
    double q = 0.0;
    for (auto [a, b] : pairs) {
      if (!in_tile(t, a, b)) continue;
      const int e = table_.entry(a, b);
      if (e >= 0) q += proposal_mass(kind_, rho_, table_, e);
    }
    return q;
  }

  /// -1 held, 0 rejected, 1 accepted. The state is left unchanged.
  int tile_decision(long long t, const std::vector<int>& entries, Rng& rng, Move& m) {
    mass_.resize(entries.size());
    double z_old = 0.0;
    for (std::size_t a = 0; a < entries.size(); ++a) z_old += mass_[a] = proposal_mass(kind_, rho_, table_, entries[a]);
    if (!(z_old > 0.0)) return -1;
    const int pick = entries[sample_discrete(mass_, rng)];
    const int i = table_.entry_red(pick), j = table_.entry_blue(pick);
    m = move_classify(rho_, i, j);
    const double log_r = move_log_ratio(rho_, table_, i, j);
    const double fwd = pair_mass(t, forward_pairs(m));

    apply_move(rho_, m);
    double z_new = 0.0;
    for (int e : entries) z_new += proposal_mass(kind_, rho_, table_, e);
    const double rev = pair_mass(t, reverse_pairs(m));
    revert_move(rho_, m);

    const double log_alpha = log_r + std::log(rev) - std::log(z_new) - std::log(fwd) + std::log(z_old);
    const double u = uniform01(rng);
    return rev > 0.0 && std::log(u) < log_alpha ? 1 : 0;
  }

  WeightTable table_;
  std::vector<Point2> red_, blue_;
  ProposalKind kind_;
  ProposalGrid grid_;
  BipartiteMatching rho_;
  Point2 origin_{std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  Point2 offset_;
  std::vector<long long> red_tile_, blue_tile_;
  std::vector<double> mass_;
};

}  // namespace compclust
