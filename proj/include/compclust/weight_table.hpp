#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "model.hpp"
#include "pattern.hpp"

namespace compclust {

struct WeightEntry {
  int red;
  int blue;
  double log_w;
};

/// Sparse edge weights w_ij over red x blue. Absent entries have weight 0
/// exactly (truncated, thresholded, or inadmissible pairs).
///
/// Entries are stored row-major (by red, then blue) with a column index on
/// the side. The per-entry P4 quantities q_add / q_rem are computed once at
/// construction since they do not depend on the matching.
class WeightTable {
 public:
  WeightTable() = default;

  WeightTable(int n_red, int n_blue, std::vector<WeightEntry> entries, std::optional<double> r_max = std::nullopt)
      : n_red_(n_red), n_blue_(n_blue), r_max_(r_max) {
    entries.erase(std::remove_if(entries.begin(), entries.end(),
                                 [](const WeightEntry& e) { return !(e.log_w > kNegInf); }),
                  entries.end());
    std::sort(entries.begin(), entries.end(),
              [](const WeightEntry& a, const WeightEntry& b) { return a.red != b.red ? a.red < b.red : a.blue < b.blue; });
    row_start_.assign(n_red + 1, 0);
    col_start_.assign(n_blue + 1, 0);
    red_.reserve(entries.size());
    blue_.reserve(entries.size());
    log_w_.reserve(entries.size());
    for (std::size_t e = 0; e < entries.size(); ++e) {
      const auto& en = entries[e];
      if (en.red < 0 || en.red >= n_red || en.blue < 0 || en.blue >= n_blue)
        throw std::out_of_range("weight entry outside table");
      if (e > 0 && entries[e - 1].red == en.red && entries[e - 1].blue == en.blue)
        throw std::invalid_argument("duplicate weight entry");
      if (!std::isfinite(en.log_w) && en.log_w > 0) throw std::invalid_argument("infinite weight");
      red_.push_back(en.red);
      blue_.push_back(en.blue);
      log_w_.push_back(en.log_w);
      ++row_start_[en.red + 1];
      ++col_start_[en.blue + 1];
    }
    for (int i = 0; i < n_red; ++i) row_start_[i + 1] += row_start_[i];
    for (int j = 0; j < n_blue; ++j) col_start_[j + 1] += col_start_[j];
    col_entry_.resize(red_.size());
    std::vector<int> fill(col_start_.begin(), col_start_.end() - 1);
    for (std::size_t e = 0; e < red_.size(); ++e) col_entry_[fill[blue_[e]]++] = static_cast<int>(e);
    compute_p4();
  }

  /// Dense matrix of weights (w[i][j], zero meaning "no edge").
  static WeightTable from_dense(const std::vector<std::vector<double>>& w) {
    const int nr = static_cast<int>(w.size());
    const int nb = nr > 0 ? static_cast<int>(w[0].size()) : 0;
    std::vector<WeightEntry> es;
    for (int i = 0; i < nr; ++i) {
      if (static_cast<int>(w[i].size()) != nb) throw std::invalid_argument("ragged weight matrix");
      for (int j = 0; j < nb; ++j) {
        if (w[i][j] < 0.0) throw std::invalid_argument("negative weight");
        if (w[i][j] > 0.0) es.push_back({i, j, std::log(w[i][j])});
      }
    }
    return WeightTable(nr, nb, std::move(es));
  }

  int n_red() const { return n_red_; }
  int n_blue() const { return n_blue_; }
  std::size_t nnz() const { return log_w_.size(); }
  const std::optional<double>& r_max() const { return r_max_; }

  int entry_red(int e) const { return red_[e]; }
  int entry_blue(int e) const { return blue_[e]; }
  double entry_log_weight(int e) const { return log_w_[e]; }
  double entry_q_add(int e) const { return q_add_[e]; }
  double entry_q_rem(int e) const { return q_rem_[e]; }

  /// Entry id of (i, j), or -1 when w_ij = 0.
  int entry(int i, int j) const {
    auto first = blue_.begin() + row_start_[i];
    auto last = blue_.begin() + row_start_[i + 1];
    auto it = std::lower_bound(first, last, j);
    if (it == last || *it != j) return -1;
    return static_cast<int>(it - blue_.begin());
  }

  double log_weight(int i, int j) const {
    const int e = entry(i, j);
    return e < 0 ? kNegInf : log_w_[e];
  }
  double weight(int i, int j) const { return std::exp(log_weight(i, j)); }

  /// Entry ids in row i (sorted by blue index).
  std::pair<int, int> row_range(int i) const { return {row_start_[i], row_start_[i + 1]}; }
  /// Entry ids of column j.
  std::span<const int> column(int j) const {
    return {col_entry_.data() + col_start_[j], static_cast<std::size_t>(col_start_[j + 1] - col_start_[j])};
  }

  /// Copy keeping only entries with w > delta.
  WeightTable thresholded(double delta) const {
    const double ld = std::log(delta);
    std::vector<WeightEntry> es;
    for (std::size_t e = 0; e < nnz(); ++e)
      if (log_w_[e] > ld) es.push_back({red_[e], blue_[e], log_w_[e]});
    return WeightTable(n_red_, n_blue_, std::move(es), r_max_);
  }

  /// Copy with weights raised to the power beta.
  WeightTable tempered(double beta) const {
    std::vector<WeightEntry> es;
    es.reserve(nnz());
    for (std::size_t e = 0; e < nnz(); ++e) es.push_back({red_[e], blue_[e], beta * log_w_[e]});
    return WeightTable(n_red_, n_blue_, std::move(es), r_max_);
  }

  /// Sum of log w over the edges of rho (log of the matching weight).
  double log_matching_weight(const BipartiteMatching& rho) const {
    double s = 0.0;
    for (auto [i, j] : rho.edges()) s += log_weight(i, j);
    return s;
  }

 private:
  void compute_p4() {
    const std::size_t m = nnz();
    std::vector<double> w(m), sw(m);
    std::vector<double> row_sum(n_red_, 0.0), col_sum(n_blue_, 0.0);
    for (std::size_t e = 0; e < m; ++e) {
      w[e] = std::exp(log_w_[e]);
      sw[e] = std::exp(0.5 * log_w_[e]);
      row_sum[red_[e]] += w[e];
      col_sum[blue_[e]] += w[e];
    }
    // t(i, j') and u(i', j): the per-neighbour correction terms of q_add
    std::vector<double> t(m), u(m), row_t(n_red_, 0.0), col_u(n_blue_, 0.0);
    for (std::size_t e = 0; e < m; ++e) {
      const int i = red_[e], j = blue_[e];
      t[e] = (w[e] - sw[e]) / (1.0 + (col_sum[j] - w[e]) + row_sum[i]);
      u[e] = (w[e] - sw[e]) / (1.0 + (row_sum[i] - w[e]) + col_sum[j]);
      row_t[i] += t[e];
      col_u[j] += u[e];
    }
    q_add_.resize(m);
    q_rem_.resize(m);
    for (std::size_t e = 0; e < m; ++e) {
      const int i = red_[e], j = blue_[e];
      const double a = 1.0 - (row_t[i] - t[e]);
      const double b = 1.0 - (col_u[j] - u[e]);
      q_add_[e] = std::max(0.0, sw[e] * a * b);
      q_rem_[e] = std::exp(-0.5 * log_w_[e]);
    }
  }

  int n_red_ = 0;
  int n_blue_ = 0;
  std::optional<double> r_max_;
  std::vector<int> row_start_, col_start_, col_entry_;
  std::vector<int> red_, blue_;
  std::vector<double> log_w_;
  std::vector<double> q_add_, q_rem_;
};

namespace detail {

/// Uniform bucket grid for neighbour queries within a radius.
class CellIndex {
 public:
  CellIndex(const std::vector<Point2>& pts, double cell) : pts_(&pts), cell_(cell) {
    for (std::size_t i = 0; i < pts.size(); ++i) cells_[key(cell_of(pts[i].x), cell_of(pts[i].y))].push_back(static_cast<int>(i));
  }

  template <class F>
  void for_each_within(Point2 p, double r, F&& f) const {
    const long cx = cell_of(p.x), cy = cell_of(p.y);
    const long reach = static_cast<long>(std::ceil(r / cell_));
    const double r2 = r * r;
    for (long dx = -reach; dx <= reach; ++dx)
      for (long dy = -reach; dy <= reach; ++dy) {
        auto it = cells_.find(key(cx + dx, cy + dy));
        if (it == cells_.end()) continue;
        for (int idx : it->second)
          if (squared_distance(p, (*pts_)[idx]) < r2) f(idx);
      }
  }

 private:
  long cell_of(double v) const { return static_cast<long>(std::floor(v / cell_)); }
  static long long key(long a, long b) { return (static_cast<long long>(a) << 32) ^ static_cast<long long>(b & 0xffffffffL); }

  const std::vector<Point2>* pts_;
  double cell_;
  std::unordered_map<long long, std::vector<int>> cells_;
};

}  // namespace detail

/// log w for the pair hyperedge of single points a and b.
inline double pair_log_weight(Point2 a, Point2 b, const ModelParams& params, const CenterDensity& g) {
  const int k = params.k();
  if (k < 2 || !(params.p[1] > 0.0) || !(params.p[0] > 0.0)) return kNegInf;
  const Point2 mid = 0.5 * (a + b);
  const double s2 = params.sigma * params.sigma;
  const double log_c1 = log_size_constant(1, k);
  return 2.0 * log_c1 - log_size_constant(2, k) + std::log(params.p[1]) - std::log(params.lambda) -
         2.0 * std::log(params.p[0]) + g.log(mid) - g.log(a) - g.log(b) - std::log(s2) -
         kPi * squared_distance(a, b) / (4.0 * s2);
}

/// Weight table of a two-colour pattern: w_ij is the pair hyperedge weight of
/// red point i and blue point j. Pairs at distance >= r_max are dropped.
inline WeightTable build_weight_table(const PointPattern& x, const ModelParams& params, const CenterDensity& g,
                                      std::optional<double> r_max = std::nullopt) {
  if (x.k != 2) throw std::invalid_argument("build_weight_table requires a two-colour pattern");
  const BipartiteView view(x);
  std::vector<Point2> red_pts, blue_pts;
  for (int p : view.red) red_pts.push_back(x[p].x);
  for (int p : view.blue) blue_pts.push_back(x[p].x);
  std::vector<WeightEntry> es;
  if (r_max) {
    if (!(*r_max > 0.0)) throw std::invalid_argument("r_max must be positive");
    detail::CellIndex idx(blue_pts, *r_max);
    for (int i = 0; i < static_cast<int>(red_pts.size()); ++i)
      idx.for_each_within(red_pts[i], *r_max, [&](int j) {
        es.push_back({i, j, pair_log_weight(red_pts[i], blue_pts[j], params, g)});
      });
  } else {
    for (int i = 0; i < static_cast<int>(red_pts.size()); ++i)
      for (int j = 0; j < static_cast<int>(blue_pts.size()); ++j)
        es.push_back({i, j, pair_log_weight(red_pts[i], blue_pts[j], params, g)});
  }
  return WeightTable(static_cast<int>(red_pts.size()), static_cast<int>(blue_pts.size()), std::move(es), r_max);
}

}  // namespace compclust
