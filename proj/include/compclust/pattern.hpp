#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "geometry.hpp"

namespace compclust {

/// A planar point carrying a colour. Marks are 0-based internally (0..k-1).
struct MarkedPoint {
  Point2 x;
  int mark = 0;
  friend bool operator==(const MarkedPoint&, const MarkedPoint&) = default;
};

/// k-type marked point pattern observed in a window. Point indices are the
/// identity of a point; coincident locations are allowed.
struct PointPattern {
  std::vector<MarkedPoint> points;
  int k = 2;
  Window window;
  std::vector<std::string> type_names;

  PointPattern() = default;
  PointPattern(std::vector<MarkedPoint> pts, int num_types, Window w)
      : points(std::move(pts)), k(num_types), window(std::move(w)) {
    validate();
  }

  std::size_t size() const { return points.size(); }
  const MarkedPoint& operator[](std::size_t i) const { return points[i]; }

  void validate() const {
    if (k < 1) throw std::invalid_argument("pattern needs at least one type");
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto& p = points[i];
      if (p.mark < 0 || p.mark >= k)
        throw std::invalid_argument("point " + std::to_string(i) + " has mark outside 0.." + std::to_string(k - 1));
      if (!std::isfinite(p.x.x) || !std::isfinite(p.x.y))
        throw std::invalid_argument("point " + std::to_string(i) + " has non-finite coordinates");
    }
  }

  std::vector<int> count_by_type() const {
    std::vector<int> c(k, 0);
    for (const auto& p : points) ++c[p.mark];
    return c;
  }

  std::string type_name(int mark) const {
    if (mark >= 0 && static_cast<std::size_t>(mark) < type_names.size()) return type_names[mark];
    return std::to_string(mark + 1);
  }
};

/// Partition of point indices into clusters with at most one point per colour,
/// stored as hyperedges (clusters of size >= 2) plus an inverse map.
/// Points not covered by an edge are singletons.
class Matching {
 public:
  static constexpr int kSingleton = -1;

  Matching() = default;
  explicit Matching(std::size_t n) : edge_of_(n, kSingleton) {}

  std::size_t size() const { return edge_of_.size(); }
  int edge_of(int i) const { return edge_of_.at(i); }
  bool is_singleton(int i) const { return edge_of_.at(i) == kSingleton; }
  const std::vector<int>& edge(int id) const { return edges_.at(id); }
  std::size_t num_edges() const { return num_edges_; }
  std::size_t num_singletons() const { return size() - matched_points_; }
  std::size_t num_clusters() const { return num_edges_ + num_singletons(); }
  /// Upper bound on edge ids (some slots may be free).
  std::size_t edge_capacity() const { return edges_.size(); }
  bool slot_used(int id) const { return !edges_[id].empty(); }

  std::vector<int> edge_ids() const {
    std::vector<int> ids;
    ids.reserve(num_edges_);
    for (std::size_t e = 0; e < edges_.size(); ++e)
      if (!edges_[e].empty()) ids.push_back(static_cast<int>(e));
    return ids;
  }

  /// Adds a hyperedge over currently-singleton points. Returns its id.
  int add_edge(std::vector<int> members) {
    if (members.size() < 2) throw std::invalid_argument("hyperedge needs at least two points");
    std::sort(members.begin(), members.end());
    for (std::size_t t = 0; t < members.size(); ++t) {
      const int i = members[t];
      if (i < 0 || static_cast<std::size_t>(i) >= size()) throw std::out_of_range("point index out of range");
      if (t > 0 && members[t - 1] == i) throw std::invalid_argument("duplicate point in hyperedge");
      if (edge_of_[i] != kSingleton) throw std::invalid_argument("point already belongs to a hyperedge");
    }
    int id;
    if (!free_.empty()) {
      id = free_.back();
      free_.pop_back();
    } else {
      id = static_cast<int>(edges_.size());
      edges_.emplace_back();
    }
    for (int i : members) edge_of_[i] = id;
    matched_points_ += members.size();
    edges_[id] = std::move(members);
    ++num_edges_;
    return id;
  }

  void remove_edge(int id) {
    auto& m = edges_.at(id);
    if (m.empty()) throw std::invalid_argument("edge slot is not in use");
    for (int i : m) edge_of_[i] = kSingleton;
    matched_points_ -= m.size();
    m.clear();
    free_.push_back(id);
    --num_edges_;
  }

  /// Clusters (singletons included), each sorted, ordered by smallest member.
  std::vector<std::vector<int>> clusters() const {
    std::vector<std::vector<int>> out;
    out.reserve(num_clusters());
    for (std::size_t i = 0; i < size(); ++i) {
      const int e = edge_of_[i];
      if (e == kSingleton) {
        out.push_back({static_cast<int>(i)});
      } else if (edges_[e].front() == static_cast<int>(i)) {
        out.push_back(edges_[e]);
      }
    }
    return out;
  }

  /// Label of each point = smallest index in its cluster. Two matchings are
  /// equal iff their canonical labels are equal.
  std::vector<int> canonical_labels() const {
    std::vector<int> lab(size());
    for (std::size_t i = 0; i < size(); ++i) {
      const int e = edge_of_[i];
      lab[i] = e == kSingleton ? static_cast<int>(i) : edges_[e].front();
    }
    return lab;
  }

  friend bool operator==(const Matching& a, const Matching& b) {
    return a.canonical_labels() == b.canonical_labels();
  }

  /// Builds a matching from per-point labels (equal labels = same cluster).
  static Matching from_labels(const std::vector<int>& labels) {
    Matching m(labels.size());
    std::vector<std::pair<int, int>> order;
    order.reserve(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) order.emplace_back(labels[i], static_cast<int>(i));
    std::sort(order.begin(), order.end());
    for (std::size_t a = 0; a < order.size();) {
      std::size_t b = a;
      std::vector<int> members;
      while (b < order.size() && order[b].first == order[a].first) members.push_back(order[b++].second);
      if (members.size() >= 2) m.add_edge(std::move(members));
      a = b;
    }
    return m;
  }

  /// Throws if any hyperedge holds two points of the same colour.
  void validate(const PointPattern& x) const {
    if (size() != x.size()) throw std::invalid_argument("matching and pattern sizes differ");
    for (int id : edge_ids()) {
      const auto& m = edges_[id];
      if (static_cast<int>(m.size()) > x.k) throw std::logic_error("hyperedge larger than the number of colours");
      for (std::size_t a = 0; a < m.size(); ++a)
        for (std::size_t b = a + 1; b < m.size(); ++b)
          if (x[m[a]].mark == x[m[b]].mark)
            throw std::logic_error("hyperedge holds two points of colour " + std::to_string(x[m[a]].mark));
      for (int i : m)
        if (edge_of_[i] != id) throw std::logic_error("inverse map inconsistent with edges");
    }
  }

 private:
  std::vector<int> edge_of_;
  std::vector<std::vector<int>> edges_;
  std::vector<int> free_;
  std::size_t num_edges_ = 0;
  std::size_t matched_points_ = 0;
};

struct ClusterSummary {
  int size = 0;
  Point2 centroid;
  double scatter = 0.0;  ///< sum of squared distances to the centroid (km^2)
};

template <class Range>
ClusterSummary summarize_cluster(const PointPattern& x, const Range& members) {
  ClusterSummary s;
  double sx = 0.0, sy = 0.0;
  for (int i : members) {
    sx += x[i].x.x;
    sy += x[i].x.y;
    ++s.size;
  }
  s.centroid = {sx / s.size, sy / s.size};
  for (int i : members) s.scatter += squared_distance(x[i].x, s.centroid);
  return s;
}

/// One summary per cluster, singletons included, in Matching::clusters() order.
inline std::vector<ClusterSummary> partition_stats(const PointPattern& x, const Matching& rho) {
  std::vector<ClusterSummary> out;
  for (const auto& c : rho.clusters()) out.push_back(summarize_cluster(x, c));
  return out;
}

/// N_l = number of clusters of size l, Y_l = number of points in clusters of
/// size l; both indexed 0..k-1 for l = 1..k.
struct SizeCounts {
  std::vector<int> clusters;
  std::vector<int> points;
};

inline SizeCounts cluster_size_counts(const Matching& rho, int k) {
  SizeCounts c{std::vector<int>(k, 0), std::vector<int>(k, 0)};
  c.clusters[0] = static_cast<int>(rho.num_singletons());
  for (int id : rho.edge_ids()) {
    const auto s = rho.edge(id).size();
    if (static_cast<int>(s) > k) throw std::logic_error("cluster larger than k");
    ++c.clusters[s - 1];
  }
  for (int l = 0; l < k; ++l) c.points[l] = (l + 1) * c.clusters[l];
  return c;
}

// ---------------------------------------------------------------------------
// Two-colour matchings and the move algebra.

/// Matching in the complete bipartite graph red x blue.
struct BipartiteMatching {
  std::vector<int> red_partner;   ///< blue index or -1
  std::vector<int> blue_partner;  ///< red index or -1

  BipartiteMatching() = default;
  BipartiteMatching(std::size_t n_red, std::size_t n_blue) : red_partner(n_red, -1), blue_partner(n_blue, -1) {}

  int n_red() const { return static_cast<int>(red_partner.size()); }
  int n_blue() const { return static_cast<int>(blue_partner.size()); }
  bool contains(int i, int j) const { return red_partner[i] == j; }

  std::size_t num_edges() const {
    return static_cast<std::size_t>(std::count_if(red_partner.begin(), red_partner.end(), [](int j) { return j >= 0; }));
  }

  std::vector<std::pair<int, int>> edges() const {
    std::vector<std::pair<int, int>> e;
    for (int i = 0; i < n_red(); ++i)
      if (red_partner[i] >= 0) e.emplace_back(i, red_partner[i]);
    return e;
  }

  void link(int i, int j) {
    red_partner[i] = j;
    blue_partner[j] = i;
  }
  void unlink(int i, int j) {
    red_partner[i] = -1;
    blue_partner[j] = -1;
  }

  friend bool operator==(const BipartiteMatching&, const BipartiteMatching&) = default;
};

enum class MoveKind { Addition, Deletion, SwitchRed, SwitchBlue, DoubleSwitch };

inline const char* to_string(MoveKind k) {
  switch (k) {
    case MoveKind::Addition: return "addition";
    case MoveKind::Deletion: return "deletion";
    case MoveKind::SwitchRed: return "switch";
    case MoveKind::SwitchBlue: return "switch";
    case MoveKind::DoubleSwitch: return "double-switch";
  }
  return "?";
}

/// A classified move rho o (i, j).
///
/// `red_prime` is i' with (i', j) in rho, `blue_prime` is j' with (i, j') in
/// rho, -1 when absent. SwitchRed replaces (i, j') by (i, j); SwitchBlue
/// replaces (i', j) by (i, j).
struct Move {
  MoveKind kind = MoveKind::Addition;
  int i = -1;
  int j = -1;
  int red_prime = -1;
  int blue_prime = -1;
};

inline Move move_classify(const BipartiteMatching& rho, int i, int j) {
  if (i < 0 || i >= rho.n_red() || j < 0 || j >= rho.n_blue())
    throw std::out_of_range("move indices out of range");
  Move m;
  m.i = i;
  m.j = j;
  m.red_prime = rho.blue_partner[j];
  m.blue_prime = rho.red_partner[i];
  if (m.blue_prime == j) {
    m.kind = MoveKind::Deletion;
    m.red_prime = m.blue_prime = -1;
  } else if (m.red_prime < 0 && m.blue_prime < 0) {
    m.kind = MoveKind::Addition;
  } else if (m.red_prime < 0) {
    m.kind = MoveKind::SwitchRed;
  } else if (m.blue_prime < 0) {
    m.kind = MoveKind::SwitchBlue;
  } else {
    m.kind = MoveKind::DoubleSwitch;
  }
  return m;
}

/// Applies a classified move in place.
inline void apply_move(BipartiteMatching& rho, const Move& m) {
  switch (m.kind) {
    case MoveKind::Addition: rho.link(m.i, m.j); break;
    case MoveKind::Deletion: rho.unlink(m.i, m.j); break;
    case MoveKind::SwitchRed:
      rho.unlink(m.i, m.blue_prime);
      rho.link(m.i, m.j);
      break;
    case MoveKind::SwitchBlue:
      rho.unlink(m.red_prime, m.j);
      rho.link(m.i, m.j);
      break;
    case MoveKind::DoubleSwitch:
      rho.unlink(m.red_prime, m.j);
      rho.unlink(m.i, m.blue_prime);
      rho.link(m.i, m.j);
      rho.link(m.red_prime, m.blue_prime);
      break;
  }
}

/// Undoes apply_move(rho, m).
inline void revert_move(BipartiteMatching& rho, const Move& m) {
  switch (m.kind) {
    case MoveKind::Addition: rho.unlink(m.i, m.j); break;
    case MoveKind::Deletion: rho.link(m.i, m.j); break;
    case MoveKind::SwitchRed:
      rho.unlink(m.i, m.j);
      rho.link(m.i, m.blue_prime);
      break;
    case MoveKind::SwitchBlue:
      rho.unlink(m.i, m.j);
      rho.link(m.red_prime, m.j);
      break;
    case MoveKind::DoubleSwitch:
      rho.unlink(m.i, m.j);
      rho.unlink(m.red_prime, m.blue_prime);
      rho.link(m.red_prime, m.j);
      rho.link(m.i, m.blue_prime);
      break;
  }
}

inline BipartiteMatching move_apply(const BipartiteMatching& rho, int i, int j) {
  BipartiteMatching out = rho;
  apply_move(out, move_classify(rho, i, j));
  return out;
}

/// Edge pairs (a, b) with rho o (a, b) equal to the move's target. A
/// double-switch is reached from two different pairs.
inline std::vector<std::pair<int, int>> forward_pairs(const Move& m) {
  if (m.kind == MoveKind::DoubleSwitch) return {{m.i, m.j}, {m.red_prime, m.blue_prime}};
  return {{m.i, m.j}};
}

/// Edge pairs that take the move's target back to its origin.
inline std::vector<std::pair<int, int>> reverse_pairs(const Move& m) {
  switch (m.kind) {
    case MoveKind::Addition:
    case MoveKind::Deletion: return {{m.i, m.j}};
    case MoveKind::SwitchRed: return {{m.i, m.blue_prime}};
    case MoveKind::SwitchBlue: return {{m.red_prime, m.j}};
    case MoveKind::DoubleSwitch: return {{m.red_prime, m.j}, {m.i, m.blue_prime}};
  }
  return {};
}

/// Index maps between a two-colour pattern and the red/blue numbering.
struct BipartiteView {
  std::vector<int> red;   ///< red index -> point index (mark 0)
  std::vector<int> blue;  ///< blue index -> point index (mark 1)
  std::vector<int> local;  ///< point index -> red or blue index
  std::vector<char> is_red;

  explicit BipartiteView(const PointPattern& x) : local(x.size(), -1), is_red(x.size(), 0) {
    if (x.k != 2) throw std::invalid_argument("two-colour view requires k == 2");
    for (std::size_t p = 0; p < x.size(); ++p) {
      is_red[p] = x[p].mark == 0;
      auto& side = is_red[p] ? red : blue;
      local[p] = static_cast<int>(side.size());
      side.push_back(static_cast<int>(p));
    }
  }

  BipartiteMatching to_bipartite(const Matching& rho) const {
    BipartiteMatching b(red.size(), blue.size());
    for (int id : rho.edge_ids()) {
      const auto& e = rho.edge(id);
      if (e.size() != 2) throw std::invalid_argument("two-colour matching with a non-pair edge");
      int r = e[0], s = e[1];
      if (local.size() <= static_cast<std::size_t>(std::max(r, s))) throw std::out_of_range("edge outside view");
      if (!is_red[r]) std::swap(r, s);
      if (!is_red[r] || is_red[s]) throw std::invalid_argument("edge does not join a red and a blue point");
      b.link(local[r], local[s]);
    }
    return b;
  }

  Matching to_matching(const BipartiteMatching& b) const {
    Matching m(local.size());
    for (auto [i, j] : b.edges()) m.add_edge({red[i], blue[j]});
    return m;
  }
};

}  // namespace compclust
