#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "intensity.hpp"
#include "pattern.hpp"
#include "random.hpp"
#include "weight_table.hpp"

namespace compclust {

/// r_t = r_max * t / steps for t = 1..steps.
inline std::vector<double> default_r_grid(double r_max = 15.0, int steps = 512) {
  if (!(r_max > 0.0) || steps < 1) throw std::invalid_argument("r grid needs r_max > 0 and at least one step");
  std::vector<double> r(steps);
  for (int t = 0; t < steps; ++t) r[t] = r_max * (t + 1) / steps;
  return r;
}

/// Intensity of type `type` at location u.
using IntensityFn = std::function<double(int type, Point2 u)>;

inline IntensityFn field_intensity(const std::vector<IntensityField>& fields) {
  return [&fields](int type, Point2 u) { return fields.at(type).at(u); };
}

/// K_ij(r) for every ordered pair of types (K[i][j] empty when i == j).
struct KMatrix {
  std::vector<double> r;
  int k = 0;
  std::vector<std::vector<std::vector<double>>> K;
  const std::vector<double>& at(int i, int j) const { return K.at(i).at(j); }
};

namespace detail {

/// Index of the first grid value >= d, or r.size() if none.
inline std::size_t first_bin(const std::vector<double>& r, double d) {
  return static_cast<std::size_t>(std::lower_bound(r.begin(), r.end(), d) - r.begin());
}

}  // namespace detail

/// Inhomogeneous cross-type K functions. Translation edge correction on
/// rectangular windows; border correction (ratio form) otherwise.
inline KMatrix kcross_inhom(const PointPattern& x, const IntensityFn& lambda, const std::vector<double>& r) {
  if (r.empty() || !std::is_sorted(r.begin(), r.end()) || r.front() < 0.0)
    throw std::invalid_argument("r grid must be non-empty, sorted and non-negative");
  const int k = x.k;
  const std::size_t nr = r.size();
  const double rmax = r.back();
  KMatrix out;
  out.r = r;
  out.k = k;
  out.K.assign(k, std::vector<std::vector<double>>(k));

  std::vector<double> inv_lam(x.size());
  std::vector<Point2> pos(x.size());
  for (std::size_t u = 0; u < x.size(); ++u) {
    const double l = lambda(x[u].mark, x[u].x);
    if (!(l > 0.0)) throw std::domain_error("intensity is not positive at data point " + std::to_string(u));
    inv_lam[u] = 1.0 / l;
    pos[u] = x[u].x;
  }
  const Window& w = x.window;
  const auto& rect = w.rect();
  // increments per ordered type pair, then cumulative sums
  std::vector<std::vector<std::vector<double>>> num(k, std::vector<std::vector<double>>(k));
  std::vector<std::vector<double>> den(k);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j)
      if (i != j) num[i][j].assign(nr + 1, 0.0);
    den[i].assign(nr + 1, 0.0);
  }
  std::vector<double> border(x.size(), 0.0);
  if (!rect) {
    for (std::size_t u = 0; u < x.size(); ++u) {
      border[u] = w.contains(pos[u]) ? w.distance_to_boundary(pos[u]) : -1.0;
      if (border[u] >= 0.0) {
        den[x[u].mark][0] += inv_lam[u];
        den[x[u].mark][detail::first_bin(r, std::nextafter(border[u], std::numeric_limits<double>::infinity()))] -=
            inv_lam[u];
      }
    }
  }
  detail::CellIndex idx(pos, std::max(rmax, 1e-9));
  for (std::size_t u = 0; u < x.size(); ++u) {
    const int ti = x[u].mark;
    idx.for_each_within(pos[u], std::nextafter(rmax, std::numeric_limits<double>::infinity()), [&](int v) {
      const int tj = x[v].mark;
      if (tj == ti) return;
      const double d = distance(pos[u], pos[v]);
      const std::size_t b = detail::first_bin(r, d);
      if (b >= nr) return;
      double c = inv_lam[u] * inv_lam[v];
      if (rect) {
        const double ax = rect->width() - std::abs(pos[u].x - pos[v].x);
        const double ay = rect->height() - std::abs(pos[u].y - pos[v].y);
        if (!(ax > 0.0) || !(ay > 0.0)) return;
        c *= w.area() / (ax * ay);
        num[ti][tj][b] += c;
      } else {
        if (!(border[u] >= d)) return;
        num[ti][tj][b] += c;
        num[ti][tj][detail::first_bin(r, std::nextafter(border[u], std::numeric_limits<double>::infinity()))] -= c;
      }
    });
  }
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < k; ++j) {
      if (i == j) continue;
      auto& K = out.K[i][j];
      K.assign(nr, 0.0);
      double acc = 0.0, dacc = 0.0;
      for (std::size_t t = 0; t < nr; ++t) {
        acc += num[i][j][t];
        if (rect) {
          K[t] = acc / w.area();
        } else {
          dacc += den[i][t];
          K[t] = dacc > 0.0 ? acc / dacc : 0.0;
        }
      }
    }
  return out;
}

/// K_cross = sum_{i != j} n_i n_j K_ij / sum n_i n_j and L = sqrt(K_cross / pi).
inline std::vector<double> lcross_aggregate(const KMatrix& km, const std::vector<int>& counts) {
  if (static_cast<int>(counts.size()) != km.k) throw std::invalid_argument("one count per type");
  std::vector<double> kc(km.r.size(), 0.0);
  double wsum = 0.0;
  for (int i = 0; i < km.k; ++i)
    for (int j = 0; j < km.k; ++j) {
      if (i == j) continue;
      const double wt = static_cast<double>(counts[i]) * counts[j];
      if (wt <= 0.0) continue;
      wsum += wt;
      for (std::size_t t = 0; t < kc.size(); ++t) kc[t] += wt * km.K[i][j][t];
    }
  for (auto& v : kc) v = wsum > 0.0 ? std::sqrt(std::max(0.0, v / wsum) / kPi) : 0.0;
  return kc;
}

/// Independent inhomogeneous Poisson components, by thinning a homogeneous
/// process at the field maximum over the window's bounding box.
inline PointPattern simulate_null_poisson(const std::vector<IntensityField>& fields, const Window& w, Rng& rng) {
  PointPattern x;
  x.k = static_cast<int>(fields.size());
  x.window = w;
  const Rect& b = w.bounding_box();
  for (int t = 0; t < x.k; ++t) {
    const double lmax = fields[t].max_value();
    if (!(lmax > 0.0)) continue;
    const int n = sample_poisson(lmax * b.area(), rng);
    for (int s = 0; s < n; ++s) {
      const Point2 u{b.x0 + uniform01(rng) * b.width(), b.y0 + uniform01(rng) * b.height()};
      if (uniform01(rng) * lmax < fields[t].at(u)) x.points.push_back({u, t});
    }
  }
  return x;
}

struct DeviationOptions {
  int m = 99;          ///< simulations for the test and envelopes
  int m_mean = 99;     ///< separate simulations for the null mean
  double alpha = 0.05;
  std::vector<double> r = default_r_grid();
  /// Per-type KDE bandwidths. When set, every pattern (observed and simulated)
  /// is summarised with fields re-estimated from that pattern, so all of them
  /// go through the same estimator. When empty, the given fields are used for all.
  std::vector<double> bandwidths;
};

struct KEstimate {
  std::vector<double> r;
  KMatrix k_obs;
  std::vector<double> l_obs;
  std::vector<double> null_mean;
  std::vector<double> lower;
  std::vector<double> upper;
  double d_obs = 0.0;
  std::vector<double> d_null;
  double p_value = 1.0;
  bool reject = false;

  void write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.precision(10);
    out << "r,L_obs,null_mean,lower,upper\n";
    for (std::size_t t = 0; t < r.size(); ++t)
      out << r[t] << ',' << l_obs[t] << ',' << null_mean[t] << ',' << lower[t] << ',' << upper[t] << '\n';
  }
};

/// max over the grid of (L - mean).
inline double deviation_statistic(const std::vector<double>& l, const std::vector<double>& mean) {
  double d = -std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < l.size(); ++t) d = std::max(d, l[t] - mean[t]);
  return d;
}

/// Monte Carlo p-value (1 + #{null >= observed}) / (m + 1).
inline double monte_carlo_p_value(double d_obs, const std::vector<double>& d_null) {
  std::size_t c = 0;
  for (double d : d_null) c += d >= d_obs;
  return (1.0 + c) / (d_null.size() + 1.0);
}

/// Deviation test of the observed L_cross against independent inhomogeneous
/// Poisson components with the given intensity fields. Patterns are
/// summarised with the given fields, or with refitted ones if
/// opt.bandwidths is set.
inline KEstimate deviation_test(const PointPattern& x, const std::vector<IntensityField>& fields,
                                const DeviationOptions& opt, Rng& rng) {
  if (opt.m < 1 || opt.m_mean < 1) throw std::invalid_argument("need at least one null simulation per batch");
  if (static_cast<int>(fields.size()) != x.k) throw std::invalid_argument("one intensity field per type");
  const bool refit = !opt.bandwidths.empty();
  if (refit && static_cast<int>(opt.bandwidths.size()) != x.k) throw std::invalid_argument("one bandwidth per type");
  const IntensityFn lam = field_intensity(fields);
  auto k_of = [&](const PointPattern& p) {
    if (!refit) return kcross_inhom(p, lam, opt.r);
    std::vector<std::vector<Point2>> pts(p.k);
    for (const auto& q : p.points) pts[q.mark].push_back(q.x);
    std::vector<IntensityField> own;
    for (int t = 0; t < p.k; ++t) {
      const double h = opt.bandwidths[t];
      own.push_back(pts[t].empty() ? IntensityField(p.window, default_cell(h), h) : kde_intensity(pts[t], p.window, h));
    }
    return kcross_inhom(p, field_intensity(own), opt.r);
  };
  auto summarise = [&](const PointPattern& p) { return lcross_aggregate(k_of(p), p.count_by_type()); };

  KEstimate est;
  est.r = opt.r;
  est.k_obs = k_of(x);
  est.l_obs = lcross_aggregate(est.k_obs, x.count_by_type());
  const std::size_t nr = opt.r.size();
  est.null_mean.assign(nr, 0.0);
  est.lower.assign(nr, std::numeric_limits<double>::infinity());
  est.upper.assign(nr, -std::numeric_limits<double>::infinity());
  auto envelope = [&](const std::vector<double>& l) {
    for (std::size_t t = 0; t < nr; ++t) {
      est.lower[t] = std::min(est.lower[t], l[t]);
      est.upper[t] = std::max(est.upper[t], l[t]);
    }
  };

  for (int s = 0; s < opt.m_mean; ++s) {
    const auto l = summarise(simulate_null_poisson(fields, x.window, rng));
    for (std::size_t t = 0; t < nr; ++t) est.null_mean[t] += l[t] / opt.m_mean;
    envelope(l);
  }
  std::vector<std::vector<double>> batch;
  batch.reserve(opt.m);
  for (int s = 0; s < opt.m; ++s) batch.push_back(summarise(simulate_null_poisson(fields, x.window, rng)));
  for (const auto& l : batch) {
    envelope(l);
    est.d_null.push_back(deviation_statistic(l, est.null_mean));
  }
  est.d_obs = deviation_statistic(est.l_obs, est.null_mean);
  est.p_value = monte_carlo_p_value(est.d_obs, est.d_null);
  est.reject = est.p_value <= opt.alpha;
  return est;
}

}  // namespace compclust
