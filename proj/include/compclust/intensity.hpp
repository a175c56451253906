#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "geometry.hpp"
#include "model.hpp"
#include "weight_table.hpp"

namespace compclust {

/// Isotropic Gaussian kernel with standard deviation h.
inline double gaussian_kernel(Point2 d, double h) {
  return std::exp(-(d.x * d.x + d.y * d.y) / (2.0 * h * h)) / (2.0 * kPi * h * h);
}

namespace detail {

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

}  // namespace detail

/// Diggle edge-correction mass e_h(u) = integral over W of phi_h(u - v) dv.
/// Closed form on rectangles. On polygons: midpoint rule in y with spacing
/// h/8 over +-6h, and along each row the chord through W integrated exactly.
inline double edge_correction(Point2 u, const Window& w, double h) {
  if (!(h > 0.0)) throw std::domain_error("bandwidth must be positive");
  if (const auto& r = w.rect()) {
    const double ex = detail::normal_cdf((r->x1 - u.x) / h) - detail::normal_cdf((r->x0 - u.x) / h);
    const double ey = detail::normal_cdf((r->y1 - u.y) / h) - detail::normal_cdf((r->y0 - u.y) / h);
    return ex * ey;
  }
  if (w.contains(u) && w.distance_to_boundary(u) >= 6.0 * h) return 1.0;
  const auto& vs = w.vertices();
  const std::size_t n = vs.size();
  const double step = h / 8.0;
  const int half = 48;
  std::vector<double> cuts;
  double acc = 0.0;
  for (int b = -half; b < half; ++b) {
    const double y = u.y + (b + 0.5) * step;
    cuts.clear();
    // same crossing rule as Window::contains
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
      const Point2& a = vs[i];
      const Point2& c = vs[j];
      if ((a.y > y) != (c.y > y)) cuts.push_back(a.x + (y - a.y) * (c.x - a.x) / (c.y - a.y));
    }
    if (cuts.size() < 2) continue;
    std::sort(cuts.begin(), cuts.end());
    double row = 0.0;
    for (std::size_t t = 0; t + 1 < cuts.size(); t += 2)
      row += detail::normal_cdf((cuts[t + 1] - u.x) / h) - detail::normal_cdf((cuts[t] - u.x) / h);
    const double dy = (y - u.y) / h;
    acc += row * std::exp(-0.5 * dy * dy);
  }
  return std::min(1.0, acc * step / (std::sqrt(2.0 * kPi) * h));
}

/// Intensity (or density) values on the cell centres of a regular grid
/// covering the window's bounding box. Cells whose centre is outside W hold 0.
class IntensityField {
 public:
  IntensityField() = default;
  IntensityField(Window w, double cell, double bandwidth) : window_(std::move(w)), cell_(cell), bandwidth_(bandwidth) {
    if (!(cell > 0.0)) throw std::invalid_argument("cell size must be positive");
    const Rect& b = window_.bounding_box();
    nx_ = std::max(1, static_cast<int>(std::ceil(b.width() / cell - 1e-9)));
    ny_ = std::max(1, static_cast<int>(std::ceil(b.height() / cell - 1e-9)));
    values_.assign(static_cast<std::size_t>(nx_) * ny_, 0.0);
    inside_.assign(values_.size(), 0);
    for (int iy = 0; iy < ny_; ++iy)
      for (int ix = 0; ix < nx_; ++ix) inside_[index(ix, iy)] = window_.contains(center(ix, iy));
  }

  const Window& window() const { return window_; }
  double cell() const { return cell_; }
  double bandwidth() const { return bandwidth_; }
  int nx() const { return nx_; }
  int ny() const { return ny_; }
  std::size_t index(int ix, int iy) const { return static_cast<std::size_t>(iy) * nx_ + ix; }
  Point2 center(int ix, int iy) const {
    const Rect& b = window_.bounding_box();
    return {b.x0 + (ix + 0.5) * cell_, b.y0 + (iy + 0.5) * cell_};
  }
  bool inside(int ix, int iy) const { return inside_[index(ix, iy)]; }
  double value(int ix, int iy) const { return values_[index(ix, iy)]; }
  void set_value(int ix, int iy, double v) { values_[index(ix, iy)] = inside(ix, iy) ? std::max(0.0, v) : 0.0; }
  const std::vector<double>& values() const { return values_; }

  double max_value() const { return values_.empty() ? 0.0 : *std::max_element(values_.begin(), values_.end()); }

  /// Quadrature of the field over W (sum of inside cells times cell area).
  /// Cell area clipped to the bounding box (the last row and column overhang).
  double cell_area(int ix, int iy) const {
    const Rect& b = window_.bounding_box();
    const double wx = std::min(b.x1, b.x0 + (ix + 1) * cell_) - (b.x0 + ix * cell_);
    const double wy = std::min(b.y1, b.y0 + (iy + 1) * cell_) - (b.y0 + iy * cell_);
    return std::max(0.0, wx) * std::max(0.0, wy);
  }

  /// Midpoint rule over the cells inside W.
  double integral() const {
    double s = 0.0;
    for (int iy = 0; iy < ny_; ++iy)
      for (int ix = 0; ix < nx_; ++ix)
        if (inside(ix, iy)) s += value(ix, iy) * cell_area(ix, iy);
    return s;
  }

  /// Bilinear interpolation between cell centres over the cells inside W,
  /// 0 outside W.
  double at(Point2 u) const {
    if (!window_.contains(u)) return 0.0;
    const Rect& b = window_.bounding_box();
    const double fx = (u.x - b.x0) / cell_ - 0.5, fy = (u.y - b.y0) / cell_ - 0.5;
    const int ix = std::clamp(static_cast<int>(std::floor(fx)), 0, std::max(0, nx_ - 2));
    const int iy = std::clamp(static_cast<int>(std::floor(fy)), 0, std::max(0, ny_ - 2));
    const double tx = nx_ > 1 ? std::clamp(fx - ix, 0.0, 1.0) : 0.0;
    const double ty = ny_ > 1 ? std::clamp(fy - iy, 0.0, 1.0) : 0.0;
    double acc = 0.0, wsum = 0.0;
    for (int dx = 0; dx <= 1; ++dx)
      for (int dy = 0; dy <= 1; ++dy) {
        const int cx = std::min(ix + dx, nx_ - 1), cy = std::min(iy + dy, ny_ - 1);
        const double wt = (dx ? tx : 1.0 - tx) * (dy ? ty : 1.0 - ty);
        if (wt <= 0.0 || !inside(cx, cy)) continue;
        acc += wt * value(cx, cy);
        wsum += wt;
      }
    if (wsum > 0.0) return std::max(0.0, acc / wsum);
    // u inside W but all four neighbouring centres outside: nearest cell
    const int cx = std::clamp(static_cast<int>(std::floor(fx + 0.5)), 0, nx_ - 1);
    const int cy = std::clamp(static_cast<int>(std::floor(fy + 0.5)), 0, ny_ - 1);
    return value(cx, cy);
  }

  /// Copy with every value multiplied by `s`.
  IntensityField scaled(double s) const {
    IntensityField f = *this;
    for (auto& v : f.values_) v *= s;
    return f;
  }

  /// Copy with cells whose value is below `threshold` removed from the domain.
  IntensityField cropped(double threshold) const {
    IntensityField f = *this;
    for (std::size_t c = 0; c < f.values_.size(); ++c)
      if (f.values_[c] < threshold) {
        f.values_[c] = 0.0;
        f.inside_[c] = 0;
      }
    return f;
  }

  void write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "x,y,value\n";
    out.precision(10);
    for (int iy = 0; iy < ny_; ++iy)
      for (int ix = 0; ix < nx_; ++ix)
        if (inside(ix, iy)) {
          const Point2 c = center(ix, iy);
          out << c.x << ',' << c.y << ',' << value(ix, iy) << '\n';
        }
  }

 private:
  Window window_;
  double cell_ = 1.0;
  double bandwidth_ = 0.0;
  int nx_ = 0, ny_ = 0;
  std::vector<double> values_;
  std::vector<char> inside_;
};

/// Grid cell used for a bandwidth: min(h/2, 1 km).
inline double default_cell(double h) { return std::min(h / 2.0, 1.0); }

/// Edge-corrected Gaussian kernel estimate at one location. `skip` excludes
/// one point (leave-one-out).
inline double kde_at(const std::vector<Point2>& pts, const Window& w, double h, Point2 u, int skip = -1) {
  if (!(h > 0.0)) throw std::domain_error("bandwidth must be positive");
  double s = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i)
    if (static_cast<int>(i) != skip) s += gaussian_kernel(u - pts[i], h);
  return s / edge_correction(u, w, h);
}

/// lambda(u) = sum_i phi_h(u - x_i) / e_h(u) on a grid over W. The kernel is
/// truncated at 6h.
inline IntensityField kde_intensity(const std::vector<Point2>& pts, const Window& w, double h,
                                    std::optional<double> cell = std::nullopt) {
  if (!(h > 0.0)) throw std::domain_error("bandwidth must be positive");
  if (pts.empty()) throw std::invalid_argument("kernel estimate needs at least one point");
  IntensityField f(w, cell.value_or(default_cell(h)), h);
  const double reach = 6.0 * h;
  detail::CellIndex idx(pts, reach);
  for (int iy = 0; iy < f.ny(); ++iy)
    for (int ix = 0; ix < f.nx(); ++ix) {
      if (!f.inside(ix, iy)) continue;
      const Point2 u = f.center(ix, iy);
      double s = 0.0;
      idx.for_each_within(u, reach, [&](int i) { s += gaussian_kernel(u - pts[i], h); });
      if (s > 0.0) s /= edge_correction(u, w, h);
      f.set_value(ix, iy, s);
    }
  return f;
}

struct LscvResult {
  double bandwidth = 0.0;
  std::vector<double> grid;
  std::vector<double> score;
  bool degenerate = false;  ///< all points coincide; boundary bandwidth returned
  std::string warning;
};

/// Least-squares cross-validation score integral(lambda^2) - 2 sum_i lambda_{-i}(x_i).
inline double lscv_score(const std::vector<Point2>& pts, const Window& w, double h) {
  const IntensityField f = kde_intensity(pts, w, h);
  double sq = 0.0;
  for (int iy = 0; iy < f.ny(); ++iy)
    for (int ix = 0; ix < f.nx(); ++ix)
      if (f.inside(ix, iy)) sq += f.value(ix, iy) * f.value(ix, iy) * f.cell_area(ix, iy);
  const double reach = 6.0 * h;
  detail::CellIndex idx(pts, reach);
  double loo = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double s = 0.0;
    idx.for_each_within(pts[i], reach, [&](int j) {
      if (j != static_cast<int>(i)) s += gaussian_kernel(pts[i] - pts[j], h);
    });
    loo += s / edge_correction(pts[i], w, h);
  }
  return sq - 2.0 * loo;
}

/// Bandwidth minimising the LSCV score over `h_grid`.
inline LscvResult lscv_bandwidth(const std::vector<Point2>& pts, const Window& w, std::vector<double> h_grid) {
  if (h_grid.empty()) throw std::invalid_argument("bandwidth grid is empty");
  std::sort(h_grid.begin(), h_grid.end());
  if (!(h_grid.front() > 0.0)) throw std::domain_error("bandwidths must be positive");
  LscvResult res;
  res.grid = h_grid;
  bool coincident = !pts.empty();
  for (const auto& p : pts) coincident = coincident && p == pts.front();
  if (coincident || pts.size() < 2) {
    res.degenerate = true;
    res.bandwidth = h_grid.front();
    res.warning = "degenerate pattern: all points coincide, returning the smallest bandwidth";
    res.score.assign(h_grid.size(), std::numeric_limits<double>::quiet_NaN());
    return res;
  }
  double best = std::numeric_limits<double>::infinity();
  for (double h : h_grid) {
    const double s = lscv_score(pts, w, h);
    res.score.push_back(s);
    if (s < best) {
      best = s;
      res.bandwidth = h;
    }
  }
  return res;
}

/// g = field / integral(field), evaluated by bilinear interpolation.
inline CenterDensity normalize_to_density(const IntensityField& field) {
  const double mass = field.integral();
  if (!(mass > 0.0)) throw std::invalid_argument("intensity field has zero mass");
  auto f = std::make_shared<const IntensityField>(field.scaled(1.0 / mass));
  return CenterDensity([f](Point2 p) { return f->at(p); }, field.window().bounding_box(), f->max_value(), true);
}

}  // namespace compclust
