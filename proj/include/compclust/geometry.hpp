#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <vector>

namespace compclust {

/// Planar coordinate in kilometres.
struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Point2 operator*(double s, Point2 a) { return {s * a.x, s * a.y}; }
  friend bool operator==(const Point2&, const Point2&) = default;
};

inline double squared_distance(Point2 a, Point2 b) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return dx * dx + dy * dy;
}

inline double distance(Point2 a, Point2 b) { return std::sqrt(squared_distance(a, b)); }

struct Rect {
  double x0 = 0.0, y0 = 0.0, x1 = 1.0, y1 = 1.0;

  double width() const { return x1 - x0; }
  double height() const { return y1 - y0; }
  double area() const { return width() * height(); }
  bool contains(Point2 p) const { return p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1; }
};

/// Observation window: a simple polygon, with a rectangle fast path.
///
/// A window built from a rectangle keeps `rect()` so that edge corrections can
/// use closed forms. The buffer width is bookkeeping from ingestion; the
/// boundary stored here already includes it.
class Window {
 public:
  Window() : Window(Rect{}) {}

  explicit Window(Rect r, double buffer = 0.0) : rect_(r), buffer_(buffer) {
    if (!(r.x1 > r.x0) || !(r.y1 > r.y0)) throw std::invalid_argument("window rectangle has non-positive area");
    if (buffer < 0.0) throw std::invalid_argument("negative buffer width");
    vertices_ = {{r.x0, r.y0}, {r.x1, r.y0}, {r.x1, r.y1}, {r.x0, r.y1}};
    area_ = r.area();
    bbox_ = r;
  }

  explicit Window(std::vector<Point2> vertices, double buffer = 0.0)
      : vertices_(std::move(vertices)), buffer_(buffer) {
    if (vertices_.size() < 3) throw std::invalid_argument("polygon window needs at least 3 vertices");
    if (buffer < 0.0) throw std::invalid_argument("negative buffer width");
    double a = 0.0;
    bbox_ = {vertices_[0].x, vertices_[0].y, vertices_[0].x, vertices_[0].y};
    for (std::size_t i = 0; i < vertices_.size(); ++i) {
      const Point2& p = vertices_[i];
      const Point2& q = vertices_[(i + 1) % vertices_.size()];
      a += p.x * q.y - q.x * p.y;
      bbox_.x0 = std::min(bbox_.x0, p.x);
      bbox_.y0 = std::min(bbox_.y0, p.y);
      bbox_.x1 = std::max(bbox_.x1, p.x);
      bbox_.y1 = std::max(bbox_.y1, p.y);
    }
    area_ = std::abs(a) / 2.0;
    if (!(area_ > 0.0)) throw std::invalid_argument("polygon window has zero area");
  }

  bool is_rectangle() const { return rect_.has_value(); }
  const std::optional<Rect>& rect() const { return rect_; }
  const Rect& bounding_box() const { return bbox_; }
  const std::vector<Point2>& vertices() const { return vertices_; }
  double area() const { return area_; }
  double buffer() const { return buffer_; }

  bool contains(Point2 p) const {
    if (rect_) return rect_->contains(p);
    if (!bbox_.contains(p)) return false;
    bool inside = false;
    const std::size_t n = vertices_.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
      const Point2& a = vertices_[i];
      const Point2& b = vertices_[j];
      if ((a.y > p.y) != (b.y > p.y)) {
        const double xc = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
        if (p.x < xc) inside = !inside;
      }
    }
    return inside;
  }

  /// Euclidean distance from p to the boundary (positive inside and outside).
  double distance_to_boundary(Point2 p) const {
    if (rect_) {
      if (rect_->contains(p))
        return std::min({p.x - rect_->x0, rect_->x1 - p.x, p.y - rect_->y0, rect_->y1 - p.y});
    }
    double best = std::numeric_limits<double>::infinity();
    const std::size_t n = vertices_.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Point2 a = vertices_[i];
      const Point2 b = vertices_[(i + 1) % n];
      const Point2 ab = b - a;
      const double len2 = ab.x * ab.x + ab.y * ab.y;
      double t = len2 > 0.0 ? ((p.x - a.x) * ab.x + (p.y - a.y) * ab.y) / len2 : 0.0;
      t = std::clamp(t, 0.0, 1.0);
      best = std::min(best, distance(p, a + t * ab));
    }
    return best;
  }

  /// Reflection x -> -x of the whole window.
  Window mirrored_x() const {
    if (rect_) return Window(Rect{-rect_->x1, rect_->y0, -rect_->x0, rect_->y1}, buffer_);
    std::vector<Point2> v;
    v.reserve(vertices_.size());
    for (auto it = vertices_.rbegin(); it != vertices_.rend(); ++it) v.push_back({-it->x, it->y});
    return Window(std::move(v), buffer_);
  }

 private:
  std::optional<Rect> rect_;
  std::vector<Point2> vertices_;
  Rect bbox_;
  double area_ = 0.0;
  double buffer_ = 0.0;
};

}  // namespace compclust
