#include <gtest/gtest.h>

#include "compclust/geometry.hpp"

using namespace compclust;

TEST(Geometry, Distances) {
  EXPECT_DOUBLE_EQ(squared_distance({0, 0}, {3, 4}), 25.0);
  EXPECT_DOUBLE_EQ(distance({1, 1}, {4, 5}), 5.0);
}

TEST(Geometry, RectangleWindow) {
  Window w(Rect{0, 0, 10, 5});
  EXPECT_TRUE(w.is_rectangle());
  EXPECT_DOUBLE_EQ(w.area(), 50.0);
  EXPECT_TRUE(w.contains({10, 5}));
  EXPECT_FALSE(w.contains({10.01, 2}));
  EXPECT_DOUBLE_EQ(w.distance_to_boundary({2, 1}), 1.0);
  EXPECT_DOUBLE_EQ(w.distance_to_boundary({12, 2}), 2.0);
}

TEST(Geometry, PolygonWindow) {
  // L-shape
  Window w(std::vector<Point2>{{0, 0}, {4, 0}, {4, 2}, {2, 2}, {2, 4}, {0, 4}});
  EXPECT_FALSE(w.is_rectangle());
  EXPECT_DOUBLE_EQ(w.area(), 12.0);
  EXPECT_TRUE(w.contains({1, 3}));
  EXPECT_FALSE(w.contains({3, 3}));
  EXPECT_NEAR(w.distance_to_boundary({1, 1}), 1.0, 1e-12);
  EXPECT_NEAR(w.distance_to_boundary({3, 3}), 1.0, 1e-12);
}

TEST(Geometry, MirroredWindowContainsReflectedPoints) {
  Window w(std::vector<Point2>{{0, 0}, {5, 1}, {3, 4}});
  const Window m = w.mirrored_x();
  EXPECT_NEAR(m.area(), w.area(), 1e-12);
  for (double x = -1; x <= 6; x += 0.37)
    for (double y = -1; y <= 5; y += 0.41) EXPECT_EQ(w.contains({x, y}), m.contains({-x, y}));
}

TEST(Geometry, InvalidWindowsThrow) {
  EXPECT_THROW(Window(Rect{0, 0, 0, 1}), std::invalid_argument);
  EXPECT_THROW(Window(std::vector<Point2>{{0, 0}, {1, 1}}), std::invalid_argument);
  EXPECT_THROW(Window(std::vector<Point2>{{0, 0}, {1, 1}, {2, 2}}), std::invalid_argument);
}
