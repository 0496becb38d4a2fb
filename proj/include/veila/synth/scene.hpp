#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "veila/core/rng.hpp"
#include "veila/geom/rangeview.hpp"

namespace veila::synth {

// Fixed semantic table; sky/no-surface renders as -1 in sem maps.
enum SemClass : int { kGround = 0, kCar = 1, kWall = 2, kClutter = 3 };
inline constexpr int kNumClasses = 4;
inline constexpr int kSky = -1;

struct Box {
  Eigen::Vector3d center;  // meters, LiDAR frame
  Eigen::Vector3d size;    // full extents
  double yaw = 0.0;        // radians about +z
  int cls = kCar;
  Eigen::Vector3d albedo{0.5, 0.5, 0.5};
};

// Vertical rectangle: width along the yaw direction, height upward from the
// ground, facing the origin side.
struct Wall {
  Eigen::Vector3d base;  // center of the bottom edge
  double yaw = 0.0;
  double width = 10.0;
  double height = 3.0;
  Eigen::Vector3d albedo{0.55, 0.42, 0.32};
};

struct SceneSpec {
  u64 seed = 0;
  double ground_z = -1.7;      // ground plane height in the LiDAR frame
  double sensor_height = 1.7;  // = -ground_z for generated scenes
  Eigen::Vector3d ground_albedo{0.34, 0.34, 0.36};
  std::vector<Box> boxes;
  std::vector<Wall> walls;

  bool operator==(const SceneSpec& o) const {
    auto veq = [](const Eigen::Vector3d& a, const Eigen::Vector3d& b) { return a == b; };
    if (seed != o.seed || ground_z != o.ground_z || sensor_height != o.sensor_height ||
        boxes.size() != o.boxes.size() || walls.size() != o.walls.size() ||
        !veq(ground_albedo, o.ground_albedo))
      return false;
    for (size_t i = 0; i < boxes.size(); ++i) {
      const Box &a = boxes[i], &b = o.boxes[i];
      if (!veq(a.center, b.center) || !veq(a.size, b.size) || a.yaw != b.yaw ||
          a.cls != b.cls || !veq(a.albedo, b.albedo))
        return false;
    }
    for (size_t i = 0; i < walls.size(); ++i) {
      const Wall &a = walls[i], &b = o.walls[i];
      if (!veq(a.base, b.base) || a.yaw != b.yaw || a.width != b.width ||
          a.height != b.height || !veq(a.albedo, b.albedo))
        return false;
    }
    return true;
  }
};

struct SceneKnobs {
  int min_boxes = 2;
  int max_boxes = 8;
  int min_walls = 0;
  int max_walls = 2;
  double place_min_r = 4.0;
  double place_max_r = 22.0;
  double sensor_height = 1.7;
  double clutter_fraction = 0.3;  // remaining boxes are cars
};

inline double luminance(const Eigen::Vector3d& rgb) {
  return 0.2126 * rgb.x() + 0.7152 * rgb.y() + 0.0722 * rgb.z();
}

// Deterministic procedural scene: boxes dropped on the ground plane without
// interpenetration (conservative bounding-circle separation), plus walls.
inline SceneSpec sample_scene(u64 seed, const SceneKnobs& knobs = {}) {
  VEILA_CHECK(knobs.min_boxes >= 0 && knobs.max_boxes >= knobs.min_boxes, "bad box range");
  CounterRng r(seed, {0x5ce7e5u});
  SceneSpec scene;
  scene.seed = seed;
  scene.sensor_height = knobs.sensor_height;
  scene.ground_z = -knobs.sensor_height;
  double gshade = 0.30 + 0.10 * r.uniform();
  scene.ground_albedo = {gshade, gshade, gshade * 1.05};

  int n_boxes = knobs.min_boxes + int(r.index(u64(knobs.max_boxes - knobs.min_boxes + 1)));
  std::vector<Eigen::Vector2d> centers;
  std::vector<double> radii;
  for (int i = 0; i < n_boxes; ++i) {
    bool clutter = r.uniform() < knobs.clutter_fraction;
    Box box;
    box.cls = clutter ? kClutter : kCar;
    if (clutter) {
      box.size = {0.6 + 1.0 * r.uniform(), 0.6 + 1.0 * r.uniform(), 0.5 + 1.2 * r.uniform()};
      box.albedo = {0.75 + 0.2 * r.uniform(), 0.65 + 0.2 * r.uniform(), 0.15 + 0.1 * r.uniform()};
    } else {
      box.size = {3.6 + 0.9 * r.uniform(), 1.6 + 0.3 * r.uniform(), 1.4 + 0.3 * r.uniform()};
      // saturated car paint, well separated from ground gray
      double hue = r.uniform();
      box.albedo = hue < 0.4   ? Eigen::Vector3d(0.75 + 0.2 * r.uniform(), 0.08, 0.10)
                   : hue < 0.7 ? Eigen::Vector3d(0.10, 0.15, 0.70 + 0.2 * r.uniform())
                               : Eigen::Vector3d(0.85, 0.85, 0.88);
    }
    box.yaw = r.uniform(0.0, 2.0 * kPi);
    double circle = 0.5 * std::hypot(box.size.x(), box.size.y());
    bool placed = false;
    for (int attempt = 0; attempt < 64 && !placed; ++attempt) {
      double rad = r.uniform(knobs.place_min_r, knobs.place_max_r);
      double az = r.uniform(0.0, 2.0 * kPi);
      Eigen::Vector2d c(rad * std::cos(az), rad * std::sin(az));
      bool clear = rad - circle > knobs.place_min_r * 0.5;
      for (size_t j = 0; j < centers.size() && clear; ++j)
        clear = (centers[j] - c).norm() > radii[j] + circle + 0.25;
      if (!clear) continue;
      box.center = {c.x(), c.y(), scene.ground_z + 0.5 * box.size.z()};
      centers.push_back(c);
      radii.push_back(circle);
      placed = true;
    }
    if (placed) scene.boxes.push_back(box);
  }

  int n_walls = knobs.min_walls + int(r.index(u64(knobs.max_walls - knobs.min_walls + 1)));
  for (int i = 0; i < n_walls; ++i) {
    Wall wall;
    double rad = r.uniform(0.75 * knobs.place_max_r, 1.4 * knobs.place_max_r);
    double az = r.uniform(0.0, 2.0 * kPi);
    wall.base = {rad * std::cos(az), rad * std::sin(az), scene.ground_z};
    wall.yaw = az + kPi / 2.0 + r.uniform(-0.3, 0.3);  // roughly tangent
    wall.width = r.uniform(8.0, 24.0);
    wall.height = r.uniform(2.0, 4.0);
    double tone = 0.45 + 0.2 * r.uniform();
    wall.albedo = {tone * 1.1, tone * 0.85, tone * 0.7};
    scene.walls.push_back(wall);
  }
  return scene;
}

}  // namespace veila::synth
