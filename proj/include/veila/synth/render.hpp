#pragma once

#include <limits>

#include "veila/core/hash.hpp"
#include "veila/core/tensor.hpp"
#include "veila/synth/scene.hpp"

namespace veila::synth {

enum class Weather { kClean, kNight, kFog, kSnow };

inline const char* weather_name(Weather w) {
  switch (w) {
    case Weather::kClean: return "clean";
    case Weather::kNight: return "night";
    case Weather::kFog: return "fog";
    case Weather::kSnow: return "snow";
  }
  return "clean";
}

inline Weather weather_from_name(const std::string& s) {
  if (s == "clean") return Weather::kClean;
  if (s == "night") return Weather::kNight;
  if (s == "fog") return Weather::kFog;
  if (s == "snow") return Weather::kSnow;
  VEILA_CHECK(false, "unknown weather: " + s);
  return Weather::kClean;
}

struct Hit {
  double t = std::numeric_limits<double>::infinity();
  int cls = kSky;
  Eigen::Vector3d albedo{0, 0, 0};
  Eigen::Vector3d normal{0, 0, 1};
  bool valid() const { return std::isfinite(t); }
};

namespace detail {

inline void consider_ground(const SceneSpec& scene, const Eigen::Vector3d& o,
                            const Eigen::Vector3d& dir, Hit& best) {
  if (dir.z() == 0.0) return;
  double t = (scene.ground_z - o.z()) / dir.z();
  if (t > 0.0 && t < best.t) {
    best = {t, kGround, scene.ground_albedo, {0, 0, 1}};
  }
}

// Slab test in the box frame (yaw about z only).
inline void consider_box(const Box& box, const Eigen::Vector3d& o,
                         const Eigen::Vector3d& dir, Hit& best) {
  const double c = std::cos(box.yaw), s = std::sin(box.yaw);
  auto to_local = [&](const Eigen::Vector3d& p) {
    Eigen::Vector3d q = p - box.center;
    return Eigen::Vector3d(c * q.x() + s * q.y(), -s * q.x() + c * q.y(), q.z());
  };
  Eigen::Vector3d ol = to_local(o);
  Eigen::Vector3d dl(c * dir.x() + s * dir.y(), -s * dir.x() + c * dir.y(), dir.z());
  double t0 = 0.0, t1 = std::numeric_limits<double>::infinity();
  int axis0 = -1;
  for (int a = 0; a < 3; ++a) {
    double half = 0.5 * box.size[a];
    if (dl[a] == 0.0) {
      if (std::abs(ol[a]) > half) return;
      continue;
    }
    double ta = (-half - ol[a]) / dl[a];
    double tb = (half - ol[a]) / dl[a];
    if (ta > tb) std::swap(ta, tb);
    if (ta > t0) {
      t0 = ta;
      axis0 = a;
    }
    t1 = std::min(t1, tb);
    if (t0 > t1) return;
  }
  if (axis0 < 0 || t0 <= 0.0 || t0 >= best.t) return;
  Eigen::Vector3d nl = Eigen::Vector3d::Zero();
  nl[axis0] = (ol[axis0] + t0 * dl[axis0]) > 0 ? 1.0 : -1.0;
  Eigen::Vector3d nw(c * nl.x() - s * nl.y(), s * nl.x() + c * nl.y(), nl.z());
  best = {t0, box.cls, box.albedo, nw};
}

inline void consider_wall(const Wall& wall, const Eigen::Vector3d& o,
                          const Eigen::Vector3d& dir, Hit& best) {
  Eigen::Vector3d along(std::cos(wall.yaw), std::sin(wall.yaw), 0);
  Eigen::Vector3d n(-std::sin(wall.yaw), std::cos(wall.yaw), 0);
  double denom = n.dot(dir);
  if (denom == 0.0) return;
  double t = n.dot(wall.base - o) / denom;
  if (t <= 0.0 || t >= best.t) return;
  Eigen::Vector3d p = o + t * dir;
  double s = along.dot(p - wall.base);
  double z = p.z() - wall.base.z();
  if (std::abs(s) > 0.5 * wall.width || z < 0.0 || z > wall.height) return;
  best = {t, kWall, wall.albedo, n};
}

}  // namespace detail

// Nearest surface along o + t*dir, t > 0. The raycaster and the rasterizer
// both go through this query, which is what keeps them geometrically
// consistent on shared surfaces.
inline Hit intersect_scene(const SceneSpec& scene, const Eigen::Vector3d& o,
                           const Eigen::Vector3d& dir) {
  Hit best;
  detail::consider_ground(scene, o, dir, best);
  for (const Box& b : scene.boxes) detail::consider_box(b, o, dir, best);
  for (const Wall& w : scene.walls) detail::consider_wall(w, o, dir, best);
  return best;
}

// One ray per range pixel from the LiDAR origin; first return within
// [d_min, d_max]; intensity = albedo luminance x cos(incidence); per-point
// class labels from the hit primitive. Cloud points sit exactly on pixel
// center rays, so project_points(cloud) reproduces the range image.
inline std::pair<PointCloud, RangeImage> raycast_lidar(const SceneSpec& scene,
                                                       const SensorSpec& sensor) {
  sensor.validate();
  RangeImage img(sensor);
  img.labels.assign(size_t(sensor.h) * size_t(sensor.w), -1);
  PointCloud cloud;
  const Eigen::Vector3d origin = Eigen::Vector3d::Zero();
  for (int v = 0; v < sensor.h; ++v)
    for (int u = 0; u < sensor.w; ++u) {
      Eigen::Vector3d dir = ray_direction(u, v, sensor);
      Hit hit = intersect_scene(scene, origin, dir);
      if (!hit.valid() || hit.t < sensor.d_min || hit.t > sensor.d_max) continue;
      double inten = std::clamp(luminance(hit.albedo) * std::abs(hit.normal.dot(dir)),
                                0.0, 1.0);
      img.d(v, u) = float(hit.t);
      img.inten(v, u) = float(inten);
      img.labels[size_t(img.idx(v, u))] = hit.cls;
      cloud.push(hit.t * dir, inten, hit.cls);
    }
  return {std::move(cloud), std::move(img)};
}

struct CamCalib {
  std::string name = "cam";
  Eigen::Matrix<double, 3, 4> K;
  Eigen::Matrix4d T;
};

struct RenderedView {
  CameraView view;
  Tensor<i32> sem_map;      // [H,W], kSky where no surface
  Tensor<float> depth_map;  // [H,W], camera-frame z of the nearest surface, 0 = none
};

// Per-pixel nearest-surface rendering of the same primitives through the
// pinhole (x+1/2, y+1/2) rays. Flat shading from albedo; sem/depth maps come
// from the same surface query and are ground truth. Night multiplies the
// image by 0.25 and adds sigma=0.02 Gaussian noise; no other weather touches
// appearance.
inline RenderedView rasterize_view(const SceneSpec& scene, const CamCalib& calib, int H,
                                   int W, Weather weather) {
  VEILA_CHECK(H > 0 && W > 0, "empty view");
  Eigen::Matrix3d K3 = calib.K.leftCols<3>();
  VEILA_CHECK(calib.K.col(3).norm() == 0.0, "rasterizer expects K with zero last column");
  Eigen::Matrix3d Kinv = K3.inverse();
  Eigen::Matrix3d R = calib.T.topLeftCorner<3, 3>();
  Eigen::Vector3d t = calib.T.topRightCorner<3, 1>();
  Eigen::Matrix3d Rinv = R.transpose();
  Eigen::Vector3d cam_center = -Rinv * t;  // camera origin in the LiDAR frame

  RenderedView out;
  out.view.K = calib.K;
  out.view.T = calib.T;
  out.view.name = calib.name;
  out.view.image = Tensor<float>::zeros({3, H, W});
  out.sem_map = Tensor<i32>::full({H, W}, kSky);
  out.depth_map = Tensor<float>::zeros({H, W});

  const Eigen::Vector3d light = Eigen::Vector3d(0.35, -0.25, 0.9).normalized();
  const Eigen::Vector3d sky(0.62, 0.72, 0.85);
  CounterRng noise(scene.seed, {0x7190e7u, fnv1a64(calib.name)});

  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      Eigen::Vector3d dir_cam = Kinv * Eigen::Vector3d(x + 0.5, y + 0.5, 1.0);
      Eigen::Vector3d dir = (Rinv * dir_cam).normalized();
      Hit hit = intersect_scene(scene, cam_center, dir);
      Eigen::Vector3d rgb = sky;
      if (hit.valid() && hit.t < 500.0) {
        double shade = 0.55 + 0.45 * std::max(0.0, hit.normal.dot(light));
        rgb = (hit.albedo * shade).cwiseMin(1.0).cwiseMax(0.0);
        Eigen::Vector3d p = cam_center + hit.t * dir;
        out.depth_map.at(y, x) = float((R * p + t).z());
        out.sem_map.at(y, x) = hit.cls;
      }
      if (weather == Weather::kNight) {
        for (int ch = 0; ch < 3; ++ch)
          rgb[ch] = std::clamp(0.25 * rgb[ch] + 0.02 * noise.normal(), 0.0, 1.0);
      }
      for (int ch = 0; ch < 3; ++ch) out.view.image.at(ch, y, x) = float(rgb[ch]);
    }
  return out;
}

}  // namespace veila::synth
