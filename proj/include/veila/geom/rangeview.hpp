#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "veila/core/common.hpp"
#include "veila/core/tensor.hpp"

namespace veila {

inline constexpr double kPi = std::numbers::pi;

// N LiDAR returns: 3D coordinates in the sensor frame, reflectance in [0,1],
// optional per-point semantic class ids (empty when absent).
struct PointCloud {
  std::vector<Eigen::Vector3d> points;
  std::vector<double> intensity;
  std::vector<int> labels;

  i64 size() const { return i64(points.size()); }
  bool has_labels() const { return !labels.empty(); }

  void push(const Eigen::Vector3d& p, double inten, int label = -1) {
    points.push_back(p);
    intensity.push_back(inten);
    if (label >= 0 || !labels.empty()) labels.resize(points.size(), -1);
    if (label >= 0) labels.back() = label;
  }
};

struct SensorSpec {
  int h = 32;
  int w = 256;
  double fov_up = 10.0 * kPi / 180.0;    // positive magnitude, radians
  double fov_down = 25.0 * kPi / 180.0;  // positive magnitude, radians
  double d_min = 1.5;
  double d_max = 40.0;

  double fov() const { return fov_up + fov_down; }

  void validate() const {
    VEILA_CHECK(h >= 2 && w >= 4, "sensor grid too small");
    VEILA_CHECK(fov() > 0.0, "empty vertical field of view");
    VEILA_CHECK(0.0 < d_min && d_min < d_max, "bad depth range");
  }

  // Sensor with the same angular extents at a 1/2^(level) grid.
  SensorSpec at_scale(int level) const {
    SensorSpec s = *this;
    s.h = h >> level;
    s.w = w >> level;
    return s;
  }

  bool operator==(const SensorSpec& o) const {
    return h == o.h && w == o.w && fov_up == o.fov_up && fov_down == o.fov_down &&
           d_min == o.d_min && d_max == o.d_max;
  }
};

// Panoramic (depth, intensity) grid. depth == 0 encodes no-return; columns 0
// and w-1 are azimuth neighbors. Pixels hold float32 (the KITTI convention);
// geometry runs in double, and f32 quantization is what makes the
// project/unproject round trip bit-exact.
struct RangeImage {
  SensorSpec sensor;
  std::vector<float> depth;      // h*w, row-major
  std::vector<float> intensity;  // h*w
  std::vector<int> labels;       // h*w, -1 where empty; optional

  RangeImage() = default;
  explicit RangeImage(const SensorSpec& s)
      : sensor(s),
        depth(size_t(s.h) * size_t(s.w), 0.0f),
        intensity(size_t(s.h) * size_t(s.w), 0.0f) {}

  i64 idx(int v, int u) const { return i64(v) * sensor.w + u; }
  float& d(int v, int u) { return depth[size_t(idx(v, u))]; }
  float d(int v, int u) const { return depth[size_t(idx(v, u))]; }
  float& inten(int v, int u) { return intensity[size_t(idx(v, u))]; }
  float inten(int v, int u) const { return intensity[size_t(idx(v, u))]; }

  i64 valid_count() const {
    i64 n = 0;
    for (float x : depth) n += (x > 0.0f);
    return n;
  }
};

// RGB conditioning view: planar [3,H,W] image in [0,1], 3x4 intrinsics K and
// 4x4 LiDAR->camera extrinsics T.
struct CameraView {
  Tensor<float> image;  // [3,H,W]
  Eigen::Matrix<double, 3, 4> K;
  Eigen::Matrix4d T;
  std::string name = "cam";

  int height() const { return int(image.dim(1)); }
  int width() const { return int(image.dim(2)); }

  void validate() const {
    VEILA_CHECK(image.ndim() == 3 && image.dim(0) == 3, "image must be [3,H,W]");
    VEILA_CHECK(K(0, 0) > 0 && K(1, 1) > 0, "K needs positive focal entries");
    VEILA_CHECK((T.row(3) - Eigen::RowVector4d(0, 0, 0, 1)).norm() == 0.0,
                "T bottom row must be (0,0,0,1)");
    VEILA_CHECK(std::abs(T.topLeftCorner<3, 3>().determinant()) > 1e-12,
                "singular extrinsic rotation");
  }
};

// Spherical projection of one point to continuous range-image coordinates.
// u: azimuth (column), v: inclination (row). Callers floor-clamp to indices.
inline void spherical_uv(const Eigen::Vector3d& p, const SensorSpec& s, double& u,
                         double& v, double& d) {
  d = p.norm();
  const double azimuth = std::atan2(p.y(), p.x());
  const double incl = std::asin(p.z() / d);
  u = 0.5 * (1.0 - azimuth / kPi) * s.w;
  v = (1.0 - (incl + s.fov_down) / s.fov()) * s.h;
}

inline bool in_fov(const Eigen::Vector3d& p, const SensorSpec& s, double d) {
  // range check at f32 granularity so quantized depths at the limits survive
  if (float(d) < float(s.d_min) || float(d) > float(s.d_max)) return false;
  const double incl = std::asin(p.z() / d);
  return incl >= -s.fov_down && incl <= s.fov_up;
}

// Nearest return wins when several points land in one pixel; out-of-FOV and
// out-of-range points are dropped. Rejects non-finite coordinates.
inline RangeImage project_points(const PointCloud& cloud, const SensorSpec& sensor) {
  sensor.validate();
  RangeImage img(sensor);
  const bool with_labels = cloud.has_labels();
  if (with_labels) img.labels.assign(size_t(sensor.h) * size_t(sensor.w), -1);
  for (i64 i = 0; i < cloud.size(); ++i) {
    const Eigen::Vector3d& p = cloud.points[size_t(i)];
    VEILA_CHECK(p.allFinite(), "non-finite point coordinate");
    double u, v, d;
    spherical_uv(p, sensor, u, v, d);
    if (!(d > 0.0) || !in_fov(p, sensor, d)) continue;
    int ui = std::clamp(int(std::floor(u)), 0, sensor.w - 1);
    int vi = std::clamp(int(std::floor(v)), 0, sensor.h - 1);
    float& cell = img.d(vi, ui);
    if (cell == 0.0f || d < double(cell)) {
      cell = float(d);
      img.inten(vi, ui) = float(cloud.intensity[size_t(i)]);
      if (with_labels) img.labels[size_t(img.idx(vi, ui))] = cloud.labels[size_t(i)];
    }
  }
  return img;
}

// Unit ray through the center of pixel (u, v): the algebraic inverse of the
// spherical projection at unit depth.
inline Eigen::Vector3d ray_direction(int u, int v, const SensorSpec& s) {
  VEILA_CHECK(u >= 0 && u < s.w && v >= 0 && v < s.h, "pixel out of bounds");
  const double azimuth = kPi * (1.0 - 2.0 * (u + 0.5) / s.w);
  const double incl = s.fov() * (1.0 - (v + 0.5) / s.h) - s.fov_down;
  const double c = std::cos(incl);
  return {c * std::cos(azimuth), c * std::sin(azimuth), std::sin(incl)};
}

// One point per nonzero pixel, along that pixel's center ray.
inline PointCloud unproject(const RangeImage& img) {
  PointCloud cloud;
  const bool with_labels = !img.labels.empty();
  for (int v = 0; v < img.sensor.h; ++v)
    for (int u = 0; u < img.sensor.w; ++u) {
      double d = img.d(v, u);
      if (d <= 0.0) continue;
      int label = with_labels ? img.labels[size_t(img.idx(v, u))] : -1;
      cloud.push(d * ray_direction(u, v, img.sensor), img.inten(v, u), label);
    }
  return cloud;
}

struct CamProjection {
  double u = 0;      // pixels
  double v = 0;      // pixels
  double z_cam = 0;  // camera-frame depth, meters
  bool valid = false;
};

// Pinhole projection of one LiDAR-frame point. The divisor is the
// camera-frame z after applying T, and validity requires z > 0 and the pixel
// inside [0,W)x[0,H).
inline CamProjection project_to_camera(const Eigen::Vector3d& p, const CameraView& view) {
  CamProjection out;
  Eigen::Vector4d pc = view.T * p.homogeneous();
  out.z_cam = pc.z();
  if (!(out.z_cam > 0.0)) return out;
  Eigen::Vector3d uvw = view.K * pc;
  out.u = uvw.x() / out.z_cam;
  out.v = uvw.y() / out.z_cam;
  out.valid = out.u >= 0.0 && out.u < double(view.width()) && out.v >= 0.0 &&
              out.v < double(view.height());
  return out;
}

inline std::vector<CamProjection> lidar_to_camera(const PointCloud& cloud,
                                                  const CameraView& view) {
  view.validate();
  std::vector<CamProjection> out(size_t(cloud.size()));
  for (i64 i = 0; i < cloud.size(); ++i)
    out[size_t(i)] = project_to_camera(cloud.points[size_t(i)], view);
  return out;
}

}  // namespace veila
