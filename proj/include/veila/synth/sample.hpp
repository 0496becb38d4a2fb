#pragma once

#include "veila/synth/weather.hpp"

namespace veila::synth {

// One calibrated training tuple: LiDAR cloud + range image (consistent by
// construction), the conditioning views, and per-view ground-truth semantic
// and depth maps.
struct PairedSample {
  u64 id = 0;
  SceneSpec scene;
  PointCloud cloud;
  RangeImage range;
  std::vector<CameraView> views;
  std::vector<Tensor<i32>> sem_maps;
  std::vector<Tensor<float>> depth_maps;
  Weather weather = Weather::kClean;
};

struct CameraConfig {
  int height = 96;
  int width = 160;
  std::vector<CamCalib> rig;
};

inline CamCalib default_front_camera() {
  CamCalib c;
  c.name = "front";
  c.K.setZero();
  c.K(0, 0) = 128.0;
  c.K(1, 1) = 128.0;
  c.K(0, 2) = 80.0;
  c.K(1, 2) = 48.0;
  c.K(2, 2) = 1.0;
  // x_cam = -y_lidar, y_cam = -z_lidar, z_cam = x_lidar, small baseline
  c.T.setZero();
  c.T(0, 1) = -1.0;
  c.T(1, 2) = -1.0;
  c.T(2, 0) = 1.0;
  c.T(3, 3) = 1.0;
  c.T(0, 3) = 0.02;
  c.T(1, 3) = 0.08;
  c.T(2, 3) = -0.12;
  return c;
}

inline PairedSample make_paired_sample(const SceneSpec& scene, const SensorSpec& sensor,
                                       const CameraConfig& cams, Weather weather,
                                       const WeatherParams& wp, u64 sample_seed) {
  PairedSample s;
  s.scene = scene;
  s.weather = weather;
  auto [cloud, range] = raycast_lidar(scene, sensor);
  if (weather == Weather::kFog || weather == Weather::kSnow) {
    range = corrupt_lidar(range, weather, wp, sample_seed);
    cloud = unproject(range);
  }
  s.cloud = std::move(cloud);
  s.range = std::move(range);
  for (const CamCalib& calib : cams.rig) {
    RenderedView rv = rasterize_view(scene, calib, cams.height, cams.width, weather);
    s.views.push_back(std::move(rv.view));
    s.sem_maps.push_back(std::move(rv.sem_map));
    s.depth_maps.push_back(std::move(rv.depth_map));
  }
  return s;
}

}  // namespace veila::synth
