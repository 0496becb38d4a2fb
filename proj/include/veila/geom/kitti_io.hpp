#pragma once

#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "veila/geom/rangeview.hpp"

namespace veila {

// KITTI-style cloud files: little-endian float32 (x, y, z, intensity)
// records, no header.
inline void write_kitti_bin(const std::string& path, const PointCloud& cloud) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  VEILA_CHECK(f.good(), "cannot write " + path);
  for (i64 i = 0; i < cloud.size(); ++i) {
    float rec[4] = {float(cloud.points[size_t(i)].x()), float(cloud.points[size_t(i)].y()),
                    float(cloud.points[size_t(i)].z()), float(cloud.intensity[size_t(i)])};
    f.write(reinterpret_cast<const char*>(rec), 16);
  }
  VEILA_CHECK(f.good(), "short write: " + path);
}

inline PointCloud read_kitti_bin(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  VEILA_CHECK(f.good(), "cannot open " + path);
  f.seekg(0, std::ios::end);
  auto bytes = f.tellg();
  f.seekg(0);
  VEILA_CHECK(bytes % 16 == 0, "truncated record in " + path);
  PointCloud cloud;
  for (std::streamoff i = 0; i < bytes / 16; ++i) {
    float rec[4];
    f.read(reinterpret_cast<char*>(rec), 16);
    cloud.push({double(rec[0]), double(rec[1]), double(rec[2])}, double(rec[3]));
  }
  return cloud;
}

// KITTI calib text: lines of "KEY: f0 f1 ...".
inline std::map<std::string, std::vector<double>> read_kitti_calib(const std::string& path) {
  std::ifstream f(path);
  VEILA_CHECK(f.good(), "cannot open " + path);
  std::map<std::string, std::vector<double>> out;
  std::string line;
  while (std::getline(f, line)) {
    auto colon = line.find(':');
    if (colon == std::string::npos) continue;
    std::string key = line.substr(0, colon);
    std::istringstream rest(line.substr(colon + 1));
    std::vector<double> vals;
    double x;
    while (rest >> x) vals.push_back(x);
    if (!vals.empty()) out[key] = vals;
  }
  return out;
}

inline Eigen::Matrix<double, 3, 4> calib_K(const std::vector<double>& v) {
  VEILA_CHECK(v.size() == 12, "K wants 12 values");
  Eigen::Matrix<double, 3, 4> K;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 4; ++c) K(r, c) = v[size_t(r * 4 + c)];
  return K;
}

// Accepts 12 values (3x4, bottom row implied) or 16 (full 4x4).
inline Eigen::Matrix4d calib_T(const std::vector<double>& v) {
  VEILA_CHECK(v.size() == 12 || v.size() == 16, "T wants 12 or 16 values");
  Eigen::Matrix4d T = Eigen::Matrix4d::Identity();
  for (int r = 0; r < (v.size() == 12 ? 3 : 4); ++r)
    for (int c = 0; c < 4; ++c) T(r, c) = v[size_t(r * 4 + c)];
  return T;
}

}  // namespace veila
