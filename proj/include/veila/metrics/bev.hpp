#pragma once

#include "veila/core/tensor.hpp"
#include "veila/geom/rangeview.hpp"

namespace veila::metrics {

// Bird's-eye-view occupancy histogram over (x, y) in [-extent, extent]^2,
// normalized to unit mass. An empty (or fully out-of-extent) cloud yields the
// all-zero grid with the `empty` flag set.
struct BEVHistogram {
  int bins = 0;
  double extent = 0;
  Tensor<double> grid;  // [bins, bins]
  bool empty = true;

  double mass() const {
    double m = 0;
    for (i64 i = 0; i < grid.numel(); ++i) m += grid[i];
    return m;
  }
};

inline BEVHistogram bev_histogram(const PointCloud& cloud, int bins, double extent) {
  VEILA_CHECK(bins >= 1, "bev needs at least one bin");
  VEILA_CHECK(extent > 0, "bev extent must be positive");
  BEVHistogram h;
  h.bins = bins;
  h.extent = extent;
  h.grid = Tensor<double>::zeros({bins, bins});
  i64 kept = 0;
  for (i64 i = 0; i < cloud.size(); ++i) {
    const double x = cloud.points[size_t(i)].x();
    const double y = cloud.points[size_t(i)].y();
    if (x < -extent || x >= extent || y < -extent || y >= extent) continue;
    int bx = int((x + extent) / (2 * extent) * bins);
    int by = int((y + extent) / (2 * extent) * bins);
    bx = std::clamp(bx, 0, bins - 1);
    by = std::clamp(by, 0, bins - 1);
    h.grid.at(bx, by) += 1.0;
    ++kept;
  }
  if (kept > 0) {
    h.empty = false;
    for (i64 i = 0; i < h.grid.numel(); ++i) h.grid[i] /= double(kept);
  }
  return h;
}

// Front/rear split at p_x = 0: front is strictly positive x, boundary points
// go to the rear.
inline std::pair<PointCloud, PointCloud> region_partition(const PointCloud& cloud) {
  PointCloud front, rear;
  const bool labeled = cloud.has_labels();
  for (i64 i = 0; i < cloud.size(); ++i) {
    int label = labeled ? cloud.labels[size_t(i)] : -1;
    if (cloud.points[size_t(i)].x() > 0.0)
      front.push(cloud.points[size_t(i)], cloud.intensity[size_t(i)], label);
    else
      rear.push(cloud.points[size_t(i)], cloud.intensity[size_t(i)], label);
  }
  return {std::move(front), std::move(rear)};
}

}  // namespace veila::metrics
