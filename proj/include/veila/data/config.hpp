#pragma once

#include <nlohmann/json.hpp>
#include <sstream>

#include "veila/model/unet.hpp"
#include "veila/synth/sample.hpp"

namespace veila {

using nlohmann::json;

// Matrices travel as KITTI-style whitespace-separated floats wherever they
// appear in configs and manifests (12 values for K, 16 for T).
inline std::string floats_to_string(const double* v, int n) {
  std::ostringstream os;
  os.precision(17);
  for (int i = 0; i < n; ++i) os << (i ? " " : "") << v[i];
  return os.str();
}

inline std::vector<double> string_to_floats(const std::string& s) {
  std::istringstream is(s);
  std::vector<double> out;
  double x;
  while (is >> x) out.push_back(x);
  return out;
}

inline void to_json(json& j, const SensorSpec& s) {
  j = json{{"h", s.h},         {"w", s.w},         {"fov_up", s.fov_up},
           {"fov_down", s.fov_down}, {"d_min", s.d_min}, {"d_max", s.d_max}};
}
inline void from_json(const json& j, SensorSpec& s) {
  j.at("h").get_to(s.h);
  j.at("w").get_to(s.w);
  j.at("fov_up").get_to(s.fov_up);
  j.at("fov_down").get_to(s.fov_down);
  j.at("d_min").get_to(s.d_min);
  j.at("d_max").get_to(s.d_max);
}

namespace synth {

inline void to_json(json& j, const CamCalib& c) {
  Eigen::Matrix<double, 3, 4, Eigen::RowMajor> K = c.K;
  Eigen::Matrix<double, 4, 4, Eigen::RowMajor> T = c.T;
  j = json{{"name", c.name},
           {"K", floats_to_string(K.data(), 12)},
           {"T", floats_to_string(T.data(), 16)}};
}
inline void from_json(const json& j, CamCalib& c) {
  c.name = j.at("name").get<std::string>();
  auto k = string_to_floats(j.at("K").get<std::string>());
  auto t = string_to_floats(j.at("T").get<std::string>());
  VEILA_CHECK(k.size() == 12 && t.size() == 16, "calibration wants 12 + 16 floats");
  for (int r = 0; r < 3; ++r)
    for (int col = 0; col < 4; ++col) c.K(r, col) = k[size_t(r * 4 + col)];
  for (int r = 0; r < 4; ++r)
    for (int col = 0; col < 4; ++col) c.T(r, col) = t[size_t(r * 4 + col)];
}

inline void to_json(json& j, const SceneKnobs& k) {
  j = json{{"min_boxes", k.min_boxes}, {"max_boxes", k.max_boxes},
           {"min_walls", k.min_walls}, {"max_walls", k.max_walls},
           {"place_min_r", k.place_min_r}, {"place_max_r", k.place_max_r},
           {"sensor_height", k.sensor_height}, {"clutter_fraction", k.clutter_fraction}};
}
inline void from_json(const json& j, SceneKnobs& k) {
  j.at("min_boxes").get_to(k.min_boxes);
  j.at("max_boxes").get_to(k.max_boxes);
  j.at("min_walls").get_to(k.min_walls);
  j.at("max_walls").get_to(k.max_walls);
  j.at("place_min_r").get_to(k.place_min_r);
  j.at("place_max_r").get_to(k.place_max_r);
  j.at("sensor_height").get_to(k.sensor_height);
  j.at("clutter_fraction").get_to(k.clutter_fraction);
}

inline void to_json(json& j, const WeatherParams& w) {
  j = json{{"fog_beta", w.fog_beta},
           {"fog_scatter_frac", w.fog_scatter_frac},
           {"fog_scatter_max", w.fog_scatter_max},
           {"snow_rate", w.snow_rate},
           {"snow_max", w.snow_max}};
}
inline void from_json(const json& j, WeatherParams& w) {
  j.at("fog_beta").get_to(w.fog_beta);
  j.at("fog_scatter_frac").get_to(w.fog_scatter_frac);
  j.at("fog_scatter_max").get_to(w.fog_scatter_max);
  j.at("snow_rate").get_to(w.snow_rate);
  j.at("snow_max").get_to(w.snow_max);
}

inline void to_json(json& j, const Box& b) {
  j = json{{"center", {b.center.x(), b.center.y(), b.center.z()}},
           {"size", {b.size.x(), b.size.y(), b.size.z()}},
           {"yaw", b.yaw},
           {"cls", b.cls},
           {"albedo", {b.albedo.x(), b.albedo.y(), b.albedo.z()}}};
}
inline void from_json(const json& j, Box& b) {
  auto c = j.at("center"), s = j.at("size"), a = j.at("albedo");
  b.center = {c[0].get<double>(), c[1].get<double>(), c[2].get<double>()};
  b.size = {s[0].get<double>(), s[1].get<double>(), s[2].get<double>()};
  b.albedo = {a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
  j.at("yaw").get_to(b.yaw);
  j.at("cls").get_to(b.cls);
}

inline void to_json(json& j, const Wall& w) {
  j = json{{"base", {w.base.x(), w.base.y(), w.base.z()}},
           {"yaw", w.yaw},
           {"width", w.width},
           {"height", w.height},
           {"albedo", {w.albedo.x(), w.albedo.y(), w.albedo.z()}}};
}
inline void from_json(const json& j, Wall& w) {
  auto b = j.at("base"), a = j.at("albedo");
  w.base = {b[0].get<double>(), b[1].get<double>(), b[2].get<double>()};
  w.albedo = {a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
  j.at("yaw").get_to(w.yaw);
  j.at("width").get_to(w.width);
  j.at("height").get_to(w.height);
}

inline void to_json(json& j, const SceneSpec& s) {
  j = json{{"seed", s.seed},
           {"ground_z", s.ground_z},
           {"sensor_height", s.sensor_height},
           {"ground_albedo", {s.ground_albedo.x(), s.ground_albedo.y(), s.ground_albedo.z()}},
           {"boxes", s.boxes},
           {"walls", s.walls}};
}
inline void from_json(const json& j, SceneSpec& s) {
  j.at("seed").get_to(s.seed);
  j.at("ground_z").get_to(s.ground_z);
  j.at("sensor_height").get_to(s.sensor_height);
  auto a = j.at("ground_albedo");
  s.ground_albedo = {a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
  s.boxes = j.at("boxes").get<std::vector<Box>>();
  s.walls = j.at("walls").get<std::vector<Wall>>();
}

}  // namespace synth

namespace model {

inline void to_json(json& j, const EncoderConfig& e) {
  j = json{{"widths", e.widths}, {"seed", e.seed}};
}
inline void from_json(const json& j, EncoderConfig& e) {
  j.at("widths").get_to(e.widths);
  j.at("seed").get_to(e.seed);
}

inline void to_json(json& j, const CacmConfig& c) {
  j = json{{"shared_widths", c.shared_widths}, {"delta", c.delta}};
}
inline void from_json(const json& j, CacmConfig& c) {
  j.at("shared_widths").get_to(c.shared_widths);
  j.at("delta").get_to(c.delta);
}

inline void to_json(json& j, const AlignmentParams& a) {
  j = json{{"tau", a.tau},
           {"k_samples", a.k_samples},
           {"fourier_bands", a.fourier_bands},
           {"heads", a.heads},
           {"head_dim", a.head_dim}};
}
inline void from_json(const json& j, AlignmentParams& a) {
  j.at("tau").get_to(a.tau);
  j.at("k_samples").get_to(a.k_samples);
  j.at("fourier_bands").get_to(a.fourier_bands);
  j.at("heads").get_to(a.heads);
  j.at("head_dim").get_to(a.head_dim);
}

inline void to_json(json& j, const DenoiserConfig& d) {
  j = json{{"base_width", d.base_width}, {"mult", d.mult},
           {"pfc_heads", d.pfc_heads},   {"pfc", d.pfc},
           {"gcma_scales", d.gcma_scales}, {"time_dim", d.time_dim},
           {"groups", d.groups}};
}
inline void from_json(const json& j, DenoiserConfig& d) {
  j.at("base_width").get_to(d.base_width);
  j.at("mult").get_to(d.mult);
  j.at("pfc_heads").get_to(d.pfc_heads);
  j.at("pfc").get_to(d.pfc);
  j.at("gcma_scales").get_to(d.gcma_scales);
  j.at("time_dim").get_to(d.time_dim);
  j.at("groups").get_to(d.groups);
}

}  // namespace model

namespace data {

struct ScheduleConfig {
  int steps = 1000;
  double beta_min = 1e-4;
  double beta_max = 0.02;

  model::DiffusionSchedule build() const {
    return model::DiffusionSchedule::linear(steps, beta_min, beta_max);
  }
};
inline void to_json(json& j, const ScheduleConfig& s) {
  j = json{{"steps", s.steps}, {"beta_min", s.beta_min}, {"beta_max", s.beta_max}};
}
inline void from_json(const json& j, ScheduleConfig& s) {
  j.at("steps").get_to(s.steps);
  j.at("beta_min").get_to(s.beta_min);
  j.at("beta_max").get_to(s.beta_max);
}

struct TrainConfig {
  i64 steps = 20000;
  int batch = 4;
  double lr = 3e-4;
  u64 seed = 1;
  i64 log_interval = 50;
  i64 ckpt_interval = 5000;
  std::string precision = "f32";
};
inline void to_json(json& j, const TrainConfig& t) {
  j = json{{"steps", t.steps},
           {"batch", t.batch},
           {"lr", t.lr},
           {"seed", t.seed},
           {"log_interval", t.log_interval},
           {"ckpt_interval", t.ckpt_interval},
           {"precision", t.precision}};
}
inline void from_json(const json& j, TrainConfig& t) {
  j.at("steps").get_to(t.steps);
  j.at("batch").get_to(t.batch);
  j.at("lr").get_to(t.lr);
  j.at("seed").get_to(t.seed);
  j.at("log_interval").get_to(t.log_interval);
  j.at("ckpt_interval").get_to(t.ckpt_interval);
  j.at("precision").get_to(t.precision);
}

struct SampleConfig {
  int steps = 100;  // ancestral steps (strided subsequence of the schedule)
  u64 seed = 7;
};
inline void to_json(json& j, const SampleConfig& s) {
  j = json{{"steps", s.steps}, {"seed", s.seed}};
}
inline void from_json(const json& j, SampleConfig& s) {
  j.at("steps").get_to(s.steps);
  j.at("seed").get_to(s.seed);
}

struct MetricsConfig {
  int bev_bins = 50;
  double bev_extent = 40.0;  // scaled-down KITTI convention (100 bins / 80 m)
  double mmd_bandwidth = 0.0;  // <= 0 selects the median heuristic
  int cm_sc_erosion = 1;       // exclude points landing on semantic boundary pixels
  std::string cm_dc_align = "median";  // none | median | lsq
  double label_max_dist = 0.5;         // oracle labeling radius, meters
  u64 extractor_seed = 33;
};
inline void to_json(json& j, const MetricsConfig& m) {
  j = json{{"bev_bins", m.bev_bins},
           {"bev_extent", m.bev_extent},
           {"mmd_bandwidth", m.mmd_bandwidth},
           {"cm_sc_erosion", m.cm_sc_erosion},
           {"cm_dc_align", m.cm_dc_align},
           {"label_max_dist", m.label_max_dist},
           {"extractor_seed", m.extractor_seed}};
}
inline void from_json(const json& j, MetricsConfig& m) {
  j.at("bev_bins").get_to(m.bev_bins);
  j.at("bev_extent").get_to(m.bev_extent);
  j.at("mmd_bandwidth").get_to(m.mmd_bandwidth);
  j.at("cm_sc_erosion").get_to(m.cm_sc_erosion);
  j.at("cm_dc_align").get_to(m.cm_dc_align);
  j.at("label_max_dist").get_to(m.label_max_dist);
  j.at("extractor_seed").get_to(m.extractor_seed);
}

struct DatasetConfig {
  i64 n_samples = 200;
  u64 seed = 42;
  std::map<std::string, double> weather_mix{{"clean", 1.0}};
};
inline void to_json(json& j, const DatasetConfig& d) {
  j = json{{"n_samples", d.n_samples}, {"seed", d.seed}, {"weather_mix", d.weather_mix}};
}
inline void from_json(const json& j, DatasetConfig& d) {
  j.at("n_samples").get_to(d.n_samples);
  j.at("seed").get_to(d.seed);
  d.weather_mix = j.at("weather_mix").get<std::map<std::string, double>>();
}

struct CameraRigConfig {
  int height = 96;
  int width = 160;
  std::vector<synth::CamCalib> rig{synth::default_front_camera()};
};
inline void to_json(json& j, const CameraRigConfig& c) {
  j = json{{"height", c.height}, {"width", c.width}, {"rig", c.rig}};
}
inline void from_json(const json& j, CameraRigConfig& c) {
  j.at("height").get_to(c.height);
  j.at("width").get_to(c.width);
  c.rig = j.at("rig").get<std::vector<synth::CamCalib>>();
}

// The one config that reproduces a whole run. Serialization is canonical
// (sorted keys, shortest round-trip floats), so the content hash is stable
// and round trips are bit-exact.
struct RunConfig {
  SensorSpec sensor;
  CameraRigConfig camera;
  synth::SceneKnobs scene;
  synth::WeatherParams weather;
  DatasetConfig dataset;
  model::EncoderConfig encoder_sem{{32, 64, 96, 128}, 101};
  model::EncoderConfig encoder_dep{{16, 32, 64, 96}, 202};
  model::CacmConfig cacm;
  model::AlignmentParams align;
  model::DenoiserConfig denoiser;
  ScheduleConfig schedule;
  TrainConfig train;
  SampleConfig sample;
  MetricsConfig metrics;
};
inline void to_json(json& j, const RunConfig& r) {
  j = json{{"sensor", r.sensor},          {"camera", r.camera},
           {"scene", r.scene},            {"weather", r.weather},
           {"dataset", r.dataset},        {"encoder_sem", r.encoder_sem},
           {"encoder_dep", r.encoder_dep}, {"cacm", r.cacm},
           {"align", r.align},            {"denoiser", r.denoiser},
           {"schedule", r.schedule},      {"train", r.train},
           {"sample", r.sample},          {"metrics", r.metrics}};
}
inline void from_json(const json& j, RunConfig& r) {
  j.at("sensor").get_to(r.sensor);
  j.at("camera").get_to(r.camera);
  j.at("scene").get_to(r.scene);
  j.at("weather").get_to(r.weather);
  j.at("dataset").get_to(r.dataset);
  j.at("encoder_sem").get_to(r.encoder_sem);
  j.at("encoder_dep").get_to(r.encoder_dep);
  j.at("cacm").get_to(r.cacm);
  j.at("align").get_to(r.align);
  j.at("denoiser").get_to(r.denoiser);
  j.at("schedule").get_to(r.schedule);
  j.at("train").get_to(r.train);
  j.at("sample").get_to(r.sample);
  j.at("metrics").get_to(r.metrics);
}

inline std::string canonical_dump(const json& j) { return j.dump(2); }

inline u64 config_hash(const RunConfig& cfg) {
  json j = cfg;
  return fnv1a64(canonical_dump(j));
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream f(path);
  VEILA_CHECK(f.good(), "cannot open config " + path);
  json j = json::parse(f);
  return j.get<RunConfig>();
}

inline void save_run_config(const std::string& path, const RunConfig& cfg) {
  std::ofstream f(path, std::ios::trunc);
  VEILA_CHECK(f.good(), "cannot write " + path);
  json j = cfg;
  f << canonical_dump(j) << "\n";
}

}  // namespace data
}  // namespace veila
