#pragma once

#include <filesystem>

#include "veila/data/config.hpp"
#include "veila/geom/kitti_io.hpp"

namespace veila::data {

namespace fs = std::filesystem;

struct FileEntry {
  std::string path;  // relative to the manifest directory
  std::string hash;  // fnv1a64 hex of the file bytes
};
inline void to_json(json& j, const FileEntry& f) {
  j = json{{"path", f.path}, {"hash", f.hash}};
}
inline void from_json(const json& j, FileEntry& f) {
  j.at("path").get_to(f.path);
  j.at("hash").get_to(f.hash);
}

struct SampleEntry {
  std::string id;
  u64 seed = 0;
  std::string weather = "clean";
  std::map<std::string, FileEntry> files;  // cloud, range, scene, <view>.image/.sem/.depth
};
inline void to_json(json& j, const SampleEntry& s) {
  j = json{{"id", s.id}, {"seed", s.seed}, {"weather", s.weather}, {"files", s.files}};
}
inline void from_json(const json& j, SampleEntry& s) {
  j.at("id").get_to(s.id);
  j.at("seed").get_to(s.seed);
  j.at("weather").get_to(s.weather);
  s.files = j.at("files").get<std::map<std::string, FileEntry>>();
}

struct Manifest {
  std::string format = "veila-dataset-v1";
  json config;  // full RunConfig
  std::string config_hash;
  std::vector<SampleEntry> samples;
  std::string root;  // directory holding manifest.json (set on load)

  RunConfig run_config() const { return config.get<RunConfig>(); }
};
inline void to_json(json& j, const Manifest& m) {
  j = json{{"format", m.format},
           {"config", m.config},
           {"config_hash", m.config_hash},
           {"samples", m.samples}};
}
inline void from_json(const json& j, Manifest& m) {
  j.at("format").get_to(m.format);
  m.config = j.at("config");
  j.at("config_hash").get_to(m.config_hash);
  m.samples = j.at("samples").get<std::vector<SampleEntry>>();
}

inline Manifest load_manifest(const std::string& path) {
  std::ifstream f(path);
  VEILA_CHECK(f.good(), "cannot open manifest " + path);
  Manifest m = json::parse(f).get<Manifest>();
  m.root = fs::path(path).parent_path().string();
  return m;
}

inline void save_manifest(const std::string& dir, const Manifest& m) {
  std::ofstream f(fs::path(dir) / "manifest.json", std::ios::trunc);
  VEILA_CHECK(f.good(), "cannot write manifest in " + dir);
  f << canonical_dump(json(m)) << "\n";
}

inline synth::Weather draw_weather(const std::map<std::string, double>& mix, u64 seed,
                                   u64 index) {
  double total = 0;
  for (const auto& [name, w] : mix) {
    VEILA_CHECK(w >= 0, "negative weather weight");
    total += w;
  }
  VEILA_CHECK(total > 0, "weather mix sums to zero");
  CounterRng r(seed, {0x3ea77eull, index});
  double x = r.uniform() * total;
  for (const auto& [name, w] : mix) {
    if (x < w) return synth::weather_from_name(name);
    x -= w;
  }
  return synth::weather_from_name(mix.rbegin()->first);
}

// Emit the dataset directory: per-sample KITTI cloud, range tensor with
// embedded sensor metadata, per-view image/sem/depth tensors, the scene spec,
// and a manifest listing every file with its hash. Cleans up everything it
// created if generation fails partway.
inline Manifest generate_dataset(const RunConfig& cfg, i64 n_samples,
                                 const std::string& out_dir) {
  VEILA_CHECK(n_samples >= 0, "negative sample count");
  cfg.sensor.validate();
  const fs::path root(out_dir);
  VEILA_CHECK(!fs::exists(root) || fs::is_empty(root), out_dir + " exists and is not empty");
  const bool created = !fs::exists(root);
  Manifest manifest;
  try {
    fs::create_directories(root / "samples");
    manifest.config = cfg;
    manifest.config_hash = hash_hex(config_hash(cfg));
    json sensor_meta = json{{"sensor", cfg.sensor}};

    synth::CameraConfig cams{cfg.camera.height, cfg.camera.width, cfg.camera.rig};
    for (i64 i = 0; i < n_samples; ++i) {
      char id[16];
      std::snprintf(id, sizeof(id), "%06lld", static_cast<long long>(i));
      SampleEntry entry;
      entry.id = id;
      entry.seed = rng::mix(cfg.dataset.seed, u64(i));
      synth::Weather weather = draw_weather(cfg.dataset.weather_mix, cfg.dataset.seed, u64(i));
      entry.weather = synth::weather_name(weather);

      synth::SceneSpec scene = synth::sample_scene(entry.seed, cfg.scene);
      synth::PairedSample s =
          synth::make_paired_sample(scene, cfg.sensor, cams, weather, cfg.weather, entry.seed);

      const fs::path dir = root / "samples" / id;
      fs::create_directories(dir);
      auto add = [&](const std::string& key, const fs::path& p) {
        entry.files[key] = {fs::relative(p, root).string(), hash_hex(hash_file(p.string()))};
      };

      write_kitti_bin((dir / "cloud.bin").string(), s.cloud);
      add("cloud", dir / "cloud.bin");

      Tensor<float> range({2, cfg.sensor.h, cfg.sensor.w});
      std::copy(s.range.depth.begin(), s.range.depth.end(), range.begin());
      std::copy(s.range.intensity.begin(), s.range.intensity.end(),
                range.begin() + i64(s.range.depth.size()));
      write_tensor((dir / "range.vt").string(), range, sensor_meta);
      add("range", dir / "range.vt");

      Tensor<i32> labels({i64(s.range.labels.size())});
      std::copy(s.range.labels.begin(), s.range.labels.end(), labels.begin());
      write_tensor((dir / "range_labels.vt").string(), labels);
      add("range_labels", dir / "range_labels.vt");

      {
        std::ofstream sf(dir / "scene.json", std::ios::trunc);
        sf << canonical_dump(json(scene)) << "\n";
      }
      add("scene", dir / "scene.json");

      for (size_t vi = 0; vi < s.views.size(); ++vi) {
        const std::string& vn = s.views[vi].name;
        write_tensor((dir / (vn + ".image.vt")).string(), s.views[vi].image);
        add(vn + ".image", dir / (vn + ".image.vt"));
        write_tensor((dir / (vn + ".sem.vt")).string(), s.sem_maps[vi]);
        add(vn + ".sem", dir / (vn + ".sem.vt"));
        write_tensor((dir / (vn + ".depth.vt")).string(), s.depth_maps[vi]);
        add(vn + ".depth", dir / (vn + ".depth.vt"));
      }
      manifest.samples.push_back(std::move(entry));
    }
    save_manifest(out_dir, manifest);
  } catch (...) {
    std::error_code ec;
    if (created)
      fs::remove_all(root, ec);
    else
      for (const char* sub : {"samples", "manifest.json"}) fs::remove_all(root / sub, ec);
    throw;
  }
  manifest.root = out_dir;
  return manifest;
}

// Load one sample back from disk. Views carry their calibration from the
// manifest's rig config.
inline synth::PairedSample load_sample(const Manifest& m, const SampleEntry& entry) {
  RunConfig cfg = m.run_config();
  synth::PairedSample s;
  s.weather = synth::weather_from_name(entry.weather);
  const fs::path root(m.root);

  auto file = [&](const std::string& key) -> std::string {
    auto it = entry.files.find(key);
    VEILA_CHECK(it != entry.files.end(), "sample " + entry.id + " missing file " + key);
    return (root / it->second.path).string();
  };

  s.cloud = read_kitti_bin(file("cloud"));
  auto range = read_tensor<float>(file("range"));
  s.range = RangeImage(cfg.sensor);
  const i64 hw = i64(cfg.sensor.h) * cfg.sensor.w;
  std::copy(range.begin(), range.begin() + hw, s.range.depth.begin());
  std::copy(range.begin() + hw, range.begin() + 2 * hw, s.range.intensity.begin());
  if (entry.files.count("range_labels")) {
    auto labels = read_tensor<i32>(file("range_labels"));
    s.range.labels.assign(labels.begin(), labels.end());
    PointCloud labeled = unproject(s.range);
    if (labeled.size() == s.cloud.size()) s.cloud.labels = labeled.labels;
  }
  if (entry.files.count("scene")) {
    std::ifstream sf(file("scene"));
    s.scene = json::parse(sf).get<synth::SceneSpec>();
  }
  for (const auto& calib : cfg.camera.rig) {
    CameraView view;
    view.K = calib.K;
    view.T = calib.T;
    view.name = calib.name;
    view.image = read_tensor<float>(file(calib.name + ".image"));
    s.views.push_back(std::move(view));
    s.sem_maps.push_back(read_tensor<i32>(file(calib.name + ".sem")));
    s.depth_maps.push_back(read_tensor<float>(file(calib.name + ".depth")));
  }
  return s;
}

// Manifest for generated (sampled) outputs.
struct GeneratedEntry {
  std::string id;
  std::string condition_id;  // reference sample supplying the views
  std::map<std::string, FileEntry> files;
};
inline void to_json(json& j, const GeneratedEntry& g) {
  j = json{{"id", g.id}, {"condition_id", g.condition_id}, {"files", g.files}};
}
inline void from_json(const json& j, GeneratedEntry& g) {
  j.at("id").get_to(g.id);
  j.at("condition_id").get_to(g.condition_id);
  g.files = j.at("files").get<std::map<std::string, FileEntry>>();
}

struct GeneratedManifest {
  std::string format = "veila-generated-v1";
  std::string checkpoint_hash;
  std::string condition_source;  // reference manifest path
  u64 seed = 0;
  int steps = 0;
  json config;  // RunConfig used at sampling time
  std::vector<GeneratedEntry> samples;
  std::string root;
};
inline void to_json(json& j, const GeneratedManifest& m) {
  j = json{{"format", m.format},
           {"checkpoint_hash", m.checkpoint_hash},
           {"condition_source", m.condition_source},
           {"seed", m.seed},
           {"steps", m.steps},
           {"config", m.config},
           {"samples", m.samples}};
}
inline void from_json(const json& j, GeneratedManifest& m) {
  j.at("format").get_to(m.format);
  j.at("checkpoint_hash").get_to(m.checkpoint_hash);
  j.at("condition_source").get_to(m.condition_source);
  j.at("seed").get_to(m.seed);
  j.at("steps").get_to(m.steps);
  m.config = j.at("config");
  m.samples = j.at("samples").get<std::vector<GeneratedEntry>>();
}

inline GeneratedManifest load_generated_manifest(const std::string& path) {
  std::ifstream f(path);
  VEILA_CHECK(f.good(), "cannot open manifest " + path);
  GeneratedManifest m = json::parse(f).get<GeneratedManifest>();
  m.root = fs::path(path).parent_path().string();
  return m;
}

inline void save_generated_manifest(const std::string& dir, const GeneratedManifest& m) {
  std::ofstream f(fs::path(dir) / "manifest.json", std::ios::trunc);
  VEILA_CHECK(f.good(), "cannot write manifest in " + dir);
  f << canonical_dump(json(m)) << "\n";
}

}  // namespace veila::data
