#pragma once

#include "veila/data/config.hpp"
#include "veila/model/checkpoint.hpp"
#include "veila/model/unet.hpp"

namespace veila::model {

// Everything a forward pass needs, wired from one RunConfig: frozen encoders,
// CACM, the UNet with GCMA/PFC, schedule, normalization and the per-scale
// alignment geometry. When the config disables GCMA the conditioning path
// (encoders + CACM) is not built at all and the parameter set is exactly the
// plain backbone's.
template <class T>
class VeilaModel {
 public:
  data::RunConfig cfg;
  ParamStore<T> store;
  std::unique_ptr<FrozenEncoder<T>> enc_sem, enc_dep;
  std::unique_ptr<Cacm<T>> cacm;
  std::unique_ptr<UNet<T>> unet;
  DiffusionSchedule sched;
  RangeNorm norm;
  std::array<GcmaScaleGeometry<T>, 4> geometry;
  bool has_geometry = false;

  static VeilaModel build(const data::RunConfig& cfg, u64 param_seed) {
    VeilaModel m;
    m.cfg = cfg;
    m.store.seed = param_seed;
    m.sched = cfg.schedule.build();
    m.norm.d_max = cfg.sensor.d_max;
    if (m.conditional()) {
      m.enc_sem = std::make_unique<FrozenEncoder<T>>(cfg.encoder_sem);
      m.enc_dep = std::make_unique<FrozenEncoder<T>>(cfg.encoder_dep);
      m.cacm = std::make_unique<Cacm<T>>(m.store, cfg.cacm, cfg.encoder_sem.widths,
                                         cfg.encoder_dep.widths);
    }
    m.unet = std::make_unique<UNet<T>>(m.store, cfg.denoiser, cfg.align,
                                       cfg.cacm.shared_widths);
    if (m.conditional()) m.build_geometry();
    return m;
  }

  bool conditional() const { return !cfg.denoiser.gcma_scales.empty(); }

  void build_geometry() {
    std::vector<CameraView> views;
    for (const auto& calib : cfg.camera.rig) {
      CameraView v;
      v.K = calib.K;
      v.T = calib.T;
      v.name = calib.name;
      v.image = Tensor<float>::zeros({3, cfg.camera.height, cfg.camera.width});
      views.push_back(std::move(v));
    }
    for (int l = 0; l < 4; ++l)
      geometry[size_t(l)] = make_gcma_geometry<T>(cfg.sensor, l, views, cfg.align);
    has_geometry = true;
  }

  std::pair<FeaturePyramid<T>, FeaturePyramid<T>> encode_view(const CameraView& view) const {
    VEILA_CHECK(enc_sem && enc_dep, "conditioning disabled in this model");
    return {enc_sem->encode(view), enc_dep->encode(view)};
  }

  // Run CACM over pre-encoded pyramids for a batch of items.
  Conditioning<T> condition(
      const std::vector<const std::vector<std::pair<FeaturePyramid<T>, FeaturePyramid<T>>>*>&
          batch) const {
    VEILA_CHECK(conditional() && has_geometry, "conditioning path not built");
    Conditioning<T> cond;
    cond.geometry = &geometry;
    for (const auto* item : batch) {
      std::vector<std::array<ad::Var<T>, 4>> views;
      for (const auto& [sem, dep] : *item) views.push_back(cacm->forward(sem, dep));
      cond.features.push_back(std::move(views));
    }
    return cond;
  }

  // Noise prediction for a batch of noisy range tensors.
  ad::Var<T> predict_noise(const ad::Var<T>& x_t, const std::vector<int>& t,
                           const Conditioning<T>* cond) const {
    return unet->forward(x_t, t, cond);
  }

  nlohmann::json checkpoint_header(i64 step, const std::string& dataset_hash) const {
    nlohmann::json j;
    j["format"] = "veila-checkpoint-v1";
    j["step"] = step;
    j["config"] = cfg;
    j["dataset_hash"] = dataset_hash;
    j["param_seed"] = store.seed;
    return j;
  }

  static VeilaModel from_checkpoint(const LoadedCheckpoint<T>& ck) {
    data::RunConfig cfg = ck.header.at("config").get<data::RunConfig>();
    VeilaModel m = build(cfg, ck.header.value("param_seed", u64(0)));
    restore_params(m.store, ck.params);
    return m;
  }
};

}  // namespace veila::model
