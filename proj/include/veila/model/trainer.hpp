#pragma once

#include <chrono>
#include <deque>
#include <filesystem>

#include "veila/data/dataset.hpp"
#include "veila/model/veila_model.hpp"

namespace veila::model {

// Fully in-memory training set: normalized range tensors plus the frozen
// encoder pyramids (encoders never train, so their outputs are computed once).
template <class T>
struct TrainingSet {
  std::vector<Tensor<T>> x0;
  std::vector<std::vector<std::pair<FeaturePyramid<T>, FeaturePyramid<T>>>> pyramids;
  std::string dataset_hash;
};

template <class T>
TrainingSet<T> load_training_set(const VeilaModel<T>& model, const data::Manifest& manifest) {
  TrainingSet<T> out;
  out.dataset_hash = manifest.config_hash;
  data::RunConfig dcfg = manifest.run_config();
  VEILA_CHECK(dcfg.sensor == model.cfg.sensor,
              "dataset sensor does not match the model sensor");
  for (const auto& entry : manifest.samples) {
    synth::PairedSample s = data::load_sample(manifest, entry);
    out.x0.push_back(normalize_range<T>(s.range, model.norm));
    std::vector<std::pair<FeaturePyramid<T>, FeaturePyramid<T>>> views;
    if (model.conditional())
      for (const auto& view : s.views) views.push_back(model.encode_view(view));
    out.pyramids.push_back(std::move(views));
  }
  return out;
}

struct TrainResult {
  std::string latest_checkpoint;
  double final_loss = 0;    // mean over the trailing 100 steps
  double last_loss = 0;
  i64 steps_run = 0;
};

// Minimizes E|eps - eps_theta(X_t, I, t)|^2 with uniform t. All draws are
// counter-based functions of (seed, step), so a resumed run continues the
// identical trajectory. A non-finite loss aborts with a diagnostic dump.
template <class T>
TrainResult train_loop(VeilaModel<T>& model, const TrainingSet<T>& dataset,
                       const data::TrainConfig& tcfg, const std::string& out_dir,
                       Adam<T>* adam_state = nullptr, i64 start_step = 0) {
  namespace fs = std::filesystem;
  VEILA_CHECK(!dataset.x0.empty(), "empty training set");
  fs::create_directories(out_dir);
  const i64 n = i64(dataset.x0.size());
  const int B = tcfg.batch;
  const auto shape = dataset.x0[0].shape();
  const i64 chw = Tensor<T>::numel_of(shape);

  Adam<T> local_adam;
  Adam<T>& adam = adam_state ? *adam_state : local_adam;
  std::ofstream log(fs::path(out_dir) / "metrics.jsonl", start_step ? std::ios::app : std::ios::trunc);
  VEILA_CHECK(log.good(), "cannot write metrics log in " + out_dir);

  auto wall_start = std::chrono::steady_clock::now();
  std::deque<double> trailing;
  TrainResult result;

  auto save = [&](i64 step, const std::string& name) {
    save_checkpoint(
        (fs::path(out_dir) / name).string(),
        model.checkpoint_header(step, dataset.dataset_hash), model.store, &adam);
  };

  for (i64 step = start_step; step < tcfg.steps; ++step) {
    CounterRng pick(tcfg.seed, {0xba7c4ull, u64(step)});
    Tensor<T> x_t({i64(B), shape[0], shape[1], shape[2]});
    Tensor<T> eps({i64(B), shape[0], shape[1], shape[2]});
    std::vector<int> ts(size_t(B));
    std::vector<i64> idx(size_t(B));
    for (int b = 0; b < B; ++b) {
      idx[size_t(b)] = i64(pick.index(u64(n)));
      ts[size_t(b)] = 1 + int(pick.index(u64(model.sched.steps)));
      CounterRng noise(tcfg.seed, {0xe9511ull, u64(step), u64(b)});
      const Tensor<T>& x0 = dataset.x0[size_t(idx[size_t(b)])];
      const T a = T(std::sqrt(model.sched.abar(ts[size_t(b)])));
      const T s = T(std::sqrt(1.0 - model.sched.abar(ts[size_t(b)])));
      for (i64 i = 0; i < chw; ++i) {
        T e = T(noise.normal());
        eps[b * chw + i] = e;
        x_t[b * chw + i] = a * x0[i] + s * e;
      }
    }

    model.store.zero_grads();
    auto x_var = ad::constant(std::move(x_t));
    ad::Var<T> loss;
    if (model.conditional()) {
      std::vector<const std::vector<std::pair<FeaturePyramid<T>, FeaturePyramid<T>>>*> batch;
      for (int b = 0; b < B; ++b) batch.push_back(&dataset.pyramids[size_t(idx[size_t(b)])]);
      Conditioning<T> cond = model.condition(batch);
      loss = ad::mse(model.predict_noise(x_var, ts, &cond), eps);
    } else {
      loss = ad::mse(model.predict_noise(x_var, ts, nullptr), eps);
    }
    const double loss_val = double(loss->val[0]);
    if (!std::isfinite(loss_val)) {
      nlohmann::json diag;
      diag["step"] = step;
      diag["loss"] = loss_val;
      diag["t"] = ts;
      for (const auto& [name, p] : model.store.params) {
        double norm_sq = 0;
        for (i64 i = 0; i < p->val.numel(); ++i) norm_sq += double(p->val[i]) * double(p->val[i]);
        diag["param_norms"][name] = std::sqrt(norm_sq);
      }
      std::ofstream df(fs::path(out_dir) / ("diagnostic_step" + std::to_string(step) + ".json"));
      df << diag.dump(2) << "\n";
      VEILA_CHECK(false, "non-finite loss at step " + std::to_string(step) +
                             "; diagnostic state dumped in " + out_dir);
    }
    ad::backward(loss);
    adam.step(model.store, T(tcfg.lr));

    trailing.push_back(loss_val);
    if (i64(trailing.size()) > 100) trailing.pop_front();
    result.last_loss = loss_val;

    if ((step + 1) % tcfg.log_interval == 0 || step + 1 == tcfg.steps) {
      auto wall =
          std::chrono::duration_cast<std::chrono::milliseconds>(
              std::chrono::steady_clock::now() - wall_start).count();
      log << nlohmann::json{{"step", step + 1},
                            {"loss", loss_val},
                            {"lr", tcfg.lr},
                            {"wall_ms", wall}}.dump() << "\n";
      log.flush();
    }
    if (tcfg.ckpt_interval > 0 && (step + 1) % tcfg.ckpt_interval == 0 &&
        step + 1 != tcfg.steps)
      save(step + 1, "ckpt_" + std::to_string(step + 1) + ".vlck");
  }
  double acc = 0;
  for (double x : trailing) acc += x;
  result.final_loss = trailing.empty() ? 0 : acc / double(trailing.size());
  result.steps_run = tcfg.steps - start_step;
  save(tcfg.steps, "ckpt_" + std::to_string(tcfg.steps) + ".vlck");
  save(tcfg.steps, "latest.vlck");
  result.latest_checkpoint = (fs::path(out_dir) / "latest.vlck").string();
  return result;
}

}  // namespace veila::model
