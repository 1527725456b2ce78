// Copyright 2026 The ela-kernels Authors.
// SPDX-License-Identifier: Apache-2.0

#include "ela/toy/trainer.hpp"

#include <cmath>

#include "ela/serialize.hpp"

namespace ela::toy {
namespace {

std::string block_key(std::size_t s, std::size_t b) {
  return "stage" + std::to_string(s) + ".block" + std::to_string(b);
}

}  // namespace

void TrainConfig::validate() const {
  if (batch == 0) throw ConfigError("train: batch must be >= 1");
  if (!(lr >= 0) || !std::isfinite(lr)) throw ConfigError("train: lr must be finite and >= 0");
  if (!(momentum >= 0 && momentum < 1)) throw ConfigError("train: momentum must be in [0, 1)");
  if (!(weight_decay >= 0)) throw ConfigError("train: weight decay must be >= 0");
  if (eval_samples == 0) throw ConfigError("train: eval_samples must be >= 1");
}

std::uint64_t batch_seed(std::uint64_t seed, std::size_t step) {
  return seed * 0x9E3779B97F4A7C15ull + static_cast<std::uint64_t>(step) + 1;
}

std::uint64_t eval_seed(std::uint64_t seed) { return (seed ^ 0xD1B54A32D192ED03ull) * 0x9E3779B97F4A7C15ull; }

void sgd_step(MiniCnn& model, TrainState& state) {
  const double lr = state.cfg.lr, mu = state.cfg.momentum, wd = state.cfg.weight_decay;
  model.for_each_param([&](Param<double>& p) {
    auto& v = state.velocity[p.name];
    if (v.empty()) v.assign(p.value.size(), 0.0);
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      v[i] = mu * v[i] + (p.grad[i] + wd * p.value[i]);
      p.value[i] -= lr * v[i];
    }
  });
}

TrainRecord train_step(MiniCnn& model, TrainState& state) {
  const ToyBatch b = make_toy_batch(state.cfg.batch, batch_seed(state.cfg.seed, state.step), state.cfg.data);
  model.set_mode(Mode::train);
  model.zero_grad();
  const Logits logits = model.forward(b.images);
  const CrossEntropy ce = cross_entropy(logits, b.labels);
  if (!std::isfinite(ce.loss))
    throw DivergenceError("train: non-finite loss at step " + std::to_string(state.step));
  model.backward(ce.dlogits);
  sgd_step(model, state);
  TrainRecord r{state.step, ce.loss, static_cast<double>(ce.correct) / static_cast<double>(state.cfg.batch)};
  state.history.push_back(r);
  ++state.step;
  return r;
}

TrainState train(MiniCnn& model, const TrainConfig& cfg,
                 const std::function<void(const TrainRecord&)>& on_step) {
  cfg.validate();
  TrainState st;
  st.cfg = cfg;
  while (st.step < cfg.steps) {
    const TrainRecord r = train_step(model, st);
    if (on_step) on_step(r);
  }
  return st;
}

double evaluate_accuracy(MiniCnn& model, const ToyBatch& batch, std::size_t chunk) {
  const auto& s = batch.images.shape();
  if (chunk == 0) throw ConfigError("evaluate_accuracy: chunk must be >= 1");
  model.set_mode(Mode::eval);
  std::size_t correct = 0;
  const std::size_t per = s.c * s.h * s.w;
  for (std::size_t start = 0; start < s.n; start += chunk) {
    const std::size_t m = std::min(chunk, s.n - start);
    const auto src = batch.images.data().subspan(start * per, m * per);
    Tensor4<double> x({m, s.c, s.h, s.w}, std::vector<double>(src.begin(), src.end()));
    const Logits lg = model.forward(x);
    for (std::size_t i = 0; i < m; ++i) {
      std::size_t arg = 0;
      for (std::size_t k = 1; k < lg.shape().c; ++k)
        if (lg(i, k, 0) > lg(i, arg, 0)) arg = k;
      if (static_cast<int>(arg) == batch.labels[start + i]) ++correct;
    }
  }
  model.set_mode(Mode::train);
  return static_cast<double>(correct) / static_cast<double>(s.n);
}

void save_model(const std::filesystem::path& path, MiniCnn& model, const nlohmann::json& extra) {
  nlohmann::json meta = extra;
  meta["kind"] = "mini_cnn";
  meta["model"] = model.config().to_json();
  nlohmann::json norms = nlohmann::json::object();
  for (std::size_t s = 0; s < model.num_stages(); ++s)
    for (std::size_t b = 0; b < model.config().blocks_per_stage; ++b) {
      auto* a = model.attention(s, b);
      if (!a || !a->norm_state()) continue;
      const auto& ns = *a->norm_state();
      norms[block_key(s, b)] = {{"running_mean", ns.running_mean},
                                {"running_var", ns.running_var},
                                {"initialized", ns.initialized}};
    }
  meta["norm_state"] = norms;
  save_params(path, model.export_params(), meta);
}

MiniCnn load_model(const std::filesystem::path& path) {
  ParamFile f = load_params(path);
  if (f.meta.value("kind", "") != "mini_cnn" || !f.meta.contains("model"))
    throw ParseError("load_model: " + path.string() + " is not a mini_cnn model file", 0);
  MiniCnn model(MiniCnnConfig::from_json(f.meta.at("model")), 0);
  model.import_params(f.params);
  if (f.meta.contains("norm_state"))
    for (auto& [key, v] : f.meta.at("norm_state").items())
      for (std::size_t s = 0; s < model.num_stages(); ++s)
        for (std::size_t b = 0; b < model.config().blocks_per_stage; ++b) {
          auto* a = model.attention(s, b);
          if (block_key(s, b) != key || !a || !a->norm_state()) continue;
          auto& ns = *a->norm_state();
          auto mean = v.at("running_mean").get<std::vector<double>>();
          auto var = v.at("running_var").get<std::vector<double>>();
          if (mean.size() != ns.running_mean.size() || var.size() != ns.running_var.size())
            throw ParseError("load_model: running statistics for " + key + " have the wrong size", 0);
          ns.running_mean = std::move(mean);
          ns.running_var = std::move(var);
          ns.initialized = v.at("initialized").get<bool>();
        }
  return model;
}

}  // namespace ela::toy
