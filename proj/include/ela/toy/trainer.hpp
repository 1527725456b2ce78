// Copyright 2026 The ela-kernels Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "ela/toy/dataset.hpp"
#include "ela/toy/mini_cnn.hpp"

namespace ela::toy {

struct TrainConfig {
  std::size_t steps = 500;
  std::size_t batch = 32;
  double lr = 0.05;
  double momentum = 0.9;
  double weight_decay = 0.0;
  std::uint64_t seed = 7;
  std::size_t eval_samples = 256;
  ToyDataConfig data;

  void validate() const;
};

// accuracy is measured on the step's minibatch, before the update.
struct TrainRecord {
  std::size_t step = 0;
  double loss = 0;
  double accuracy = 0;
};

struct TrainState {
  TrainConfig cfg;
  std::size_t step = 0;
  std::vector<TrainRecord> history;
  std::map<std::string, std::vector<double>> velocity;
};

// v = momentum * v + (g + wd * p);  p -= lr * v
void sgd_step(MiniCnn& model, TrainState& state);

// Draws the minibatch for state.step, runs forward/backward and sgd_step.
// Throws DivergenceError on a non-finite loss.
TrainRecord train_step(MiniCnn& model, TrainState& state);

TrainState train(MiniCnn& model, const TrainConfig& cfg,
                 const std::function<void(const TrainRecord&)>& on_step = {});

// Seed of the minibatch used at `step`; the eval batch uses its own stream.
std::uint64_t batch_seed(std::uint64_t seed, std::size_t step);
std::uint64_t eval_seed(std::uint64_t seed);

// Fraction of correct argmax predictions, evaluated in eval mode in chunks.
double evaluate_accuracy(MiniCnn& model, const ToyBatch& batch, std::size_t chunk = 64);

// Model files are parameter containers whose metadata carries the network
// config and any batch-norm running statistics.
void save_model(const std::filesystem::path& path, MiniCnn& model,
                const nlohmann::json& extra = nlohmann::json::object());
MiniCnn load_model(const std::filesystem::path& path);

}  // namespace ela::toy
