// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The dapnet Authors

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dapnet/core/config.hpp"
#include "dapnet/core/types.hpp"
#include "dapnet/model/dapnet.hpp"

namespace dapnet::train {

using Model = model::DapNet<float>;

enum class QParam { kClamp, kSigmoid };
enum class Schedule { kCosine, kConstant };

struct TrainConfig {
  std::size_t epochs = 150;
  std::size_t batch_size = 128;
  double learning_rate = 0.01;
  double weight_decay = 1e-4;
  double momentum = 0.9;
  std::uint64_t seed = 0;         // weight init and shuffling
  std::uint64_t sample_seed = 0;  // raw-branch sampling
  std::string device = "cpu";
  Schedule schedule = Schedule::kCosine;
  QParam q_param = QParam::kClamp;
  bool class_weighting = false;
  std::size_t eval_every = 0;  // 0: test accuracy only after the last epoch

  void validate() const;
};

// Keys: train.*, d2r.seed.
const core::FieldTable<TrainConfig>& train_config_table();

struct Example {
  const core::ClipTensor* clip = nullptr;
  std::size_t label = 0;
  std::uint64_t key = 0;  // stable per-sample key (hash of the sample id)
};

std::uint64_t sample_key(const core::SampleId& id);

// Seeds for raw-branch sampling.
std::uint64_t train_seed(std::uint64_t sample_seed, std::size_t epoch, std::uint64_t key);
std::uint64_t eval_seed(std::uint64_t sample_seed, std::uint64_t key);

struct EpochLog {
  std::size_t epoch = 0;
  double loss = 0.0;
  double acc = 0.0;
  double q = 0.0;
  std::optional<double> test_acc;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

// SGD with momentum; weight decay is not applied to q.
class Optimizer {
 public:
  explicit Optimizer(const TrainConfig& cfg) : cfg_(cfg) {}
  void step(Model& model, Model& grad, double lr);

 private:
  TrainConfig cfg_;
  std::map<std::string, model::Matrix<float>> velocity_;
};

double learning_rate_at(const TrainConfig& cfg, std::size_t epoch);

// Inverse-frequency weights normalized to mean 1 over present classes.
std::vector<double> class_weights(std::span<const Example> data, std::size_t classes);

std::size_t predict(const Model& model, const Example& ex, std::uint64_t sample_seed);
double accuracy(const Model& model, std::span<const Example> data, std::uint64_t sample_seed);

using EpochCallback = std::function<void(const EpochLog&)>;

std::vector<EpochLog> train(Model& model, std::span<const Example> data, const TrainConfig& cfg,
                            std::span<const Example> test = {}, const EpochCallback& on_epoch = {});

void write_log_csv(const std::vector<EpochLog>& log, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Checkpoints

inline constexpr int kCheckpointVersion = 1;

struct Checkpoint {
  Model model;
  std::vector<std::string> class_names;
  std::vector<std::string> prompts;
  std::string encoder_name;
  nlohmann::json run_config;  // free-form snapshot stored alongside
};

void save_checkpoint(const Model& model, const std::vector<std::string>& class_names,
                     const std::vector<std::string>& prompts, const std::string& encoder_name,
                     const nlohmann::json& run_config, const std::filesystem::path& path);

Checkpoint load_checkpoint(const std::filesystem::path& path);

// Loads parameters into an existing model; shapes must match exactly.
void load_parameters(Model& model, const std::filesystem::path& path);

}  // namespace dapnet::train
