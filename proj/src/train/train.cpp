// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The dapnet Authors

#include "dapnet/train/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "dapnet/core/zip.hpp"
#include "dapnet/model/config.hpp"
#include "dapnet/model/tam.hpp"

namespace dapnet::train {

namespace {

std::string_view to_string(QParam p) { return p == QParam::kClamp ? "clamp" : "sigmoid"; }
std::string_view to_string(Schedule s) { return s == Schedule::kCosine ? "cosine" : "constant"; }

QParam parse_q_param(const std::string& v) {
  if (v == "clamp") return QParam::kClamp;
  if (v == "sigmoid") return QParam::kSigmoid;
  throw ConfigError("unknown train.q_param '" + v + "' (expected clamp, sigmoid)");
}

Schedule parse_schedule(const std::string& v) {
  if (v == "cosine") return Schedule::kCosine;
  if (v == "constant") return Schedule::kConstant;
  throw ConfigError("unknown train.schedule '" + v + "' (expected cosine, constant)");
}

float clamp_q(float q) {
  return std::clamp(q, static_cast<float>(d2r::DsqParams::kQMin), static_cast<float>(1.0 - d2r::DsqParams::kQMin));
}

std::size_t argmax(const model::RowVec<float>& v) {
  Eigen::Index at = 0;
  v.maxCoeff(&at);
  return static_cast<std::size_t>(at);
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs == 0) throw ConfigError("train.epochs must be >= 1");
  if (batch_size == 0) throw ConfigError("train.batch_size must be >= 1");
  if (!(learning_rate >= 0.0)) throw ConfigError("train.learning_rate must be >= 0");
  if (!(weight_decay >= 0.0)) throw ConfigError("train.weight_decay must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("train.momentum must lie in [0, 1)");
  if (device != "cpu") throw ConfigError("train.device '" + device + "' is not available (only cpu)");
}

const core::FieldTable<TrainConfig>& train_config_table() {
  static const core::FieldTable<TrainConfig> table = [] {
    core::FieldTable<TrainConfig> t;
    t.add("train.epochs", "Training epochs.", [](TrainConfig& c) -> std::size_t& { return c.epochs; });
    t.add("train.batch_size", "Clips per optimizer step.",
          [](TrainConfig& c) -> std::size_t& { return c.batch_size; });
    t.add("train.learning_rate", "Initial learning rate.",
          [](TrainConfig& c) -> double& { return c.learning_rate; });
    t.add("train.weight_decay", "L2 weight decay (not applied to q).",
          [](TrainConfig& c) -> double& { return c.weight_decay; });
    t.add("train.momentum", "SGD momentum.", [](TrainConfig& c) -> double& { return c.momentum; });
    t.add("train.seed", "Seed for weight init and shuffling.",
          [](TrainConfig& c) -> std::uint64_t& { return c.seed; });
    t.add("d2r.seed", "Seed for raw-branch resampling.",
          [](TrainConfig& c) -> std::uint64_t& { return c.sample_seed; });
    t.add("train.device", "Compute device hint (cpu).", [](TrainConfig& c) -> std::string& { return c.device; });
    t.add_text(
        "train.schedule", "Learning-rate schedule: cosine or constant.",
        [](const TrainConfig& c) { return to_string(c.schedule); },
        [](TrainConfig& c, const std::string& v) { c.schedule = parse_schedule(v); });
    t.add_text(
        "train.q_param", "q update: clamp (direct) or sigmoid (logit space).",
        [](const TrainConfig& c) { return to_string(c.q_param); },
        [](TrainConfig& c, const std::string& v) { c.q_param = parse_q_param(v); });
    t.add("train.class_weighting", "Inverse-frequency class weights in the loss.",
          [](TrainConfig& c) -> bool& { return c.class_weighting; });
    t.add("train.eval_every", "Test accuracy every N epochs (0: last epoch only).",
          [](TrainConfig& c) -> std::size_t& { return c.eval_every; });
    return t;
  }();
  return table;
}

std::uint64_t sample_key(const core::SampleId& id) { return model::fnv1a64(core::encode_sample_id(id)); }

std::uint64_t train_seed(std::uint64_t sample_seed, std::size_t epoch, std::uint64_t key) {
  return d2r::mix_seed(d2r::mix_seed(sample_seed, epoch + 1), key);
}

std::uint64_t eval_seed(std::uint64_t sample_seed, std::uint64_t key) { return d2r::mix_seed(sample_seed, key); }

double learning_rate_at(const TrainConfig& cfg, std::size_t epoch) {
  if (cfg.schedule == Schedule::kConstant || cfg.epochs <= 1) return cfg.learning_rate;
  const double pi = std::acos(-1.0);
  return cfg.learning_rate * 0.5 *
         (1.0 + std::cos(pi * static_cast<double>(epoch) / static_cast<double>(cfg.epochs)));
}

void Optimizer::step(Model& model, Model& grad, double lr) {
  std::vector<model::Matrix<float>*> grads;
  grad.visit([&](const std::string&, model::Matrix<float>& g) { grads.push_back(&g); });
  std::size_t i = 0;
  const auto mu = static_cast<float>(cfg_.momentum);
  const auto wd = static_cast<float>(cfg_.weight_decay);
  const auto eta = static_cast<float>(lr);
  model.visit([&](const std::string& name, model::Matrix<float>& p) {
    model::Matrix<float>& g = *grads[i++];
    auto [it, fresh] = velocity_.try_emplace(name, model::Matrix<float>::Zero(p.rows(), p.cols()));
    model::Matrix<float>& v = it->second;
    if (name == "d2r.q") {
      const float q = p(0, 0);
      if (cfg_.q_param == QParam::kSigmoid) {
        v = mu * v + g * (q * (1.0f - q));
        const float u = std::log(q / (1.0f - q)) - eta * v(0, 0);
        p(0, 0) = clamp_q(1.0f / (1.0f + std::exp(-u)));
      } else {
        v = mu * v + g;
        p(0, 0) = clamp_q(q - eta * v(0, 0));
      }
      return;
    }
    v = mu * v + g + wd * p;
    p -= eta * v;
  });
}

std::vector<double> class_weights(std::span<const Example> data, std::size_t classes) {
  std::vector<double> counts(classes, 0.0);
  for (const auto& ex : data) counts.at(ex.label) += 1.0;
  std::vector<double> w(classes, 0.0);
  double total = 0.0;
  std::size_t present = 0;
  for (std::size_t k = 0; k < classes; ++k) {
    if (counts[k] > 0) {
      w[k] = 1.0 / counts[k];
      total += w[k];
      ++present;
    }
  }
  for (auto& x : w) x *= static_cast<double>(present) / total;
  return w;
}

std::size_t predict(const Model& model, const Example& ex, std::uint64_t sample_seed) {
  return argmax(model.forward(*ex.clip, eval_seed(sample_seed, ex.key)).fused);
}

double accuracy(const Model& model, std::span<const Example> data, std::uint64_t sample_seed) {
  if (data.empty()) throw ValidationError("accuracy: empty dataset");
  std::size_t correct = 0;
  for (const auto& ex : data) correct += predict(model, ex, sample_seed) == ex.label ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

std::vector<EpochLog> train(Model& model, std::span<const Example> data, const TrainConfig& cfg,
                            std::span<const Example> test, const EpochCallback& on_epoch) {
  cfg.validate();
  if (data.empty()) throw ValidationError("train: empty dataset");
  for (const auto& ex : data) {
    if (ex.label >= model.classes()) {
      throw ValidationError("train: label " + std::to_string(ex.label) + " outside " +
                            std::to_string(model.classes()) + " classes");
    }
  }
  const std::vector<double> weights =
      cfg.class_weighting ? class_weights(data, model.classes()) : std::vector<double>(model.classes(), 1.0);

  Optimizer opt(cfg);
  Model grad = model.zeros_like();
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<EpochLog> log;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::mt19937_64 rng(d2r::mix_seed(cfg.seed, epoch));
    std::shuffle(order.begin(), order.end(), rng);
    const double lr = learning_rate_at(cfg, epoch);
    double loss_sum = 0.0;
    std::size_t correct = 0;

    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      grad.visit([](const std::string&, model::Matrix<float>& m) { m.setZero(); });
      const auto inv = 1.0f / static_cast<float>(end - start);
      for (std::size_t b = start; b < end; ++b) {
        const Example& ex = data[order[b]];
        model::Output<float> out;
        const float l = model.loss_and_grad(*ex.clip, ex.label, train_seed(cfg.sample_seed, epoch, ex.key), grad,
                                            static_cast<float>(weights[ex.label]) * inv, &out);
        if (!std::isfinite(l)) {
          throw NumericError("non-finite loss at epoch " + std::to_string(epoch + 1) + ", sample " +
                             std::to_string(order[b]) + " (label " + std::to_string(ex.label) +
                             ", q=" + std::to_string(model.q()) + ", lr=" + std::to_string(lr) + ")");
        }
        loss_sum += static_cast<double>(l) / static_cast<double>(inv);
        correct += argmax(out.fused) == ex.label ? 1 : 0;
      }
      opt.step(model, grad, lr);
    }

    EpochLog entry;
    entry.epoch = epoch + 1;
    entry.loss = loss_sum / static_cast<double>(data.size());
    entry.acc = static_cast<double>(correct) / static_cast<double>(data.size());
    entry.q = model.q();
    const bool last = epoch + 1 == cfg.epochs;
    if (!test.empty() && (last || (cfg.eval_every > 0 && (epoch + 1) % cfg.eval_every == 0))) {
      entry.test_acc = accuracy(model, test, cfg.sample_seed);
    }
    log.push_back(entry);
    if (on_epoch) on_epoch(entry);
  }
  return log;
}

void write_log_csv(const std::vector<EpochLog>& log, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write training log " + path.string());
  out.precision(9);
  out << "epoch,loss,acc,q,test_acc\n";
  for (const auto& e : log) {
    out << e.epoch << ',' << e.loss << ',' << e.acc << ',' << e.q << ',';
    if (e.test_acc) out << *e.test_acc;
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

std::vector<float> to_row_major(const model::Matrix<float>& m) {
  std::vector<float> out(static_cast<std::size_t>(m.size()));
  std::size_t i = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) out[i++] = m(r, c);
  }
  return out;
}

void from_row_major(const std::vector<float>& v, model::Matrix<float>& m) {
  std::size_t i = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = v[i++];
  }
}

nlohmann::json parse_meta(const core::ZipReader& zip, const std::string& entry) {
  try {
    return nlohmann::json::parse(zip.get_text(entry));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(FormatError::Kind::kBadMetadata, "checkpoint " + entry + ": " + e.what());
  }
}

void check_version(const nlohmann::json& meta) {
  if (meta.value("format", "") != "dapnet-checkpoint") {
    throw FormatError(FormatError::Kind::kBadMetadata, "not a dapnet checkpoint");
  }
  const int version = meta.value("version", -1);
  if (version != kCheckpointVersion) {
    throw FormatError(FormatError::Kind::kVersionMismatch, "checkpoint version " + std::to_string(version) +
                                                               ", expected " +
                                                               std::to_string(kCheckpointVersion));
  }
}

void read_params(Model& model, const core::ZipReader& zip) {
  model.visit([&](const std::string& name, model::Matrix<float>& p) {
    const std::string entry = "params/" + name;
    if (!zip.contains(entry)) {
      throw FormatError(FormatError::Kind::kMissingEntry, "checkpoint lacks parameter '" + name + "'");
    }
    const auto values = core::unpack_f32(zip.get(entry));
    if (values.size() != static_cast<std::size_t>(p.size())) {
      throw FormatError(FormatError::Kind::kShapeMismatch,
                        "parameter '" + name + "' holds " + std::to_string(values.size()) + " values, model expects [" +
                            std::to_string(p.rows()) + "," + std::to_string(p.cols()) + "]");
    }
    from_row_major(values, p);
  });
}

}  // namespace

void save_checkpoint(const Model& model, const std::vector<std::string>& class_names,
                     const std::vector<std::string>& prompts, const std::string& encoder_name,
                     const nlohmann::json& run_config, const std::filesystem::path& path) {
  if (class_names.size() != model.classes()) throw ValidationError("checkpoint: class names do not match model");
  Model copy(model);
  core::ZipWriter zip;
  nlohmann::json params = nlohmann::json::array();
  copy.visit([&](const std::string& name, model::Matrix<float>& p) {
    params.push_back({{"name", name}, {"shape", {p.rows(), p.cols()}}});
    zip.add("params/" + name, core::pack_f32(to_row_major(p)));
  });
  zip.add("text", core::pack_f32(to_row_major(model.text_bank())));
  const nlohmann::json meta = {{"format", "dapnet-checkpoint"},
                               {"version", kCheckpointVersion},
                               {"classes", model.classes()},
                               {"class_names", class_names},
                               {"prompts", prompts},
                               {"encoder", encoder_name},
                               {"params", params}};
  zip.add("meta", meta.dump(1));
  zip.add("model_config", model::model_config_table().to_json(model.config()).dump(1));
  zip.add("config", run_config.dump(1));
  zip.write(path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  const auto zip = core::ZipReader::open(path);
  const auto meta = parse_meta(zip, "meta");
  check_version(meta);
  model::ModelConfig cfg;
  std::vector<std::string> names, prompts;
  try {
    cfg = model::model_config_table().from_json(parse_meta(zip, "model_config"));
    names = meta.at("class_names").get<std::vector<std::string>>();
    prompts = meta.value("prompts", std::vector<std::string>{});
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(FormatError::Kind::kBadMetadata, std::string("checkpoint meta: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(FormatError::Kind::kBadMetadata, std::string("checkpoint config: ") + e.what());
  }
  const auto text = core::unpack_f32(zip.get("text"));
  if (text.size() != names.size() * cfg.c_text) {
    throw FormatError(FormatError::Kind::kShapeMismatch, "checkpoint text bank does not match classes x tam.c_text");
  }
  model::Matrix<float> bank(static_cast<Eigen::Index>(names.size()), static_cast<Eigen::Index>(cfg.c_text));
  from_row_major(text, bank);
  Checkpoint ck{Model(cfg, names.size(), bank, 0), names, prompts, meta.value("encoder", ""),
                zip.contains("config") ? parse_meta(zip, "config") : nlohmann::json::object()};
  ck.model.set_text_bank(bank);
  read_params(ck.model, zip);
  return ck;
}

void load_parameters(Model& model, const std::filesystem::path& path) {
  const auto zip = core::ZipReader::open(path);
  check_version(parse_meta(zip, "meta"));
  read_params(model, zip);
}

}  // namespace dapnet::train
