// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The dapnet Authors

#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "dapnet/core/config.hpp"
#include "dapnet/model/dapnet.hpp"
#include "dapnet/synth/synth.hpp"
#include "dapnet/train/train.hpp"

namespace dapnet::cli {

enum ExitCode : int { kOk = 0, kConfigError = 2, kFormatError = 3, kRuntimeError = 4 };

struct CliOptions {
  std::string normalization = "clip_level";  // ingest.normalization
  std::string taxonomy;                       // ingest.taxonomy
  std::string protocol = "strict_cross_source";
  std::uint64_t split_seed = 0;
  double train_fraction = 0.6;
  std::string test_source;
  std::string train_sources;  // comma separated
  std::string classes;        // comma separated class indices
  std::string tam_bank;       // precomputed embedding bank
  double mmd_bandwidth = 0.0;
  bool deterministic = false;
};

const core::FieldTable<CliOptions>& cli_options_table();

struct RunConfig {
  model::ModelConfig model;
  train::TrainConfig train;
  synth::SynthConfig synth;
  CliOptions cli;
};

// Throws ConfigError for unknown keys or ill-typed values.
void apply_key(RunConfig& cfg, const std::string& key, const nlohmann::json& value);
// Accepts nested or flat JSON objects.
void apply_json(RunConfig& cfg, const nlohmann::json& j);
void apply_file(RunConfig& cfg, const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& cfg);
void validate(const RunConfig& cfg);

// Markdown page listing every key with its default and description.
std::string config_reference();

// Simple standalone SVG charts.
std::string bar_chart_svg(const std::string& title, const std::vector<std::string>& labels,
                          const std::vector<double>& values);
std::string radar_chart_svg(const std::string& title, const std::vector<std::string>& labels,
                            const std::vector<double>& values);

// Entry point shared by the executable and the tests; returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dapnet::cli
