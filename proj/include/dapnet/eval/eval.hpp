// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The dapnet Authors

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "dapnet/core/manifest.hpp"
#include "dapnet/model/nn.hpp"
#include "dapnet/train/train.hpp"

namespace dapnet::eval {

using Features = nn::Matrix<double>;

// ---------------------------------------------------------------------------
// Protocol splits

enum class Protocol { kRandom, kCSub, kCSet, kStrictCrossSource };

std::string_view to_string(Protocol p);
Protocol parse_protocol(std::string_view text);

struct SplitOptions {
  std::uint64_t seed = 0;
  double train_fraction = 0.6;                  // random
  std::set<std::string> csub_excluded = {"radhar"};
  std::string test_source;                      // strict; empty picks "mmfi" or the last source
  std::set<std::string> train_sources;          // strict; empty means every other source
  std::optional<std::set<std::size_t>> classes; // strict; default: classes shared by train and test sources
};

struct SplitManifest {
  Protocol protocol = Protocol::kRandom;
  std::vector<core::ManifestEntry> train;
  std::vector<core::ManifestEntry> test;
};

// Random: per source, a seeded shuffle with round(f n) samples to train.
// C-Sub: per source, the lower half of subject indices trains; excluded
//   sources are dropped.
// C-Set: sources recorded in a single scene train entirely; a multi-scene
//   source sends its lower half of scenes to test and the rest to train.
// Strict cross-source: train sources vs one held-out test source, both
//   restricted to the shared classes.
SplitManifest split(std::vector<core::ManifestEntry> entries, Protocol protocol, const SplitOptions& opt);

void write_split(const SplitManifest& s, const std::filesystem::path& path);
SplitManifest read_split(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Metrics

using Confusion = nn::Matrix<double>;  // rows true class, columns predicted

Confusion confusion_matrix(std::span<const std::size_t> truth, std::span<const std::size_t> pred, std::size_t k);

struct MacroMicro {
  double macro = 0.0;
  double micro = 0.0;
};

// Classes without support are left out of the macro mean.
MacroMicro macro_micro(const Confusion& c);
std::vector<double> per_class_accuracy(const Confusion& c);  // NaN without support

// Ordered pairs (i, j), i != j, from different sources with y_i == y_j; the
// pair counts as correct when yhat_j == y_i.
double offdiag_accuracy(std::span<const std::size_t> truth, std::span<const std::size_t> pred,
                        std::span<const std::string> sources);

double centroid_distance(const Features& a, const Features& b);
// (1 / 4d^2) ||C_a - C_b||_F^2 with unbiased covariances.
double coral(const Features& a, const Features& b);

struct MmdOptions {
  double bandwidth = 0.0;  // <= 0: median pairwise distance of the pooled sample
};

// Median of all pairwise Euclidean distances in the pooled set; 1 when 0.
double median_bandwidth(const Features& a, const Features& b);
// Biased squared MMD with k(x, y) = exp(-|x - y|^2 / (2 h^2)).
double mmd(const Features& a, const Features& b, double bandwidth);

double improvement_increasing(double ours, double baseline);
double improvement_decreasing(double ours, double baseline);

// ---------------------------------------------------------------------------
// Report

struct MetricReport {
  std::string protocol;
  std::size_t n_test = 0;
  double macro_acc = 0.0;
  double micro_acc = 0.0;
  double offdiag_acc = 0.0;          // NaN when fewer than two sources are pooled
  double centroid_distance = 0.0;    // mean over source pairs; NaN when undefined
  double coral = 0.0;
  double mmd = 0.0;
  double mmd_bandwidth = 0.0;        // mean bandwidth used
  std::string kernel = "gaussian";
  std::string alignment_pool;        // "test" or "train+test"
  std::vector<std::string> class_names;
  std::vector<double> per_class_acc;
  Confusion confusion;
};

struct Sample {
  const core::ClipTensor* clip = nullptr;
  std::size_t label = 0;
  std::uint64_t key = 0;
  std::string source;
};

struct EvalOptions {
  std::uint64_t sample_seed = 0;
  MmdOptions mmd;
  std::string protocol;
  std::vector<std::string> class_names;
};

struct SourceAlignment {
  double centroid = 0.0;
  double coral = 0.0;
  double mmd = 0.0;
  double bandwidth = 0.0;
};

// Means over all unordered source pairs of the features grouped by source;
// NaN fields when fewer than two sources are present.
SourceAlignment source_alignment(const Features& features, std::span<const std::string> sources,
                                 const MmdOptions& opt);

// Accuracy metrics over `test`. The alignment metrics and OffDiag pool the
// test samples with `extra` (typically the training set) whenever the test set
// alone holds a single source.
MetricReport evaluate(const train::Model& model, std::span<const Sample> test, std::span<const Sample> extra,
                      const EvalOptions& opt);

void write_report_csv(const MetricReport& r, const std::filesystem::path& path);
MetricReport read_report_csv(const std::filesystem::path& path);

}  // namespace dapnet::eval
