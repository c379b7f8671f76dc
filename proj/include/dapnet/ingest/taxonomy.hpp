// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The dapnet Authors

#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dapnet/core/types.hpp"

namespace dapnet::ingest {

// Unified action vocabulary with the original per-source label names that
// were merged into each class. Loaded from data/taxonomy/unimm_har.csv.
struct Taxonomy {
  core::LabelSpace labels;
  std::vector<std::string> types;
  // source name ("radhar", "mri", "mmfi") -> original label -> class index
  std::map<std::string, std::map<std::string, std::size_t>> source_labels;

  std::optional<std::size_t> map_source_label(const std::string& source, const std::string& label) const;
  // Class indices that occur in the given source.
  std::vector<std::size_t> classes_of(const std::string& source) const;
};

Taxonomy load_taxonomy(const std::filesystem::path& path);

// Location of the bundled taxonomy file (compile-time data directory).
std::filesystem::path default_taxonomy_path();

// Dataset code used in sample ids for each known source (D001..D003).
std::optional<int> dataset_code(const std::string& source);

}  // namespace dapnet::ingest
