// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The dapnet Authors

#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "dapnet/core/types.hpp"

namespace dapnet::core {

// One row of a dataset manifest CSV: sample_id,label,source,path.
// Paths are stored relative to the manifest's directory when possible.
struct ManifestEntry {
  SampleId id;
  std::size_t label = 0;
  std::string source;
  std::string path;

  bool operator==(const ManifestEntry&) const = default;
};

void write_manifest(const std::vector<ManifestEntry>& entries, const std::filesystem::path& path);
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path);

// Resolves an entry path against the directory holding the manifest.
std::filesystem::path resolve_entry_path(const std::filesystem::path& manifest_path,
                                         const ManifestEntry& entry);

}  // namespace dapnet::core
