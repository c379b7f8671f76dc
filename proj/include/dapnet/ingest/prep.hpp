// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The dapnet Authors

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dapnet/core/manifest.hpp"
#include "dapnet/core/types.hpp"
#include "dapnet/ingest/taxonomy.hpp"

namespace dapnet::ingest {

// Carrier frequency and frame rate of the known sources.
std::optional<core::SourceMeta> known_source_meta(const std::string& source);

struct PrepOptions {
  core::Normalization normalization = core::Normalization::kClipLevel;
  std::filesystem::path taxonomy;  // empty: bundled file
};

struct PrepSummary {
  std::size_t sequences = 0;
  std::size_t frames = 0;  // distinct frames over all input sequences
  std::vector<core::ManifestEntry> entries;
};

// Input directory layout:
//   **/*.csv          one sequence per file ("Frame,X,Y,Z,Doppler,Intensity")
//   sequences.csv     optional: sequence_id,subject,env[,label]
//   segments.csv      segmentation sources: sequence_id,start,end,label
// A sequence id is the file path relative to the directory without the
// extension. Windowed sources take their label from sequences.csv or from the
// parent directory name. Labels are source-native names, unified class names
// or class indices.
//
// Writes clips/<source>/<sample id>.zip and manifest.csv under `out_dir`.
PrepSummary prepare_source(const std::filesystem::path& in_dir, const std::string& source,
                           const std::filesystem::path& out_dir, const PrepOptions& opt = {});

}  // namespace dapnet::ingest
