// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The dapnet Authors

#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>

#include "dapnet/core/types.hpp"

namespace dapnet::core {

// Clip archive layout (zip, stored entries):
//   "data"  raw little-endian float32 tensor, [T, P, C] row-major
//   "meta"  UTF-8 JSON object:
//           {"format": "dapnet-clip", "version": 1, "sample_id": "...",
//            "label": k, "label_name": "...", "shape": [T, P, C],
//            "source": {"name", "carrier_frequency_hz", "frame_rate_hz", "notes"},
//            "pad_mask": [0|1 x T], "valid_points": [n_t x T],
//            "normalization": "none" | "clip_level" | "dataset_level"}
inline constexpr int kClipArchiveVersion = 1;

struct ClipRecord {
  ClipTensor clip;
  SampleId id;
  std::size_t label = 0;
  std::string label_name;
  SourceMeta source;
  Normalization normalization = Normalization::kNone;
};

void write_clip_archive(const ClipRecord& record, const std::filesystem::path& path);

// When `labels` is given, the stored label index is checked against it.
ClipRecord read_clip_archive(const std::filesystem::path& path,
                             const LabelSpace* labels = nullptr);

}  // namespace dapnet::core
