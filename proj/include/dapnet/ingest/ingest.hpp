// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The dapnet Authors

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "dapnet/core/types.hpp"

namespace dapnet::ingest {

struct RawPoint {
  std::int64_t frame = 0;
  float x = 0, y = 0, z = 0, doppler = 0, intensity = 0;

  bool operator==(const RawPoint&) const = default;
};

// A point-cloud sequence in file order. Frame indices are nondecreasing,
// so each frame occupies a contiguous run of rows.
struct RawSequence {
  std::vector<RawPoint> rows;
  core::SourceMeta source;
  std::optional<std::size_t> label;
  std::optional<core::SampleId> id;

  struct FrameRun {
    std::int64_t frame;
    std::size_t begin;
    std::size_t end;
    std::size_t size() const { return end - begin; }
  };
  std::vector<FrameRun> frames() const;
  std::size_t frame_count() const { return frames().size(); }
};

// Header must name the columns Frame, X, Y, Z, Doppler, Intensity (any order,
// case-insensitive, surrounding whitespace ignored).
RawSequence parse_source_csv(std::string_view bytes, const core::SourceMeta& source);

// Fixed-length windows over distinct frames, starting at 0, stride, 2*stride, ...
// Each window's frame indices are shifted so its first frame is 0.
std::vector<RawSequence> slide_windows(const RawSequence& seq, std::size_t window, std::size_t stride);

inline std::size_t window_count(std::size_t frames, std::size_t window, std::size_t stride) {
  return frames < window ? 0 : (frames - window) / stride + 1;
}

// Inclusive frame-index range carrying an action label.
struct Segment {
  std::int64_t start = 0;
  std::int64_t end = 0;
  std::size_t label = 0;
};

std::vector<std::pair<RawSequence, std::size_t>> segment_actions(const RawSequence& seq,
                                                                 std::span<const Segment> segments);

enum class PolicyMode { kSlidingWindow, kSegmentation, kPassthrough };

struct PreprocessPolicy {
  PolicyMode mode = PolicyMode::kPassthrough;
  std::size_t window = 1;
  std::size_t stride = 1;
  std::vector<Segment> segments;
  // Segmentation followed by sliding windows over each segment (mRI style).
  bool window_after_segmentation = false;

  void validate() const;
};

// Per-source policies: radhar (60,10) windows; mri segments then (32,16)
// windows; mmfi segmentation only.
PreprocessPolicy policy_for_source(std::string_view source_name);

// Greedy max-min farthest point sampling on xyz. `xyz` holds N rows of 3.
// Seed is the point farthest from the centroid; ties go to the lowest index.
std::vector<std::size_t> farthest_point_sample(std::span<const float> xyz, std::size_t target);

// Uniform temporal index for output frame k of `out` when `in` > `out` frames.
inline std::size_t uniform_frame_index(std::size_t k, std::size_t in, std::size_t out) {
  return k * in / out;
}

// Converts a sequence to the [32, 64, 5] tensor: uniform temporal
// downsampling or zero padding, then per-frame FPS or cyclic repetition.
//
// Frames are the distinct frame indices present in the sequence. With
// `require_contiguous_frames`, a gap in the index range counts as an empty
// frame and is rejected.
core::ClipTensor standardize_clip(const RawSequence& seq, bool require_contiguous_frames = false);

// Per-channel statistics over rows of non-padded frames.
struct ChannelStats {
  std::array<double, core::kChannels> mean{};
  std::array<double, core::kChannels> stddev{};
};

inline constexpr double kStdFloor = 1e-8;

ChannelStats compute_stats(std::span<const core::ClipTensor> clips);
void apply_stats(core::ClipTensor& clip, const ChannelStats& stats);
void normalize(std::span<core::ClipTensor> clips, core::Normalization mode);

}  // namespace dapnet::ingest
