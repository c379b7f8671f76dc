// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The dapnet Authors

#include "dapnet/core/types.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>

#include "dapnet/core/error.hpp"

namespace dapnet::core {

std::string_view to_string(Normalization mode) {
  switch (mode) {
    case Normalization::kNone:
      return "none";
    case Normalization::kClipLevel:
      return "clip_level";
    case Normalization::kDatasetLevel:
      return "dataset_level";
  }
  return "none";
}

Normalization parse_normalization(std::string_view text) {
  if (text == "none") return Normalization::kNone;
  if (text == "clip_level") return Normalization::kClipLevel;
  if (text == "dataset_level") return Normalization::kDatasetLevel;
  throw ConfigError("unknown normalization mode '" + std::string(text) +
                    "' (expected none, clip_level, dataset_level)");
}

void SourceMeta::validate() const {
  if (!(carrier_frequency_hz > 0.0) || !std::isfinite(carrier_frequency_hz)) {
    throw ValidationError("source '" + name + "': carrier_frequency must be > 0");
  }
  if (!(frame_rate_hz > 0.0) || !std::isfinite(frame_rate_hz)) {
    throw ValidationError("source '" + name + "': frame_rate must be > 0");
  }
}

ClipTensor::ClipTensor(std::size_t frames, std::size_t points, std::size_t channels)
    : frames_(frames),
      points_(points),
      channels_(channels),
      data_(frames * points * channels, 0.0f),
      pad_mask_(frames, 1),
      valid_(frames, 0) {}

ClipTensor ClipTensor::standard() { return ClipTensor(kFrames, kPointsPerFrame, kChannels); }

bool ClipTensor::is_standard() const noexcept {
  return frames_ == kFrames && points_ == kPointsPerFrame && channels_ == kChannels &&
         data_.size() == kFrames * kPointsPerFrame * kChannels;
}

void ClipTensor::set_valid_points(std::size_t t, std::size_t n) {
  if (n > points_) throw ValidationError("valid point count exceeds points per frame");
  valid_[t] = static_cast<std::uint16_t>(n);
}

std::size_t ClipTensor::unpadded_frames() const {
  return static_cast<std::size_t>(std::count(pad_mask_.begin(), pad_mask_.end(), 0));
}

namespace {

struct Field {
  char tag;
  int SampleId::*member;
  int width;
  const char* name;
};

constexpr Field kFields[] = {
    {'D', &SampleId::dataset, 3, "dataset"}, {'A', &SampleId::action, 3, "action"},
    {'E', &SampleId::env, 3, "env"},         {'P', &SampleId::subject, 3, "subject"},
    {'S', &SampleId::seq, 4, "seq"},
};

int width_limit(int width) {
  int limit = 1;
  for (int i = 0; i < width; ++i) limit *= 10;
  return limit - 1;
}

}  // namespace

std::string encode_sample_id(const SampleId& id) {
  std::string out;
  out.reserve(21);
  for (const auto& f : kFields) {
    const int value = id.*f.member;
    if (value < 1 || value > width_limit(f.width)) {
      throw ValidationError("sample id field '" + std::string(f.name) + "' out of range: " +
                            std::to_string(value));
    }
    const std::string digits = std::to_string(value);
    out += f.tag;
    out.append(static_cast<std::size_t>(f.width) - digits.size(), '0');
    out += digits;
  }
  return out;
}

std::optional<SampleId> try_decode_sample_id(std::string_view text) {
  SampleId id;
  std::size_t pos = 0;
  for (const auto& f : kFields) {
    if (pos + 1 + static_cast<std::size_t>(f.width) > text.size() || text[pos] != f.tag) {
      return std::nullopt;
    }
    ++pos;
    int value = 0;
    const char* first = text.data() + pos;
    const char* last = first + f.width;
    if (!std::all_of(first, last, [](char c) { return c >= '0' && c <= '9'; })) return std::nullopt;
    std::from_chars(first, last, value);
    if (value < 1) return std::nullopt;
    id.*f.member = value;
    pos += static_cast<std::size_t>(f.width);
  }
  if (pos != text.size()) return std::nullopt;
  return id;
}

SampleId decode_sample_id(std::string_view text) {
  auto id = try_decode_sample_id(text);
  if (!id) throw ValidationError("malformed sample id '" + std::string(text) + "'");
  return *id;
}

LabelSpace::LabelSpace(std::vector<std::string> names) : names_(std::move(names)) {
  for (std::size_t i = 0; i < names_.size(); ++i) {
    if (!index_.emplace(names_[i], i).second) {
      throw ValidationError("duplicate class name '" + names_[i] + "'");
    }
  }
}

const std::string& LabelSpace::name(std::size_t index) const {
  if (index >= names_.size()) {
    throw ValidationError("class index " + std::to_string(index) + " outside label space of size " +
                          std::to_string(names_.size()));
  }
  return names_[index];
}

std::optional<std::size_t> LabelSpace::find(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t LabelSpace::index_of(std::string_view name) const {
  auto idx = find(name);
  if (!idx) throw ValidationError("unknown class name '" + std::string(name) + "'");
  return *idx;
}

}  // namespace dapnet::core
