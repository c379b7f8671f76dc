// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The dapnet Authors

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace dapnet::core {

inline constexpr std::size_t kFrames = 32;
inline constexpr std::size_t kPointsPerFrame = 64;
inline constexpr std::size_t kChannels = 5;

// Channel layout of every point row.
enum Channel : std::size_t { kX = 0, kY = 1, kZ = 2, kDoppler = 3, kIntensity = 4 };

enum class Normalization { kNone, kClipLevel, kDatasetLevel };

std::string_view to_string(Normalization mode);
Normalization parse_normalization(std::string_view text);

// Radar source description. Frequencies in Hz.
struct SourceMeta {
  std::string name;
  double carrier_frequency_hz = 0.0;
  double frame_rate_hz = 0.0;
  std::string notes;

  void validate() const;
  bool operator==(const SourceMeta&) const = default;
};

// Dense [T, P, C] float tensor for one action clip.
//
// Besides the zero-padding mask, each frame records how many of its rows are
// distinct measured points (`valid_points`). Rows past that count are cyclic
// repeats added during standardization; Doppler statistics use only the
// distinct rows.
class ClipTensor {
 public:
  ClipTensor() = default;
  ClipTensor(std::size_t frames, std::size_t points, std::size_t channels);

  // Zero tensor with the standardized [32, 64, 5] shape and every frame padded.
  static ClipTensor standard();

  std::size_t frames() const noexcept { return frames_; }
  std::size_t points_per_frame() const noexcept { return points_; }
  std::size_t channels() const noexcept { return channels_; }
  bool is_standard() const noexcept;

  float& at(std::size_t t, std::size_t p, std::size_t c) {
    return data_[(t * points_ + p) * channels_ + c];
  }
  float at(std::size_t t, std::size_t p, std::size_t c) const {
    return data_[(t * points_ + p) * channels_ + c];
  }

  std::span<float> frame(std::size_t t) {
    return {data_.data() + t * points_ * channels_, points_ * channels_};
  }
  std::span<const float> frame(std::size_t t) const {
    return {data_.data() + t * points_ * channels_, points_ * channels_};
  }

  std::span<float> data() noexcept { return data_; }
  std::span<const float> data() const noexcept { return data_; }

  bool is_padded(std::size_t t) const { return pad_mask_[t] != 0; }
  void set_padded(std::size_t t, bool padded) { pad_mask_[t] = padded ? 1 : 0; }
  const std::vector<std::uint8_t>& pad_mask() const noexcept { return pad_mask_; }

  std::size_t valid_points(std::size_t t) const { return valid_[t]; }
  void set_valid_points(std::size_t t, std::size_t n);
  const std::vector<std::uint16_t>& valid_points() const noexcept { return valid_; }

  std::size_t unpadded_frames() const;

  bool operator==(const ClipTensor&) const = default;

 private:
  std::size_t frames_ = 0;
  std::size_t points_ = 0;
  std::size_t channels_ = 0;
  std::vector<float> data_;
  std::vector<std::uint8_t> pad_mask_;
  std::vector<std::uint16_t> valid_;
};

// Structured sample identifier, D{ddd}A{ddd}E{ddd}P{ddd}S{dddd}.
struct SampleId {
  int dataset = 1;
  int action = 1;
  int env = 1;
  int subject = 1;
  int seq = 1;

  bool operator==(const SampleId&) const = default;
  auto operator<=>(const SampleId&) const = default;
};

std::string encode_sample_id(const SampleId& id);
SampleId decode_sample_id(std::string_view text);
std::optional<SampleId> try_decode_sample_id(std::string_view text);

// Ordered action vocabulary. Index of a name is its class index.
class LabelSpace {
 public:
  LabelSpace() = default;
  explicit LabelSpace(std::vector<std::string> names);

  std::size_t size() const noexcept { return names_.size(); }
  const std::string& name(std::size_t index) const;
  std::optional<std::size_t> find(std::string_view name) const;
  std::size_t index_of(std::string_view name) const;
  const std::vector<std::string>& names() const noexcept { return names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace dapnet::core
