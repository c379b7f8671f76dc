// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The dapnet Authors

#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "dapnet/core/types.hpp"
#include "dapnet/model/nn.hpp"

namespace dapnet::testing {

// Clip of the given shape with Gaussian coordinates, signed Doppler and
// positive intensity. `valid` points per frame are distinct, the rest repeat.
inline core::ClipTensor random_clip(std::size_t frames, std::size_t points, std::size_t valid, std::uint64_t seed,
                                    std::size_t padded_tail = 0) {
  core::ClipTensor clip(frames, points, core::kChannels);
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> nd(0.0f, 1.0f);
  for (std::size_t t = 0; t + padded_tail < frames; ++t) {
    clip.set_padded(t, false);
    clip.set_valid_points(t, valid);
    for (std::size_t p = 0; p < valid; ++p) {
      for (std::size_t c = 0; c < core::kChannels; ++c) clip.at(t, p, c) = nd(rng);
      clip.at(t, p, core::kIntensity) = std::abs(clip.at(t, p, core::kIntensity));
    }
    for (std::size_t p = valid; p < points; ++p) {
      for (std::size_t c = 0; c < core::kChannels; ++c) clip.at(t, p, c) = clip.at(t, p % valid, c);
    }
  }
  return clip;
}

template <class S>
double rel_error(const nn::Matrix<S>& a, const nn::Matrix<S>& b) {
  const double denom = std::max(static_cast<double>(a.norm()), static_cast<double>(b.norm()));
  if (denom == 0.0) return 0.0;
  return static_cast<double>((a - b).norm()) / denom;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("dapnet_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace dapnet::testing
