// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The dapnet Authors

#pragma once

// Synthetic multi-source mmWave point clouds of a stick-figure body.

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "dapnet/core/archive.hpp"
#include "dapnet/core/manifest.hpp"
#include "dapnet/core/types.hpp"
#include "dapnet/ingest/ingest.hpp"

namespace dapnet::synth {

inline constexpr double kSpeedOfLight = 299792458.0;

// f_d = 2 v_r f_c / c.
double doppler_shift(double radial_velocity, double carrier_hz);
double radial_velocity(double doppler_hz, double carrier_hz);

struct SourceProfile {
  core::SourceMeta meta;
  double range_m = 2.0;
  double density_scale = 400.0;      // expected body points per frame at 1 m
  double noise_sigma_xyz = 0.03;
  double noise_sigma_doppler = 0.05;
  double doppler_quantization = 0.05;
  double height_m = 1.0;             // sensor mounting height
  double clutter_rate = 3.0;         // expected static clutter points per frame
  double intensity_scale = 100.0;    // intensity at 1 m
  double yaw_deg = 0.0;              // body heading relative to the line of sight

  void validate() const;
  double expected_points(double range) const;  // max(density_scale / R^4, 1)
};

enum Region : std::size_t { kTorso = 0, kLeftArm, kRightArm, kLeftLeg, kRightLeg, kRegions };

struct Oscillation {
  double amplitude_m = 0.0;  // tip displacement amplitude
  double frequency_hz = 0.0;
  double phase = 0.0;
};

struct MotionPrimitive {
  std::string name;
  std::array<Oscillation, kRegions> regions{};
  double static_fraction = 0.3;  // share of body points drawn from the torso

  void validate() const;
  double max_frequency() const;
};

// Per-clip variation drawn from the seed.
struct ClipVariation {
  double range_offset_m = 0.0;
  double lateral_offset_m = 0.0;
  double body_scale = 1.0;
  double amplitude_scale = 1.0;
  double frequency_scale = 1.0;
  double phase = 0.0;
};

inline constexpr double kClipDuration = 3.2;
inline constexpr double kMaxFrequencyScale = 1.1;

ClipVariation draw_variation(std::uint64_t seed);

// Throws ValidationError naming the frequency when any region would be
// aliased at the profile's frame rate.
void check_nyquist(const MotionPrimitive& primitive, const SourceProfile& profile);

struct GeneratedPoint {
  double x, y, z;
  double radial_velocity;  // analytic, before noise
  double doppler;          // stored channel
  double intensity;
  bool clutter;
};

struct GeneratedFrame {
  std::vector<GeneratedPoint> points;
};

std::vector<GeneratedFrame> simulate(const MotionPrimitive& primitive, const SourceProfile& profile,
                                     std::uint64_t seed, const ClipVariation& variation,
                                     double duration_s = kClipDuration);

ingest::RawSequence generate_clip(const MotionPrimitive& primitive, const SourceProfile& profile,
                                  std::uint64_t seed, std::size_t label);

std::vector<SourceProfile> default_profiles();
std::vector<MotionPrimitive> default_primitives();

struct SynthConfig {
  std::uint64_t seed = 0;
  std::size_t clips_per_class = 34;
  std::size_t classes = 6;  // first N primitives
  std::size_t subjects = 10;
  std::size_t envs = 2;
  core::Normalization normalization = core::Normalization::kClipLevel;
  std::vector<SourceProfile> profiles = default_profiles();
  std::vector<MotionPrimitive> primitives = default_primitives();

  void validate() const;
};

// Flat keys synth.*; "synth.profiles" and "synth.primitives" take arrays of
// objects. Unknown keys are rejected.
void apply_synth_key(SynthConfig& cfg, const std::string& key, const nlohmann::json& value);
nlohmann::json synth_config_to_json(const SynthConfig& cfg);
std::vector<std::pair<std::string, std::string>> synth_config_docs();

// Standardized, normalized records in (source, class, clip) order.
std::vector<core::ClipRecord> generate_benchmark(const SynthConfig& cfg);

// Writes archives under out_dir/clips and out_dir/manifest.csv.
std::vector<core::ManifestEntry> write_benchmark(const std::vector<core::ClipRecord>& records,
                                                 const std::filesystem::path& out_dir);

}  // namespace dapnet::synth
