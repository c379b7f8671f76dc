// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The dapnet Authors

#include "dapnet/synth/synth.hpp"

#include <cmath>
#include <random>

#include "dapnet/core/error.hpp"
#include "dapnet/d2r/d2r.hpp"

namespace dapnet::synth {

namespace {

constexpr double kPi = 3.14159265358979323846;

struct Segment {
  double jx, jz;     // joint offset from the body origin (lateral, height)
  double length;
  bool upward;
};

std::array<Segment, kRegions> skeleton(double s) {
  return {{
      {0.0, 0.9 * s, 0.6 * s, true},     // torso, hip to neck
      {-0.2 * s, 1.45 * s, 0.65 * s, false},
      {0.2 * s, 1.45 * s, 0.65 * s, false},
      {-0.1 * s, 0.9 * s, 0.9 * s, false},
      {0.1 * s, 0.9 * s, 0.9 * s, false},
  }};
}

double quantize(double v, double step) { return std::round(v / step) * step; }

std::uint64_t clip_seed(std::uint64_t seed, std::size_t source, std::size_t cls, std::size_t clip) {
  return d2r::mix_seed(d2r::mix_seed(d2r::mix_seed(seed, source), cls), clip);
}

}  // namespace

double doppler_shift(double radial_velocity, double carrier_hz) {
  return 2.0 * radial_velocity * carrier_hz / kSpeedOfLight;
}

double radial_velocity(double doppler_hz, double carrier_hz) {
  return doppler_hz * kSpeedOfLight / (2.0 * carrier_hz);
}

void SourceProfile::validate() const {
  meta.validate();
  if (!(range_m > 0 && density_scale > 0 && noise_sigma_xyz > 0 && noise_sigma_doppler > 0 &&
        doppler_quantization > 0 && height_m > 0 && intensity_scale > 0 && clutter_rate >= 0)) {
    throw ValidationError("source profile '" + meta.name + "': parameters must be positive");
  }
  if (!(std::abs(yaw_deg) < 90.0)) {
    throw ValidationError("source profile '" + meta.name + "': yaw_deg must lie in (-90, 90)");
  }
}

double SourceProfile::expected_points(double range) const {
  return std::max(density_scale / std::pow(range, 4.0), 1.0);
}

void MotionPrimitive::validate() const {
  if (name.empty()) throw ValidationError("motion primitive needs a name");
  for (const auto& r : regions) {
    if (r.amplitude_m < 0 || r.frequency_hz < 0) {
      throw ValidationError("motion primitive '" + name + "': negative amplitude or frequency");
    }
  }
  if (!(static_fraction >= 0 && static_fraction <= 1)) {
    throw ValidationError("motion primitive '" + name + "': static_fraction must lie in [0, 1]");
  }
}

double MotionPrimitive::max_frequency() const {
  double f = 0.0;
  for (const auto& r : regions) {
    if (r.amplitude_m > 0) f = std::max(f, r.frequency_hz);
  }
  return f;
}

void check_nyquist(const MotionPrimitive& primitive, const SourceProfile& profile) {
  const double f = primitive.max_frequency() * kMaxFrequencyScale;
  if (!(profile.meta.frame_rate_hz >= 2.0 * f)) {
    throw ValidationError("motion '" + primitive.name + "' reaches " + std::to_string(f) +
                          " Hz, above the Nyquist limit " + std::to_string(profile.meta.frame_rate_hz / 2.0) +
                          " Hz of source '" + profile.meta.name + "'");
  }
}

ClipVariation draw_variation(std::uint64_t seed) {
  std::mt19937_64 rng(d2r::mix_seed(seed, 0x5eed));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ClipVariation v;
  v.range_offset_m = -0.3 + 0.6 * u(rng);
  v.lateral_offset_m = -0.3 + 0.6 * u(rng);
  v.body_scale = 0.9 + 0.2 * u(rng);
  v.amplitude_scale = 0.8 + 0.4 * u(rng);
  v.frequency_scale = 0.9 + 0.2 * u(rng);
  v.phase = 2.0 * kPi * u(rng);
  return v;
}

std::vector<GeneratedFrame> simulate(const MotionPrimitive& primitive, const SourceProfile& profile,
                                     std::uint64_t seed, const ClipVariation& var, double duration_s) {
  primitive.validate();
  profile.validate();
  check_nyquist(primitive, profile);

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const double range = std::max(0.5, profile.range_m + var.range_offset_m);
  const auto bones = skeleton(var.body_scale);
  const double h = profile.height_m;
  const double yaw = profile.yaw_deg * kPi / 180.0;
  const double cy = std::cos(yaw), sy = std::sin(yaw);
  const auto frames = static_cast<std::size_t>(std::llround(duration_s * profile.meta.frame_rate_hz));

  std::vector<std::array<double, 3>> clutter(8);
  for (auto& c : clutter) {
    c = {-1.5 + 3.0 * unit(rng), std::max(1.0, range - 0.5) + 2.0 * unit(rng), -h + 2.5 * unit(rng)};
  }

  double limb_total = 0.0;
  for (std::size_t r = kLeftArm; r < kRegions; ++r) limb_total += bones[r].length;

  std::poisson_distribution<int> body_count(profile.expected_points(range));
  std::poisson_distribution<int> clutter_count(profile.clutter_rate);

  std::vector<GeneratedFrame> out(frames);
  for (std::size_t k = 0; k < frames; ++k) {
    const double t = static_cast<double>(k) / profile.meta.frame_rate_hz;
    std::array<double, kRegions> theta{}, dtheta{};
    for (std::size_t r = 0; r < kRegions; ++r) {
      const auto& osc = primitive.regions[r];
      const double amp = std::min(1.0, osc.amplitude_m * var.amplitude_scale / bones[r].length);
      const double w = 2.0 * kPi * osc.frequency_hz * var.frequency_scale;
      theta[r] = amp * std::sin(w * t + osc.phase + var.phase);
      dtheta[r] = amp * w * std::cos(w * t + osc.phase + var.phase);
    }

    const int n_body = std::max(1, body_count(rng));
    auto& pts = out[k].points;
    for (int i = 0; i < n_body; ++i) {
      std::size_t r = kTorso;
      if (unit(rng) >= primitive.static_fraction) {
        double pick = unit(rng) * limb_total;
        r = kLeftArm;
        while (r + 1 < kRegions && pick > bones[r].length) {
          pick -= bones[r].length;
          ++r;
        }
      }
      const auto& b = bones[r];
      const double l = b.length * unit(rng);
      const double st = std::sin(theta[r]), ct = std::cos(theta[r]);
      // Swing in the body's sagittal plane, which is rotated by the yaw
      // about the vertical axis. At zero yaw, decreasing y moves toward the sensor.
      const double dir_z = b.upward ? ct : -ct;
      const double bx = b.jx + 0.04 * gauss(rng);
      const double by = -l * st;
      const double px = var.lateral_offset_m + bx * cy + by * sy;
      const double py = range - bx * sy + by * cy;
      const double pz = b.jz + l * dir_z - h;
      const double vb = -l * ct * dtheta[r];
      const double vx = vb * sy;
      const double vy = vb * cy;
      const double vz = (b.upward ? -st : st) * l * dtheta[r];
      const double dist = std::sqrt(px * px + py * py + pz * pz);
      const double vr = (vx * px + vy * py + vz * pz) / dist;
      GeneratedPoint p;
      p.x = px + profile.noise_sigma_xyz * gauss(rng);
      p.y = py + profile.noise_sigma_xyz * gauss(rng);
      p.z = pz + profile.noise_sigma_xyz * gauss(rng);
      p.radial_velocity = vr;
      p.doppler = quantize(vr + profile.noise_sigma_doppler * gauss(rng), profile.doppler_quantization);
      p.intensity = profile.intensity_scale / std::pow(dist, 4.0) * std::exp(0.3 * gauss(rng));
      p.clutter = false;
      pts.push_back(p);
    }
    const int n_clutter = clutter_count(rng);
    for (int i = 0; i < n_clutter; ++i) {
      const auto& c = clutter[static_cast<std::size_t>(unit(rng) * static_cast<double>(clutter.size())) % clutter.size()];
      const double dist = std::sqrt(c[0] * c[0] + c[1] * c[1] + c[2] * c[2]);
      GeneratedPoint p;
      p.x = c[0] + profile.noise_sigma_xyz * gauss(rng);
      p.y = c[1] + profile.noise_sigma_xyz * gauss(rng);
      p.z = c[2] + profile.noise_sigma_xyz * gauss(rng);
      p.radial_velocity = 0.0;
      p.doppler = quantize(profile.noise_sigma_doppler * gauss(rng), profile.doppler_quantization);
      p.intensity = profile.intensity_scale / std::pow(dist, 4.0) * std::exp(0.3 * gauss(rng));
      p.clutter = true;
      pts.push_back(p);
    }
  }
  return out;
}

ingest::RawSequence generate_clip(const MotionPrimitive& primitive, const SourceProfile& profile,
                                  std::uint64_t seed, std::size_t label) {
  const auto frames = simulate(primitive, profile, seed, draw_variation(seed));
  ingest::RawSequence seq;
  seq.source = profile.meta;
  seq.label = label;
  for (std::size_t k = 0; k < frames.size(); ++k) {
    for (const auto& p : frames[k].points) {
      seq.rows.push_back({static_cast<std::int64_t>(k), static_cast<float>(p.x), static_cast<float>(p.y),
                          static_cast<float>(p.z), static_cast<float>(p.doppler), static_cast<float>(p.intensity)});
    }
  }
  return seq;
}

std::vector<SourceProfile> default_profiles() {
  SourceProfile s1;
  s1.meta = {"s1", 77e9, 30.0, "77 GHz, 30 Hz, chest-height mount, near range"};
  s1.range_m = 2.0;
  s1.density_scale = 25.0 * std::pow(2.0, 4.0);
  s1.noise_sigma_xyz = 0.03;
  s1.noise_sigma_doppler = 0.04;
  s1.doppler_quantization = 0.05;
  s1.height_m = 1.3;
  s1.clutter_rate = 3.0;
  s1.intensity_scale = 150.0;

  SourceProfile s2;
  s2.meta = {"s2", 77e9, 10.0, "77 GHz, 10 Hz, table-height mount, mid range"};
  s2.range_m = 2.4;
  s2.density_scale = 20.0 * std::pow(2.4, 4.0);
  s2.noise_sigma_xyz = 0.05;
  s2.noise_sigma_doppler = 0.06;
  s2.doppler_quantization = 0.08;
  s2.height_m = 0.8;
  s2.clutter_rate = 5.0;
  s2.intensity_scale = 250.0;
  s2.yaw_deg = 35.0;

  SourceProfile s3;
  s3.meta = {"s3", 62e9, 30.0, "62 GHz, 30 Hz, elevated mount, far range"};
  s3.range_m = 3.0;
  s3.density_scale = 30.0 * std::pow(3.0, 4.0);
  s3.noise_sigma_xyz = 0.07;
  s3.noise_sigma_doppler = 0.08;
  s3.doppler_quantization = 0.12;
  s3.height_m = 2.0;
  s3.clutter_rate = 8.0;
  s3.intensity_scale = 600.0;
  s3.yaw_deg = 55.0;
  return {s1, s2, s3};
}

std::vector<MotionPrimitive> default_primitives() {
  auto make = [](std::string name, double static_fraction) {
    MotionPrimitive p;
    p.name = std::move(name);
    p.static_fraction = static_fraction;
    return p;
  };
  std::vector<MotionPrimitive> out;

  auto stand = make("stand still", 0.6);
  for (auto& r : stand.regions) r = {0.01, 0.3, 0.0};
  out.push_back(stand);

  auto wave = make("wave right hand", 0.3);
  wave.regions[kRightArm] = {0.45, 1.2, 0.0};
  out.push_back(wave);

  auto swing = make("swing both arms", 0.3);
  swing.regions[kLeftArm] = {0.35, 0.9, 0.0};
  swing.regions[kRightArm] = {0.35, 0.9, kPi};
  out.push_back(swing);

  auto kick = make("kick right leg", 0.3);
  kick.regions[kRightLeg] = {0.5, 0.8, 0.0};
  out.push_back(kick);

  auto bow = make("bow", 0.5);
  bow.regions[kTorso] = {0.45, 0.5, 0.0};
  out.push_back(bow);

  auto march = make("march in place", 0.3);
  march.regions[kLeftLeg] = {0.3, 1.6, 0.0};
  march.regions[kRightLeg] = {0.3, 1.6, kPi};
  march.regions[kLeftArm] = {0.15, 1.6, kPi};
  march.regions[kRightArm] = {0.15, 1.6, 0.0};
  out.push_back(march);
  return out;
}

void SynthConfig::validate() const {
  if (profiles.empty()) throw ConfigError("synth: at least one source profile required");
  if (classes == 0 || classes > primitives.size()) {
    throw ConfigError("synth.classes must lie in [1, " + std::to_string(primitives.size()) + "]");
  }
  if (clips_per_class == 0) throw ConfigError("synth.clips_per_class must be >= 1");
  if (subjects == 0 || envs == 0) throw ConfigError("synth.subjects and synth.envs must be >= 1");
  try {
    for (const auto& p : profiles) p.validate();
    for (std::size_t c = 0; c < classes; ++c) {
      primitives[c].validate();
      for (const auto& p : profiles) check_nyquist(primitives[c], p);
    }
  } catch (const ValidationError& e) {
    throw ConfigError(std::string("synth: ") + e.what());
  }
}

namespace {

template <class T>
T json_get(const nlohmann::json& obj, const std::string& field, const std::string& ctx, T fallback) {
  if (!obj.contains(field)) return fallback;
  try {
    return obj.at(field).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(ctx + "." + field + " has the wrong type");
  }
}

void reject_unknown(const nlohmann::json& obj, std::initializer_list<const char*> known, const std::string& ctx) {
  if (!obj.is_object()) throw ConfigError(ctx + " must be an object");
  for (const auto& [k, _] : obj.items()) {
    bool ok = false;
    for (const char* name : known) ok = ok || k == name;
    if (!ok) throw ConfigError("unknown config key '" + ctx + "." + k + "'");
  }
}

SourceProfile profile_from_json(const nlohmann::json& j, const std::string& ctx) {
  reject_unknown(j,
                 {"name", "carrier_frequency_hz", "frame_rate_hz", "notes", "range_m", "density_scale",
                  "noise_sigma_xyz", "noise_sigma_doppler", "doppler_quantization", "height_m", "clutter_rate",
                  "intensity_scale", "yaw_deg"},
                 ctx);
  SourceProfile p;
  p.meta.name = json_get<std::string>(j, "name", ctx, "");
  p.meta.carrier_frequency_hz = json_get<double>(j, "carrier_frequency_hz", ctx, 77e9);
  p.meta.frame_rate_hz = json_get<double>(j, "frame_rate_hz", ctx, 10.0);
  p.meta.notes = json_get<std::string>(j, "notes", ctx, "");
  p.range_m = json_get<double>(j, "range_m", ctx, p.range_m);
  p.density_scale = json_get<double>(j, "density_scale", ctx, p.density_scale);
  p.noise_sigma_xyz = json_get<double>(j, "noise_sigma_xyz", ctx, p.noise_sigma_xyz);
  p.noise_sigma_doppler = json_get<double>(j, "noise_sigma_doppler", ctx, p.noise_sigma_doppler);
  p.doppler_quantization = json_get<double>(j, "doppler_quantization", ctx, p.doppler_quantization);
  p.height_m = json_get<double>(j, "height_m", ctx, p.height_m);
  p.clutter_rate = json_get<double>(j, "clutter_rate", ctx, p.clutter_rate);
  p.intensity_scale = json_get<double>(j, "intensity_scale", ctx, p.intensity_scale);
  p.yaw_deg = json_get<double>(j, "yaw_deg", ctx, p.yaw_deg);
  return p;
}

nlohmann::json profile_to_json(const SourceProfile& p) {
  return {{"name", p.meta.name},
          {"carrier_frequency_hz", p.meta.carrier_frequency_hz},
          {"frame_rate_hz", p.meta.frame_rate_hz},
          {"notes", p.meta.notes},
          {"range_m", p.range_m},
          {"density_scale", p.density_scale},
          {"noise_sigma_xyz", p.noise_sigma_xyz},
          {"noise_sigma_doppler", p.noise_sigma_doppler},
          {"doppler_quantization", p.doppler_quantization},
          {"height_m", p.height_m},
          {"clutter_rate", p.clutter_rate},
          {"intensity_scale", p.intensity_scale},
          {"yaw_deg", p.yaw_deg}};
}

constexpr std::array<const char*, kRegions> kRegionNames = {"torso", "left_arm", "right_arm", "left_leg",
                                                            "right_leg"};

MotionPrimitive primitive_from_json(const nlohmann::json& j, const std::string& ctx) {
  reject_unknown(j, {"name", "static_fraction", "torso", "left_arm", "right_arm", "left_leg", "right_leg"}, ctx);
  MotionPrimitive p;
  p.name = json_get<std::string>(j, "name", ctx, "");
  p.static_fraction = json_get<double>(j, "static_fraction", ctx, p.static_fraction);
  for (std::size_t r = 0; r < kRegions; ++r) {
    if (!j.contains(kRegionNames[r])) continue;
    const auto& o = j.at(kRegionNames[r]);
    const std::string rctx = ctx + "." + kRegionNames[r];
    reject_unknown(o, {"amplitude_m", "frequency_hz", "phase"}, rctx);
    p.regions[r] = {json_get<double>(o, "amplitude_m", rctx, 0.0), json_get<double>(o, "frequency_hz", rctx, 0.0),
                    json_get<double>(o, "phase", rctx, 0.0)};
  }
  return p;
}

nlohmann::json primitive_to_json(const MotionPrimitive& p) {
  nlohmann::json j = {{"name", p.name}, {"static_fraction", p.static_fraction}};
  for (std::size_t r = 0; r < kRegions; ++r) {
    const auto& o = p.regions[r];
    j[kRegionNames[r]] = {{"amplitude_m", o.amplitude_m}, {"frequency_hz", o.frequency_hz}, {"phase", o.phase}};
  }
  return j;
}

std::size_t as_count(const nlohmann::json& v, const std::string& key) {
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw ConfigError("config key '" + key + "' expects a non-negative integer");
  }
  return v.get<std::size_t>();
}

}  // namespace

void apply_synth_key(SynthConfig& cfg, const std::string& key, const nlohmann::json& value) {
  if (key == "synth.seed") {
    cfg.seed = as_count(value, key);
  } else if (key == "synth.clips_per_class") {
    cfg.clips_per_class = as_count(value, key);
  } else if (key == "synth.classes") {
    cfg.classes = as_count(value, key);
  } else if (key == "synth.subjects") {
    cfg.subjects = as_count(value, key);
  } else if (key == "synth.envs") {
    cfg.envs = as_count(value, key);
  } else if (key == "synth.normalization") {
    if (!value.is_string()) throw ConfigError("config key 'synth.normalization' expects a string");
    cfg.normalization = core::parse_normalization(value.get<std::string>());
  } else if (key == "synth.profiles") {
    if (!value.is_array()) throw ConfigError("config key 'synth.profiles' expects an array");
    cfg.profiles.clear();
    for (std::size_t i = 0; i < value.size(); ++i) {
      cfg.profiles.push_back(profile_from_json(value[i], "synth.profiles[" + std::to_string(i) + "]"));
    }
  } else if (key == "synth.primitives") {
    if (!value.is_array()) throw ConfigError("config key 'synth.primitives' expects an array");
    cfg.primitives.clear();
    for (std::size_t i = 0; i < value.size(); ++i) {
      cfg.primitives.push_back(primitive_from_json(value[i], "synth.primitives[" + std::to_string(i) + "]"));
    }
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

nlohmann::json synth_config_to_json(const SynthConfig& cfg) {
  nlohmann::json profiles = nlohmann::json::array(), primitives = nlohmann::json::array();
  for (const auto& p : cfg.profiles) profiles.push_back(profile_to_json(p));
  for (const auto& p : cfg.primitives) primitives.push_back(primitive_to_json(p));
  return {{"synth.seed", cfg.seed},
          {"synth.clips_per_class", cfg.clips_per_class},
          {"synth.classes", cfg.classes},
          {"synth.subjects", cfg.subjects},
          {"synth.envs", cfg.envs},
          {"synth.normalization", std::string(core::to_string(cfg.normalization))},
          {"synth.profiles", profiles},
          {"synth.primitives", primitives}};
}

std::vector<std::pair<std::string, std::string>> synth_config_docs() {
  return {{"synth.seed", "Base seed of the generator."},
          {"synth.clips_per_class", "Clips per class and source."},
          {"synth.classes", "Number of motion primitives used (first N)."},
          {"synth.subjects", "Distinct subject indices cycled over clips."},
          {"synth.envs", "Distinct scene indices cycled over clips."},
          {"synth.normalization", "none, clip_level or dataset_level."},
          {"synth.profiles", "Array of source profiles (name, carrier_frequency_hz, frame_rate_hz, range_m, ...)."},
          {"synth.primitives", "Array of motion primitives (name, static_fraction, per-region oscillations)."}};
}

std::vector<core::ClipRecord> generate_benchmark(const SynthConfig& cfg) {
  cfg.validate();
  std::vector<core::ClipRecord> records;
  records.reserve(cfg.profiles.size() * cfg.classes * cfg.clips_per_class);
  for (std::size_t s = 0; s < cfg.profiles.size(); ++s) {
    for (std::size_t c = 0; c < cfg.classes; ++c) {
      for (std::size_t i = 0; i < cfg.clips_per_class; ++i) {
        const auto seq = generate_clip(cfg.primitives[c], cfg.profiles[s], clip_seed(cfg.seed, s, c, i), c);
        core::ClipRecord r;
        r.clip = ingest::standardize_clip(seq);
        r.id = {static_cast<int>(s + 1), static_cast<int>(c + 1), static_cast<int>(1 + (i / cfg.subjects) % cfg.envs),
                static_cast<int>(1 + i % cfg.subjects), static_cast<int>(i + 1)};
        r.label = c;
        r.label_name = cfg.primitives[c].name;
        r.source = cfg.profiles[s].meta;
        r.normalization = cfg.normalization;
        records.push_back(std::move(r));
      }
    }
  }
  std::vector<core::ClipTensor> clips;
  clips.reserve(records.size());
  for (auto& r : records) clips.push_back(std::move(r.clip));
  ingest::normalize(clips, cfg.normalization);
  for (std::size_t i = 0; i < records.size(); ++i) records[i].clip = std::move(clips[i]);
  return records;
}

std::vector<core::ManifestEntry> write_benchmark(const std::vector<core::ClipRecord>& records,
                                                 const std::filesystem::path& out_dir) {
  std::vector<core::ManifestEntry> entries;
  entries.reserve(records.size());
  for (const auto& r : records) {
    const std::string id = core::encode_sample_id(r.id);
    const std::string rel = "clips/" + r.source.name + "/" + id + ".zip";
    core::write_clip_archive(r, out_dir / rel);
    entries.push_back({r.id, r.label, r.source.name, rel});
  }
  core::write_manifest(entries, out_dir / "manifest.csv");
  return entries;
}

}  // namespace dapnet::synth
