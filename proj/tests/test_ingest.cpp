// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The dapnet Authors

#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "dapnet/core/archive.hpp"
#include "dapnet/core/error.hpp"
#include "dapnet/core/manifest.hpp"
#include "dapnet/ingest/ingest.hpp"
#include "dapnet/ingest/prep.hpp"
#include "dapnet/ingest/taxonomy.hpp"
#include "support.hpp"

using namespace dapnet;
using namespace dapnet::ingest;

namespace {

const core::SourceMeta kMeta{"radhar", 77e9, 30.0, "test"};

// `counts[f]` points in frame f; point values encode (frame, index).
RawSequence make_sequence(const std::vector<std::size_t>& counts, std::int64_t first_frame = 0) {
  RawSequence seq;
  seq.source = kMeta;
  for (std::size_t f = 0; f < counts.size(); ++f) {
    for (std::size_t i = 0; i < counts[f]; ++i) {
      RawPoint p;
      p.frame = first_frame + static_cast<std::int64_t>(f);
      p.x = static_cast<float>(f);
      p.y = static_cast<float>(i);
      p.z = static_cast<float>(f * 100 + i) * 0.01f;
      p.doppler = static_cast<float>(i) * 0.1f - 0.5f;
      p.intensity = 1.0f + static_cast<float>(i);
      seq.rows.push_back(p);
    }
  }
  return seq;
}

ParseError::Reason parse_reason(const std::string& text, std::size_t* line = nullptr) {
  try {
    parse_source_csv(text, kMeta);
  } catch (const ParseError& e) {
    if (line) *line = e.line();
    return e.reason();
  }
  FAIL("no ParseError");
  return ParseError::Reason::kEmpty;
}

std::string read_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::filesystem::path& p, const std::string& text) {
  std::filesystem::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

std::string csv_frames(std::size_t frames, std::size_t points) {
  std::string s = "Frame,X,Y,Z,Doppler,Intensity\n";
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t i = 0; i < points; ++i) {
      s += std::to_string(f) + "," + std::to_string(0.01 * static_cast<double>(i)) + ",2.0," +
           std::to_string(0.1 * static_cast<double>(f % 7)) + "," + std::to_string(0.2 * static_cast<double>(i) - 0.3) +
           "," + std::to_string(10 + i) + "\n";
    }
  }
  return s;
}

}  // namespace

TEST_CASE("parse_source_csv reads rows and groups frames") {
  const auto seq = parse_source_csv("Frame,X,Y,Z,Doppler,Intensity\n0,1,2,3,0.5,10\n0,1.5,2,3,-0.5,11\n1,0,0,0,0,1\n",
                                    kMeta);
  REQUIRE(seq.rows.size() == 3);
  CHECK(seq.rows[1].x == doctest::Approx(1.5));
  CHECK(seq.rows[1].doppler == doctest::Approx(-0.5));
  const auto runs = seq.frames();
  REQUIRE(runs.size() == 2);
  CHECK(runs[0].size() == 2);
  CHECK(runs[1].size() == 1);
}

TEST_CASE("parse_source_csv accepts any column order, case and whitespace") {
  const auto seq = parse_source_csv(" intensity , DOPPLER,z,y,x,frame\r\n7, 0.25 ,3,2,1,4\r\n", kMeta);
  REQUIRE(seq.rows.size() == 1);
  CHECK(seq.rows[0].frame == 4);
  CHECK(seq.rows[0].x == 1.0f);
  CHECK(seq.rows[0].z == 3.0f);
  CHECK(seq.rows[0].doppler == 0.25f);
  CHECK(seq.rows[0].intensity == 7.0f);
}

TEST_CASE("parse_source_csv errors are typed and carry a line number") {
  CHECK(parse_reason("") == ParseError::Reason::kEmpty);
  CHECK(parse_reason("\n\n") == ParseError::Reason::kEmpty);
  CHECK(parse_reason("Frame,X,Y,Z,Doppler,Intensity\n") == ParseError::Reason::kEmpty);

  try {
    parse_source_csv("Frame,X,Y,Z,Intensity\n0,1,2,3,4\n", kMeta);
    FAIL("expected error");
  } catch (const ParseError& e) {
    CHECK(e.reason() == ParseError::Reason::kMissingColumn);
    CHECK(std::string(e.what()).find("Doppler") != std::string::npos);
  }

  std::size_t line = 0;
  CHECK(parse_reason("Frame,X,Y,Z,Doppler,Intensity\n0,1,2,3,4,5\n0,1,abc,3,4,5\n", &line) ==
        ParseError::Reason::kNonNumeric);
  CHECK(line == 3);
  CHECK(parse_reason("Frame,X,Y,Z,Doppler,Intensity\n0.5,1,2,3,4,5\n", &line) == ParseError::Reason::kNonNumeric);
  CHECK(parse_reason("Frame,X,Y,Z,Doppler,Intensity\n0,1,2,3,nan,5\n") == ParseError::Reason::kNonNumeric);
  CHECK(parse_reason("Frame,X,Y,Z,Doppler,Intensity\n0,1,2,3\n", &line) == ParseError::Reason::kRowWidth);
  CHECK(line == 2);
  CHECK(parse_reason("Frame,X,Y,Z,Doppler,Intensity\n2,1,2,3,4,5\n1,1,2,3,4,5\n", &line) ==
        ParseError::Reason::kFrameOrder);
  CHECK(line == 3);
}

TEST_CASE("slide_windows start offsets and rebasing") {
  const auto seq = make_sequence(std::vector<std::size_t>(100, 2), 7);
  const auto windows = slide_windows(seq, 60, 10);
  REQUIRE(windows.size() == 5);
  for (std::size_t w = 0; w < windows.size(); ++w) {
    const auto runs = windows[w].frames();
    REQUIRE(runs.size() == 60);
    CHECK(runs.front().frame == 0);
    CHECK(runs.back().frame == 59);
    CHECK(windows[w].rows.front().x == static_cast<float>(10 * w));
  }
  CHECK(slide_windows(make_sequence(std::vector<std::size_t>(60, 1)), 60, 10).size() == 1);
  CHECK(slide_windows(make_sequence(std::vector<std::size_t>(32, 1)), 32, 16).size() == 1);
  CHECK_THROWS_AS(slide_windows(make_sequence(std::vector<std::size_t>(31, 1)), 32, 16), ValidationError);
  CHECK_THROWS_AS(slide_windows(seq, 0, 1), ValidationError);
}

TEST_CASE("slide_windows count matches the closed form") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t window = 1 + rng() % 40;
    const std::size_t frames = window + rng() % 80;
    const std::size_t stride = 1 + rng() % 25;
    const auto seq = make_sequence(std::vector<std::size_t>(frames, 1));
    const auto windows = slide_windows(seq, window, stride);
    CHECK(windows.size() == (frames - window) / stride + 1);
    CHECK(windows.size() == window_count(frames, window, stride));
  }
}

TEST_CASE("segment_actions") {
  const auto seq = make_sequence(std::vector<std::size_t>(20, 3));
  const std::vector<Segment> two = {{0, 9, 1}, {10, 19, 4}};
  const auto out = segment_actions(seq, two);
  REQUIRE(out.size() == 2);
  CHECK(out[0].first.frame_count() == 10);
  CHECK(out[1].first.frame_count() == 10);
  CHECK(out[1].second == 4);
  CHECK(out[1].first.label == 4u);

  CHECK(segment_actions(seq, std::vector<Segment>{}).empty());

  const auto ten = make_sequence(std::vector<std::size_t>(10, 1));
  const std::vector<Segment> mid = {{5, 7, 0}};
  const auto sub = segment_actions(ten, mid);
  REQUIRE(sub.size() == 1);
  const auto runs = sub[0].first.frames();
  REQUIRE(runs.size() == 3);
  CHECK(runs[0].frame == 0);
  CHECK(runs[2].frame == 2);
  CHECK(sub[0].first.rows[0].x == 5.0f);

  const std::vector<Segment> overlap = {{0, 9, 0}, {9, 12, 1}};
  CHECK_THROWS_AS(segment_actions(seq, overlap), ValidationError);
  const std::vector<Segment> outside = {{15, 25, 0}};
  CHECK_THROWS_AS(segment_actions(seq, outside), ValidationError);
  const std::vector<Segment> reversed = {{5, 3, 0}};
  CHECK_THROWS_AS(segment_actions(seq, reversed), ValidationError);
}

TEST_CASE("policy_for_source") {
  const auto radhar = policy_for_source("radhar");
  CHECK(radhar.mode == PolicyMode::kSlidingWindow);
  CHECK(radhar.window == 60);
  CHECK(radhar.stride == 10);
  const auto mri = policy_for_source("mri");
  CHECK(mri.window == 32);
  CHECK(mri.stride == 16);
  CHECK(policy_for_source("mmfi").mode == PolicyMode::kSegmentation);
  CHECK_THROWS_AS(policy_for_source("kinect"), ConfigError);
}

TEST_CASE("standardize_clip pads short clips") {
  const auto clip = standardize_clip(make_sequence(std::vector<std::size_t>(20, 5)));
  CHECK(clip.frames() == core::kFrames);
  CHECK(clip.points_per_frame() == core::kPointsPerFrame);
  for (std::size_t t = 0; t < core::kFrames; ++t) {
    CHECK(clip.is_padded(t) == (t >= 20));
    if (t >= 20) {
      for (std::size_t p = 0; p < core::kPointsPerFrame; ++p)
        for (std::size_t c = 0; c < core::kChannels; ++c) CHECK(clip.at(t, p, c) == 0.0f);
    }
  }
}

TEST_CASE("standardize_clip uniform temporal index for F=40") {
  const std::vector<std::size_t> expected = {0,  1,  2,  3,  5,  6,  7,  8,  10, 11, 12, 13, 15, 16, 17, 18,
                                             20, 21, 22, 23, 25, 26, 27, 28, 30, 31, 32, 33, 35, 36, 37, 38};
  const auto clip = standardize_clip(make_sequence(std::vector<std::size_t>(40, 2)));
  for (std::size_t k = 0; k < core::kFrames; ++k) {
    CHECK(uniform_frame_index(k, 40, 32) == expected[k]);
    CHECK_FALSE(clip.is_padded(k));
    CHECK(clip.at(k, 0, core::kX) == static_cast<float>(expected[k]));
  }
}

TEST_CASE("standardize_clip cyclic repeat multiplicities") {
  const auto clip = standardize_clip(make_sequence({3}));
  std::map<float, int> mult;
  for (std::size_t p = 0; p < core::kPointsPerFrame; ++p) {
    ++mult[clip.at(0, p, core::kY)];
    CHECK(clip.at(0, p, core::kY) == static_cast<float>(p % 3));
  }
  CHECK(mult[0.0f] == 22);
  CHECK(mult[1.0f] == 21);
  CHECK(mult[2.0f] == 21);
  CHECK(clip.valid_points(0) == 3);
}

TEST_CASE("standardize_clip errors") {
  CHECK_THROWS_AS(standardize_clip(RawSequence{}), ValidationError);
  auto gap = make_sequence({2, 2, 2});
  for (auto& r : gap.rows)
    if (r.frame == 2) r.frame = 3;
  CHECK_NOTHROW(standardize_clip(gap));
  try {
    standardize_clip(gap, true);
    FAIL("expected error");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("frame 2") != std::string::npos);
  }
}

TEST_CASE("standardize_clip never synthesizes points") {
  std::mt19937_64 rng(5);
  std::normal_distribution<float> nd;
  for (int trial = 0; trial < 20; ++trial) {
    RawSequence seq;
    seq.source = kMeta;
    const std::size_t frames = 1 + rng() % 70;
    for (std::size_t f = 0; f < frames; ++f) {
      const std::size_t n = 1 + rng() % 120;
      for (std::size_t i = 0; i < n; ++i) {
        seq.rows.push_back({static_cast<std::int64_t>(f), nd(rng), nd(rng), nd(rng), nd(rng), std::abs(nd(rng))});
      }
    }
    std::set<std::array<float, 5>> inputs;
    for (const auto& r : seq.rows) inputs.insert({r.x, r.y, r.z, r.doppler, r.intensity});
    const auto clip = standardize_clip(seq);
    REQUIRE(clip.frames() == core::kFrames);
    REQUIRE(clip.points_per_frame() == core::kPointsPerFrame);
    REQUIRE(clip.channels() == core::kChannels);
    for (std::size_t t = 0; t < core::kFrames; ++t) {
      if (clip.is_padded(t)) continue;
      for (std::size_t p = 0; p < core::kPointsPerFrame; ++p) {
        const std::array<float, 5> v = {clip.at(t, p, 0), clip.at(t, p, 1), clip.at(t, p, 2), clip.at(t, p, 3),
                                        clip.at(t, p, 4)};
        CHECK(inputs.count(v) == 1);
      }
    }
  }
}

TEST_CASE("farthest_point_sample") {
  std::vector<float> line;
  for (int i = 0; i < 10; ++i) line.insert(line.end(), {static_cast<float>(i), 0.0f, 0.0f});
  // 0 and 9 tie for farthest from the centroid 4.5; the lower index seeds.
  const auto two = farthest_point_sample(line, 2);
  CHECK(std::set<std::size_t>(two.begin(), two.end()) == std::set<std::size_t>{0, 9});
  CHECK(two == std::vector<std::size_t>{0, 9});

  const auto all = farthest_point_sample(line, 10);
  CHECK(std::set<std::size_t>(all.begin(), all.end()).size() == 10);
  CHECK(all[0] == 0);
  CHECK(all[1] == 9);

  std::vector<float> skew = line;
  skew[0] = 1.0f;
  CHECK(farthest_point_sample(skew, 2) == std::vector<std::size_t>{9, 0});

  // Points 0..3 distinct, 4..7 duplicate them.
  std::vector<float> dup = {0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1};
  dup.insert(dup.end(), dup.begin(), dup.end());
  const auto picked = farthest_point_sample(dup, 4);
  std::set<std::array<float, 3>> seen;
  for (auto i : picked) seen.insert({dup[3 * i], dup[3 * i + 1], dup[3 * i + 2]});
  CHECK(seen.size() == 4);

  CHECK_THROWS_AS(farthest_point_sample(line, 11), ValidationError);
  CHECK_THROWS_AS(farthest_point_sample(line, 0), ValidationError);
}

TEST_CASE("farthest_point_sample is deterministic and permutation stable") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<float> u(-2.0f, 2.0f);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 70 + rng() % 60;
    std::vector<float> xyz(3 * n);
    for (auto& v : xyz) v = u(rng);
    const auto a = farthest_point_sample(xyz, 64);
    CHECK(a == farthest_point_sample(xyz, 64));

    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<float> shuffled(3 * n);
    for (std::size_t i = 0; i < n; ++i)
      for (int k = 0; k < 3; ++k) shuffled[3 * i + k] = xyz[3 * perm[i] + k];
    const auto b = farthest_point_sample(shuffled, 64);
    std::set<std::size_t> sa(a.begin(), a.end()), sb;
    for (auto i : b) sb.insert(perm[i]);
    CHECK(sa == sb);
  }
}

TEST_CASE("normalize modes") {
  auto base = testing::random_clip(core::kFrames, core::kPointsPerFrame, 40, 3, 6);
  for (std::size_t t = 0; t < 26; ++t)
    for (std::size_t p = 0; p < core::kPointsPerFrame; ++p) base.at(t, p, core::kDoppler) = 0.75f;

  std::vector<core::ClipTensor> none = {base};
  normalize(none, core::Normalization::kNone);
  CHECK(none[0] == base);

  std::vector<core::ClipTensor> clips = {base};
  normalize(clips, core::Normalization::kClipLevel);
  const auto stats = compute_stats(clips);
  for (std::size_t c = 0; c < core::kChannels; ++c) {
    CHECK(std::abs(stats.mean[c]) < 1e-5);
    if (c != core::kDoppler) CHECK(std::abs(stats.stddev[c] * stats.stddev[c] - 1.0) < 1e-5);
  }
  for (std::size_t t = 0; t < core::kFrames; ++t) {
    for (std::size_t p = 0; p < core::kPointsPerFrame; ++p) {
      if (t < 26) CHECK(clips[0].at(t, p, core::kDoppler) == 0.0f);
      if (t >= 26)
        for (std::size_t c = 0; c < core::kChannels; ++c) CHECK(clips[0].at(t, p, c) == 0.0f);
    }
  }

  auto twice = clips;
  normalize(twice, core::Normalization::kClipLevel);
  for (std::size_t i = 0; i < twice[0].data().size(); ++i)
    CHECK(twice[0].data()[i] == doctest::Approx(clips[0].data()[i]).epsilon(1e-5).scale(1.0));
}

TEST_CASE("normalize dataset level pools statistics") {
  std::vector<core::ClipTensor> clips = {testing::random_clip(core::kFrames, core::kPointsPerFrame, 64, 1),
                                         testing::random_clip(core::kFrames, core::kPointsPerFrame, 64, 2, 10)};
  for (auto& v : clips[1].data()) v = v * 3.0f + 2.0f;
  for (std::size_t t = 22; t < core::kFrames; ++t)
    for (std::size_t p = 0; p < core::kPointsPerFrame; ++p)
      for (std::size_t c = 0; c < core::kChannels; ++c) clips[1].at(t, p, c) = 0.0f;
  normalize(clips, core::Normalization::kDatasetLevel);
  const auto pooled = compute_stats(clips);
  const auto second = compute_stats(std::span<const core::ClipTensor>(&clips[1], 1));
  for (std::size_t c = 0; c < core::kChannels; ++c) {
    CHECK(std::abs(pooled.mean[c]) < 1e-5);
    CHECK(pooled.stddev[c] == doctest::Approx(1.0).epsilon(1e-5));
    CHECK(second.mean[c] > 0.1);
  }
}

TEST_CASE("bundled taxonomy") {
  const auto tax = load_taxonomy(default_taxonomy_path());
  CHECK(tax.labels.size() == 33);
  CHECK(tax.labels.name(0) == "walk");
  CHECK(tax.map_source_label("radhar", "walking") == 0u);
  CHECK(tax.map_source_label("mmfi", "Bowing") == 32u);
  CHECK_FALSE(tax.map_source_label("radhar", "bowing").has_value());
  CHECK(tax.classes_of("radhar").size() == 5);

  const auto radhar = tax.classes_of("radhar");
  std::set<std::size_t> seen(radhar.begin(), radhar.end());
  const auto mri = tax.classes_of("mri");
  seen.insert(mri.begin(), mri.end());
  std::vector<std::size_t> shared;
  for (auto c : tax.classes_of("mmfi"))
    if (seen.count(c)) shared.push_back(c);
  CHECK(shared == std::vector<std::size_t>{1, 2, 3, 9, 10, 11, 12, 13, 14});
  CHECK(dataset_code("mmfi") == 3);
  CHECK_FALSE(dataset_code("kinect").has_value());
}

TEST_CASE("prepare_source windows a radhar directory") {
  const auto dir = testing::temp_dir("prep");
  write_text(dir / "in" / "walking" / "seq1.csv", csv_frames(100, 3));
  const auto summary = prepare_source(dir / "in", "radhar", dir / "out");
  CHECK(summary.sequences == 1);
  CHECK(summary.frames == 100);
  REQUIRE(summary.entries.size() == 5);
  CHECK(core::read_manifest(dir / "out" / "manifest.csv") == summary.entries);
  std::set<std::string> ids;
  for (const auto& e : summary.entries) {
    CHECK(e.label == 0);
    CHECK(e.source == "radhar");
    ids.insert(core::encode_sample_id(e.id));
    const auto rec = core::read_clip_archive(dir / "out" / e.path);
    CHECK(rec.clip.frames() == core::kFrames);
    CHECK(rec.normalization == core::Normalization::kClipLevel);
    CHECK(rec.source.frame_rate_hz == 30.0);
  }
  CHECK(ids.size() == 5);

  const auto again = prepare_source(dir / "in", "radhar", dir / "out2");
  REQUIRE(again.entries == summary.entries);
  for (const auto& e : summary.entries) CHECK(read_bytes(dir / "out" / e.path) == read_bytes(dir / "out2" / e.path));
  CHECK(read_bytes(dir / "out" / "manifest.csv") == read_bytes(dir / "out2" / "manifest.csv"));

  CHECK_THROWS_AS(prepare_source(dir / "in", "kinect", dir / "out3"), ConfigError);
}

TEST_CASE("prepare_source segments with segments.csv") {
  const auto dir = testing::temp_dir("prep_seg");
  write_text(dir / "in" / "s01.csv", csv_frames(80, 70));
  write_text(dir / "in" / "sequences.csv", "sequence_id,subject,env\ns01,4,2\n");
  write_text(dir / "in" / "segments.csv", "sequence_id,start,end,label\ns01,0,29,Squat\ns01,40,79,Bowing\n");
  const auto summary = prepare_source(dir / "in", "mmfi", dir / "out");
  REQUIRE(summary.entries.size() == 2);
  CHECK(summary.entries[0].label == 2);
  CHECK(summary.entries[1].label == 32);
  CHECK(summary.entries[0].id.subject == 4);
  CHECK(summary.entries[0].id.env == 2);
  const auto rec = core::read_clip_archive(dir / "out" / summary.entries[0].path);
  CHECK(rec.clip.is_padded(29) == false);
  CHECK(rec.clip.is_padded(30) == true);
  CHECK(rec.clip.valid_points(0) == 64);

  std::filesystem::remove(dir / "in" / "segments.csv");
  CHECK_THROWS_AS(prepare_source(dir / "in", "mmfi", dir / "out2"), FormatError);
}
