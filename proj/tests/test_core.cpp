// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The dapnet Authors

#include <doctest.h>

#include <random>

#include "dapnet/core/archive.hpp"
#include "dapnet/core/config.hpp"
#include "dapnet/core/error.hpp"
#include "dapnet/core/manifest.hpp"
#include "dapnet/core/types.hpp"
#include "dapnet/core/zip.hpp"
#include "support.hpp"

using namespace dapnet;
using namespace dapnet::core;

namespace {

ClipRecord sample_record(std::uint64_t seed) {
  ClipRecord r;
  r.clip = testing::random_clip(kFrames, kPointsPerFrame, 17, seed, 5);
  r.id = {2, 7, 1, 3, 12};
  r.label = 6;
  r.label_name = "wave";
  r.source = {"mri", 77e9, 10.0, "bench"};
  r.normalization = Normalization::kClipLevel;
  return r;
}

FormatError::Kind read_error_kind(const std::filesystem::path& p, const LabelSpace* labels = nullptr) {
  try {
    read_clip_archive(p, labels);
  } catch (const FormatError& e) {
    return e.kind();
  }
  FAIL("no FormatError");
  return FormatError::Kind::kBadContainer;
}

}  // namespace

TEST_CASE("sample ids use fixed-width fields") {
  CHECK(encode_sample_id({1, 1, 1, 1, 1}) == "D001A001E001P001S0001");
  CHECK(encode_sample_id({3, 33, 6, 62, 9999}) == "D003A033E006P062S9999");
  CHECK(decode_sample_id("D003A033E006P062S9999") == SampleId{3, 33, 6, 62, 9999});
}

TEST_CASE("sample id round-trips on random valid ids") {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> f3(1, 999), f4(1, 9999);
  for (int i = 0; i < 500; ++i) {
    const SampleId id{f3(rng), f3(rng), f3(rng), f3(rng), f4(rng)};
    const auto text = encode_sample_id(id);
    CHECK(decode_sample_id(text) == id);
    CHECK(encode_sample_id(decode_sample_id(text)) == text);
  }
}

TEST_CASE("sample id out of range names the field") {
  try {
    encode_sample_id({1, 1000, 1, 1, 1});
    FAIL("expected rejection");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("action") != std::string::npos);
  }
  CHECK_THROWS(encode_sample_id({1, 1, 1, 1, 0}));
  CHECK_THROWS(encode_sample_id({1, 1, 1, 1, 10000}));
  CHECK_FALSE(try_decode_sample_id("D01A001E001P001S0001").has_value());
  CHECK_FALSE(try_decode_sample_id("X001A001E001P001S0001").has_value());
}

TEST_CASE("source meta requires positive rates") {
  CHECK_NOTHROW(SourceMeta{"s", 77e9, 10.0, ""}.validate());
  CHECK_THROWS(SourceMeta{"s", 0.0, 10.0, ""}.validate());
  CHECK_THROWS(SourceMeta{"s", 77e9, -1.0, ""}.validate());
}

TEST_CASE("label space keeps stable unique indices") {
  LabelSpace labels({"walk", "jump", "squat"});
  CHECK(labels.size() == 3);
  CHECK(labels.index_of("squat") == 2);
  CHECK_FALSE(labels.find("run").has_value());
  CHECK_THROWS(LabelSpace({"a", "a"}));
}

TEST_CASE("clip archive round-trip is bitwise lossless") {
  const auto dir = testing::temp_dir("core_archive");
  const auto rec = sample_record(3);
  write_clip_archive(rec, dir / "a.zip");
  const auto back = read_clip_archive(dir / "a.zip");
  CHECK(back.clip == rec.clip);
  CHECK(back.id == rec.id);
  CHECK(back.label == rec.label);
  CHECK(back.label_name == rec.label_name);
  CHECK(back.source == rec.source);
  CHECK(back.normalization == rec.normalization);

  write_clip_archive(back, dir / "b.zip");
  CHECK(read_file_bytes(dir / "a.zip") == read_file_bytes(dir / "b.zip"));
}

TEST_CASE("zero clip data entry is 32*64*5*4 bytes") {
  const auto dir = testing::temp_dir("core_zero");
  ClipRecord rec;
  rec.clip = ClipTensor::standard();
  rec.source = {"radhar", 77e9, 30.0, ""};
  write_clip_archive(rec, dir / "z.zip");
  const auto zip = ZipReader::open(dir / "z.zip");
  CHECK(zip.get("data").size() == 40960);
  CHECK(zip.contains("meta"));
}

TEST_CASE("malformed archives raise distinct format errors") {
  const auto dir = testing::temp_dir("core_bad");
  const auto rec = sample_record(4);
  write_clip_archive(rec, dir / "good.zip");
  const auto good = ZipReader::open(dir / "good.zip");

  ZipWriter no_meta;
  no_meta.add("data", good.get("data"));
  no_meta.write(dir / "no_meta.zip");
  CHECK(read_error_kind(dir / "no_meta.zip") == FormatError::Kind::kMissingEntry);

  ZipWriter short_data;
  std::vector<std::uint8_t> bytes = good.get("data");
  bytes.resize(bytes.size() - 4);
  short_data.add("data", bytes);
  short_data.add("meta", good.get_text("meta"));
  short_data.write(dir / "short.zip");
  CHECK(read_error_kind(dir / "short.zip") == FormatError::Kind::kShapeMismatch);

  const LabelSpace labels({"a", "b", "c"});
  CHECK(read_error_kind(dir / "good.zip", &labels) == FormatError::Kind::kLabelRange);

  auto raw = read_file_bytes(dir / "good.zip");
  raw.resize(raw.size() / 2);
  write_file_bytes(dir / "cut.zip", raw);
  CHECK_THROWS_AS(read_clip_archive(dir / "cut.zip"), FormatError);
}

TEST_CASE("non-standard clips are refused on write") {
  const auto dir = testing::temp_dir("core_nonstd");
  ClipRecord rec;
  rec.clip = ClipTensor(2, 8, kChannels);
  rec.source = {"s", 1.0, 1.0, ""};
  CHECK_THROWS(write_clip_archive(rec, dir / "x.zip"));
}

TEST_CASE("zip reader accepts deflate entries") {
  // Produced by an independent zip implementation (deflate, one entry).
  const std::vector<std::uint8_t> bytes = {
      0x50, 0x4b, 0x03, 0x04, 0x14, 0x00, 0x00, 0x00, 0x08, 0x00, 0x00, 0x00, 0x21, 0x00, 0xe3, 0x51, 0x3d, 0x8d,
      0x0a, 0x00, 0x00, 0x00, 0x17, 0x00, 0x00, 0x00, 0x09, 0x00, 0x00, 0x00, 0x68, 0x65, 0x6c, 0x6c, 0x6f, 0x2e,
      0x74, 0x78, 0x74, 0xcb, 0x48, 0xcd, 0xc9, 0xc9, 0x57, 0xc8, 0x40, 0x27, 0x01, 0x50, 0x4b, 0x01, 0x02, 0x14,
      0x03, 0x14, 0x00, 0x00, 0x00, 0x08, 0x00, 0x00, 0x00, 0x21, 0x00, 0xe3, 0x51, 0x3d, 0x8d, 0x0a, 0x00, 0x00,
      0x00, 0x17, 0x00, 0x00, 0x00, 0x09, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x80,
      0x01, 0x00, 0x00, 0x00, 0x00, 0x68, 0x65, 0x6c, 0x6c, 0x6f, 0x2e, 0x74, 0x78, 0x74, 0x50, 0x4b, 0x05, 0x06,
      0x00, 0x00, 0x00, 0x00, 0x01, 0x00, 0x01, 0x00, 0x37, 0x00, 0x00, 0x00, 0x31, 0x00, 0x00, 0x00, 0x00, 0x00};
  const auto zip = ZipReader::from_bytes(bytes);
  CHECK(zip.get_text("hello.txt") == "hello hello hello hello");
}

TEST_CASE("zip writer is deterministic") {
  ZipWriter a, b;
  a.add("x", std::string_view("payload"));
  b.add("x", std::string_view("payload"));
  CHECK(a.finish() == b.finish());
  CHECK(ZipReader::from_bytes(a.finish()).get_text("x") == "payload");
}

TEST_CASE("float packing is little-endian") {
  const std::vector<float> v = {1.0f};
  CHECK(pack_f32(v) == std::vector<std::uint8_t>{0x00, 0x00, 0x80, 0x3f});
  CHECK(unpack_f32(pack_f32(v)) == v);
}

TEST_CASE("manifest round-trips") {
  const auto dir = testing::temp_dir("core_manifest");
  const std::vector<ManifestEntry> entries = {{{1, 1, 1, 1, 1}, 0, "radhar", "clips/radhar/a.zip"},
                                              {{3, 12, 2, 5, 9}, 11, "mmfi", "clips/mmfi/b.zip"}};
  write_manifest(entries, dir / "manifest.csv");
  CHECK(read_manifest(dir / "manifest.csv") == entries);
}

TEST_CASE("config helpers flatten nested objects and parse literals") {
  const auto flat = flatten_json(nlohmann::json::parse(R"({"a": {"b": 1, "c": {"d": true}}, "e": [1, 2]})"));
  CHECK(flat.at("a.b") == 1);
  CHECK(flat.at("a.c.d") == true);
  CHECK(flat.at("e").is_array());
  CHECK(parse_cli_value("false") == false);
  CHECK(parse_cli_value("0.5") == 0.5);
  CHECK(parse_cli_value("per_class") == "per_class");
}
