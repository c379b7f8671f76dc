// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The dapnet Authors

#include "dapnet/core/archive.hpp"

#include <json.hpp>

#include "dapnet/core/error.hpp"
#include "dapnet/core/zip.hpp"

namespace dapnet::core {

using nlohmann::json;

void write_clip_archive(const ClipRecord& record, const std::filesystem::path& path) {
  const ClipTensor& clip = record.clip;
  if (!clip.is_standard()) {
    throw ValidationError("refusing to archive a clip of shape [" + std::to_string(clip.frames()) +
                          "," + std::to_string(clip.points_per_frame()) + "," +
                          std::to_string(clip.channels()) + "]; expected [32,64,5]");
  }
  record.source.validate();

  json meta;
  meta["format"] = "dapnet-clip";
  meta["version"] = kClipArchiveVersion;
  meta["sample_id"] = encode_sample_id(record.id);
  meta["label"] = record.label;
  meta["label_name"] = record.label_name;
  meta["shape"] = {clip.frames(), clip.points_per_frame(), clip.channels()};
  meta["source"] = {{"name", record.source.name},
                    {"carrier_frequency_hz", record.source.carrier_frequency_hz},
                    {"frame_rate_hz", record.source.frame_rate_hz},
                    {"notes", record.source.notes}};
  meta["pad_mask"] = clip.pad_mask();
  meta["valid_points"] = clip.valid_points();
  meta["normalization"] = std::string(to_string(record.normalization));

  ZipWriter zip;
  zip.add("data", pack_f32(clip.data()));
  zip.add("meta", meta.dump(1));
  zip.write(path);
}

ClipRecord read_clip_archive(const std::filesystem::path& path, const LabelSpace* labels) {
  const ZipReader zip = ZipReader::open(path);
  const std::string where = " in '" + path.string() + "'";

  json meta;
  try {
    meta = json::parse(zip.get_text("meta"));
  } catch (const json::exception& e) {
    throw FormatError(FormatError::Kind::kBadMetadata, "unreadable meta entry" + where + ": " + e.what());
  }
  const auto& data_bytes = zip.get("data");

  ClipRecord rec;
  try {
    if (meta.value("version", 0) != kClipArchiveVersion) {
      throw FormatError(FormatError::Kind::kVersionMismatch,
                        "unsupported clip archive version" + where);
    }
    const auto shape = meta.at("shape").get<std::vector<std::size_t>>();
    if (shape != std::vector<std::size_t>{kFrames, kPointsPerFrame, kChannels}) {
      throw FormatError(FormatError::Kind::kShapeMismatch, "non-standard clip shape" + where);
    }
    const std::size_t expected = kFrames * kPointsPerFrame * kChannels * sizeof(float);
    if (data_bytes.size() != expected) {
      throw FormatError(FormatError::Kind::kShapeMismatch,
                        "data entry holds " + std::to_string(data_bytes.size()) + " bytes, expected " +
                            std::to_string(expected) + where);
    }
    rec.clip = ClipTensor::standard();
    const auto values = unpack_f32(data_bytes);
    std::copy(values.begin(), values.end(), rec.clip.data().begin());

    const auto pad = meta.at("pad_mask").get<std::vector<int>>();
    const auto valid = meta.at("valid_points").get<std::vector<std::size_t>>();
    if (pad.size() != kFrames || valid.size() != kFrames) {
      throw FormatError(FormatError::Kind::kShapeMismatch, "pad_mask/valid_points length" + where);
    }
    for (std::size_t t = 0; t < kFrames; ++t) {
      rec.clip.set_padded(t, pad[t] != 0);
      rec.clip.set_valid_points(t, valid[t]);
    }

    rec.id = decode_sample_id(meta.at("sample_id").get<std::string>());
    rec.label = meta.at("label").get<std::size_t>();
    rec.label_name = meta.value("label_name", "");
    const auto& src = meta.at("source");
    rec.source.name = src.at("name").get<std::string>();
    rec.source.carrier_frequency_hz = src.at("carrier_frequency_hz").get<double>();
    rec.source.frame_rate_hz = src.at("frame_rate_hz").get<double>();
    rec.source.notes = src.value("notes", "");
    rec.normalization = parse_normalization(meta.value("normalization", "none"));
  } catch (const json::exception& e) {
    throw FormatError(FormatError::Kind::kBadMetadata, std::string("malformed meta") + where + ": " + e.what());
  } catch (const ValidationError& e) {
    throw FormatError(FormatError::Kind::kBadMetadata, std::string(e.what()) + where);
  } catch (const ConfigError& e) {
    throw FormatError(FormatError::Kind::kBadMetadata, std::string(e.what()) + where);
  }

  if (labels != nullptr && rec.label >= labels->size()) {
    throw FormatError(FormatError::Kind::kLabelRange,
                      "label index " + std::to_string(rec.label) + " outside label space of size " +
                          std::to_string(labels->size()) + where);
  }
  return rec;
}

}  // namespace dapnet::core
