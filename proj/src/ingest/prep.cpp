// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The dapnet Authors

#include "dapnet/ingest/prep.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <sstream>
#include <tuple>

#include "dapnet/core/archive.hpp"
#include "dapnet/core/error.hpp"
#include "dapnet/core/zip.hpp"
#include "dapnet/ingest/ingest.hpp"

namespace dapnet::ingest {

namespace fs = std::filesystem;

namespace {

struct SequenceInfo {
  int subject = 1;
  int env = 1;
  std::string label;
};

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

std::vector<std::vector<std::string>> read_table(const fs::path& path, std::size_t min_cols) {
  const auto bytes = core::read_file_bytes(path);
  std::istringstream in(std::string(bytes.begin(), bytes.end()));
  std::vector<std::vector<std::string>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 || trim(line).empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(trim(cell));
    if (cells.size() < min_cols) {
      throw ParseError(ParseError::Reason::kRowWidth, lineno,
                       path.filename().string() + " line " + std::to_string(lineno) + ": expected " +
                           std::to_string(min_cols) + " columns");
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

template <class T>
T parse_number(const std::string& text, const fs::path& file, const char* what) {
  T value{};
  const auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || p != text.data() + text.size()) {
    throw ParseError(ParseError::Reason::kNonNumeric, 0,
                     file.filename().string() + ": " + what + " '" + text + "' is not an integer");
  }
  return value;
}

std::size_t resolve_label(const Taxonomy& tax, const std::string& source, const std::string& label) {
  if (auto id = tax.map_source_label(source, label)) return *id;
  if (auto id = tax.labels.find(label)) return *id;
  std::size_t value = 0;
  const auto [p, ec] = std::from_chars(label.data(), label.data() + label.size(), value);
  if (ec == std::errc() && p == label.data() + label.size() && value < tax.labels.size()) return value;
  throw FormatError(FormatError::Kind::kLabelRange, "label '" + label + "' is not known for source '" + source + "'");
}

}  // namespace

std::optional<core::SourceMeta> known_source_meta(const std::string& source) {
  if (source == "radhar") return core::SourceMeta{"radhar", 77e9, 30.0, "TI IWR1443, 76-81 GHz"};
  if (source == "mri") return core::SourceMeta{"mri", 77e9, 10.0, "TI IWR1443, 76-81 GHz"};
  if (source == "mmfi") return core::SourceMeta{"mmfi", 62e9, 30.0, "TI IWR6843, 60-64 GHz"};
  return std::nullopt;
}

PrepSummary prepare_source(const fs::path& in_dir, const std::string& source, const fs::path& out_dir,
                           const PrepOptions& opt) {
  const auto meta = known_source_meta(source);
  const auto code = dataset_code(source);
  if (!meta || !code) throw ConfigError("unknown source '" + source + "' (supported: radhar, mri, mmfi)");
  const PreprocessPolicy policy = policy_for_source(source);
  if (!fs::is_directory(in_dir)) throw Error("input directory '" + in_dir.string() + "' does not exist");
  const Taxonomy tax = load_taxonomy(opt.taxonomy.empty() ? default_taxonomy_path() : opt.taxonomy);

  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(in_dir)) {
    if (!e.is_regular_file() || e.path().extension() != ".csv") continue;
    const auto name = e.path().filename().string();
    if (e.path().parent_path() == in_dir && (name == "sequences.csv" || name == "segments.csv")) continue;
    files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());

  std::map<std::string, SequenceInfo> info;
  if (fs::exists(in_dir / "sequences.csv")) {
    for (const auto& row : read_table(in_dir / "sequences.csv", 3)) {
      SequenceInfo s;
      s.subject = parse_number<int>(row[1], "sequences.csv", "subject");
      s.env = parse_number<int>(row[2], "sequences.csv", "env");
      if (row.size() > 3) s.label = row[3];
      info[row[0]] = s;
    }
  }
  std::map<std::string, std::vector<Segment>> segments;
  if (policy.mode == PolicyMode::kSegmentation) {
    if (!fs::exists(in_dir / "segments.csv")) {
      throw FormatError(FormatError::Kind::kMissingEntry,
                        "source '" + source + "' needs segments.csv (sequence_id,start,end,label)");
    }
    for (const auto& row : read_table(in_dir / "segments.csv", 4)) {
      Segment s;
      s.start = parse_number<std::int64_t>(row[1], "segments.csv", "start");
      s.end = parse_number<std::int64_t>(row[2], "segments.csv", "end");
      s.label = resolve_label(tax, source, row[3]);
      segments[row[0]].push_back(s);
    }
    for (auto& [_, list] : segments) {
      std::sort(list.begin(), list.end(), [](const Segment& a, const Segment& b) { return a.start < b.start; });
    }
  }

  PrepSummary summary;
  std::vector<core::ClipRecord> records;
  std::map<std::tuple<int, int, int>, int> seq_counter;
  auto emit = [&](const RawSequence& clip, std::size_t label, const SequenceInfo& si) {
    core::ClipRecord r;
    r.clip = standardize_clip(clip);
    r.label = label;
    r.label_name = tax.labels.name(label);
    r.source = *meta;
    r.normalization = opt.normalization;
    const int action = static_cast<int>(label) + 1;
    const int seq = ++seq_counter[{action, si.env, si.subject}];
    r.id = {*code, action, si.env, si.subject, seq};
    records.push_back(std::move(r));
  };

  for (const auto& file : files) {
    auto rel = fs::relative(file, in_dir);
    rel.replace_extension();
    const std::string seq_id = rel.generic_string();
    const auto bytes = core::read_file_bytes(file);
    RawSequence seq;
    try {
      seq = parse_source_csv(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()), *meta);
    } catch (const ParseError& e) {
      throw ParseError(e.reason(), e.line(), file.string() + ": " + e.what());
    }
    ++summary.sequences;
    summary.frames += seq.frame_count();
    SequenceInfo si = info.count(seq_id) ? info.at(seq_id) : SequenceInfo{};

    if (policy.mode == PolicyMode::kSegmentation) {
      auto it = segments.find(seq_id);
      if (it == segments.end()) continue;
      for (auto& [sub, label] : segment_actions(seq, it->second)) {
        if (!policy.window_after_segmentation || sub.frame_count() < policy.window) {
          emit(sub, label, si);
          continue;
        }
        for (const auto& w : slide_windows(sub, policy.window, policy.stride)) emit(w, label, si);
      }
    } else {
      const std::string label_text = !si.label.empty() ? si.label : rel.parent_path().filename().string();
      if (label_text.empty()) {
        throw FormatError(FormatError::Kind::kMissingEntry,
                          "no label for sequence '" + seq_id + "' (use a class directory or sequences.csv)");
      }
      const std::size_t label = resolve_label(tax, source, label_text);
      if (policy.mode == PolicyMode::kPassthrough) {
        emit(seq, label, si);
      } else {
        for (const auto& w : slide_windows(seq, policy.window, policy.stride)) emit(w, label, si);
      }
    }
  }

  std::vector<core::ClipTensor> clips;
  clips.reserve(records.size());
  for (auto& r : records) clips.push_back(std::move(r.clip));
  normalize(clips, opt.normalization);
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto& r = records[i];
    r.clip = std::move(clips[i]);
    const std::string rel = "clips/" + source + "/" + core::encode_sample_id(r.id) + ".zip";
    core::write_clip_archive(r, out_dir / rel);
    summary.entries.push_back({r.id, r.label, source, rel});
  }
  core::write_manifest(summary.entries, out_dir / "manifest.csv");
  return summary;
}

}  // namespace dapnet::ingest
