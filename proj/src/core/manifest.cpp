// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The dapnet Authors

#include "dapnet/core/manifest.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "dapnet/core/error.hpp"
#include "dapnet/core/zip.hpp"

namespace dapnet::core {
namespace {

std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

void write_manifest(const std::vector<ManifestEntry>& entries, const std::filesystem::path& path) {
  std::ostringstream out;
  out << "sample_id,label,source,path\n";
  for (const auto& e : entries) {
    if (e.source.find(',') != std::string::npos || e.path.find(',') != std::string::npos) {
      throw ValidationError("manifest fields must not contain commas: " + e.path);
    }
    out << encode_sample_id(e.id) << ',' << e.label << ',' << e.source << ',' << e.path << '\n';
  }
  const std::string text = out.str();
  write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open manifest '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line.rfind("sample_id,label,source,path", 0) != 0) {
    throw ParseError(ParseError::Reason::kMissingColumn, 1,
                     "manifest '" + path.string() + "' lacks header sample_id,label,source,path");
  }
  std::vector<ManifestEntry> entries;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_commas(line);
    if (cells.size() != 4) {
      throw ParseError(ParseError::Reason::kRowWidth, lineno,
                       "manifest line " + std::to_string(lineno) + ": expected 4 fields");
    }
    ManifestEntry e;
    auto id = try_decode_sample_id(cells[0]);
    if (!id) {
      throw ParseError(ParseError::Reason::kNonNumeric, lineno,
                       "manifest line " + std::to_string(lineno) + ": bad sample id '" + cells[0] + "'");
    }
    e.id = *id;
    const auto& lab = cells[1];
    auto [ptr, ec] = std::from_chars(lab.data(), lab.data() + lab.size(), e.label);
    if (ec != std::errc() || ptr != lab.data() + lab.size()) {
      throw ParseError(ParseError::Reason::kNonNumeric, lineno,
                       "manifest line " + std::to_string(lineno) + ": bad label '" + lab + "'");
    }
    e.source = cells[2];
    e.path = cells[3];
    entries.push_back(std::move(e));
  }
  return entries;
}

std::filesystem::path resolve_entry_path(const std::filesystem::path& manifest_path,
                                         const ManifestEntry& entry) {
  std::filesystem::path p(entry.path);
  if (p.is_absolute()) return p;
  return manifest_path.parent_path() / p;
}

}  // namespace dapnet::core
