// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The dapnet Authors

#include "dapnet/ingest/taxonomy.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "dapnet/core/error.hpp"

#ifndef DAPNET_DATA_DIR
#define DAPNET_DATA_DIR "data"
#endif

namespace dapnet::ingest {

std::optional<std::size_t> Taxonomy::map_source_label(const std::string& source,
                                                      const std::string& label) const {
  auto s = source_labels.find(source);
  if (s == source_labels.end()) return std::nullopt;
  auto l = s->second.find(label);
  if (l == s->second.end()) return std::nullopt;
  return l->second;
}

std::vector<std::size_t> Taxonomy::classes_of(const std::string& source) const {
  std::vector<std::size_t> out;
  auto s = source_labels.find(source);
  if (s == source_labels.end()) return out;
  for (const auto& [_, cls] : s->second) out.push_back(cls);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

Taxonomy load_taxonomy(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open taxonomy file '" + path.string() + "'");
  std::string line;
  std::getline(in, line);
  if (line.rfind("class_id,name,type,radhar,mri,mmfi", 0) != 0) {
    throw ParseError(ParseError::Reason::kMissingColumn, 1, "taxonomy header mismatch in " + path.string());
  }
  const char* sources[] = {"radhar", "mri", "mmfi"};
  Taxonomy tax;
  std::vector<std::string> names;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream row(line);
    while (std::getline(row, cell, ',')) cells.push_back(cell);
    while (cells.size() < 6) cells.emplace_back();
    if (std::stoul(cells[0]) != names.size()) {
      throw ParseError(ParseError::Reason::kFrameOrder, lineno, "taxonomy class ids must be 0..K-1 in order");
    }
    names.push_back(cells[1]);
    tax.types.push_back(cells[2]);
    for (int s = 0; s < 3; ++s) {
      if (!cells[3 + s].empty()) tax.source_labels[sources[s]][cells[3 + s]] = names.size() - 1;
    }
  }
  tax.labels = core::LabelSpace(std::move(names));
  return tax;
}

std::filesystem::path default_taxonomy_path() {
  return std::filesystem::path(DAPNET_DATA_DIR) / "taxonomy" / "unimm_har.csv";
}

std::optional<int> dataset_code(const std::string& source) {
  if (source == "radhar") return 1;
  if (source == "mri") return 2;
  if (source == "mmfi") return 3;
  return std::nullopt;
}

}  // namespace dapnet::ingest
