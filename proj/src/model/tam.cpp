// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The dapnet Authors

#include "dapnet/model/tam.hpp"

#include <json.hpp>

#include <cctype>
#include <random>

#include "dapnet/core/zip.hpp"

namespace dapnet::model {

std::string make_prompt(const std::string& tmpl, const std::string& class_name) {
  static const std::string kSlot = "[CLS]";
  std::string out = tmpl;
  for (auto at = out.find(kSlot); at != std::string::npos; at = out.find(kSlot, at + class_name.size())) {
    out.replace(at, kSlot.size(), class_name);
  }
  return out;
}

std::vector<std::string> make_prompts(const std::string& tmpl, const std::vector<std::string>& class_names) {
  std::vector<std::string> out;
  out.reserve(class_names.size());
  for (const auto& name : class_names) out.push_back(make_prompt(tmpl, name));
  return out;
}

std::uint64_t fnv1a64(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::vector<float> HashTextEncoder::encode(const std::string& text) const {
  std::vector<double> acc(dim_, 0.0);
  std::string token;
  auto flush = [&] {
    if (token.empty()) return;
    std::mt19937_64 rng(fnv1a64(token));
    std::normal_distribution<double> nd(0.0, 1.0);
    for (auto& a : acc) a += nd(rng);
    token.clear();
  };
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      token.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
    }
  }
  flush();
  return std::vector<float>(acc.begin(), acc.end());
}

EmbeddingBank build_embedding_bank(const std::vector<std::string>& prompts, const TextEncoder& encoder) {
  if (prompts.empty()) throw ValidationError("embedding bank needs at least one prompt");
  EmbeddingBank bank;
  bank.prompts = prompts;
  bank.encoder_name = encoder.name();
  bank.text.resize(static_cast<Eigen::Index>(prompts.size()), static_cast<Eigen::Index>(encoder.dim()));
  for (std::size_t k = 0; k < prompts.size(); ++k) {
    const auto v = encoder.encode(prompts[k]);
    if (v.size() != encoder.dim()) throw ValidationError("text encoder returned wrong dimension");
    for (std::size_t j = 0; j < v.size(); ++j) {
      bank.text(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) = v[j];
    }
  }
  normalize_rows(bank.text);
  return bank;
}

void save_embedding_bank(const EmbeddingBank& bank, const std::filesystem::path& path) {
  Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rows = bank.text;
  nlohmann::json meta = {{"format", "dapnet-embedding-bank"},
                         {"version", 1},
                         {"shape", {bank.classes(), bank.dim()}},
                         {"prompts", bank.prompts},
                         {"encoder", bank.encoder_name}};
  core::ZipWriter zip;
  zip.add("data", core::pack_f32(std::span<const float>(rows.data(), static_cast<std::size_t>(rows.size()))));
  zip.add("meta", meta.dump(1));
  zip.write(path);
}

EmbeddingBank load_embedding_bank(const std::filesystem::path& path, std::size_t expected_classes) {
  const auto zip = core::ZipReader::open(path);
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(zip.get_text("meta"));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(FormatError::Kind::kBadMetadata, "embedding bank meta: " + std::string(e.what()));
  }
  const auto values = core::unpack_f32(zip.get("data"));
  std::size_t k = 0, dim = 0;
  EmbeddingBank bank;
  try {
    const auto shape = meta.at("shape").get<std::vector<std::size_t>>();
    if (shape.size() != 2) throw FormatError(FormatError::Kind::kShapeMismatch, "embedding bank shape must be 2-D");
    k = shape[0];
    dim = shape[1];
    bank.prompts = meta.value("prompts", std::vector<std::string>{});
    bank.encoder_name = meta.value("encoder", "");
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(FormatError::Kind::kBadMetadata, "embedding bank meta: " + std::string(e.what()));
  }
  if (values.size() != k * dim) {
    throw FormatError(FormatError::Kind::kShapeMismatch,
                      "embedding bank data holds " + std::to_string(values.size()) + " floats, shape says " +
                          std::to_string(k) + "x" + std::to_string(dim));
  }
  if (k != expected_classes) {
    throw ValidationError("embedding bank has " + std::to_string(k) + " classes, label space has " +
                          std::to_string(expected_classes));
  }
  bank.text = Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
      values.data(), static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(dim));
  normalize_rows(bank.text);
  return bank;
}

}  // namespace dapnet::model
