// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The dapnet Authors

#pragma once

// Text alignment: class prompts are embedded once into a fixed bank; the
// global point-cloud feature is projected into the same space and compared
// against every class row.

#include <cmath>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "dapnet/core/error.hpp"
#include "dapnet/model/nn.hpp"

namespace dapnet::model {

using nn::Matrix;
using nn::RowVec;

inline constexpr const char* kDefaultPromptTemplate = "a mmWave point cloud of a person [CLS]";

// Replaces every "[CLS]" in the template with the class name.
std::string make_prompt(const std::string& tmpl, const std::string& class_name);
std::vector<std::string> make_prompts(const std::string& tmpl, const std::vector<std::string>& class_names);

class TextEncoder {
 public:
  virtual ~TextEncoder() = default;
  virtual std::string name() const = 0;
  virtual std::size_t dim() const = 0;
  virtual std::vector<float> encode(const std::string& text) const = 0;
};

// Deterministic bag-of-words stand-in for a pretrained encoder: each
// lowercased token seeds a Gaussian vector, and a prompt embeds to the sum
// of its token vectors. Prompts sharing words get correlated embeddings.
class HashTextEncoder final : public TextEncoder {
 public:
  explicit HashTextEncoder(std::size_t dim) : dim_(dim) {}
  std::string name() const override { return "hash-bow-v1"; }
  std::size_t dim() const override { return dim_; }
  std::vector<float> encode(const std::string& text) const override;

 private:
  std::size_t dim_;
};

std::uint64_t fnv1a64(std::string_view text);

struct EmbeddingBank {
  Matrix<float> text;  // [K, C_text], rows unit length
  std::vector<std::string> prompts;
  std::string encoder_name;

  std::size_t classes() const { return static_cast<std::size_t>(text.rows()); }
  std::size_t dim() const { return static_cast<std::size_t>(text.cols()); }
};

EmbeddingBank build_embedding_bank(const std::vector<std::string>& prompts, const TextEncoder& encoder);

// Zip with "data" (float32 [K, C_text] row-major) and "meta" (JSON with
// shape, prompts, encoder). Rows are re-normalized on load.
void save_embedding_bank(const EmbeddingBank& bank, const std::filesystem::path& path);
EmbeddingBank load_embedding_bank(const std::filesystem::path& path, std::size_t expected_classes);

template <class S>
void normalize_rows(Matrix<S>& m) {
  for (Eigen::Index k = 0; k < m.rows(); ++k) {
    const S norm = m.row(k).norm();
    if (norm > S(0)) m.row(k) /= norm;
  }
}

template <class S>
struct TamScores {
  Matrix<S> similarity;  // row-softmax, [K, K]
  RowVec<S> diag;        // s = diag(S)
};

// S = softmax_rows(F_mmw F_text^T); both inputs are expected row-normalized.
template <class S>
TamScores<S> tam_similarity(const Matrix<S>& mmw, const Matrix<S>& text) {
  if (mmw.rows() != text.rows() || mmw.cols() != text.cols()) {
    throw ValidationError("tam_similarity: shape mismatch [" + std::to_string(mmw.rows()) + "," +
                          std::to_string(mmw.cols()) + "] vs [" + std::to_string(text.rows()) + "," +
                          std::to_string(text.cols()) + "]");
  }
  TamScores<S> out;
  Matrix<S> logits = mmw * text.transpose();
  for (Eigen::Index k = 0; k < logits.rows(); ++k) {
    const S m = logits.row(k).maxCoeff();
    logits.row(k) = (logits.row(k).array() - m).exp().matrix();
    logits.row(k) /= logits.row(k).sum();
  }
  out.diag = logits.diagonal().transpose();
  out.similarity = std::move(logits);
  return out;
}

// y = z + alpha s.
template <class S>
RowVec<S> fuse(const RowVec<S>& logits, const RowVec<S>& scores, S alpha) {
  if (alpha < S(0)) throw ValidationError("fuse: alpha must be >= 0");
  return logits + alpha * scores;
}

}  // namespace dapnet::model
