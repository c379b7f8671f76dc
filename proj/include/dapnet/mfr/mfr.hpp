// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The dapnet Authors

#pragma once

// Motion-aware feature recalibration: a shared point embedding, a summary
// vector averaged over fast points, and FiLM heads producing a per-channel
// scale and shift for every dense point feature.

#include <cstddef>
#include <random>
#include <span>
#include <string>

#include "dapnet/core/error.hpp"
#include "dapnet/model/nn.hpp"

namespace dapnet::mfr {

using nn::Matrix;
using nn::RowVec;

enum class FastSource { kPreDup, kPostDup };

// Shared per-point map C -> C_emb (Linear, ReLU, Linear).
template <class S>
using PointEmbedding = nn::Mlp2<S>;

template <class S>
Matrix<S> embed_points(const PointEmbedding<S>& embedding, const Matrix<S>& points,
                       typename PointEmbedding<S>::Cache* cache = nullptr) {
  if (points.rows() == 0) return Matrix<S>(0, static_cast<Eigen::Index>(embedding.l2.out()));
  return embedding.forward(points, cache);
}

template <class S>
struct FilmHeads {
  nn::Mlp2<S> scale;
  nn::Mlp2<S> shift;

  FilmHeads() = default;
  FilmHeads(std::size_t c_emb, std::size_t hidden) : scale(c_emb, hidden, c_emb), shift(c_emb, hidden, c_emb) {}

  // Random hidden layers; output layers set so gamma == 1 and beta == 0
  // for every input.
  void init(std::mt19937_64& rng) {
    scale.l1.init(rng, 2.0);
    shift.l1.init(rng, 2.0);
    scale.l2.weight.setZero();
    scale.l2.bias.setOnes();
    shift.l2.weight.setZero();
    shift.l2.bias.setZero();
  }

  FilmHeads zeros_like() const {
    FilmHeads g;
    g.scale = scale.zeros_like();
    g.shift = shift.zeros_like();
    return g;
  }

  void visit(const std::string& prefix, const nn::ParamVisitor<S>& f) {
    scale.visit(prefix + ".gamma", f);
    shift.visit(prefix + ".beta", f);
  }

  template <class T>
  FilmHeads<T> cast() const {
    FilmHeads<T> out;
    out.scale = scale.template cast<T>();
    out.shift = shift.template cast<T>();
    return out;
  }
};

// Arithmetic mean of the rows; zero vector for an empty set.
template <class S>
RowVec<S> motion_summary(const Matrix<S>& fast_features) {
  if (fast_features.rows() == 0) return RowVec<S>::Zero(fast_features.cols());
  return fast_features.colwise().mean();
}

// Weighted mean sum_i w_i f_i / sum_i w_i; zero when the weights sum to 0.
template <class S>
RowVec<S> weighted_summary(const Matrix<S>& features, std::span<const S> weights) {
  RowVec<S> c = RowVec<S>::Zero(features.cols());
  S total = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] == S(0)) continue;
    c += weights[i] * features.row(static_cast<Eigen::Index>(i));
    total += weights[i];
  }
  if (total > S(0)) c /= total;
  return c;
}

// F = gamma (.) F_out + beta, broadcast over rows.
template <class S>
Matrix<S> recalibrate(const Matrix<S>& features, const RowVec<S>& gamma, const RowVec<S>& beta) {
  if (gamma.cols() != features.cols() || beta.cols() != features.cols()) {
    throw ValidationError("recalibrate: gamma/beta width " + std::to_string(gamma.cols()) + "/" +
                          std::to_string(beta.cols()) + " does not match feature width " +
                          std::to_string(features.cols()));
  }
  Matrix<S> out = features.array().rowwise() * gamma.array();
  out.rowwise() += beta;
  return out;
}

}  // namespace dapnet::mfr
