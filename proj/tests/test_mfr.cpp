// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The dapnet Authors

#include <doctest.h>

#include <algorithm>
#include <random>
#include <vector>

#include "dapnet/mfr/mfr.hpp"
#include "support.hpp"

using namespace dapnet;
using namespace dapnet::mfr;
using M = nn::Matrix<double>;
using R = nn::RowVec<double>;

namespace {

M random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> nd;
  M m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = nd(rng);
  return m;
}

M take_rows(const M& x, const std::vector<Eigen::Index>& idx) {
  M out(static_cast<Eigen::Index>(idx.size()), x.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(idx[i]);
  return out;
}

struct Block {
  PointEmbedding<double> embed{5, 8, 6};
  FilmHeads<double> heads{6, 7};

  void visit(const nn::ParamVisitor<double>& f) {
    embed.visit("embed", f);
    heads.visit("film", f);
  }
};

// Sum of R (.) recalibrate(embed(points), heads(mean(embed(points[fast])))).
double block_loss(const Block& b, const M& points, const std::vector<Eigen::Index>& fast, const M& weight) {
  const M f_out = embed_points(b.embed, points);
  const R c = motion_summary<double>(embed_points(b.embed, take_rows(points, fast)));
  const R gamma = b.heads.scale.forward(c);
  const R beta = b.heads.shift.forward(c);
  return (recalibrate<double>(f_out, gamma, beta).array() * weight.array()).sum();
}

void block_grad(const Block& b, const M& points, const std::vector<Eigen::Index>& fast, const M& weight,
                Block& grad, M& dpoints) {
  typename PointEmbedding<double>::Cache dense_cache, fast_cache, scale_cache, shift_cache;
  const M fast_points = take_rows(points, fast);
  const M f_out = embed_points(b.embed, points, &dense_cache);
  const M f_fast = embed_points(b.embed, fast_points, &fast_cache);
  const R c = motion_summary<double>(f_fast);
  const R gamma = b.heads.scale.forward(c, &scale_cache);
  const R beta = b.heads.shift.forward(c, &shift_cache);

  const M dgamma = (weight.array() * f_out.array()).colwise().sum();
  const M dbeta = weight.colwise().sum();
  const M df_out = weight.array().rowwise() * gamma.array();
  M dc = b.heads.scale.backward(scale_cache, dgamma, grad.heads.scale);
  dc += b.heads.shift.backward(shift_cache, dbeta, grad.heads.shift);
  M df_fast = dc.replicate(f_fast.rows(), 1) / static_cast<double>(f_fast.rows());
  dpoints = b.embed.backward(dense_cache, df_out, grad.embed);
  const M dfast_points = b.embed.backward(fast_cache, df_fast, grad.embed);
  for (std::size_t i = 0; i < fast.size(); ++i) dpoints.row(fast[i]) += dfast_points.row(static_cast<Eigen::Index>(i));
}

}  // namespace

TEST_CASE("embed_points is a shared pointwise map") {
  std::mt19937_64 rng(1);
  PointEmbedding<double> e(5, 8, 6);
  e.init(rng);
  M x = random_matrix(rng, 7, 5);
  x.row(3) = x.row(1);
  const M y = embed_points(e, x);
  CHECK(y.rows() == 7);
  CHECK(y.cols() == 6);
  CHECK(y.row(3) == y.row(1));

  const std::vector<Eigen::Index> perm = {4, 0, 6, 2, 5, 1, 3};
  CHECK((embed_points(e, take_rows(x, perm)) - take_rows(y, perm)).cwiseAbs().maxCoeff() < 1e-12);

  const M empty = embed_points(e, M(0, 5));
  CHECK(empty.rows() == 0);
  CHECK(empty.cols() == 6);
}

TEST_CASE("motion_summary examples") {
  M one(1, 3);
  one << 1, -2, 0.5;
  CHECK(motion_summary<double>(one) == R(one.row(0)));
  M two(2, 2);
  two << 1, 3, 3, 1;
  CHECK(motion_summary<double>(two) == (R(2) << 2, 2).finished());
  CHECK(motion_summary<double>(M(0, 4)) == R::Zero(4));
}

TEST_CASE("motion_summary is invariant to row order") {
  std::mt19937_64 rng(2);
  const M x = random_matrix(rng, 9, 4);
  std::vector<Eigen::Index> perm = {0, 1, 2, 3, 4, 5, 6, 7, 8};
  for (int trial = 0; trial < 10; ++trial) {
    std::shuffle(perm.begin(), perm.end(), rng);
    CHECK((motion_summary<double>(take_rows(x, perm)) - motion_summary<double>(x)).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("weighted_summary") {
  M x(3, 2);
  x << 1, 0, 3, 4, 5, 8;
  const std::vector<double> w = {1, 0, 3};
  CHECK(weighted_summary<double>(x, w) == (R(2) << 4, 6).finished());
  const std::vector<double> none = {0, 0, 0};
  CHECK(weighted_summary<double>(x, none) == R::Zero(2));
  const std::vector<double> ones = {1, 1, 1};
  CHECK((weighted_summary<double>(x, ones) - motion_summary<double>(x)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("recalibrate examples") {
  M f(1, 2);
  f << 2, 3;
  const R gamma = (R(2) << 0.5, 2).finished();
  const R beta = (R(2) << 1, -1).finished();
  CHECK(recalibrate<double>(f, gamma, beta) == (M(1, 2) << 2, 5).finished());

  std::mt19937_64 rng(3);
  const M x = random_matrix(rng, 6, 4);
  CHECK(recalibrate<double>(x, R::Ones(4), R::Zero(4)) == x);
  const R b = random_matrix(rng, 1, 4);
  const M zeroed = recalibrate<double>(x, R::Zero(4), b);
  for (Eigen::Index i = 0; i < zeroed.rows(); ++i) CHECK(R(zeroed.row(i)) == b);

  const R g = random_matrix(rng, 1, 4);
  const M batched = recalibrate<double>(x, g, b);
  for (Eigen::Index i = 0; i < x.rows(); ++i) CHECK(recalibrate<double>(M(x.row(i)), g, b) == M(batched.row(i)));

  CHECK_THROWS_AS(recalibrate<double>(x, R::Ones(3), R::Zero(4)), ValidationError);
}

TEST_CASE("identity at initialization") {
  std::mt19937_64 rng(4);
  FilmHeads<double> heads(6, 7);
  heads.init(rng);
  for (int trial = 0; trial < 10; ++trial) {
    const M f_out = random_matrix(rng, 11, 6);
    const R c = motion_summary<double>(random_matrix(rng, 1 + rng() % 5, 6));
    const M out = recalibrate<double>(f_out, heads.scale.forward(c), heads.shift.forward(c));
    CHECK(out == f_out);
  }
}

TEST_CASE("gradients through embed, summary, heads and recalibrate") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 3; ++trial) {
    Block b;
    b.embed.init(rng);
    b.heads.scale.init(rng, 0.5);
    b.heads.shift.init(rng, 0.5);
    const M points = random_matrix(rng, 9, 5);
    const std::vector<Eigen::Index> fast = {1, 4, 7};
    const M weight = random_matrix(rng, 9, 6);

    Block grad;
    grad.embed = b.embed.zeros_like();
    grad.heads = b.heads.zeros_like();
    M dpoints;
    block_grad(b, points, fast, weight, grad, dpoints);

    std::vector<M> analytic;
    grad.visit([&](const std::string&, M& g) { analytic.push_back(g); });
    const double h = 1e-6;
    std::size_t idx = 0;
    b.visit([&](const std::string& name, M& p) {
      M numeric(p.rows(), p.cols());
      for (Eigen::Index i = 0; i < p.size(); ++i) {
        const double keep = p.data()[i];
        p.data()[i] = keep + h;
        const double up = block_loss(b, points, fast, weight);
        p.data()[i] = keep - h;
        const double down = block_loss(b, points, fast, weight);
        p.data()[i] = keep;
        numeric.data()[i] = (up - down) / (2 * h);
      }
      INFO(name);
      CHECK(testing::rel_error(analytic[idx++], numeric) < 1e-4);
    });

    M x = points;
    M numeric(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double keep = x.data()[i];
      x.data()[i] = keep + h;
      const double up = block_loss(b, x, fast, weight);
      x.data()[i] = keep - h;
      const double down = block_loss(b, x, fast, weight);
      x.data()[i] = keep;
      numeric.data()[i] = (up - down) / (2 * h);
    }
    CHECK(testing::rel_error(dpoints, numeric) < 1e-4);
  }
}
