// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The dapnet Authors

#pragma once

// Doppler-guided geometric reparameterization.
//
// Per frame: a soft quantile of the sorted Doppler magnitudes gives a motion
// threshold tau; a logistic score marks each point's motion confidence; a
// straight-through step splits points into fast/slow; fast points are
// duplicated r times, slow points kept once, and the remainder up to P_goal is
// filled by uniform resampling of the whole frame.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "dapnet/core/error.hpp"
#include "dapnet/core/types.hpp"

namespace dapnet::d2r {

struct DsqParams {
  static constexpr double kQMin = 0.01;

  double q = 0.2;
  double sigma = 1.0;  // rank units
  double gamma = 0.1;  // Doppler units of the (normalized) clip
  double delta = 0.5;

  void clamp_q() { q = std::clamp(q, kQMin, 1.0 - kQMin); }
  void validate() const;
};

struct DensifyConfig {
  std::size_t r = 5;
  std::size_t p_goal = 1024;

  void validate() const;
};

struct FrameSplit {
  std::vector<double> soft_scores;
  std::vector<std::uint8_t> hard_mask;
  double tau = 0.0;
};

// ---------------------------------------------------------------------------
// Soft quantile

namespace detail {

// Ascending order of v; equal values keep their input order.
template <class S>
std::vector<std::size_t> sort_order(std::span<const S> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  return order;
}

// Normalized Gaussian rank weights centred on q (n - 1).
template <class S>
std::vector<S> rank_weights(std::size_t n, S q, S sigma) {
  const S target = q * static_cast<S>(n - 1);
  std::vector<S> w(n);
  S max_e = -std::numeric_limits<S>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    const S d = static_cast<S>(i) - target;
    w[i] = -(d * d) / (S(2) * sigma * sigma);
    max_e = std::max(max_e, w[i]);
  }
  S total = 0;
  for (auto& x : w) {
    x = std::exp(x - max_e);
    total += x;
  }
  for (auto& x : w) x /= total;
  return w;
}

}  // namespace detail

template <class S>
struct DsqResult {
  S tau{};
  S dtau_dq{};
  std::vector<S> dtau_dv;  // in input (unsorted) order
};

// tau = sum_i w_i v_(i) over ascending order statistics, 0-based ranks.
template <class S>
DsqResult<S> dsq_threshold_grad(std::span<const S> v, S q, S sigma) {
  const std::size_t n = v.size();
  if (n == 0) throw ValidationError("dsq_threshold: empty frame");
  const auto order = detail::sort_order(v);
  const auto w = detail::rank_weights(n, q, sigma);
  const S target = q * static_cast<S>(n - 1);
  const S scale = static_cast<S>(n - 1) / (sigma * sigma);

  DsqResult<S> out;
  out.dtau_dv.assign(n, S(0));
  S mean_a = 0, mean_av = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const S vi = v[order[i]];
    const S a = (static_cast<S>(i) - target) * scale;  // d log e_i / dq
    out.tau += w[i] * vi;
    mean_a += w[i] * a;
    mean_av += w[i] * a * vi;
    out.dtau_dv[order[i]] = w[i];
  }
  out.dtau_dq = mean_av - mean_a * out.tau;
  return out;
}

template <class S>
S dsq_threshold(std::span<const S> v, S q, S sigma) {
  return dsq_threshold_grad(v, q, sigma).tau;
}

template <class S>
S logistic(S x) {
  if (x >= 0) return S(1) / (S(1) + std::exp(-x));
  const S e = std::exp(x);
  return e / (S(1) + e);
}

template <class S>
std::vector<S> soft_motion_scores(std::span<const S> v, S tau, S gamma) {
  if (!(gamma > 0)) throw ValidationError("soft_motion_scores: gamma must be > 0");
  std::vector<S> s(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) s[i] = logistic((v[i] - tau) / gamma);
  return s;
}

// Forward half of the straight-through estimator: 1 where s > delta.
template <class S>
std::vector<std::uint8_t> ste_binarize(std::span<const S> s, double delta) {
  std::vector<std::uint8_t> m(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) m[i] = s[i] > static_cast<S>(delta) ? 1 : 0;
  return m;
}

// Backward half: the incoming gradient passes to s unchanged.
template <class S>
std::vector<S> ste_backward(std::span<const S> grad_mask) {
  return std::vector<S>(grad_mask.begin(), grad_mask.end());
}

// ---------------------------------------------------------------------------
// Tri-branch densification

struct Densified {
  // Source row (index into the frame's points) for each of the P_goal output rows,
  // ordered fast branch, slow branch, raw branch.
  std::vector<std::size_t> rows;
  // Input rows marked fast, ascending.
  std::vector<std::size_t> fast;
  // How many times each input row appears in the fast branch.
  std::vector<std::size_t> fast_copies;
  std::size_t fast_branch = 0;
  std::size_t slow_branch = 0;
  std::size_t raw_branch = 0;
};

// Deterministic 64-bit mixer for deriving per-frame / per-sample seeds.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

Densified tmpd_densify(std::span<const std::uint8_t> hard_mask, const DensifyConfig& cfg,
                       std::uint64_t seed);

// Materializes the densified rows from a [P_t, C] row-major frame.
std::vector<float> gather_rows(std::span<const float> frame, std::size_t channels,
                               std::span<const std::size_t> rows);

// ---------------------------------------------------------------------------
// Whole-clip composition

struct DenseClip {
  std::size_t frames = 0;
  std::size_t points = 0;  // P_goal
  std::size_t channels = 0;
  std::vector<float> data;  // [T, P_goal, C]
  std::vector<std::vector<std::size_t>> fast;  // per frame, indices into the clip frame
  std::vector<FrameSplit> splits;              // empty split for padded frames
  std::vector<std::vector<std::size_t>> rows;  // per frame source rows (empty when padded)
};

// Absolute Doppler values of the first `valid_points(t)` rows of frame t.
std::vector<double> doppler_magnitudes(const core::ClipTensor& clip, std::size_t t);

FrameSplit split_frame(std::span<const double> magnitudes, const DsqParams& params);

DenseClip dgr(const core::ClipTensor& clip, const DsqParams& params, const DensifyConfig& cfg,
              std::uint64_t seed);

// Baseline geometry: cyclic repetition of the distinct points up to P_goal
// (or uniform subsampling when a frame has more than P_goal points).
std::vector<std::size_t> repeat_fill(std::size_t n_points, std::size_t p_goal);

}  // namespace dapnet::d2r
