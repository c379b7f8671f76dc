// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The dapnet Authors

#include "dapnet/d2r/d2r.hpp"

#include <random>

namespace dapnet::d2r {

void DsqParams::validate() const {
  if (!(q > 0.0 && q < 1.0)) throw ValidationError("d2r: q must lie in (0, 1)");
  if (!(sigma > 0.0)) throw ValidationError("d2r: sigma must be > 0");
  if (!(gamma > 0.0)) throw ValidationError("d2r: gamma must be > 0");
  if (!(delta > 0.0 && delta < 1.0)) throw ValidationError("d2r: delta must lie in (0, 1)");
}

void DensifyConfig::validate() const {
  if (r < 1) throw ValidationError("d2r: duplication factor r must be >= 1");
  if (p_goal < 1) throw ValidationError("d2r: p_goal must be >= 1");
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  // splitmix64 finalizer over a combined word.
  std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

namespace {

// `k` distinct picks from `pool`, returned in the pool's original order.
std::vector<std::size_t> sample_without_replacement(std::vector<std::size_t> pool, std::size_t k,
                                                    std::mt19937_64& rng) {
  std::vector<std::size_t> pos(pool.size());
  std::iota(pos.begin(), pos.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pos.size() - 1);
    std::swap(pos[i], pos[pick(rng)]);
  }
  pos.resize(k);
  std::sort(pos.begin(), pos.end());
  std::vector<std::size_t> out;
  out.reserve(k);
  for (auto p : pos) out.push_back(pool[p]);
  return out;
}

}  // namespace

Densified tmpd_densify(std::span<const std::uint8_t> hard_mask, const DensifyConfig& cfg,
                       std::uint64_t seed) {
  cfg.validate();
  const std::size_t n = hard_mask.size();
  if (n == 0) throw ValidationError("tmpd_densify: frame has no points");

  Densified out;
  std::vector<std::size_t> slow;
  for (std::size_t i = 0; i < n; ++i) (hard_mask[i] ? out.fast : slow).push_back(i);
  out.fast_copies.assign(n, 0);
  std::mt19937_64 rng(seed);

  const std::size_t n_fast = out.fast.size();
  const std::size_t n_slow = slow.size();
  const std::size_t goal = cfg.p_goal;
  out.rows.reserve(goal);

  if (cfg.r * n_fast + n_slow <= goal) {
    for (std::size_t k = 0; k < cfg.r; ++k) out.rows.insert(out.rows.end(), out.fast.begin(), out.fast.end());
    for (auto i : out.fast) out.fast_copies[i] = cfg.r;
    out.fast_branch = cfg.r * n_fast;
    out.rows.insert(out.rows.end(), slow.begin(), slow.end());
    out.slow_branch = n_slow;
    out.raw_branch = goal - out.fast_branch - out.slow_branch;
    std::uniform_int_distribution<std::size_t> any(0, n - 1);
    for (std::size_t k = 0; k < out.raw_branch; ++k) out.rows.push_back(any(rng));
    return out;
  }

  // Over budget: no raw branch. Keep one copy of every fast point when they
  // fit, then spend what is left on extra duplicates (or on slow points).
  if (n_fast + n_slow <= goal) {
    const std::size_t extra = goal - n_slow - n_fast;
    std::vector<std::size_t> dup_slots;  // candidate extra copies, (r - 1) per fast point
    dup_slots.reserve((cfg.r - 1) * n_fast);
    for (std::size_t k = 1; k < cfg.r; ++k) dup_slots.insert(dup_slots.end(), out.fast.begin(), out.fast.end());
    auto extras = sample_without_replacement(std::move(dup_slots), extra, rng);
    std::sort(extras.begin(), extras.end());
    for (auto i : out.fast) {
      out.rows.push_back(i);
      out.fast_copies[i] = 1;
    }
    for (auto i : extras) {
      out.rows.push_back(i);
      ++out.fast_copies[i];
    }
    out.fast_branch = n_fast + extra;
    out.rows.insert(out.rows.end(), slow.begin(), slow.end());
    out.slow_branch = n_slow;
  } else if (n_fast <= goal) {
    for (auto i : out.fast) {
      out.rows.push_back(i);
      out.fast_copies[i] = 1;
    }
    out.fast_branch = n_fast;
    auto kept = sample_without_replacement(slow, goal - n_fast, rng);
    out.rows.insert(out.rows.end(), kept.begin(), kept.end());
    out.slow_branch = kept.size();
  } else {
    auto kept = sample_without_replacement(out.fast, goal, rng);
    for (auto i : kept) {
      out.rows.push_back(i);
      out.fast_copies[i] = 1;
    }
    out.fast_branch = goal;
  }
  return out;
}

std::vector<float> gather_rows(std::span<const float> frame, std::size_t channels,
                               std::span<const std::size_t> rows) {
  std::vector<float> out;
  out.reserve(rows.size() * channels);
  for (auto r : rows) {
    if ((r + 1) * channels > frame.size()) throw ValidationError("gather_rows: row index out of range");
    out.insert(out.end(), frame.begin() + static_cast<std::ptrdiff_t>(r * channels),
               frame.begin() + static_cast<std::ptrdiff_t>((r + 1) * channels));
  }
  return out;
}

std::vector<double> doppler_magnitudes(const core::ClipTensor& clip, std::size_t t) {
  const std::size_t n = clip.valid_points(t);
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = std::abs(static_cast<double>(clip.at(t, i, core::kDoppler)));
  return v;
}

FrameSplit split_frame(std::span<const double> magnitudes, const DsqParams& params) {
  FrameSplit split;
  split.tau = dsq_threshold<double>(magnitudes, params.q, params.sigma);
  split.soft_scores = soft_motion_scores<double>(magnitudes, split.tau, params.gamma);
  split.hard_mask = ste_binarize<double>(split.soft_scores, params.delta);
  return split;
}

std::vector<std::size_t> repeat_fill(std::size_t n_points, std::size_t p_goal) {
  if (n_points == 0) throw ValidationError("repeat_fill: frame has no points");
  std::vector<std::size_t> rows(p_goal);
  for (std::size_t k = 0; k < p_goal; ++k) {
    rows[k] = n_points <= p_goal ? k % n_points : k * n_points / p_goal;
  }
  return rows;
}

DenseClip dgr(const core::ClipTensor& clip, const DsqParams& params, const DensifyConfig& cfg,
              std::uint64_t seed) {
  params.validate();
  cfg.validate();
  DenseClip out;
  out.frames = clip.frames();
  out.points = cfg.p_goal;
  out.channels = clip.channels();
  out.data.assign(out.frames * out.points * out.channels, 0.0f);
  out.fast.resize(out.frames);
  out.splits.resize(out.frames);
  out.rows.resize(out.frames);

  for (std::size_t t = 0; t < clip.frames(); ++t) {
    if (clip.is_padded(t) || clip.valid_points(t) == 0) continue;
    const auto mags = doppler_magnitudes(clip, t);
    out.splits[t] = split_frame(mags, params);
    auto dense = tmpd_densify(out.splits[t].hard_mask, cfg, mix_seed(seed, t));
    const auto rows = gather_rows(clip.frame(t), clip.channels(), dense.rows);
    std::copy(rows.begin(), rows.end(),
              out.data.begin() + static_cast<std::ptrdiff_t>(t * out.points * out.channels));
    out.fast[t] = std::move(dense.fast);
    out.rows[t] = std::move(dense.rows);
  }
  return out;
}

}  // namespace dapnet::d2r
