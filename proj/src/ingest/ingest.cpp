// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The dapnet Authors

#include "dapnet/ingest/ingest.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cmath>
#include <limits>
#include <string>

#include "dapnet/core/error.hpp"

namespace dapnet::ingest {

using core::ClipTensor;

namespace {

constexpr std::array<std::string_view, 6> kColumns = {"frame", "x", "y", "z", "doppler", "intensity"};
constexpr std::array<std::string_view, 6> kColumnDisplay = {"Frame", "X", "Y", "Z", "Doppler", "Intensity"};

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.push_back(trim(line.substr(start)));
      break;
    }
    cells.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return cells;
}

template <class T>
bool parse_number(std::string_view cell, T& out) {
  if (cell.empty()) return false;
  if (cell.front() == '+') cell.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), out);
  return ec == std::errc() && ptr == cell.data() + cell.size();
}

RawSequence sub_sequence(const RawSequence& seq, std::size_t begin, std::size_t end,
                         std::int64_t rebase) {
  RawSequence out;
  out.source = seq.source;
  out.label = seq.label;
  out.id = seq.id;
  out.rows.assign(seq.rows.begin() + static_cast<std::ptrdiff_t>(begin),
                  seq.rows.begin() + static_cast<std::ptrdiff_t>(end));
  for (auto& r : out.rows) r.frame -= rebase;
  return out;
}

}  // namespace

std::vector<RawSequence::FrameRun> RawSequence::frames() const {
  std::vector<FrameRun> runs;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (runs.empty() || rows[i].frame != runs.back().frame) {
      runs.push_back({rows[i].frame, i, i + 1});
    } else {
      runs.back().end = i + 1;
    }
  }
  return runs;
}

RawSequence parse_source_csv(std::string_view bytes, const core::SourceMeta& source) {
  std::size_t pos = 0;
  std::size_t lineno = 0;
  auto next_line = [&](std::string_view& line) {
    if (pos >= bytes.size()) return false;
    auto nl = bytes.find('\n', pos);
    if (nl == std::string_view::npos) nl = bytes.size();
    line = bytes.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos = nl + 1;
    ++lineno;
    return true;
  };

  std::string_view line;
  bool have_header = false;
  while (next_line(line)) {
    if (!trim(line).empty()) {
      have_header = true;
      break;
    }
  }
  if (!have_header) throw ParseError(ParseError::Reason::kEmpty, 0, "CSV input is empty");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.remove_prefix(3);  // BOM

  const auto header = split(line);
  std::array<std::size_t, 6> col{};
  for (std::size_t k = 0; k < kColumns.size(); ++k) {
    auto it = std::find_if(header.begin(), header.end(),
                           [&](std::string_view h) { return lower(h) == kColumns[k]; });
    if (it == header.end()) {
      throw ParseError(ParseError::Reason::kMissingColumn, lineno,
                       "CSV header lacks column '" + std::string(kColumnDisplay[k]) + "'");
    }
    col[k] = static_cast<std::size_t>(it - header.begin());
  }

  RawSequence seq;
  seq.source = source;
  while (next_line(line)) {
    if (trim(line).empty()) continue;
    const auto cells = split(line);
    if (cells.size() < header.size()) {
      throw ParseError(ParseError::Reason::kRowWidth, lineno,
                       "line " + std::to_string(lineno) + ": expected " + std::to_string(header.size()) +
                           " fields, found " + std::to_string(cells.size()));
    }
    RawPoint p;
    double frame_value = 0;
    if (!parse_number(cells[col[0]], frame_value) || frame_value != std::floor(frame_value)) {
      throw ParseError(ParseError::Reason::kNonNumeric, lineno,
                       "line " + std::to_string(lineno) + ": non-integer Frame '" +
                           std::string(cells[col[0]]) + "'");
    }
    p.frame = static_cast<std::int64_t>(frame_value);
    float* targets[5] = {&p.x, &p.y, &p.z, &p.doppler, &p.intensity};
    for (std::size_t k = 1; k < 6; ++k) {
      if (!parse_number(cells[col[k]], *targets[k - 1]) || !std::isfinite(*targets[k - 1])) {
        throw ParseError(ParseError::Reason::kNonNumeric, lineno,
                         "line " + std::to_string(lineno) + ": non-numeric " +
                             std::string(kColumnDisplay[k]) + " '" + std::string(cells[col[k]]) + "'");
      }
    }
    if (!seq.rows.empty() && p.frame < seq.rows.back().frame) {
      throw ParseError(ParseError::Reason::kFrameOrder, lineno,
                       "line " + std::to_string(lineno) + ": frame index decreases");
    }
    seq.rows.push_back(p);
  }
  if (seq.rows.empty()) throw ParseError(ParseError::Reason::kEmpty, lineno, "CSV input has no data rows");
  return seq;
}

std::vector<RawSequence> slide_windows(const RawSequence& seq, std::size_t window, std::size_t stride) {
  if (window < 1 || stride < 1) throw ValidationError("window and stride must be >= 1");
  const auto runs = seq.frames();
  if (window > runs.size()) {
    throw ValidationError("window of " + std::to_string(window) + " frames exceeds sequence of " +
                          std::to_string(runs.size()) + " frames; no partial windows are emitted");
  }
  std::vector<RawSequence> out;
  out.reserve(window_count(runs.size(), window, stride));
  for (std::size_t start = 0; start + window <= runs.size(); start += stride) {
    const auto& first = runs[start];
    const auto& last = runs[start + window - 1];
    out.push_back(sub_sequence(seq, first.begin, last.end, first.frame));
  }
  return out;
}

std::vector<std::pair<RawSequence, std::size_t>> segment_actions(const RawSequence& seq,
                                                                 std::span<const Segment> segments) {
  std::vector<std::pair<RawSequence, std::size_t>> out;
  if (segments.empty()) return out;
  if (seq.rows.empty()) throw ValidationError("cannot segment an empty sequence");
  const std::int64_t lo = seq.rows.front().frame;
  const std::int64_t hi = seq.rows.back().frame;
  for (std::size_t i = 0; i < segments.size(); ++i) {
    const auto& s = segments[i];
    if (s.start > s.end) throw ValidationError("segment " + std::to_string(i) + " has start > end");
    if (s.start < lo || s.end > hi) {
      throw ValidationError("segment " + std::to_string(i) + " [" + std::to_string(s.start) + "," +
                            std::to_string(s.end) + "] outside frame range [" + std::to_string(lo) + "," +
                            std::to_string(hi) + "]");
    }
    if (i > 0 && s.start <= segments[i - 1].end) {
      throw ValidationError("segment " + std::to_string(i) + " overlaps or precedes segment " +
                            std::to_string(i - 1));
    }
  }
  for (const auto& s : segments) {
    auto begin = std::lower_bound(seq.rows.begin(), seq.rows.end(), s.start,
                                  [](const RawPoint& p, std::int64_t f) { return p.frame < f; });
    auto end = std::upper_bound(seq.rows.begin(), seq.rows.end(), s.end,
                                [](std::int64_t f, const RawPoint& p) { return f < p.frame; });
    auto sub = sub_sequence(seq, static_cast<std::size_t>(begin - seq.rows.begin()),
                            static_cast<std::size_t>(end - seq.rows.begin()), s.start);
    sub.label = s.label;
    out.emplace_back(std::move(sub), s.label);
  }
  return out;
}

void PreprocessPolicy::validate() const {
  if (window < 1 || stride < 1) throw ValidationError("policy window and stride must be >= 1");
  for (std::size_t i = 1; i < segments.size(); ++i) {
    if (segments[i].start <= segments[i - 1].end) {
      throw ValidationError("policy segments must be ordered and non-overlapping");
    }
  }
}

PreprocessPolicy policy_for_source(std::string_view source_name) {
  PreprocessPolicy p;
  if (source_name == "radhar") {
    p.mode = PolicyMode::kSlidingWindow;
    p.window = 60;
    p.stride = 10;
  } else if (source_name == "mri") {
    p.mode = PolicyMode::kSegmentation;
    p.window = 32;
    p.stride = 16;
    p.window_after_segmentation = true;
  } else if (source_name == "mmfi") {
    p.mode = PolicyMode::kSegmentation;
  } else if (source_name == "passthrough" || source_name == "synthetic") {
    p.mode = PolicyMode::kPassthrough;
  } else {
    throw ConfigError("unknown source '" + std::string(source_name) +
                      "' (supported: radhar, mri, mmfi, passthrough)");
  }
  return p;
}

std::vector<std::size_t> farthest_point_sample(std::span<const float> xyz, std::size_t target) {
  if (xyz.size() % 3 != 0) throw ValidationError("xyz buffer length must be a multiple of 3");
  const std::size_t n = xyz.size() / 3;
  if (target < 1 || target > n) {
    throw ValidationError("farthest_point_sample needs 1 <= M <= N (got M=" + std::to_string(target) +
                          ", N=" + std::to_string(n) + "); use repeat sampling when N < M");
  }
  auto dist2 = [&](std::size_t i, const double* c) {
    double s = 0;
    for (int k = 0; k < 3; ++k) {
      const double d = static_cast<double>(xyz[3 * i + k]) - c[k];
      s += d * d;
    }
    return s;
  };

  double centroid[3] = {0, 0, 0};
  for (std::size_t i = 0; i < n; ++i)
    for (int k = 0; k < 3; ++k) centroid[k] += xyz[3 * i + k];
  for (double& c : centroid) c /= static_cast<double>(n);

  std::size_t first = 0;
  double best = -1;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = dist2(i, centroid);
    if (d > best) {
      best = d;
      first = i;
    }
  }

  std::vector<std::size_t> picked{first};
  picked.reserve(target);
  std::vector<double> min_d(n, std::numeric_limits<double>::infinity());
  std::vector<bool> taken(n, false);
  taken[first] = true;
  std::size_t last = first;
  while (picked.size() < target) {
    double p[3] = {xyz[3 * last], xyz[3 * last + 1], xyz[3 * last + 2]};
    std::size_t next = n;
    double far = -1;
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      min_d[i] = std::min(min_d[i], dist2(i, p));
      if (min_d[i] > far) {
        far = min_d[i];
        next = i;
      }
    }
    taken[next] = true;
    picked.push_back(next);
    last = next;
  }
  return picked;
}

ClipTensor standardize_clip(const RawSequence& seq, bool require_contiguous_frames) {
  const auto runs = seq.frames();
  if (runs.empty()) throw ValidationError("cannot standardize a sequence without frames");
  if (require_contiguous_frames) {
    for (std::size_t i = 1; i < runs.size(); ++i) {
      if (runs[i].frame != runs[i - 1].frame + 1) {
        throw ValidationError("empty frame " + std::to_string(runs[i - 1].frame + 1) + " inside clip");
      }
    }
  }

  constexpr std::size_t T = core::kFrames;
  constexpr std::size_t P = core::kPointsPerFrame;
  ClipTensor clip = ClipTensor::standard();
  const std::size_t used = std::min(runs.size(), T);
  for (std::size_t k = 0; k < used; ++k) {
    const auto& run = runs.size() > T ? runs[uniform_frame_index(k, runs.size(), T)] : runs[k];
    const std::size_t n = run.size();

    std::vector<std::size_t> order;
    if (n > P) {
      std::vector<float> xyz(3 * n);
      for (std::size_t i = 0; i < n; ++i) {
        const auto& r = seq.rows[run.begin + i];
        xyz[3 * i] = r.x;
        xyz[3 * i + 1] = r.y;
        xyz[3 * i + 2] = r.z;
      }
      order = farthest_point_sample(xyz, P);
    } else {
      order.resize(P);
      for (std::size_t slot = 0; slot < P; ++slot) order[slot] = slot % n;
    }

    for (std::size_t slot = 0; slot < P; ++slot) {
      const auto& r = seq.rows[run.begin + order[slot]];
      clip.at(k, slot, core::kX) = r.x;
      clip.at(k, slot, core::kY) = r.y;
      clip.at(k, slot, core::kZ) = r.z;
      clip.at(k, slot, core::kDoppler) = r.doppler;
      clip.at(k, slot, core::kIntensity) = r.intensity;
    }
    clip.set_padded(k, false);
    clip.set_valid_points(k, std::min(n, P));
  }
  return clip;
}

ChannelStats compute_stats(std::span<const ClipTensor> clips) {
  std::array<double, core::kChannels> sum{}, sum2{};
  std::size_t count = 0;
  for (const auto& clip : clips) {
    for (std::size_t t = 0; t < clip.frames(); ++t) {
      if (clip.is_padded(t)) continue;
      for (std::size_t p = 0; p < clip.points_per_frame(); ++p) {
        for (std::size_t c = 0; c < core::kChannels; ++c) sum[c] += clip.at(t, p, c);
      }
      count += clip.points_per_frame();
    }
  }
  ChannelStats stats;
  if (count == 0) {
    stats.stddev.fill(1.0);
    return stats;
  }
  for (std::size_t c = 0; c < core::kChannels; ++c) stats.mean[c] = sum[c] / static_cast<double>(count);
  // Second pass for a numerically stable variance.
  for (const auto& clip : clips) {
    for (std::size_t t = 0; t < clip.frames(); ++t) {
      if (clip.is_padded(t)) continue;
      for (std::size_t p = 0; p < clip.points_per_frame(); ++p) {
        for (std::size_t c = 0; c < core::kChannels; ++c) {
          const double d = clip.at(t, p, c) - stats.mean[c];
          sum2[c] += d * d;
        }
      }
    }
  }
  for (std::size_t c = 0; c < core::kChannels; ++c) {
    stats.stddev[c] = std::max(std::sqrt(sum2[c] / static_cast<double>(count)), kStdFloor);
  }
  return stats;
}

void apply_stats(ClipTensor& clip, const ChannelStats& stats) {
  for (std::size_t t = 0; t < clip.frames(); ++t) {
    if (clip.is_padded(t)) continue;
    for (std::size_t p = 0; p < clip.points_per_frame(); ++p) {
      for (std::size_t c = 0; c < core::kChannels; ++c) {
        auto& v = clip.at(t, p, c);
        v = static_cast<float>((v - stats.mean[c]) / stats.stddev[c]);
      }
    }
  }
}

void normalize(std::span<ClipTensor> clips, core::Normalization mode) {
  switch (mode) {
    case core::Normalization::kNone:
      return;
    case core::Normalization::kClipLevel:
      for (auto& clip : clips) apply_stats(clip, compute_stats(std::span<const ClipTensor>(&clip, 1)));
      return;
    case core::Normalization::kDatasetLevel: {
      const auto stats = compute_stats(clips);
      for (auto& clip : clips) apply_stats(clip, stats);
      return;
    }
  }
}

}  // namespace dapnet::ingest
