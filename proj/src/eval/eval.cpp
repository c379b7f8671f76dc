// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The dapnet Authors

#include "dapnet/eval/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "dapnet/model/tam.hpp"

namespace dapnet::eval {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::map<std::string, std::vector<core::ManifestEntry>> by_source(const std::vector<core::ManifestEntry>& entries) {
  std::map<std::string, std::vector<core::ManifestEntry>> out;
  for (const auto& e : entries) out[e.source].push_back(e);
  return out;
}

}  // namespace

std::string_view to_string(Protocol p) {
  switch (p) {
    case Protocol::kRandom:
      return "random";
    case Protocol::kCSub:
      return "c_sub";
    case Protocol::kCSet:
      return "c_set";
    case Protocol::kStrictCrossSource:
      return "strict_cross_source";
  }
  return "random";
}

Protocol parse_protocol(std::string_view text) {
  if (text == "random") return Protocol::kRandom;
  if (text == "c_sub") return Protocol::kCSub;
  if (text == "c_set") return Protocol::kCSet;
  if (text == "strict_cross_source") return Protocol::kStrictCrossSource;
  throw ConfigError("unknown protocol '" + std::string(text) +
                    "' (expected random, c_sub, c_set, strict_cross_source)");
}

SplitManifest split(std::vector<core::ManifestEntry> entries, Protocol protocol, const SplitOptions& opt) {
  if (entries.empty()) throw ValidationError("split: empty manifest");
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    return a.source != b.source ? a.source < b.source : a.id < b.id;
  });
  SplitManifest out;
  out.protocol = protocol;
  const auto groups = by_source(entries);

  switch (protocol) {
    case Protocol::kRandom: {
      if (!(opt.train_fraction > 0.0 && opt.train_fraction < 1.0)) {
        throw ConfigError("random split: train fraction must lie in (0, 1)");
      }
      for (const auto& [source, items] : groups) {
        std::vector<std::size_t> order(items.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::mt19937_64 rng(d2r::mix_seed(opt.seed, model::fnv1a64(source)));
        std::shuffle(order.begin(), order.end(), rng);
        const auto n_train = static_cast<std::size_t>(std::llround(opt.train_fraction * static_cast<double>(items.size())));
        std::vector<std::size_t> train_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
        std::sort(train_idx.begin(), train_idx.end());
        std::vector<std::uint8_t> is_train(items.size(), 0);
        for (auto i : train_idx) is_train[i] = 1;
        for (std::size_t i = 0; i < items.size(); ++i) (is_train[i] ? out.train : out.test).push_back(items[i]);
      }
      break;
    }
    case Protocol::kCSub: {
      for (const auto& [source, items] : groups) {
        if (opt.csub_excluded.count(source) != 0) continue;
        int max_subject = 0;
        for (const auto& e : items) max_subject = std::max(max_subject, e.id.subject - 1);
        if (max_subject == 0) throw ValidationError("c_sub: source '" + source + "' records a single subject");
        for (const auto& e : items) (2 * (e.id.subject - 1) < max_subject + 1 ? out.train : out.test).push_back(e);
      }
      break;
    }
    case Protocol::kCSet: {
      for (const auto& [source, items] : groups) {
        std::set<int> envs;
        for (const auto& e : items) envs.insert(e.id.env);
        std::set<int> test_envs;
        auto it = envs.begin();
        for (std::size_t i = 0; i < envs.size() / 2; ++i, ++it) test_envs.insert(*it);
        for (const auto& e : items) (test_envs.count(e.id.env) != 0 ? out.test : out.train).push_back(e);
      }
      break;
    }
    case Protocol::kStrictCrossSource: {
      if (groups.size() < 2) throw ValidationError("strict_cross_source: needs at least two sources");
      std::string test_source = opt.test_source;
      if (test_source.empty()) test_source = groups.count("mmfi") != 0 ? "mmfi" : groups.rbegin()->first;
      if (groups.count(test_source) == 0) {
        throw ValidationError("strict_cross_source: test source '" + test_source + "' not in manifest");
      }
      std::set<std::string> train_sources = opt.train_sources;
      if (train_sources.empty()) {
        for (const auto& [s, _] : groups) {
          if (s != test_source) train_sources.insert(s);
        }
      }
      if (train_sources.count(test_source) != 0) {
        throw ValidationError("strict_cross_source: test source also listed for training");
      }
      std::set<std::size_t> classes;
      if (opt.classes) {
        classes = *opt.classes;
      } else {
        std::set<std::size_t> train_classes, test_classes;
        for (const auto& e : entries) {
          if (train_sources.count(e.source) != 0) train_classes.insert(e.label);
          if (e.source == test_source) test_classes.insert(e.label);
        }
        std::set_intersection(train_classes.begin(), train_classes.end(), test_classes.begin(), test_classes.end(),
                              std::inserter(classes, classes.end()));
      }
      for (const auto& e : entries) {
        if (classes.count(e.label) == 0) continue;
        if (e.source == test_source) {
          out.test.push_back(e);
        } else if (train_sources.count(e.source) != 0) {
          out.train.push_back(e);
        }
      }
      break;
    }
  }
  if (out.train.empty() || out.test.empty()) {
    throw ValidationError("protocol " + std::string(to_string(protocol)) + " produced an empty " +
                          (out.train.empty() ? "train" : "test") + " set");
  }
  return out;
}

void write_split(const SplitManifest& s, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write split " + path.string());
  out << "protocol,split,sample_id,label,source,path\n";
  auto rows = [&](const std::vector<core::ManifestEntry>& v, const char* name) {
    for (const auto& e : v) {
      out << to_string(s.protocol) << ',' << name << ',' << core::encode_sample_id(e.id) << ',' << e.label << ','
          << e.source << ',' << e.path << '\n';
    }
  };
  rows(s.train, "train");
  rows(s.test, "test");
}

SplitManifest read_split(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(FormatError::Kind::kBadContainer, "cannot open split " + path.string());
  std::string line;
  std::getline(in, line);
  SplitManifest s;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 6) {
      throw ParseError(ParseError::Reason::kRowWidth, lineno, "split line " + std::to_string(lineno) + ": expected 6 cells");
    }
    s.protocol = parse_protocol(cells[0]);
    core::ManifestEntry e;
    e.id = core::decode_sample_id(cells[2]);
    e.label = std::stoul(cells[3]);
    e.source = cells[4];
    e.path = cells[5];
    (cells[1] == "train" ? s.train : s.test).push_back(e);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Metrics

Confusion confusion_matrix(std::span<const std::size_t> truth, std::span<const std::size_t> pred, std::size_t k) {
  if (truth.size() != pred.size()) throw ValidationError("confusion: truth/prediction length mismatch");
  Confusion c = Confusion::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] >= k || pred[i] >= k) throw ValidationError("confusion: class index out of range");
    c(static_cast<Eigen::Index>(truth[i]), static_cast<Eigen::Index>(pred[i])) += 1.0;
  }
  return c;
}

MacroMicro macro_micro(const Confusion& c) {
  const double total = c.sum();
  if (total <= 0.0) throw ValidationError("macro_micro: empty confusion matrix");
  MacroMicro m;
  m.micro = c.trace() / total;
  double sum = 0.0;
  std::size_t n = 0;
  for (Eigen::Index k = 0; k < c.rows(); ++k) {
    const double support = c.row(k).sum();
    if (support <= 0.0) continue;
    sum += c(k, k) / support;
    ++n;
  }
  m.macro = sum / static_cast<double>(n);
  return m;
}

std::vector<double> per_class_accuracy(const Confusion& c) {
  std::vector<double> out(static_cast<std::size_t>(c.rows()), kNaN);
  for (Eigen::Index k = 0; k < c.rows(); ++k) {
    const double support = c.row(k).sum();
    if (support > 0.0) out[static_cast<std::size_t>(k)] = c(k, k) / support;
  }
  return out;
}

double offdiag_accuracy(std::span<const std::size_t> truth, std::span<const std::size_t> pred,
                        std::span<const std::string> sources) {
  const std::size_t n = truth.size();
  if (pred.size() != n || sources.size() != n) throw ValidationError("offdiag: length mismatch");
  if (std::set<std::string>(sources.begin(), sources.end()).size() < 2) {
    throw ValidationError("offdiag: needs samples from at least two sources");
  }
  // For sample j, the partners i are same-class samples of other sources, so
  // the pair count is (class members) - (class members sharing j's source).
  std::map<std::size_t, double> class_count;
  std::map<std::pair<std::size_t, std::string>, double> class_source_count;
  for (std::size_t i = 0; i < n; ++i) {
    class_count[truth[i]] += 1.0;
    class_source_count[{truth[i], sources[i]}] += 1.0;
  }
  double pairs = 0.0, correct = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const double partners = class_count[truth[j]] - class_source_count[{truth[j], sources[j]}];
    pairs += partners;
    if (pred[j] == truth[j]) correct += partners;
  }
  if (pairs == 0.0) throw ValidationError("offdiag: no cross-source same-class pairs");
  return correct / pairs;
}

double centroid_distance(const Features& a, const Features& b) {
  if (a.rows() == 0 || b.rows() == 0 || a.cols() != b.cols()) throw ValidationError("centroid_distance: bad shapes");
  return (a.colwise().mean() - b.colwise().mean()).norm();
}

namespace {

Features covariance(const Features& x) {
  if (x.rows() < 2) throw ValidationError("coral: each set needs at least two samples");
  const Features centered = x.rowwise() - x.colwise().mean();
  return centered.transpose() * centered / static_cast<double>(x.rows() - 1);
}

}  // namespace

double coral(const Features& a, const Features& b) {
  if (a.cols() != b.cols()) throw ValidationError("coral: feature widths differ");
  const double d = static_cast<double>(a.cols());
  return (covariance(a) - covariance(b)).squaredNorm() / (4.0 * d * d);
}

double median_bandwidth(const Features& a, const Features& b) {
  Features pooled(a.rows() + b.rows(), a.cols());
  pooled << a, b;
  std::vector<double> dist;
  dist.reserve(static_cast<std::size_t>(pooled.rows() * (pooled.rows() - 1) / 2));
  for (Eigen::Index i = 0; i < pooled.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < pooled.rows(); ++j) dist.push_back((pooled.row(i) - pooled.row(j)).norm());
  }
  if (dist.empty()) return 1.0;
  const std::size_t mid = dist.size() / 2;
  std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid), dist.end());
  double med = dist[mid];
  if (dist.size() % 2 == 0) {
    med = 0.5 * (med + *std::max_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(mid)));
  }
  return med > 0.0 ? med : 1.0;
}

double mmd(const Features& a, const Features& b, double bandwidth) {
  if (a.rows() == 0 || b.rows() == 0 || a.cols() != b.cols()) throw ValidationError("mmd: bad shapes");
  if (!(bandwidth > 0.0)) throw ValidationError("mmd: bandwidth must be > 0");
  const double inv = 1.0 / (2.0 * bandwidth * bandwidth);
  auto mean_kernel = [&](const Features& x, const Features& y) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      for (Eigen::Index j = 0; j < y.rows(); ++j) s += std::exp(-(x.row(i) - y.row(j)).squaredNorm() * inv);
    }
    return s / static_cast<double>(x.rows() * y.rows());
  };
  return std::max(0.0, mean_kernel(a, a) + mean_kernel(b, b) - 2.0 * mean_kernel(a, b));
}

double improvement_increasing(double ours, double baseline) { return (ours - baseline) / baseline * 100.0; }
double improvement_decreasing(double ours, double baseline) { return (baseline - ours) / baseline * 100.0; }

SourceAlignment source_alignment(const Features& features, std::span<const std::string> sources,
                                 const MmdOptions& opt) {
  std::map<std::string, std::vector<Eigen::Index>> rows;
  for (std::size_t i = 0; i < sources.size(); ++i) rows[sources[i]].push_back(static_cast<Eigen::Index>(i));
  SourceAlignment out{kNaN, kNaN, kNaN, kNaN};
  if (rows.size() < 2) return out;
  std::vector<Features> groups;
  for (const auto& [_, idx] : rows) {
    Features g(static_cast<Eigen::Index>(idx.size()), features.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) g.row(static_cast<Eigen::Index>(i)) = features.row(idx[i]);
    groups.push_back(std::move(g));
  }
  double cen = 0, cor = 0, mm = 0, bw = 0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < groups.size(); ++a) {
    for (std::size_t b = a + 1; b < groups.size(); ++b) {
      const double h = opt.bandwidth > 0.0 ? opt.bandwidth : median_bandwidth(groups[a], groups[b]);
      cen += centroid_distance(groups[a], groups[b]);
      cor += coral(groups[a], groups[b]);
      mm += mmd(groups[a], groups[b], h);
      bw += h;
      ++pairs;
    }
  }
  const double n = static_cast<double>(pairs);
  return {cen / n, cor / n, mm / n, bw / n};
}

MetricReport evaluate(const train::Model& model, std::span<const Sample> test, std::span<const Sample> extra,
                      const EvalOptions& opt) {
  if (test.empty()) throw ValidationError("evaluate: empty test set");
  const std::size_t k = model.classes();
  std::set<std::string> test_sources;
  for (const auto& s : test) test_sources.insert(s.source);
  const bool pool_extra = test_sources.size() < 2 && !extra.empty();

  std::vector<std::size_t> truth, pred;
  std::vector<std::string> sources;
  std::vector<model::RowVec<float>> global;
  auto run = [&](const Sample& s) {
    const auto out = model.forward(*s.clip, train::eval_seed(opt.sample_seed, s.key));
    Eigen::Index at = 0;
    out.fused.maxCoeff(&at);
    truth.push_back(s.label);
    pred.push_back(static_cast<std::size_t>(at));
    sources.push_back(s.source);
    global.push_back(out.diag.global);
  };
  for (const auto& s : test) run(s);
  const std::size_t n_test = truth.size();
  if (pool_extra) {
    for (const auto& s : extra) run(s);
  }

  MetricReport r;
  r.protocol = opt.protocol;
  r.n_test = n_test;
  r.class_names = opt.class_names;
  if (r.class_names.size() != k) {
    r.class_names.clear();
    for (std::size_t i = 0; i < k; ++i) r.class_names.push_back("class" + std::to_string(i));
  }
  r.confusion = confusion_matrix(std::span(truth).first(n_test), std::span(pred).first(n_test), k);
  const auto mm = macro_micro(r.confusion);
  r.macro_acc = mm.macro;
  r.micro_acc = mm.micro;
  r.per_class_acc = per_class_accuracy(r.confusion);
  r.alignment_pool = pool_extra ? "train+test" : "test";

  const std::size_t pooled = truth.size();
  if (std::set<std::string>(sources.begin(), sources.end()).size() >= 2) {
    try {
      r.offdiag_acc = offdiag_accuracy(truth, pred, sources);
    } catch (const ValidationError&) {
      r.offdiag_acc = kNaN;
    }
  } else {
    r.offdiag_acc = kNaN;
  }
  Features feats(static_cast<Eigen::Index>(pooled), global.empty() ? 0 : global.front().cols());
  for (std::size_t i = 0; i < pooled; ++i) feats.row(static_cast<Eigen::Index>(i)) = global[i].cast<double>();
  const auto align = source_alignment(feats, sources, opt.mmd);
  r.centroid_distance = align.centroid;
  r.coral = align.coral;
  r.mmd = align.mmd;
  r.mmd_bandwidth = align.bandwidth;
  return r;
}

void write_report_csv(const MetricReport& r, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write report " + path.string());
  out.precision(17);
  out << "metric,value\n";
  out << "protocol," << r.protocol << '\n';
  out << "n_test," << r.n_test << '\n';
  out << "macro_acc," << r.macro_acc << '\n';
  out << "micro_acc," << r.micro_acc << '\n';
  out << "offdiag_acc," << r.offdiag_acc << '\n';
  out << "centroid_distance," << r.centroid_distance << '\n';
  out << "coral," << r.coral << '\n';
  out << "mmd," << r.mmd << '\n';
  out << "mmd_bandwidth," << r.mmd_bandwidth << '\n';
  out << "kernel," << r.kernel << '\n';
  out << "alignment_pool," << r.alignment_pool << '\n';
  out << "classes," << r.class_names.size() << '\n';
  for (std::size_t k = 0; k < r.class_names.size(); ++k) out << "class." << k << ',' << r.class_names[k] << '\n';
  for (std::size_t k = 0; k < r.per_class_acc.size(); ++k) out << "per_class_acc." << k << ',' << r.per_class_acc[k] << '\n';
  for (Eigen::Index i = 0; i < r.confusion.rows(); ++i) {
    for (Eigen::Index j = 0; j < r.confusion.cols(); ++j) {
      out << "confusion." << i << '.' << j << ',' << r.confusion(i, j) << '\n';
    }
  }
}

namespace {

double parse_double(const std::string& v, std::size_t line) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ParseError(ParseError::Reason::kNonNumeric, line, "report line " + std::to_string(line) + ": '" + v + "' is not a number");
  }
}

}  // namespace

MetricReport read_report_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(FormatError::Kind::kBadContainer, "cannot open report " + path.string());
  std::map<std::string, std::pair<std::string, std::size_t>> kv;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 || line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ParseError(ParseError::Reason::kRowWidth, lineno, "report line without value");
    kv[line.substr(0, comma)] = {line.substr(comma + 1), lineno};
  }
  auto get = [&](const std::string& key) -> const std::pair<std::string, std::size_t>& {
    auto it = kv.find(key);
    if (it == kv.end()) throw ParseError(ParseError::Reason::kMissingColumn, 0, "report lacks '" + key + "'");
    return it->second;
  };
  auto num = [&](const std::string& key) {
    const auto& [v, l] = get(key);
    return parse_double(v, l);
  };
  MetricReport r;
  r.protocol = get("protocol").first;
  r.n_test = static_cast<std::size_t>(num("n_test"));
  r.macro_acc = num("macro_acc");
  r.micro_acc = num("micro_acc");
  r.offdiag_acc = num("offdiag_acc");
  r.centroid_distance = num("centroid_distance");
  r.coral = num("coral");
  r.mmd = num("mmd");
  r.mmd_bandwidth = num("mmd_bandwidth");
  r.kernel = get("kernel").first;
  r.alignment_pool = get("alignment_pool").first;
  const auto k = static_cast<std::size_t>(num("classes"));
  r.confusion = Confusion::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
  for (std::size_t i = 0; i < k; ++i) {
    r.class_names.push_back(get("class." + std::to_string(i)).first);
    r.per_class_acc.push_back(num("per_class_acc." + std::to_string(i)));
    for (std::size_t j = 0; j < k; ++j) {
      r.confusion(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          num("confusion." + std::to_string(i) + "." + std::to_string(j));
    }
  }
  return r;
}

}  // namespace dapnet::eval
