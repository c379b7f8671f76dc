// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The dapnet Authors

#include "dapnet/cli/cli.hpp"

#include <CLI11.hpp>
#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

#include "dapnet/core/archive.hpp"
#include "dapnet/core/error.hpp"
#include "dapnet/core/manifest.hpp"
#include "dapnet/core/zip.hpp"
#include "dapnet/eval/eval.hpp"
#include "dapnet/ingest/prep.hpp"
#include "dapnet/ingest/taxonomy.hpp"
#include "dapnet/model/config.hpp"
#include "dapnet/model/tam.hpp"

namespace dapnet::cli {

namespace fs = std::filesystem;

const core::FieldTable<CliOptions>& cli_options_table() {
  static const core::FieldTable<CliOptions> table = [] {
    core::FieldTable<CliOptions> t;
    t.add("ingest.normalization", "prep: none, clip_level or dataset_level.",
          [](CliOptions& c) -> std::string& { return c.normalization; });
    t.add("ingest.taxonomy", "Taxonomy CSV (empty: bundled UniMM-HAR table).",
          [](CliOptions& c) -> std::string& { return c.taxonomy; });
    t.add("split.protocol", "random, c_sub, c_set or strict_cross_source.",
          [](CliOptions& c) -> std::string& { return c.protocol; });
    t.add("split.seed", "Shuffle seed of the random protocol.",
          [](CliOptions& c) -> std::uint64_t& { return c.split_seed; });
    t.add("split.train_fraction", "Training share of the random protocol.",
          [](CliOptions& c) -> double& { return c.train_fraction; });
    t.add("split.test_source", "Held-out source of strict_cross_source (empty: mmfi or the last source).",
          [](CliOptions& c) -> std::string& { return c.test_source; });
    t.add("split.train_sources", "Comma-separated training sources (empty: all others).",
          [](CliOptions& c) -> std::string& { return c.train_sources; });
    t.add("split.classes", "Comma-separated class indices (empty: classes shared by train and test sources).",
          [](CliOptions& c) -> std::string& { return c.classes; });
    t.add("tam.bank", "Precomputed embedding bank zip (empty: built-in hash encoder).",
          [](CliOptions& c) -> std::string& { return c.tam_bank; });
    t.add("eval.mmd_bandwidth", "Gaussian MMD bandwidth (<= 0: median pairwise distance).",
          [](CliOptions& c) -> double& { return c.mmd_bandwidth; });
    t.add("run.deterministic", "Single-threaded compute.",
          [](CliOptions& c) -> bool& { return c.deterministic; });
    return t;
  }();
  return table;
}

void apply_key(RunConfig& cfg, const std::string& key, const nlohmann::json& value) {
  if (model::model_config_table().apply(cfg.model, key, value)) return;
  if (train::train_config_table().apply(cfg.train, key, value)) return;
  if (cli_options_table().apply(cfg.cli, key, value)) return;
  if (key.rfind("synth.", 0) == 0) {
    synth::apply_synth_key(cfg.synth, key, value);
    return;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

void apply_json(RunConfig& cfg, const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  const nlohmann::json flat = core::flatten_json(j);
  for (const auto& [k, v] : flat.items()) apply_key(cfg, k, v);
}

void apply_file(RunConfig& cfg, const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file '" + path.string() + "' is not valid JSON: " + e.what());
  }
  apply_json(cfg, j);
}

nlohmann::json to_json(const RunConfig& cfg) {
  nlohmann::json j = model::model_config_table().to_json(cfg.model);
  j.update(train::train_config_table().to_json(cfg.train));
  j.update(cli_options_table().to_json(cfg.cli));
  j.update(synth::synth_config_to_json(cfg.synth));
  return j;
}

void validate(const RunConfig& cfg) {
  cfg.model.validate();
  try {
    cfg.train.validate();
    core::parse_normalization(cfg.cli.normalization);
    eval::parse_protocol(cfg.cli.protocol);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
}

std::string config_reference() {
  const RunConfig defaults;
  const auto values = to_json(defaults);
  std::map<std::string, std::string> docs;
  for (const auto& f : model::model_config_table().fields()) docs[f.key] = f.doc;
  for (const auto& f : train::train_config_table().fields()) docs[f.key] = f.doc;
  for (const auto& f : cli_options_table().fields()) docs[f.key] = f.doc;
  for (const auto& [k, d] : synth::synth_config_docs()) docs[k] = d;

  std::ostringstream out;
  out << "# Configuration reference\n\n"
      << "Generated by `dapnet config-ref`. Keys may be given in a JSON config file (nested objects or dotted\n"
      << "keys) via `--config FILE`, or on the command line as `--key value`. Unknown keys are rejected.\n\n"
      << "| key | default | description |\n|---|---|---|\n";
  for (const auto& [key, doc] : docs) {
    std::string value = values.at(key).dump();
    if (value.size() > 40) value = "(see `dapnet synth` snapshot)";
    std::replace(value.begin(), value.end(), '|', '/');
    out << "| `" << key << "` | `" << value << "` | " << doc << " |\n";
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Plots

namespace {

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string fmt(double v, int precision = 3) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(precision) << v;
  return s.str();
}

}  // namespace

std::string bar_chart_svg(const std::string& title, const std::vector<std::string>& labels,
                          const std::vector<double>& values) {
  const double bar = 36, gap = 14, left = 60, top = 40, height = 220;
  const double width = left + static_cast<double>(values.size()) * (bar + gap) + 20;
  double vmax = 0;
  for (double v : values) {
    if (std::isfinite(v)) vmax = std::max(vmax, v);
  }
  if (vmax <= 0) vmax = 1;
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << top + height + 120
    << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  o << "<text x=\"" << left << "\" y=\"20\" font-size=\"14\">" << escape_xml(title) << "</text>\n";
  o << "<line x1=\"" << left << "\" y1=\"" << top + height << "\" x2=\"" << width - 10 << "\" y2=\""
    << top + height << "\" stroke=\"black\"/>\n";
  o << "<text x=\"" << left - 6 << "\" y=\"" << top + 4 << "\" text-anchor=\"end\">" << fmt(vmax) << "</text>\n";
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double v = std::isfinite(values[i]) ? std::max(values[i], 0.0) : 0.0;
    const double h = height * v / vmax;
    const double x = left + gap / 2 + static_cast<double>(i) * (bar + gap);
    o << "<rect x=\"" << x << "\" y=\"" << top + height - h << "\" width=\"" << bar << "\" height=\"" << h
      << "\" fill=\"#4878a8\"/>\n";
    o << "<text x=\"" << x + bar / 2 << "\" y=\"" << top + height - h - 4 << "\" text-anchor=\"middle\">"
      << (std::isfinite(values[i]) ? fmt(values[i]) : "n/a") << "</text>\n";
    o << "<text transform=\"translate(" << x + bar / 2 << "," << top + height + 12
      << ") rotate(45)\">" << escape_xml(i < labels.size() ? labels[i] : "") << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

std::string radar_chart_svg(const std::string& title, const std::vector<std::string>& labels,
                            const std::vector<double>& values) {
  const double cx = 200, cy = 210, radius = 140;
  const double kPi = 3.14159265358979323846;
  const std::size_t n = values.size();
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"400\" height=\"420\" font-family=\"sans-serif\" "
       "font-size=\"11\">\n";
  o << "<text x=\"20\" y=\"20\" font-size=\"14\">" << escape_xml(title) << "</text>\n";
  auto point = [&](std::size_t i, double r) {
    const double a = -kPi / 2 + 2 * kPi * static_cast<double>(i) / static_cast<double>(std::max<std::size_t>(n, 1));
    return std::pair{cx + r * std::cos(a), cy + r * std::sin(a)};
  };
  for (double ring : {0.25, 0.5, 0.75, 1.0}) {
    o << "<polygon fill=\"none\" stroke=\"#ccc\" points=\"";
    for (std::size_t i = 0; i < n; ++i) {
      const auto [x, y] = point(i, radius * ring);
      o << x << "," << y << " ";
    }
    o << "\"/>\n";
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto [x, y] = point(i, radius);
    const auto [lx, ly] = point(i, radius + 18);
    o << "<line x1=\"" << cx << "\" y1=\"" << cy << "\" x2=\"" << x << "\" y2=\"" << y << "\" stroke=\"#ccc\"/>\n";
    o << "<text x=\"" << lx << "\" y=\"" << ly << "\" text-anchor=\"middle\">"
      << escape_xml(i < labels.size() ? labels[i] : "") << "</text>\n";
  }
  o << "<polygon fill=\"#4878a8\" fill-opacity=\"0.35\" stroke=\"#4878a8\" points=\"";
  for (std::size_t i = 0; i < n; ++i) {
    const double v = std::isfinite(values[i]) ? std::clamp(values[i], 0.0, 1.0) : 0.0;
    const auto [x, y] = point(i, radius * v);
    o << x << "," << y << " ";
  }
  o << "\"/>\n</svg>\n";
  return o.str();
}

// ---------------------------------------------------------------------------
// Commands

namespace {

void write_text(const fs::path& path, const std::string& text) {
  core::write_file_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void write_snapshot(const RunConfig& cfg, const fs::path& dir) {
  write_text(dir / "config.json", to_json(cfg).dump(2) + "\n");
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream s(text);
  std::string item;
  while (std::getline(s, item, ',')) {
    item.erase(0, item.find_first_not_of(' '));
    item.erase(item.find_last_not_of(' ') + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

eval::SplitOptions split_options(const CliOptions& c) {
  eval::SplitOptions o;
  o.seed = c.split_seed;
  o.train_fraction = c.train_fraction;
  o.test_source = c.test_source;
  for (auto& s : split_list(c.train_sources)) o.train_sources.insert(s);
  const auto classes = split_list(c.classes);
  if (!classes.empty()) {
    std::set<std::size_t> set;
    for (const auto& v : classes) {
      try {
        set.insert(static_cast<std::size_t>(std::stoul(v)));
      } catch (const std::exception&) {
        throw ConfigError("split.classes: '" + v + "' is not a class index");
      }
    }
    o.classes = set;
  }
  return o;
}

struct Dataset {
  std::vector<core::ClipRecord> records;
  std::vector<std::string> class_names;
};

Dataset load_records(const std::vector<core::ManifestEntry>& entries, const fs::path& manifest,
                     const CliOptions& opt) {
  Dataset d;
  const fs::path base = manifest.parent_path();
  d.records.reserve(entries.size());
  std::size_t max_label = 0;
  bool all_known = !entries.empty();
  for (const auto& e : entries) {
    auto r = core::read_clip_archive(base / e.path);
    if (r.label != e.label) {
      throw FormatError(FormatError::Kind::kLabelRange,
                        "manifest label of '" + e.path + "' disagrees with the archive");
    }
    max_label = std::max(max_label, r.label);
    all_known = all_known && ingest::dataset_code(e.source).has_value();
    d.records.push_back(std::move(r));
  }
  if (all_known) {
    const auto tax = ingest::load_taxonomy(opt.taxonomy.empty() ? ingest::default_taxonomy_path()
                                                                : fs::path(opt.taxonomy));
    d.class_names = tax.labels.names();
    if (max_label >= d.class_names.size()) {
      throw FormatError(FormatError::Kind::kLabelRange, "label outside the taxonomy");
    }
  } else {
    d.class_names.assign(max_label + 1, "");
    for (const auto& r : d.records) {
      if (d.class_names[r.label].empty()) d.class_names[r.label] = r.label_name;
    }
    for (std::size_t k = 0; k < d.class_names.size(); ++k) {
      if (d.class_names[k].empty()) d.class_names[k] = "class" + std::to_string(k);
    }
  }
  return d;
}

model::EmbeddingBank make_bank(const RunConfig& cfg, const std::vector<std::string>& class_names) {
  if (!cfg.cli.tam_bank.empty()) {
    auto bank = model::load_embedding_bank(cfg.cli.tam_bank, class_names.size());
    if (bank.dim() != cfg.model.c_text) {
      throw ConfigError("tam.bank has C_text " + std::to_string(bank.dim()) + " but tam.c_text is " +
                        std::to_string(cfg.model.c_text));
    }
    return bank;
  }
  const model::HashTextEncoder enc(cfg.model.c_text);
  return model::build_embedding_bank(model::make_prompts(cfg.model.prompt_template, class_names), enc);
}

std::map<std::string, std::size_t> index_by_id(const Dataset& d) {
  std::map<std::string, std::size_t> out;
  for (std::size_t i = 0; i < d.records.size(); ++i) out[core::encode_sample_id(d.records[i].id)] = i;
  return out;
}

struct Prepared {
  fs::path manifest;
  Dataset data;
  eval::SplitManifest split;
  std::vector<train::Example> train;
  std::vector<eval::Sample> train_samples;
  std::vector<eval::Sample> test;
};

Prepared prepare(const RunConfig& cfg, const fs::path& manifest) {
  Prepared p;
  p.manifest = manifest;
  const auto entries = core::read_manifest(manifest);
  p.split = eval::split(entries, eval::parse_protocol(cfg.cli.protocol), split_options(cfg.cli));
  std::vector<core::ManifestEntry> used = p.split.train;
  used.insert(used.end(), p.split.test.begin(), p.split.test.end());
  p.data = load_records(used, manifest, cfg.cli);
  const auto index = index_by_id(p.data);
  for (const auto& e : p.split.train) {
    const auto& r = p.data.records[index.at(core::encode_sample_id(e.id))];
    const auto key = train::sample_key(r.id);
    p.train.push_back({&r.clip, r.label, key});
    p.train_samples.push_back({&r.clip, r.label, key, e.source});
  }
  for (const auto& e : p.split.test) {
    const auto& r = p.data.records[index.at(core::encode_sample_id(e.id))];
    p.test.push_back({&r.clip, r.label, train::sample_key(r.id), e.source});
  }
  return p;
}

// "--key value" / "--key=value" pairs left over by the parser.
void apply_overrides(RunConfig& cfg, const std::vector<std::string>& extras, const std::string& command) {
  for (std::size_t i = 0; i < extras.size(); ++i) {
    std::string tok = extras[i];
    if (tok.rfind("--", 0) != 0) throw ConfigError("unexpected argument '" + tok + "'");
    tok = tok.substr(2);
    std::string value;
    if (const auto eq = tok.find('='); eq != std::string::npos) {
      value = tok.substr(eq + 1);
      tok = tok.substr(0, eq);
    } else {
      if (i + 1 >= extras.size()) throw ConfigError("missing value for '--" + tok + "'");
      value = extras[++i];
    }
    if (tok == "epochs") tok = "train.epochs";
    else if (tok == "lr") tok = "train.learning_rate";
    else if (tok == "batch-size") tok = "train.batch_size";
    else if (tok == "seed") tok = command == "synth" ? "synth.seed" : "train.seed";
    apply_key(cfg, tok, core::parse_cli_value(value));
  }
}

void print_report(const eval::MetricReport& r, std::ostream& out) {
  out << "protocol " << r.protocol << ", " << r.n_test << " test clips\n"
      << "  macro acc  " << fmt(r.macro_acc, 4) << "\n"
      << "  micro acc  " << fmt(r.micro_acc, 4) << "\n"
      << "  offdiag    " << fmt(r.offdiag_acc, 4) << "\n"
      << "  centroid   " << fmt(r.centroid_distance, 6) << "\n"
      << "  coral      " << fmt(r.coral, 6) << "\n"
      << "  mmd        " << fmt(r.mmd, 6) << " (" << r.kernel << ", h=" << fmt(r.mmd_bandwidth, 4) << ", pool "
      << r.alignment_pool << ")\n";
}

int cmd_prep(RunConfig& cfg, const std::string& source, const fs::path& in, const fs::path& out_dir,
             std::ostream& out) {
  validate(cfg);
  ingest::PrepOptions opt;
  opt.normalization = core::parse_normalization(cfg.cli.normalization);
  opt.taxonomy = cfg.cli.taxonomy;
  const auto s = ingest::prepare_source(in, source, out_dir, opt);
  write_snapshot(cfg, out_dir);
  out << source << ": " << s.sequences << " sequences, " << s.frames << " frames, " << s.entries.size()
      << " clips -> " << (out_dir / "manifest.csv").string() << "\n";
  return kOk;
}

int cmd_synth(RunConfig& cfg, const fs::path& out_dir, std::ostream& out) {
  cfg.synth.validate();
  const auto records = synth::generate_benchmark(cfg.synth);
  const auto entries = synth::write_benchmark(records, out_dir);
  write_snapshot(cfg, out_dir);
  std::map<std::string, std::size_t> per_source;
  for (const auto& e : entries) ++per_source[e.source];
  out << entries.size() << " clips (" << cfg.synth.classes << " classes)";
  for (const auto& [s, n] : per_source) out << ", " << s << ": " << n;
  out << " -> " << (out_dir / "manifest.csv").string() << "\n";
  return kOk;
}

int cmd_train(RunConfig& cfg, const fs::path& manifest, const fs::path& out_dir, std::ostream& out) {
  validate(cfg);
  if (cfg.cli.deterministic) Eigen::setNbThreads(1);
  const Prepared p = prepare(cfg, manifest);
  if (p.train.empty()) throw ValidationError("the split leaves no training clips");
  fs::create_directories(out_dir);
  eval::write_split(p.split, out_dir / "split.csv");
  write_snapshot(cfg, out_dir);

  const auto bank = make_bank(cfg, p.data.class_names);
  train::Model model(cfg.model, p.data.class_names.size(), bank.text, cfg.train.seed);
  std::vector<train::Example> test;
  for (const auto& s : p.test) test.push_back({s.clip, s.label, s.key});
  out << "training on " << p.train.size() << " clips, testing on " << test.size() << " (" << cfg.cli.protocol
      << ")\n";
  const auto log = train::train(model, p.train, cfg.train, test, [&](const train::EpochLog& e) {
    out << "epoch " << e.epoch << "/" << cfg.train.epochs << " loss " << fmt(e.loss, 4) << " acc "
        << fmt(e.acc, 4) << " q " << fmt(e.q, 4);
    if (e.test_acc) out << " test_acc " << fmt(*e.test_acc, 4);
    out << "\n" << std::flush;
  });
  train::write_log_csv(log, out_dir / "log.csv");
  train::save_checkpoint(model, p.data.class_names, bank.prompts, bank.encoder_name, to_json(cfg),
                         out_dir / "checkpoint.zip");
  out << "checkpoint -> " << (out_dir / "checkpoint.zip").string() << "\n";
  return kOk;
}

int cmd_eval(RunConfig& cfg, const train::Checkpoint& ckpt, const fs::path& manifest, const fs::path& out_dir,
             bool plots, std::ostream& out) {
  validate(cfg);
  if (cfg.cli.deterministic) Eigen::setNbThreads(1);
  const Prepared p = prepare(cfg, manifest);
  if (p.data.class_names.size() != ckpt.model.classes()) {
    throw FormatError(FormatError::Kind::kShapeMismatch,
                      "checkpoint has " + std::to_string(ckpt.model.classes()) + " classes, the data " +
                          std::to_string(p.data.class_names.size()));
  }
  eval::EvalOptions opt;
  opt.sample_seed = cfg.train.sample_seed;
  opt.mmd.bandwidth = cfg.cli.mmd_bandwidth;
  opt.protocol = cfg.cli.protocol;
  opt.class_names = ckpt.class_names;
  const auto report = eval::evaluate(ckpt.model, p.test, p.train_samples, opt);
  fs::create_directories(out_dir);
  eval::write_report_csv(report, out_dir / "report.csv");
  write_snapshot(cfg, out_dir);
  print_report(report, out);
  if (plots) {
    write_text(out_dir / "metrics_bar.svg",
               bar_chart_svg("Accuracy (" + report.protocol + ")", {"macro", "micro", "offdiag"},
                             {report.macro_acc, report.micro_acc, report.offdiag_acc}));
    write_text(out_dir / "per_class_bar.svg",
               bar_chart_svg("Per-class accuracy", report.class_names, report.per_class_acc));
    write_text(out_dir / "metrics_radar.svg",
               radar_chart_svg("Metrics (" + report.protocol + ")",
                               {"macro", "micro", "offdiag", "1/(1+coral)", "1/(1+mmd)"},
                               {report.macro_acc, report.micro_acc, report.offdiag_acc, 1.0 / (1.0 + report.coral),
                                1.0 / (1.0 + report.mmd)}));
  }
  out << "report -> " << (out_dir / "report.csv").string() << "\n";
  return kOk;
}

struct MetricRow {
  const char* name;
  double eval::MetricReport::*field;
  bool increasing;
};

constexpr MetricRow kMetricRows[] = {
    {"macro_acc", &eval::MetricReport::macro_acc, true},
    {"micro_acc", &eval::MetricReport::micro_acc, true},
    {"offdiag_acc", &eval::MetricReport::offdiag_acc, true},
    {"centroid_distance", &eval::MetricReport::centroid_distance, false},
    {"coral", &eval::MetricReport::coral, false},
    {"mmd", &eval::MetricReport::mmd, false},
};

int cmd_report(const std::vector<std::string>& baseline, const std::vector<std::string>& ours,
               const fs::path& out_dir, std::ostream& out) {
  if (baseline.empty() || ours.empty()) throw ConfigError("report needs --baseline and --ours report files");
  auto mean_of = [](const std::vector<std::string>& files) {
    std::vector<double> sums(std::size(kMetricRows), 0.0);
    for (const auto& f : files) {
      const auto r = eval::read_report_csv(f);
      for (std::size_t i = 0; i < sums.size(); ++i) sums[i] += r.*kMetricRows[i].field;
    }
    for (auto& s : sums) s /= static_cast<double>(files.size());
    return sums;
  };
  const auto b = mean_of(baseline);
  const auto o = mean_of(ours);
  std::ostringstream csv;
  csv << std::setprecision(17) << "metric,baseline,ours,improvement_percent\n";
  out << "metric              baseline      ours          improvement %\n";
  std::vector<std::string> labels;
  std::vector<double> gains;
  for (std::size_t i = 0; i < b.size(); ++i) {
    const auto& m = kMetricRows[i];
    const double imp = m.increasing ? eval::improvement_increasing(o[i], b[i])
                                    : eval::improvement_decreasing(o[i], b[i]);
    csv << m.name << "," << b[i] << "," << o[i] << "," << imp << "\n";
    out << std::left << std::setw(20) << m.name << std::setw(14) << fmt(b[i], 6) << std::setw(14) << fmt(o[i], 6)
        << fmt(imp, 2) << "\n";
    labels.push_back(m.name);
    gains.push_back(imp);
  }
  fs::create_directories(out_dir);
  write_text(out_dir / "comparison.csv", csv.str());
  write_text(out_dir / "improvement_bar.svg", bar_chart_svg("Relative improvement (%)", labels, gains));
  out << "comparison -> " << (out_dir / "comparison.csv").string() << "\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"dapnet: Doppler-aware point-cloud action recognition toolkit", "dapnet"};
  app.require_subcommand(1);

  std::string config_file;
  bool deterministic = false;
  fs::path out_dir;
  auto common = [&](CLI::App* sub, bool with_config = true) {
    if (with_config) {
      sub->add_option("--config", config_file, "JSON config file");
      sub->add_flag("--deterministic", deterministic, "Force single-threaded compute");
    }
    sub->allow_extras();
  };

  std::string source;
  fs::path in_dir;
  auto* prep = app.add_subcommand("prep", "Convert a source directory into clip archives and a manifest");
  prep->add_option("--source", source, "Source name (radhar, mri, mmfi)")->required();
  prep->add_option("--in", in_dir, "Input directory")->required();
  prep->add_option("--out", out_dir, "Output directory")->required();
  common(prep);

  auto* syn = app.add_subcommand("synth", "Generate the synthetic multi-source benchmark");
  syn->add_option("--out", out_dir, "Output directory")->required();
  common(syn);

  fs::path manifest;
  std::string protocol;
  auto* trn = app.add_subcommand("train", "Split, train and write a checkpoint");
  trn->add_option("--manifest", manifest, "Manifest CSV")->required();
  trn->add_option("--protocol", protocol, "random, c_sub, c_set or strict_cross_source");
  trn->add_option("--out", out_dir, "Output directory")->required();
  common(trn);

  fs::path checkpoint;
  bool plots = false;
  auto* evl = app.add_subcommand("eval", "Evaluate a checkpoint and write a metric report");
  evl->add_option("--checkpoint", checkpoint, "Checkpoint zip")->required();
  evl->add_option("--manifest", manifest, "Manifest CSV")->required();
  evl->add_option("--protocol", protocol, "Protocol (default: the one used for training)");
  evl->add_option("--out", out_dir, "Output directory")->required();
  evl->add_flag("--plots", plots, "Write SVG bar and radar plots");
  common(evl);

  std::vector<std::string> baseline, ours;
  auto* rep = app.add_subcommand("report", "Compare metric reports (seed means, relative improvement)");
  rep->add_option("--baseline", baseline, "Baseline report CSVs")->required();
  rep->add_option("--ours", ours, "Reports of the compared model")->required();
  rep->add_option("--out", out_dir, "Output directory")->required();

  fs::path ref_out;
  auto* ref = app.add_subcommand("config-ref", "Print the configuration key reference (Markdown)");
  ref->add_option("--out", ref_out, "Write to a file instead of stdout");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  }

  try {
    if (*ref) {
      const auto page = config_reference();
      if (ref_out.empty()) {
        out << page;
      } else {
        write_text(ref_out, page);
      }
      return kOk;
    }
    if (*rep) return cmd_report(baseline, ours, out_dir, out);

    RunConfig cfg;
    CLI::App* sub = app.get_subcommands().front();
    if (*evl) {
      auto ckpt = train::load_checkpoint(checkpoint);
      apply_json(cfg, ckpt.run_config);
      if (!config_file.empty()) apply_file(cfg, config_file);
      apply_overrides(cfg, sub->remaining(), sub->get_name());
      if (!protocol.empty()) cfg.cli.protocol = protocol;
      if (deterministic) cfg.cli.deterministic = true;
      return cmd_eval(cfg, ckpt, manifest, out_dir, plots, out);
    }
    if (!config_file.empty()) apply_file(cfg, config_file);
    apply_overrides(cfg, sub->remaining(), sub->get_name());
    if (!protocol.empty()) cfg.cli.protocol = protocol;
    if (deterministic) cfg.cli.deterministic = true;
    if (*prep) return cmd_prep(cfg, source, in_dir, out_dir, out);
    if (*syn) return cmd_synth(cfg, out_dir, out);
    return cmd_train(cfg, manifest, out_dir, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const FormatError& e) {
    err << "format error: " << e.what() << "\n";
    return kFormatError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
}

}  // namespace dapnet::cli
