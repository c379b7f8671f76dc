// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The dapnet Authors

#include "dapnet/model/config.hpp"

namespace dapnet::model {

std::string_view to_string(TamProjection p) {
  return p == TamProjection::kPerClass ? "per_class" : "broadcast";
}

TamProjection parse_tam_projection(std::string_view text) {
  if (text == "per_class") return TamProjection::kPerClass;
  if (text == "broadcast") return TamProjection::kBroadcast;
  throw ConfigError("unknown tam.projection '" + std::string(text) + "' (expected per_class, broadcast)");
}

std::string_view to_string(mfr::FastSource s) { return s == mfr::FastSource::kPreDup ? "pre_dup" : "post_dup"; }

mfr::FastSource parse_fast_source(std::string_view text) {
  if (text == "pre_dup") return mfr::FastSource::kPreDup;
  if (text == "post_dup") return mfr::FastSource::kPostDup;
  throw ConfigError("unknown mfr.fast_source '" + std::string(text) + "' (expected pre_dup, post_dup)");
}

void ModelConfig::validate() const {
  try {
    dsq.validate();
    densify.validate();
  } catch (const ValidationError& e) {
    throw ConfigError(e.what());
  }
  if (c_emb == 0 || film_hidden == 0) throw ConfigError("mfr.c_emb and mfr.hidden must be > 0");
  if (backbone_hidden == 0 || d == 0) throw ConfigError("model.hidden and model.d must be > 0");
  if (c_text == 0 || tam_hidden == 0) throw ConfigError("tam.c_text and tam.hidden must be > 0");
  if (!(alpha >= 0.0)) throw ConfigError("tam.alpha must be >= 0");
  if (prompt_template.find("[CLS]") == std::string::npos) {
    throw ConfigError("tam.template must contain [CLS]");
  }
}

const core::FieldTable<ModelConfig>& model_config_table() {
  static const core::FieldTable<ModelConfig> table = [] {
    core::FieldTable<ModelConfig> t;
    t.add("d2r.enabled", "Master switch for DSQ/TMPD/MFR; off feeds repeat-filled frames to the backbone.",
          [](ModelConfig& c) -> bool& { return c.d2r_enabled; });
    t.add("d2r.q_init", "Initial learnable quantile q (single global scalar).",
          [](ModelConfig& c) -> double& { return c.dsq.q; });
    t.add("d2r.sigma", "Gaussian rank-weight width in rank units.",
          [](ModelConfig& c) -> double& { return c.dsq.sigma; });
    t.add("d2r.gamma", "Logistic sharpness of the motion scores.",
          [](ModelConfig& c) -> double& { return c.dsq.gamma; });
    t.add("d2r.delta", "Fast/slow partition threshold on the motion scores.",
          [](ModelConfig& c) -> double& { return c.dsq.delta; });
    t.add("d2r.r", "Duplication factor for fast points.",
          [](ModelConfig& c) -> std::size_t& { return c.densify.r; });
    t.add("d2r.p_goal", "Points per densified frame.",
          [](ModelConfig& c) -> std::size_t& { return c.densify.p_goal; });
    t.add("ablation.dgr", "Use densified geometry (off: repeat-fill with d2r still scoring points).",
          [](ModelConfig& c) -> bool& { return c.dgr; });
    t.add("ablation.mfr", "Use motion-aware feature recalibration.",
          [](ModelConfig& c) -> bool& { return c.mfr; });
    t.add("mfr.c_emb", "Point embedding width.", [](ModelConfig& c) -> std::size_t& { return c.c_emb; });
    t.add("mfr.hidden", "Hidden width of the FiLM heads.",
          [](ModelConfig& c) -> std::size_t& { return c.film_hidden; });
    t.add_text(
        "mfr.fast_source", "Fast features from each fast point once (pre_dup) or weighted by copies (post_dup).",
        [](const ModelConfig& c) { return to_string(c.fast_source); },
        [](ModelConfig& c, const std::string& v) { c.fast_source = parse_fast_source(v); });
    t.add("mfr.relaxed", "Weight the motion summary by soft scores instead of the hard mask.",
          [](ModelConfig& c) -> bool& { return c.relaxed; });
    t.add("model.backbone", "Registered backbone name.",
          [](ModelConfig& c) -> std::string& { return c.backbone; });
    t.add("model.hidden", "Backbone hidden width.",
          [](ModelConfig& c) -> std::size_t& { return c.backbone_hidden; });
    t.add("model.d", "Global feature width D.", [](ModelConfig& c) -> std::size_t& { return c.d; });
    t.add("tam.enabled", "Fuse text-alignment scores into the logits.",
          [](ModelConfig& c) -> bool& { return c.tam_enabled; });
    t.add("tam.alpha", "Fusion weight: y = z + alpha * s.", [](ModelConfig& c) -> double& { return c.alpha; });
    t.add("tam.c_text", "Text embedding width.", [](ModelConfig& c) -> std::size_t& { return c.c_text; });
    t.add("tam.hidden", "Hidden width of the TAM projection.",
          [](ModelConfig& c) -> std::size_t& { return c.tam_hidden; });
    t.add_text(
        "tam.projection", "per_class: D -> K*C_text; broadcast: D -> C_text repeated K times.",
        [](const ModelConfig& c) { return to_string(c.projection); },
        [](ModelConfig& c, const std::string& v) { c.projection = parse_tam_projection(v); });
    t.add("tam.template", "Prompt template; [CLS] is replaced by the class name.",
          [](ModelConfig& c) -> std::string& { return c.prompt_template; });
    return t;
  }();
  return table;
}

}  // namespace dapnet::model
