// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The dapnet Authors

#pragma once

// Full forward/backward pass for one clip:
//   DSQ split -> densified geometry -> point embedding -> FiLM recalibration
//   -> backbone -> classifier (+ text alignment) -> fused logits.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "dapnet/core/error.hpp"
#include "dapnet/core/types.hpp"
#include "dapnet/d2r/d2r.hpp"
#include "dapnet/mfr/mfr.hpp"
#include "dapnet/model/backbone.hpp"
#include "dapnet/model/nn.hpp"
#include "dapnet/model/tam.hpp"

namespace dapnet::model {

enum class TamProjection { kPerClass, kBroadcast };

std::string_view to_string(TamProjection p);
TamProjection parse_tam_projection(std::string_view text);
std::string_view to_string(mfr::FastSource s);
mfr::FastSource parse_fast_source(std::string_view text);

struct ModelConfig {
  // d2r
  bool d2r_enabled = true;
  bool dgr = true;  // densified geometry; off means repeat-fill
  bool mfr = true;  // recalibration
  d2r::DsqParams dsq;
  d2r::DensifyConfig densify;
  // mfr
  std::size_t c_emb = 64;
  std::size_t film_hidden = 64;
  mfr::FastSource fast_source = mfr::FastSource::kPreDup;
  // Summary weights use the soft scores s instead of the hard mask.
  bool relaxed = false;
  // backbone / classifier
  std::string backbone = "reference";
  std::size_t backbone_hidden = 128;
  std::size_t d = 256;
  // tam
  bool tam_enabled = true;
  double alpha = 1.0;
  std::size_t c_text = 512;
  std::size_t tam_hidden = 256;
  TamProjection projection = TamProjection::kPerClass;
  std::string prompt_template = kDefaultPromptTemplate;

  bool mfr_active() const { return d2r_enabled && mfr; }
  bool dgr_active() const { return d2r_enabled && dgr; }
  void validate() const;
};

template <class S>
struct Diagnostics {
  std::vector<double> tau;                // per frame, NaN when padded or DSQ is off
  std::vector<std::size_t> fast_counts;   // per frame
  RowVec<S> summary;                      // c
  RowVec<S> global;                       // backbone output
  RowVec<S> logits;                       // classifier z
  RowVec<S> tam_scores;                   // s, empty when TAM is off
};

template <class S>
struct Output {
  RowVec<S> fused;
  Diagnostics<S> diag;
};

template <class S>
class DapNet {
 public:
  DapNet(const ModelConfig& cfg, std::size_t classes, const Matrix<float>& text_bank, std::uint64_t seed)
      : cfg_(cfg), classes_(classes) {
    cfg_.validate();
    if (classes_ == 0) throw ValidationError("model needs at least one class");
    if (static_cast<std::size_t>(text_bank.rows()) != classes_ ||
        static_cast<std::size_t>(text_bank.cols()) != cfg_.c_text) {
      throw ValidationError("text bank shape [" + std::to_string(text_bank.rows()) + "," +
                            std::to_string(text_bank.cols()) + "] does not match [" + std::to_string(classes_) +
                            "," + std::to_string(cfg_.c_text) + "]");
    }
    text_ = text_bank.cast<S>();
    normalize_rows(text_);

    std::mt19937_64 rng(seed);
    q_ = Matrix<S>::Constant(1, 1, static_cast<S>(cfg_.dsq.q));
    embed_ = nn::Mlp2<S>(core::kChannels, cfg_.c_emb, cfg_.c_emb);
    embed_.init(rng);
    film_ = mfr::FilmHeads<S>(cfg_.c_emb, cfg_.film_hidden);
    film_.init(rng);
    BackboneSpec spec{cfg_.c_emb, cfg_.backbone_hidden, cfg_.d};
    backbone_ = BackboneRegistry<S>::instance().create(cfg_.backbone, spec, rng);
    classifier_ = nn::Linear<S>(cfg_.d, classes_);
    classifier_.init(rng, 1.0);
    tam_ = nn::Mlp2<S>(cfg_.d, cfg_.tam_hidden, tam_width());
    tam_.init(rng);
  }

  DapNet(const DapNet& o)
      : cfg_(o.cfg_),
        classes_(o.classes_),
        text_(o.text_),
        q_(o.q_),
        embed_(o.embed_),
        film_(o.film_),
        backbone_(o.backbone_ ? o.backbone_->clone() : nullptr),
        classifier_(o.classifier_),
        tam_(o.tam_) {}
  DapNet& operator=(const DapNet& o) {
    if (this != &o) {
      DapNet tmp(o);
      *this = std::move(tmp);
    }
    return *this;
  }
  DapNet(DapNet&&) noexcept = default;
  DapNet& operator=(DapNet&&) noexcept = default;

  const ModelConfig& config() const { return cfg_; }
  std::size_t classes() const { return classes_; }
  const Matrix<S>& text_bank() const { return text_; }
  // Rows are taken verbatim (already normalized, e.g. from a checkpoint).
  void set_text_bank(const Matrix<S>& bank) {
    if (bank.rows() != text_.rows() || bank.cols() != text_.cols()) {
      throw ValidationError("set_text_bank: shape mismatch");
    }
    text_ = bank;
  }

  S q() const { return q_(0, 0); }
  void set_q(S q) { q_(0, 0) = q; }

  Output<S> forward(const core::ClipTensor& clip, std::uint64_t seed) const {
    Output<S> out;
    run(clip, seed, nullptr, nullptr, S(1), &out);
    return out;
  }

  std::vector<Output<S>> forward_batch(std::span<const core::ClipTensor> clips,
                                       std::span<const std::uint64_t> seeds) const {
    if (clips.size() != seeds.size()) throw ValidationError("forward_batch: one seed per clip required");
    std::vector<Output<S>> out;
    out.reserve(clips.size());
    for (std::size_t i = 0; i < clips.size(); ++i) out.push_back(forward(clips[i], seeds[i]));
    return out;
  }

  // weight * cross-entropy of the fused logits.
  S loss(const core::ClipTensor& clip, std::size_t label, std::uint64_t seed, S weight = S(1)) const {
    return run(clip, seed, &label, nullptr, weight, nullptr);
  }

  // Same loss; gradients are added into `grad` (a zeros_like() model).
  S loss_and_grad(const core::ClipTensor& clip, std::size_t label, std::uint64_t seed, DapNet& grad,
                  S weight = S(1), Output<S>* out = nullptr) const {
    return run(clip, seed, &label, &grad, weight, out);
  }

  DapNet zeros_like() const {
    DapNet g(*this);
    g.visit([](const std::string&, Matrix<S>& m) { m.setZero(); });
    return g;
  }

  void visit(const nn::ParamVisitor<S>& f) {
    f("d2r.q", q_);
    embed_.visit("embed", f);
    film_.visit("film", f);
    backbone_->visit(f);
    classifier_.visit("classifier", f);
    tam_.visit("tam", f);
  }

  template <class T>
  DapNet<T> cast() const {
    Matrix<float> bank = text_.template cast<float>();
    DapNet<T> out(cfg_, classes_, bank, 0);
    std::vector<Matrix<S>> values;
    const_cast<DapNet&>(*this).visit([&](const std::string&, Matrix<S>& m) { values.push_back(m); });
    std::size_t i = 0;
    out.visit([&](const std::string&, Matrix<T>& m) { m = values[i++].template cast<T>(); });
    out.text_ = text_.template cast<T>();
    return out;
  }

 private:
  template <class>
  friend class DapNet;

  std::size_t tam_width() const {
    return cfg_.projection == TamProjection::kPerClass ? classes_ * cfg_.c_text : cfg_.c_text;
  }

  // Distinct valid points of the clip (plus one trailing zero row for
  // padding) and, for each dense row, the point it copies.
  struct Geometry {
    Matrix<S> points;
    std::vector<Eigen::Index> dense;
    std::vector<S> weights;       // summary weight per valid point
    std::vector<S> dweight_ds;    // d weight / d s
    std::vector<S> dscore_dq;     // d s / d q through tau
  };

  Geometry build_geometry(const core::ClipTensor& clip, std::uint64_t seed, Diagnostics<S>& diag) const {
    const std::size_t frames = clip.frames();
    const std::size_t goal = cfg_.densify.p_goal;
    std::size_t n_valid = 0;
    for (std::size_t t = 0; t < frames; ++t) {
      if (!clip.is_padded(t)) n_valid += clip.valid_points(t);
    }

    Geometry g;
    g.points = Matrix<S>::Zero(static_cast<Eigen::Index>(n_valid + 1), core::kChannels);
    g.dense.reserve(frames * goal);
    g.weights.assign(n_valid, S(0));
    g.dweight_ds.assign(n_valid, S(0));
    g.dscore_dq.assign(n_valid, S(0));
    diag.tau.assign(frames, std::nan(""));
    diag.fast_counts.assign(frames, 0);
    const auto zero_row = static_cast<Eigen::Index>(n_valid);

    std::size_t base = 0;
    for (std::size_t t = 0; t < frames; ++t) {
      const std::size_t n = clip.is_padded(t) ? 0 : clip.valid_points(t);
      if (n == 0) {
        g.dense.insert(g.dense.end(), goal, zero_row);
        continue;
      }
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < core::kChannels; ++c) {
          g.points(static_cast<Eigen::Index>(base + i), static_cast<Eigen::Index>(c)) =
              static_cast<S>(clip.at(t, i, c));
        }
      }

      std::vector<std::size_t> rows;
      if (cfg_.d2r_enabled) {
        std::vector<S> mags(n);
        for (std::size_t i = 0; i < n; ++i) mags[i] = std::abs(static_cast<S>(clip.at(t, i, core::kDoppler)));
        const auto dsq = d2r::dsq_threshold_grad<S>(mags, q(), static_cast<S>(cfg_.dsq.sigma));
        const S gamma = static_cast<S>(cfg_.dsq.gamma);
        const auto scores = d2r::soft_motion_scores<S>(mags, dsq.tau, gamma);
        const auto mask = d2r::ste_binarize<S>(scores, cfg_.dsq.delta);
        diag.tau[t] = static_cast<double>(dsq.tau);
        for (auto m : mask) diag.fast_counts[t] += m;

        rows = cfg_.dgr ? d2r::tmpd_densify(mask, cfg_.densify, d2r::mix_seed(seed, t)).rows
                        : d2r::repeat_fill(n, goal);
        std::vector<std::size_t> copies(n, 0);
        if (cfg_.fast_source == mfr::FastSource::kPostDup) {
          for (auto r : rows) ++copies[r];
        }
        for (std::size_t i = 0; i < n; ++i) {
          const S mult = cfg_.fast_source == mfr::FastSource::kPostDup ? static_cast<S>(copies[i]) : S(1);
          const S s = scores[i];
          g.weights[base + i] = mult * (cfg_.relaxed ? s : static_cast<S>(mask[i]));
          // Straight-through: the hard mask passes its gradient to s unchanged.
          g.dweight_ds[base + i] = mult;
          g.dscore_dq[base + i] = -s * (S(1) - s) / gamma * dsq.dtau_dq;
        }
      } else {
        rows = d2r::repeat_fill(n, goal);
      }
      for (auto r : rows) g.dense.push_back(static_cast<Eigen::Index>(base + r));
      base += n;
    }
    return g;
  }

  S run(const core::ClipTensor& clip, std::uint64_t seed, const std::size_t* label, DapNet* grad, S weight,
        Output<S>* out) const {
    if (label != nullptr && *label >= classes_) {
      throw ValidationError("label " + std::to_string(*label) + " outside " + std::to_string(classes_) +
                            " classes");
    }
    Diagnostics<S> diag;
    const Geometry geo = build_geometry(clip, seed, diag);
    const bool mfr_on = cfg_.mfr_active();
    const bool tam_on = cfg_.tam_enabled;
    const auto n_valid = static_cast<Eigen::Index>(geo.weights.size());
    std::vector<Eigen::Index> rows = geo.dense;
    if (backbone_->duplicate_invariant()) {
      std::sort(rows.begin(), rows.end());
      rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
    }
    const auto n_dense = static_cast<Eigen::Index>(rows.size());

    typename nn::Mlp2<S>::Cache embed_cache;
    const Matrix<S> f_pts = embed_.forward(geo.points, &embed_cache);
    Matrix<S> f_out(n_dense, f_pts.cols());
    for (Eigen::Index r = 0; r < n_dense; ++r) f_out.row(r) = f_pts.row(rows[static_cast<std::size_t>(r)]);

    RowVec<S> c = RowVec<S>::Zero(f_pts.cols());
    S total_w = 0;
    RowVec<S> gamma, beta;
    typename nn::Mlp2<S>::Cache scale_cache, shift_cache;
    Matrix<S> features;
    if (mfr_on) {
      for (Eigen::Index i = 0; i < n_valid; ++i) {
        const S w = geo.weights[static_cast<std::size_t>(i)];
        if (w == S(0)) continue;
        c += w * f_pts.row(i);
        total_w += w;
      }
      if (total_w > S(0)) c /= total_w;
      const Matrix<S> cm = c;
      gamma = film_.scale.forward(cm, &scale_cache);
      beta = film_.shift.forward(cm, &shift_cache);
      features = mfr::recalibrate<S>(f_out, gamma, beta);
    } else {
      features = f_out;
    }

    std::unique_ptr<BackboneCache> bb_cache;
    const RowVec<S> global = backbone_->forward(features, grad != nullptr ? &bb_cache : nullptr);
    const Matrix<S> gm = global;
    const RowVec<S> z = classifier_.forward(gm);
    RowVec<S> fused = z;

    typename nn::Mlp2<S>::Cache tam_cache;
    Matrix<S> proj_rows, proj_hat;
    std::vector<S> norms;
    TamScores<S> scores;
    if (tam_on) {
      const Matrix<S> proj = tam_.forward(gm, &tam_cache);
      const auto k = static_cast<Eigen::Index>(classes_);
      const auto ct = static_cast<Eigen::Index>(cfg_.c_text);
      proj_rows.resize(k, ct);
      for (Eigen::Index r = 0; r < k; ++r) {
        proj_rows.row(r) = cfg_.projection == TamProjection::kPerClass ? proj.block(0, r * ct, 1, ct) : proj;
      }
      proj_hat = proj_rows;
      norms.resize(static_cast<std::size_t>(k));
      for (Eigen::Index r = 0; r < k; ++r) {
        norms[static_cast<std::size_t>(r)] = proj_rows.row(r).norm();
        if (norms[static_cast<std::size_t>(r)] > S(0)) proj_hat.row(r) /= norms[static_cast<std::size_t>(r)];
      }
      scores = tam_similarity<S>(proj_hat, text_);
      fused = fuse<S>(z, scores.diag, static_cast<S>(cfg_.alpha));
    }

    if (out != nullptr) {
      diag.summary = c;
      diag.global = global;
      diag.logits = z;
      if (tam_on) diag.tam_scores = scores.diag;
      out->fused = fused;
      out->diag = std::move(diag);
    }
    if (label == nullptr) return S(0);

    const S m = fused.maxCoeff();
    RowVec<S> prob = (fused.array() - m).exp().matrix();
    const S denom = prob.sum();
    prob /= denom;
    const S loss = weight * (std::log(denom) + m - fused(static_cast<Eigen::Index>(*label)));
    if (grad == nullptr) return loss;

    // Backward.
    RowVec<S> dy = prob;
    dy(static_cast<Eigen::Index>(*label)) -= S(1);
    dy *= weight;
    const Matrix<S> dym = dy;
    Matrix<S> dglobal = classifier_.backward(gm, dym, grad->classifier_);

    if (tam_on) {
      const auto k = static_cast<Eigen::Index>(classes_);
      const auto ct = static_cast<Eigen::Index>(cfg_.c_text);
      const RowVec<S> ds = static_cast<S>(cfg_.alpha) * dy;
      Matrix<S> dlogit(k, k);
      for (Eigen::Index a = 0; a < k; ++a) {
        const S saa = scores.similarity(a, a);
        for (Eigen::Index b = 0; b < k; ++b) {
          dlogit(a, b) = ds(a) * saa * ((a == b ? S(1) : S(0)) - scores.similarity(a, b));
        }
      }
      const Matrix<S> dhat = dlogit * text_;
      Matrix<S> dproj_rows(k, ct);
      for (Eigen::Index r = 0; r < k; ++r) {
        const S norm = norms[static_cast<std::size_t>(r)];
        if (norm > S(0)) {
          dproj_rows.row(r) = (dhat.row(r) - proj_hat.row(r) * proj_hat.row(r).dot(dhat.row(r))) / norm;
        } else {
          dproj_rows.row(r).setZero();
        }
      }
      Matrix<S> dproj;
      if (cfg_.projection == TamProjection::kPerClass) {
        dproj.resize(1, k * ct);
        for (Eigen::Index r = 0; r < k; ++r) dproj.block(0, r * ct, 1, ct) = dproj_rows.row(r);
      } else {
        dproj = dproj_rows.colwise().sum();
      }
      dglobal += tam_.backward(tam_cache, dproj, grad->tam_);
    }

    const RowVec<S> dg = dglobal;
    const Matrix<S> dfeatures = backbone_->backward(*bb_cache, dg, *grad->backbone_);

    Matrix<S> df_out;
    RowVec<S> dc = RowVec<S>::Zero(f_pts.cols());
    if (mfr_on) {
      df_out = dfeatures.array().rowwise() * gamma.array();
      const Matrix<S> dgamma = dfeatures.cwiseProduct(f_out).colwise().sum();
      const Matrix<S> dbeta = dfeatures.colwise().sum();
      dc = film_.scale.backward(scale_cache, dgamma, grad->film_.scale);
      dc += film_.shift.backward(shift_cache, dbeta, grad->film_.shift);
    } else {
      df_out = dfeatures;
    }

    Matrix<S> df_pts = Matrix<S>::Zero(f_pts.rows(), f_pts.cols());
    for (Eigen::Index r = 0; r < n_dense; ++r) df_pts.row(rows[static_cast<std::size_t>(r)]) += df_out.row(r);

    if (mfr_on && total_w > S(0)) {
      S dq = 0;
      for (Eigen::Index i = 0; i < n_valid; ++i) {
        const auto ui = static_cast<std::size_t>(i);
        df_pts.row(i) += (geo.weights[ui] / total_w) * dc;
        const S dw = (f_pts.row(i) - c).dot(dc) / total_w;
        dq += dw * geo.dweight_ds[ui] * geo.dscore_dq[ui];
      }
      grad->q_(0, 0) += dq;
    }
    embed_.backward(embed_cache, df_pts, grad->embed_);
    return loss;
  }

  ModelConfig cfg_;
  std::size_t classes_ = 0;
  Matrix<S> text_;
  Matrix<S> q_;
  nn::Mlp2<S> embed_;
  mfr::FilmHeads<S> film_;
  std::unique_ptr<Backbone<S>> backbone_;
  nn::Linear<S> classifier_;
  nn::Mlp2<S> tam_;
};

}  // namespace dapnet::model
