// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The dapnet Authors

#pragma once

#include <functional>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "dapnet/core/error.hpp"
#include "dapnet/model/nn.hpp"

namespace dapnet::model {

using nn::Matrix;
using nn::RowVec;

struct BackboneCache {
  virtual ~BackboneCache() = default;
};

// Maps recalibrated point features [N, C_emb] to a global feature [1, D].
template <class S>
class Backbone {
 public:
  virtual ~Backbone() = default;

  virtual std::string name() const = 0;
  virtual std::size_t out_dim() const = 0;
  // True when repeating input rows never changes the output, so callers may
  // pass each distinct row once.
  virtual bool duplicate_invariant() const { return false; }
  virtual RowVec<S> forward(const Matrix<S>& features, std::unique_ptr<BackboneCache>* cache) const = 0;
  // Accumulates into `grad` (same concrete type) and returns dL/dfeatures.
  virtual Matrix<S> backward(const BackboneCache& cache, const RowVec<S>& grad_out, Backbone& grad) const = 0;
  virtual std::unique_ptr<Backbone> clone() const = 0;
  virtual std::unique_ptr<Backbone> zeros_like() const = 0;
  virtual void visit(const nn::ParamVisitor<S>& f) = 0;
};

struct BackboneSpec {
  std::size_t in_dim = 64;
  std::size_t hidden = 128;
  std::size_t out_dim = 256;
};

template <class S>
using BackboneFactory = std::function<std::unique_ptr<Backbone<S>>(const BackboneSpec&, std::mt19937_64&)>;

// Name -> factory. The reference backbone is registered on first use.
template <class S>
class BackboneRegistry {
 public:
  static BackboneRegistry& instance();

  void add(const std::string& name, BackboneFactory<S> factory) { factories_[name] = std::move(factory); }

  std::unique_ptr<Backbone<S>> create(const std::string& name, const BackboneSpec& spec,
                                      std::mt19937_64& rng) const {
    auto it = factories_.find(name);
    if (it == factories_.end()) {
      std::string known;
      for (const auto& [k, _] : factories_) known += (known.empty() ? "" : ", ") + k;
      throw ConfigError("unknown backbone '" + name + "' (registered: " + known + ")");
    }
    return it->second(spec, rng);
  }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& [k, _] : factories_) out.push_back(k);
    return out;
  }

 private:
  std::map<std::string, BackboneFactory<S>> factories_;
};

// Shared per-point MLP C_emb -> hidden -> D (ReLU after each layer) followed
// by a channel-wise max over all points.
template <class S>
class ReferenceBackbone final : public Backbone<S> {
 public:
  struct Cache final : BackboneCache {
    Matrix<S> x, pre1, h1, pre2;
    std::vector<Eigen::Index> argmax;
  };

  ReferenceBackbone(const BackboneSpec& spec) : l1_(spec.in_dim, spec.hidden), l2_(spec.hidden, spec.out_dim) {}

  void init(std::mt19937_64& rng) {
    l1_.init(rng, 2.0);
    l2_.init(rng, 2.0);
  }

  std::string name() const override { return "reference"; }
  std::size_t out_dim() const override { return l2_.out(); }
  bool duplicate_invariant() const override { return true; }

  RowVec<S> forward(const Matrix<S>& features, std::unique_ptr<BackboneCache>* cache) const override {
    if (features.rows() == 0) throw ValidationError("reference backbone: no points");
    Matrix<S> pre1 = l1_.forward(features);
    Matrix<S> h1 = nn::relu(pre1);
    Matrix<S> pre2 = l2_.forward(h1);
    const Eigen::Index d = pre2.cols();
    RowVec<S> pooled(d);
    std::vector<Eigen::Index> argmax(static_cast<std::size_t>(d));
    for (Eigen::Index j = 0; j < d; ++j) {
      Eigen::Index at = 0;
      pooled(j) = std::max(pre2.col(j).maxCoeff(&at), S(0));
      argmax[static_cast<std::size_t>(j)] = at;
    }
    if (cache != nullptr) {
      auto c = std::make_unique<Cache>();
      c->x = features;
      c->pre1 = std::move(pre1);
      c->h1 = std::move(h1);
      c->pre2 = std::move(pre2);
      c->argmax = std::move(argmax);
      *cache = std::move(c);
    }
    return pooled;
  }

  Matrix<S> backward(const BackboneCache& cache_base, const RowVec<S>& grad_out,
                     Backbone<S>& grad_base) const override {
    const auto& cache = static_cast<const Cache&>(cache_base);
    auto& grad = static_cast<ReferenceBackbone&>(grad_base);
    // max(relu(x)) == relu(max(x)); the gradient reaches the arg-max row only
    // when that maximum is positive.
    Matrix<S> dpre2 = Matrix<S>::Zero(cache.pre2.rows(), cache.pre2.cols());
    for (Eigen::Index j = 0; j < dpre2.cols(); ++j) {
      const auto at = cache.argmax[static_cast<std::size_t>(j)];
      if (cache.pre2(at, j) > S(0)) dpre2(at, j) = grad_out(j);
    }
    Matrix<S> dh1 = l2_.backward(cache.h1, dpre2, grad.l2_);
    Matrix<S> dpre1 = nn::relu_backward(cache.pre1, dh1);
    return l1_.backward(cache.x, dpre1, grad.l1_);
  }

  std::unique_ptr<Backbone<S>> clone() const override { return std::make_unique<ReferenceBackbone>(*this); }

  std::unique_ptr<Backbone<S>> zeros_like() const override {
    auto z = std::make_unique<ReferenceBackbone>(*this);
    z->l1_.weight.setZero();
    z->l1_.bias.setZero();
    z->l2_.weight.setZero();
    z->l2_.bias.setZero();
    return z;
  }

  void visit(const nn::ParamVisitor<S>& f) override {
    l1_.visit("backbone.reference.0", f);
    l2_.visit("backbone.reference.1", f);
  }

 private:
  nn::Linear<S> l1_;
  nn::Linear<S> l2_;
};

template <class S>
BackboneRegistry<S>& BackboneRegistry<S>::instance() {
  static BackboneRegistry registry = [] {
    BackboneRegistry r;
    r.add("reference", [](const BackboneSpec& spec, std::mt19937_64& rng) -> std::unique_ptr<Backbone<S>> {
      auto b = std::make_unique<ReferenceBackbone<S>>(spec);
      b->init(rng);
      return b;
    });
    return r;
  }();
  return registry;
}

}  // namespace dapnet::model
