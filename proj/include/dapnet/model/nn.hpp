// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The dapnet Authors

#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <functional>
#include <random>
#include <string>

namespace dapnet::nn {

// Rows are points (or samples), columns are channels.
template <class S>
using Matrix = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;
template <class S>
using RowVec = Eigen::Matrix<S, 1, Eigen::Dynamic>;

template <class S>
using ParamVisitor = std::function<void(const std::string&, Matrix<S>&)>;

// y = x W + b, W is [in, out], b is [1, out].
template <class S>
struct Linear {
  Matrix<S> weight;
  Matrix<S> bias;

  Linear() = default;
  Linear(std::size_t in, std::size_t out) : weight(Matrix<S>::Zero(in, out)), bias(Matrix<S>::Zero(1, out)) {}

  std::size_t in() const { return static_cast<std::size_t>(weight.rows()); }
  std::size_t out() const { return static_cast<std::size_t>(weight.cols()); }

  // Gaussian weights with variance gain / fan_in, zero bias.
  void init(std::mt19937_64& rng, double gain) {
    std::normal_distribution<double> nd(0.0, std::sqrt(gain / static_cast<double>(in())));
    for (Eigen::Index i = 0; i < weight.size(); ++i) weight.data()[i] = static_cast<S>(nd(rng));
    bias.setZero();
  }

  Matrix<S> forward(const Matrix<S>& x) const {
    Matrix<S> y = x * weight;
    y.rowwise() += bias.row(0);
    return y;
  }

  // Accumulates parameter gradients into `grad` and returns dL/dx.
  Matrix<S> backward(const Matrix<S>& x, const Matrix<S>& dy, Linear& grad) const {
    grad.weight.noalias() += x.transpose() * dy;
    grad.bias += dy.colwise().sum();
    return dy * weight.transpose();
  }

  Linear zeros_like() const { return Linear(in(), out()); }

  void visit(const std::string& prefix, const ParamVisitor<S>& f) {
    f(prefix + ".weight", weight);
    f(prefix + ".bias", bias);
  }

  template <class T>
  Linear<T> cast() const {
    Linear<T> out;
    out.weight = weight.template cast<T>();
    out.bias = bias.template cast<T>();
    return out;
  }
};

template <class S>
Matrix<S> relu(const Matrix<S>& x) {
  return x.cwiseMax(S(0));
}

// dL/dx for y = relu(x), given the pre-activation x.
template <class S>
Matrix<S> relu_backward(const Matrix<S>& pre, const Matrix<S>& dy) {
  return (pre.array() > S(0)).select(dy, Matrix<S>::Zero(dy.rows(), dy.cols()));
}

// Two linear layers with a ReLU between them.
template <class S>
struct Mlp2 {
  Linear<S> l1;
  Linear<S> l2;

  struct Cache {
    Matrix<S> x;
    Matrix<S> pre;
    Matrix<S> hidden;
  };

  Mlp2() = default;
  Mlp2(std::size_t in, std::size_t hidden, std::size_t out) : l1(in, hidden), l2(hidden, out) {}

  void init(std::mt19937_64& rng, double out_gain = 1.0) {
    l1.init(rng, 2.0);
    l2.init(rng, out_gain);
  }

  Matrix<S> forward(const Matrix<S>& x, Cache* cache = nullptr) const {
    Matrix<S> pre = l1.forward(x);
    Matrix<S> hidden = relu(pre);
    Matrix<S> y = l2.forward(hidden);
    if (cache != nullptr) {
      cache->x = x;
      cache->pre = std::move(pre);
      cache->hidden = std::move(hidden);
    }
    return y;
  }

  Matrix<S> backward(const Cache& cache, const Matrix<S>& dy, Mlp2& grad) const {
    Matrix<S> dh = l2.backward(cache.hidden, dy, grad.l2);
    Matrix<S> dpre = relu_backward(cache.pre, dh);
    return l1.backward(cache.x, dpre, grad.l1);
  }

  Mlp2 zeros_like() const {
    Mlp2 g;
    g.l1 = l1.zeros_like();
    g.l2 = l2.zeros_like();
    return g;
  }

  void visit(const std::string& prefix, const ParamVisitor<S>& f) {
    l1.visit(prefix + ".0", f);
    l2.visit(prefix + ".1", f);
  }

  template <class T>
  Mlp2<T> cast() const {
    Mlp2<T> out;
    out.l1 = l1.template cast<T>();
    out.l2 = l2.template cast<T>();
    return out;
  }
};

}  // namespace dapnet::nn
