#pragma once

#include <cmath>

#include "tdmcl/snn/layers.hpp"

namespace tdmcl {

struct SgdConfig {
  double learning_rate = 0.05;
  double momentum = 0.9;
};

// Heavy-ball momentum: v <- mu*v + g; p <- p - lr*v. Masked weights stay zero.
template <typename Scalar>
void sgd_update(LayerParams<Scalar>& p, const LayerGrads<Scalar>& g,
                LayerGrads<Scalar>& velocity, const SgdConfig& cfg) {
  const Scalar lr = static_cast<Scalar>(cfg.learning_rate);
  const Scalar mu = static_cast<Scalar>(cfg.momentum);
  if (velocity.weights.size() != g.weights.size())
    velocity = LayerGrads<Scalar>::zeros_like(p);
  velocity.weights = mu * velocity.weights + g.weights.cwiseProduct(p.mask);
  velocity.bias = mu * velocity.bias + g.bias;
  p.weights -= lr * velocity.weights;
  p.weights = p.weights.cwiseProduct(p.mask);
  p.bias -= lr * velocity.bias;
  if (p.normalized()) {
    velocity.gain = mu * velocity.gain + g.gain;
    p.gain -= lr * velocity.gain;
  }
}

template <typename Scalar>
void sgd_update(Scalar& value, Scalar grad, Scalar& velocity,
                const SgdConfig& cfg) {
  velocity = static_cast<Scalar>(cfg.momentum) * velocity + grad;
  value -= static_cast<Scalar>(cfg.learning_rate) * velocity;
}

template <typename Scalar>
Scalar squared_norm(const LayerGrads<Scalar>& g) {
  return g.weights.squaredNorm() + g.bias.squaredNorm() + g.gain.squaredNorm();
}

template <typename Scalar>
void scale(LayerGrads<Scalar>& g, Scalar factor) {
  g.weights *= factor;
  g.bias *= factor;
  g.gain *= factor;
}

}  // namespace tdmcl
