#pragma once

#include <cmath>
#include <vector>

#include "tdmcl/common.hpp"

namespace tdmcl {

enum class LossKind { kCrossEntropy, kMeanSquaredError };

// Mean softmax cross-entropy over the batch; logits are (classes x batch).
template <typename Scalar>
Scalar cross_entropy(const Matrix<Scalar>& logits, const std::vector<int>& labels,
                     Matrix<Scalar>* grad) {
  const Index batch = logits.cols();
  Scalar loss = 0;
  if (grad) grad->resize(logits.rows(), batch);
  for (Index b = 0; b < batch; ++b) {
    const Scalar m = logits.col(b).maxCoeff();
    Vector<Scalar> e = (logits.col(b).array() - m).exp();
    const Scalar z = e.sum();
    loss += std::log(z) + m - logits(labels[b], b);
    if (grad) {
      grad->col(b) = e / z;
      (*grad)(labels[b], b) -= Scalar(1);
    }
  }
  if (grad) *grad /= static_cast<Scalar>(batch);
  return loss / static_cast<Scalar>(batch);
}

// Mean over batch and output dimensions of the squared error.
template <typename Scalar>
Scalar mean_squared_error(const Matrix<Scalar>& pred, const Matrix<Scalar>& target,
                          Matrix<Scalar>* grad) {
  const Matrix<Scalar> diff = pred - target;
  const Scalar n = static_cast<Scalar>(diff.size());
  if (grad) *grad = (Scalar(2) / n) * diff;
  return diff.squaredNorm() / n;
}

}  // namespace tdmcl
