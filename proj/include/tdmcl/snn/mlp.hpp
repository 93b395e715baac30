#pragma once

#include <string>
#include <vector>

#include "tdmcl/snn/layers.hpp"
#include "tdmcl/snn/loss.hpp"
#include "tdmcl/snn/optimizer.hpp"
#include "tdmcl/snn/plif.hpp"

namespace tdmcl {

// Fully connected spiking stack with a rate-decoded linear readout. Inputs are
// real vectors applied as constant current at every step. Used for small
// dense problems and for gradient verification in double precision.
template <typename Scalar>
class SpikingMlp {
 public:
  struct Grads {
    std::vector<LayerGrads<Scalar>> layers;
    std::vector<Scalar> tau;
    LayerGrads<Scalar> head;
  };

  // `sizes` = {inputs, hidden..., spiking outputs}; head_outputs = 0 means the
  // rates themselves are the output.
  SpikingMlp(const std::vector<int>& sizes, int head_outputs, int steps,
             const PlifConfig& plif, double init_gain, bool weight_norm,
             Rng& rng)
      : steps_(steps) {
    for (std::size_t i = 1; i < sizes.size(); ++i) {
      layers_.push_back(
          init_layer<Scalar>(sizes[i], sizes[i - 1], init_gain, weight_norm, rng));
      neurons_.emplace_back("dense" + std::to_string(i - 1), plif);
    }
    if (head_outputs > 0)
      head_ = init_layer<Scalar>(head_outputs, sizes.back(), 1.0, false, rng);
    velocity_.layers.resize(layers_.size());
    velocity_.tau.assign(layers_.size(), Scalar(0));
  }

  int steps() const { return steps_; }
  bool has_head() const { return head_.weights.size() > 0; }
  std::vector<LayerParams<Scalar>>& layers() { return layers_; }
  std::vector<PlifLayer<Scalar>>& neurons() { return neurons_; }
  LayerParams<Scalar>& head() { return head_; }
  const Matrix<Scalar>& rates() const { return rates_; }

  Matrix<Scalar> forward(const Matrix<Scalar>& x, SpikeMode mode = SpikeMode::kHard,
                         bool keep = false) {
    const Index batch = x.cols();
    inputs_.assign(layers_.size(), Matrix<Scalar>());
    Matrix<Scalar> signal;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      const Matrix<Scalar> w = layers_[l].effective();
      Matrix<Scalar> current;
      if (l == 0) {
        Matrix<Scalar> once = w * x;
        once.colwise() += layers_[l].bias;
        current = once.replicate(1, steps_);
      } else {
        current = w * signal;
        current.colwise() += layers_[l].bias;
      }
      if (keep) inputs_[l] = (l == 0) ? x : signal;
      signal = neurons_[l].forward(current, steps_, mode, keep);
    }
    rates_ = Matrix<Scalar>::Zero(signal.rows(), batch);
    for (int t = 0; t < steps_; ++t) rates_ += signal.middleCols(t * batch, batch);
    rates_ /= static_cast<Scalar>(steps_);
    if (!has_head()) return rates_;
    Matrix<Scalar> out = head_.weights * rates_;
    out.colwise() += head_.bias;
    return out;
  }

  // Loss and gradients at the current parameters. `labels` is used for
  // cross-entropy, `targets` for MSE.
  Scalar loss_and_grads(const Matrix<Scalar>& x, LossKind kind,
                        const std::vector<int>& labels,
                        const Matrix<Scalar>& targets, SpikeMode mode,
                        Grads& grads) {
    const Index batch = x.cols();
    const Matrix<Scalar> out = forward(x, mode, true);
    Matrix<Scalar> grad_out;
    const Scalar loss = kind == LossKind::kCrossEntropy
                            ? cross_entropy(out, labels, &grad_out)
                            : mean_squared_error(out, targets, &grad_out);
    grads.layers.clear();
    for (const auto& p : layers_) grads.layers.push_back(LayerGrads<Scalar>::zeros_like(p));
    grads.tau.assign(layers_.size(), Scalar(0));
    Matrix<Scalar> grad_rates = grad_out;
    if (has_head()) {
      grads.head = LayerGrads<Scalar>::zeros_like(head_);
      grads.head.weights = grad_out * rates_.transpose();
      grads.head.bias = grad_out.rowwise().sum();
      grad_rates = head_.weights.transpose() * grad_out;
    }
    Matrix<Scalar> grad_signal =
        (grad_rates / static_cast<Scalar>(steps_)).replicate(1, steps_);
    for (std::size_t l = layers_.size(); l-- > 0;) {
      Matrix<Scalar> grad_current = neurons_[l].backward(grad_signal, grads.tau[l]);
      if (l == 0) {
        Matrix<Scalar> folded = Matrix<Scalar>::Zero(grad_current.rows(), batch);
        for (int t = 0; t < steps_; ++t)
          folded += grad_current.middleCols(t * batch, batch);
        accumulate_weight_grad(layers_[l], Matrix<Scalar>(folded * inputs_[l].transpose()),
                               grads.layers[l]);
        grads.layers[l].bias += folded.rowwise().sum();
      } else {
        accumulate_weight_grad(layers_[l],
                               Matrix<Scalar>(grad_current * inputs_[l].transpose()),
                               grads.layers[l]);
        grads.layers[l].bias += grad_current.rowwise().sum();
        grad_signal = layers_[l].effective().transpose() * grad_current;
      }
    }
    return loss;
  }

  // One momentum-SGD step on every layer; returns the pre-update loss.
  Scalar train_step(const Matrix<Scalar>& x, LossKind kind,
                    const std::vector<int>& labels, const Matrix<Scalar>& targets,
                    const SgdConfig& sgd) {
    Grads g;
    const Scalar loss =
        loss_and_grads(x, kind, labels, targets, SpikeMode::kHard, g);
    if (!std::isfinite(static_cast<double>(loss)))
      throw DivergenceError("numerical divergence: non-finite loss in train_step");
    for (std::size_t l = 0; l < layers_.size(); ++l) {
      sgd_update(layers_[l], g.layers[l], velocity_.layers[l], sgd);
      sgd_update(neurons_[l].tau_raw(), g.tau[l], velocity_.tau[l], sgd);
    }
    if (has_head()) sgd_update(head_, g.head, velocity_.head, sgd);
    return loss;
  }

 private:
  int steps_;
  std::vector<LayerParams<Scalar>> layers_;
  std::vector<PlifLayer<Scalar>> neurons_;
  LayerParams<Scalar> head_;
  std::vector<Matrix<Scalar>> inputs_;
  Matrix<Scalar> rates_;
  Grads velocity_;
};

}  // namespace tdmcl
