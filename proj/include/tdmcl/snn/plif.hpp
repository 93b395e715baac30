#pragma once

#include <cmath>
#include <string>
#include <type_traits>
#include <utility>

#include "tdmcl/common.hpp"

namespace tdmcl {

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  return Scalar(1) / (Scalar(1) + std::exp(-x));
}

// d(spike)/dU surrogate: derivative of a logistic of slope beta, centred on the
// threshold. Peak value is beta / 4.
template <typename Scalar>
Scalar surrogate_spike_grad(Scalar u, Scalar v_th, Scalar beta) {
  const Scalar s = sigmoid(beta * (u - v_th));
  return beta * s * (Scalar(1) - s);
}

// How the forward pass turns membrane into spikes. kRelaxed replaces the
// Heaviside step by the surrogate's own primitive so that analytic gradients
// can be compared against finite differences.
enum class SpikeMode { kHard, kRelaxed };

template <typename Scalar>
Scalar spike_fn(Scalar u, Scalar v_th, Scalar beta, SpikeMode mode) {
  if (mode == SpikeMode::kRelaxed) return sigmoid(beta * (u - v_th));
  return u >= v_th ? Scalar(1) : Scalar(0);
}

struct PlifConfig {
  double tau_init = 2.0;  // sigma(2.0) ~= 0.88
  double v_th = 1.0;
  double beta = 4.0;
};

// Single population of PLIF neurons stepped one time step at a time.
// `membrane` holds the post-reset potential carried into the next step.
template <typename Scalar>
struct PlifState {
  Vector<Scalar> membrane;
  Scalar tau_raw = Scalar(2);
  Scalar v_th = Scalar(1);

  PlifState() = default;
  PlifState(Index size, Scalar tau, Scalar threshold)
      : membrane(Vector<Scalar>::Zero(size)), tau_raw(tau), v_th(threshold) {}

  Scalar decay() const { return sigmoid(tau_raw); }
};

template <typename Scalar>
struct PlifStepResult {
  Vector<Scalar> potential;  // U before reset
  Vector<Scalar> spikes;
};

// U <- sigma(tau) * U_prev + I; spike iff U >= V_th; fired neurons restart at 0.
template <typename Scalar>
PlifStepResult<Scalar> plif_step(PlifState<Scalar>& state,
                                 const std::type_identity_t<Vector<Scalar>>& input_current,
                                 const std::string& layer_name = "plif") {
  if (input_current.size() != state.membrane.size()) {
    throw WiringError("plif_step: layer '" + layer_name + "' expects " +
                      std::to_string(state.membrane.size()) +
                      " input currents, got " +
                      std::to_string(input_current.size()));
  }
  PlifStepResult<Scalar> out;
  out.potential = state.decay() * state.membrane + input_current;
  if (!out.potential.allFinite()) {
    throw DivergenceError("numerical divergence: non-finite membrane in layer '" +
                          layer_name + "'");
  }
  out.spikes = (out.potential.array() >= state.v_th).template cast<Scalar>();
  state.membrane = out.potential.cwiseProduct(
      (Scalar(1) - out.spikes.array()).matrix());
  return out;
}

// Multi-step PLIF layer. Inputs and outputs are (neurons x steps*positions)
// matrices, time-major: columns [t*P, (t+1)*P) belong to step t. One learnable
// tau per layer.
template <typename Scalar>
class PlifLayer {
 public:
  PlifLayer() = default;
  PlifLayer(std::string name, const PlifConfig& cfg)
      : name_(std::move(name)),
        tau_raw_(static_cast<Scalar>(cfg.tau_init)),
        v_th_(static_cast<Scalar>(cfg.v_th)),
        beta_(static_cast<Scalar>(cfg.beta)) {}

  const std::string& name() const { return name_; }
  Scalar tau_raw() const { return tau_raw_; }
  Scalar& tau_raw() { return tau_raw_; }
  Scalar v_th() const { return v_th_; }
  Scalar beta() const { return beta_; }

  // `keep_state` retains potentials for backward().
  Matrix<Scalar> forward(const Matrix<Scalar>& current, int steps,
                         SpikeMode mode, bool keep_state) {
    const Index positions = current.cols() / steps;
    const Scalar decay = sigmoid(tau_raw_);
    Matrix<Scalar> spikes(current.rows(), current.cols());
    Matrix<Scalar> potential(current.rows(), current.cols());
    Matrix<Scalar> carried = Matrix<Scalar>::Zero(current.rows(), positions);
    for (int t = 0; t < steps; ++t) {
      auto u = potential.middleCols(t * positions, positions);
      auto s = spikes.middleCols(t * positions, positions);
      u = decay * carried + current.middleCols(t * positions, positions);
      if (!u.allFinite()) {
        throw DivergenceError(
            "numerical divergence: non-finite membrane in layer '" + name_ +
            "'");
      }
      s = u.unaryExpr([&](Scalar x) { return spike_fn(x, v_th_, beta_, mode); });
      carried = u.cwiseProduct((Scalar(1) - s.array()).matrix());
    }
    if (keep_state) {
      potential_ = std::move(potential);
      spikes_ = spikes;
      steps_ = steps;
    }
    return spikes;
  }

  // Back-propagation through time. Returns dL/dcurrent and accumulates
  // dL/dtau_raw into `grad_tau`.
  Matrix<Scalar> backward(const Matrix<Scalar>& grad_spikes, Scalar& grad_tau) const {
    const int steps = steps_;
    const Index positions = grad_spikes.cols() / steps;
    const Scalar decay = sigmoid(tau_raw_);
    Matrix<Scalar> grad_current(grad_spikes.rows(), grad_spikes.cols());
    Matrix<Scalar> grad_reset = Matrix<Scalar>::Zero(grad_spikes.rows(), positions);
    Scalar grad_decay = 0;
    for (int t = steps - 1; t >= 0; --t) {
      const auto u = potential_.middleCols(t * positions, positions);
      const auto s = spikes_.middleCols(t * positions, positions);
      const Matrix<Scalar> sg = u.unaryExpr(
          [&](Scalar x) { return surrogate_spike_grad(x, v_th_, beta_); });
      // reset: U_r = U * (1 - S(U))
      const Matrix<Scalar> d_reset_d_u =
          (Scalar(1) - s.array()) - u.array() * sg.array();
      Matrix<Scalar> grad_u =
          grad_spikes.middleCols(t * positions, positions).cwiseProduct(sg) +
          grad_reset.cwiseProduct(d_reset_d_u);
      grad_current.middleCols(t * positions, positions) = grad_u;
      if (t > 0) {
        const auto u_prev = potential_.middleCols((t - 1) * positions, positions);
        const auto s_prev = spikes_.middleCols((t - 1) * positions, positions);
        const Matrix<Scalar> reset_prev =
            u_prev.cwiseProduct((Scalar(1) - s_prev.array()).matrix());
        grad_decay += grad_u.cwiseProduct(reset_prev).sum();
        grad_reset = decay * grad_u;
      }
    }
    grad_tau += grad_decay * decay * (Scalar(1) - decay);
    return grad_current;
  }

  const Matrix<Scalar>& last_spikes() const { return spikes_; }

 private:
  std::string name_ = "plif";
  Scalar tau_raw_ = Scalar(2);
  Scalar v_th_ = Scalar(1);
  Scalar beta_ = Scalar(4);
  Matrix<Scalar> potential_;
  Matrix<Scalar> spikes_;
  int steps_ = 1;
};

}  // namespace tdmcl
