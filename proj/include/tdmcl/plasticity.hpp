#pragma once

#include <string>
#include <type_traits>
#include <vector>

#include "tdmcl/common.hpp"
#include "tdmcl/evolution.hpp"
#include "tdmcl/snn/layers.hpp"

namespace tdmcl {

// Exponentially decaying spike trace: trace <- alpha * trace + spike.
template <typename Scalar>
struct TraceState {
  Vector<Scalar> trace;
  Scalar alpha = Scalar(0.5);

  TraceState(Index size, Scalar decay) : trace(Vector<Scalar>::Zero(size)), alpha(decay) {}
};

template <typename Scalar>
void update_trace(TraceState<Scalar>& state,
                  const std::type_identity_t<Vector<Scalar>>& spikes) {
  state.trace = state.alpha * state.trace + spikes;
}

// End-of-window trace of a time-major (rows x steps*positions) signal:
// sum_s alpha^(steps-1-s) * x_s, i.e. the recurrence above unrolled.
template <typename Scalar>
Matrix<Scalar> window_trace(const Matrix<Scalar>& signal, int steps, Scalar alpha) {
  const Index positions = signal.cols() / steps;
  Matrix<Scalar> trace = Matrix<Scalar>::Zero(signal.rows(), positions);
  for (int t = 0; t < steps; ++t)
    trace = alpha * trace + signal.middleCols(t * positions, positions);
  return trace;
}

// Min-max to [0,1]; a constant matrix maps to all zeros.
template <typename Scalar>
void normalize01(Matrix<Scalar>& m) {
  if (m.size() == 0) return;
  const Scalar lo = m.minCoeff();
  const Scalar hi = m.maxCoeff();
  if (!(hi > lo)) {
    m.setZero();
    return;
  }
  m = (m.array() - lo) / (hi - lo);
}

// H = Normalize01(post_trace * pre_trace^T), post neurons as rows.
template <typename Scalar>
Matrix<Scalar> hebbian_matrix(const Vector<Scalar>& post, const Vector<Scalar>& pre) {
  Matrix<Scalar> h = post * pre.transpose();
  normalize01(h);
  return h;
}

// Un-normalized Hebbian statistic for a weight-shared layer: the outer
// product of post and pre traces averaged over every position the kernel is
// applied at. `pre_columns` is the layer input trace in im2col layout
// (fan_in x positions), `post` is (out x positions).
template <typename Scalar>
Matrix<Scalar> hebbian_raw_shared(const Matrix<Scalar>& post,
                                  const Matrix<Scalar>& pre_columns) {
  return (post * pre_columns.transpose()) /
         static_cast<Scalar>(std::max<Index>(1, post.cols()));
}

enum class HebbianScope { kLayer, kNetwork };
std::string to_string(HebbianScope scope);
HebbianScope parse_hebbian_scope(const std::string& text);

// E_b^k: over later tasks t' = k+1..t, the probability that block b of task k
// feeds at least one new block of t' under that task's finalized rows,
// 1 - prod_rows(1 - p[connect to b]). Block 1 is never a source and scores 0.
// `later` holds the choice matrices of tasks k+1..t (any order).
double generality(const std::vector<const ChoiceMatrix*>& later, int task, int block);

// V = min(1, n/N) * (1 - exp(-2 (H + E))), elementwise.
template <typename Derived>
Matrix<typename Derived::Scalar> threshold_coeffs(const Eigen::MatrixBase<Derived>& h,
                                                  double e, int n, int maturity) {
  using Scalar = typename Derived::Scalar;
  if (maturity <= 0)
    throw ConfigError("plasticity.N must be > 0 (got " + std::to_string(maturity) + ")");
  if (n < 0) throw ConfigError("training-run count n must be >= 0");
  const double ramp = std::min(1.0, static_cast<double>(n) / maturity);
  return (static_cast<Scalar>(ramp) *
          (Scalar(1) - (Scalar(-2) * (h.array() + static_cast<Scalar>(e))).exp()))
      .matrix();
}

// Quantile with linear interpolation between order statistics
// (position (n-1) * q).
double quantile_linear(std::vector<double> values, double q);

struct PruneOutcome {
  Index active_before = 0;
  Index active_after = 0;
  double quantile = 0.0;
  double mean_v = 0.0;
  bool skipped = false;  // nothing active; no-op
};

// w' = sign(w) * relu(|w| - V * q80(|w| over active weights)); weights that
// reach exactly zero are masked permanently.
template <typename Scalar>
PruneOutcome inhibit_and_prune(LayerParams<Scalar>& layer,
                               const std::type_identity_t<Matrix<Scalar>>& v,
                               double q = 0.8) {
  PruneOutcome out;
  out.active_before = layer.active_count();
  if (out.active_before == 0) {
    out.skipped = true;
    return out;
  }
  std::vector<double> active;
  active.reserve(out.active_before);
  double v_sum = 0.0;
  for (Index i = 0; i < layer.weights.size(); ++i) {
    if (layer.mask(i) != Scalar(0)) {
      active.push_back(std::abs(static_cast<double>(layer.weights(i))));
      v_sum += static_cast<double>(v(i));
    }
  }
  out.quantile = quantile_linear(std::move(active), q);
  out.mean_v = v_sum / static_cast<double>(out.active_before);
  for (Index i = 0; i < layer.weights.size(); ++i) {
    if (layer.mask(i) == Scalar(0)) continue;
    const double w = static_cast<double>(layer.weights(i));
    const double shrunk = std::max(0.0, std::abs(w) - static_cast<double>(v(i)) * out.quantile);
    if (shrunk == 0.0) {
      layer.weights(i) = Scalar(0);
      layer.mask(i) = Scalar(0);
    } else {
      layer.weights(i) = static_cast<Scalar>(w < 0 ? -shrunk : shrunk);
    }
  }
  out.active_after = layer.active_count();
  return out;
}

// One row per (output channel, input channel) kernel of a conv layer.
struct KernelStat {
  int task = 0;
  int block = 0;
  std::string layer;
  int out_channel = 0;
  int in_channel = 0;
  double mean_h = 0.0;
  double pruned_fraction = 0.0;
};

// Groups a conv weight matrix laid out (out x (ky, kx, c)) into kernels and
// reports the mean Hebbian value and masked fraction of each.
template <typename Scalar>
std::vector<KernelStat> kernel_stats(const LayerParams<Scalar>& layer,
                                     const Matrix<Scalar>& h, int in_channels) {
  const Index taps = layer.weights.cols() / in_channels;
  std::vector<KernelStat> out;
  for (Index o = 0; o < layer.weights.rows(); ++o) {
    for (int c = 0; c < in_channels; ++c) {
      KernelStat s;
      s.out_channel = static_cast<int>(o);
      s.in_channel = c;
      double hs = 0.0, pruned = 0.0;
      for (Index t = 0; t < taps; ++t) {
        const Index col = t * in_channels + c;
        hs += static_cast<double>(h(o, col));
        pruned += layer.mask(o, col) == Scalar(0) ? 1.0 : 0.0;
      }
      s.mean_h = hs / static_cast<double>(taps);
      s.pruned_fraction = pruned / static_cast<double>(taps);
      out.push_back(s);
    }
  }
  return out;
}

struct RankCorrelation {
  double rho = 0.0;
  double p_value = 1.0;  // two-sided, t approximation with n-2 dof
  std::size_t n = 0;
};

// Spearman rank correlation with average ranks for ties.
RankCorrelation spearman(const std::vector<double>& x, const std::vector<double>& y);

RankCorrelation correlate_plasticity_pruning(const std::vector<KernelStat>& table);

}  // namespace tdmcl
