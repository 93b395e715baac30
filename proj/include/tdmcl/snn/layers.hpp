#pragma once

#include <cmath>
#include <string>
#include <utility>

#include "tdmcl/common.hpp"
#include "tdmcl/rng.hpp"

namespace tdmcl {

// Channel-by-image-by-space geometry. Feature maps are stored as
// (channels x images*height*width) matrices; column index is
// (image*height + y)*width + x, so each column is one pixel's channel vector.
struct Shape {
  int channels = 0;
  int height = 1;
  int width = 1;

  int pixels() const { return height * width; }
  Index size() const { return static_cast<Index>(channels) * pixels(); }
  bool operator==(const Shape&) const = default;
  std::string str() const {
    return std::to_string(channels) + "x" + std::to_string(height) + "x" +
           std::to_string(width);
  }
};

// Weights are (out x fan_in). A masked weight is held at exactly zero and its
// gradient is zeroed, so it contributes no current and never moves.
//
// When `gain` is non-empty the layer is weight-normalized per output row:
// effective row = gain * (w .* m) / ||w .* m||. Inhibition acts on `weights`;
// the gain keeps each unit's drive scale independent of that shrinkage.
template <typename Scalar>
struct LayerParams {
  Matrix<Scalar> weights;
  Matrix<Scalar> mask;
  Vector<Scalar> bias;
  Vector<Scalar> gain;

  Index total_count() const { return weights.size(); }
  Index active_count() const {
    return static_cast<Index>((mask.array() != Scalar(0)).count());
  }
  bool normalized() const { return gain.size() > 0; }

  void apply_mask() { weights = weights.cwiseProduct(mask); }

  Matrix<Scalar> effective() const {
    if (!normalized()) return weights;
    Matrix<Scalar> eff = weights;
    for (Index r = 0; r < eff.rows(); ++r) {
      const Scalar n = eff.row(r).norm();
      if (n > Scalar(0)) {
        eff.row(r) *= gain(r) / n;
      } else {
        eff.row(r).setZero();
      }
    }
    return eff;
  }
};

template <typename Scalar>
struct LayerGrads {
  Matrix<Scalar> weights;
  Vector<Scalar> bias;
  Vector<Scalar> gain;

  static LayerGrads zeros_like(const LayerParams<Scalar>& p) {
    LayerGrads g;
    g.weights = Matrix<Scalar>::Zero(p.weights.rows(), p.weights.cols());
    g.bias = Vector<Scalar>::Zero(p.bias.size());
    g.gain = Vector<Scalar>::Zero(p.gain.size());
    return g;
  }
};

// Maps dL/d(effective weights) back onto the raw parameters, honouring the mask.
template <typename Scalar>
void accumulate_weight_grad(const LayerParams<Scalar>& p,
                            const Matrix<Scalar>& grad_effective,
                            LayerGrads<Scalar>& g) {
  if (!p.normalized()) {
    g.weights += grad_effective.cwiseProduct(p.mask);
    return;
  }
  for (Index r = 0; r < p.weights.rows(); ++r) {
    const Scalar n = p.weights.row(r).norm();
    if (n <= Scalar(0)) continue;
    const RowVector<Scalar> u = p.weights.row(r) / n;
    const Scalar proj = u.dot(grad_effective.row(r));
    g.gain(r) += proj;
    g.weights.row(r) += ((p.gain(r) / n) *
                         (grad_effective.row(r) - proj * u))
                            .cwiseProduct(p.mask.row(r));
  }
}

// Uniform(-a, a) with a = gain * sqrt(3 / fan_in); all-ones mask; zero bias.
template <typename Scalar>
LayerParams<Scalar> init_layer(Index out, Index fan_in, double init_gain,
                               bool weight_norm, Rng& rng) {
  LayerParams<Scalar> p;
  const double a = init_gain * std::sqrt(3.0 / static_cast<double>(fan_in));
  p.weights.resize(out, fan_in);
  for (Index c = 0; c < fan_in; ++c)
    for (Index r = 0; r < out; ++r)
      p.weights(r, c) = static_cast<Scalar>(rng.uniform(-a, a));
  p.mask = Matrix<Scalar>::Ones(out, fan_in);
  p.bias = Vector<Scalar>::Zero(out);
  if (weight_norm) p.gain = p.weights.rowwise().norm();
  return p;
}

struct ConvGeometry {
  Shape input;
  int out_channels = 0;
  int kernel = 3;
  int stride = 1;
  int pad = 1;

  Shape output() const {
    return Shape{out_channels, (input.height + 2 * pad - kernel) / stride + 1,
                 (input.width + 2 * pad - kernel) / stride + 1};
  }
  Index fan_in() const {
    return static_cast<Index>(kernel) * kernel * input.channels;
  }
  bool is_pointwise() const { return kernel == 1 && stride == 1 && pad == 0; }
};

// Rows are ordered (ky, kx, channel).
template <typename Scalar>
Matrix<Scalar> im2col(const Matrix<Scalar>& input, const ConvGeometry& g,
                      Index images) {
  const Shape out = g.output();
  const int c = g.input.channels;
  Matrix<Scalar> cols = Matrix<Scalar>::Zero(g.fan_in(), images * out.pixels());
  for (Index n = 0; n < images; ++n) {
    for (int oy = 0; oy < out.height; ++oy) {
      for (int ox = 0; ox < out.width; ++ox) {
        const Index col = (n * out.height + oy) * out.width + ox;
        for (int ky = 0; ky < g.kernel; ++ky) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.input.height) continue;
          for (int kx = 0; kx < g.kernel; ++kx) {
            const int ix = ox * g.stride - g.pad + kx;
            if (ix < 0 || ix >= g.input.width) continue;
            const Index src = (n * g.input.height + iy) * g.input.width + ix;
            cols.block((ky * g.kernel + kx) * c, col, c, 1) = input.col(src);
          }
        }
      }
    }
  }
  return cols;
}

template <typename Scalar>
Matrix<Scalar> col2im(const Matrix<Scalar>& cols, const ConvGeometry& g,
                      Index images) {
  const Shape out = g.output();
  const int c = g.input.channels;
  Matrix<Scalar> input =
      Matrix<Scalar>::Zero(c, images * g.input.pixels());
  for (Index n = 0; n < images; ++n) {
    for (int oy = 0; oy < out.height; ++oy) {
      for (int ox = 0; ox < out.width; ++ox) {
        const Index col = (n * out.height + oy) * out.width + ox;
        for (int ky = 0; ky < g.kernel; ++ky) {
          const int iy = oy * g.stride - g.pad + ky;
          if (iy < 0 || iy >= g.input.height) continue;
          for (int kx = 0; kx < g.kernel; ++kx) {
            const int ix = ox * g.stride - g.pad + kx;
            if (ix < 0 || ix >= g.input.width) continue;
            const Index dst = (n * g.input.height + iy) * g.input.width + ix;
            input.col(dst) += cols.block((ky * g.kernel + kx) * c, col, c, 1);
          }
        }
      }
    }
  }
  return input;
}

// Convolution over a batch of images (images = steps * batch when time is
// folded into the batch axis).
template <typename Scalar>
class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(std::string name, ConvGeometry geometry, LayerParams<Scalar> params)
      : name_(std::move(name)),
        geometry_(geometry),
        params_(std::move(params)) {}

  const std::string& name() const { return name_; }
  const ConvGeometry& geometry() const { return geometry_; }
  const LayerParams<Scalar>& params() const { return params_; }
  LayerParams<Scalar>& params() { return params_; }

  Matrix<Scalar> forward(const Matrix<Scalar>& input, Index images,
                         bool keep_input) {
    check_input(input, images);
    Matrix<Scalar> out;
    if (geometry_.is_pointwise()) {
      out.noalias() = params_.effective() * input;
      if (keep_input) cols_ = input;
    } else {
      Matrix<Scalar> cols = im2col(input, geometry_, images);
      out.noalias() = params_.effective() * cols;
      if (keep_input) cols_ = std::move(cols);
    }
    out.colwise() += params_.bias;
    images_ = images;
    return out;
  }

  // Accumulates parameter gradients; returns dL/dinput when requested.
  Matrix<Scalar> backward(const Matrix<Scalar>& grad_out, LayerGrads<Scalar>& grads,
                          bool need_input_grad) const {
    Matrix<Scalar> grad_eff = grad_out * cols_.transpose();
    accumulate_weight_grad(params_, grad_eff, grads);
    grads.bias += grad_out.rowwise().sum();
    if (!need_input_grad) return {};
    Matrix<Scalar> grad_cols = params_.effective().transpose() * grad_out;
    if (geometry_.is_pointwise()) return grad_cols;
    return col2im(grad_cols, geometry_, images_);
  }

  // Cached layer input in im2col form (for Hebbian statistics).
  const Matrix<Scalar>& cached_columns() const { return cols_; }

 private:
  void check_input(const Matrix<Scalar>& input, Index images) const {
    if (input.rows() != geometry_.input.channels ||
        input.cols() != images * geometry_.input.pixels()) {
      throw WiringError("layer '" + name_ + "' expects input " +
                        geometry_.input.str() + " per image, got " +
                        std::to_string(input.rows()) + "x" +
                        std::to_string(input.cols()) + " for " +
                        std::to_string(images) + " images");
    }
  }

  std::string name_;
  ConvGeometry geometry_;
  LayerParams<Scalar> params_;
  Matrix<Scalar> cols_;
  Index images_ = 0;
};

// Nearest-neighbour spatial resize; integer up- or down-sampling factors.
template <typename Scalar>
Matrix<Scalar> resize_nearest(const Matrix<Scalar>& input, Shape from, Shape to,
                              Index images) {
  if (from.height == to.height && from.width == to.width) return input;
  Matrix<Scalar> out(input.rows(), images * to.pixels());
  for (Index n = 0; n < images; ++n)
    for (int y = 0; y < to.height; ++y)
      for (int x = 0; x < to.width; ++x) {
        const int sy = y * from.height / to.height;
        const int sx = x * from.width / to.width;
        out.col((n * to.height + y) * to.width + x) =
            input.col((n * from.height + sy) * from.width + sx);
      }
  return out;
}

// Adjoint of resize_nearest.
template <typename Scalar>
Matrix<Scalar> resize_nearest_backward(const Matrix<Scalar>& grad, Shape from,
                                       Shape to, Index images) {
  if (from.height == to.height && from.width == to.width) return grad;
  Matrix<Scalar> out = Matrix<Scalar>::Zero(grad.rows(), images * from.pixels());
  for (Index n = 0; n < images; ++n)
    for (int y = 0; y < to.height; ++y)
      for (int x = 0; x < to.width; ++x) {
        const int sy = y * from.height / to.height;
        const int sx = x * from.width / to.width;
        out.col((n * from.height + sy) * from.width + sx) +=
            grad.col((n * to.height + y) * to.width + x);
      }
  return out;
}

}  // namespace tdmcl
