#pragma once

// Forward and backward kernels for the layer kinds the networks use.
// Image-shaped inputs are C x H x W, or N x C x H x W for a batch; vector
// inputs are F, or N x F. Outputs keep the batch dimension if the input had it.

#include <cstddef>
#include <span>
#include <vector>

#include "hgd/tensor.hpp"

namespace hgd {

// ---- conv2d: 3x3 cross-correlation, stride 1, zero "same" padding ----

Tensor conv2d_forward(const Tensor& input, const Tensor& weights, const Tensor& bias);

struct Conv2dGrads {
  Tensor input;
  Tensor weights;
  Tensor bias;
};

Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_out);

/// Accumulating form used by Network: adds into grad_weights/grad_bias and,
/// when grad_input is non-null, overwrites it.
void conv2d_backward_into(const Tensor& input, const Tensor& weights, const Tensor& grad_out, Tensor* grad_input,
                          Tensor& grad_weights, Tensor& grad_bias);

// ---- relu ----

Tensor relu_forward(const Tensor& x);
Tensor relu_backward(const Tensor& x, const Tensor& grad_out);

// ---- 2x2 max pooling, stride 2 ----

struct PoolResult {
  Tensor output;
  /// Flat index into the input of each output's maximum (first on ties).
  std::vector<std::size_t> argmax;
};

PoolResult maxpool2x2_forward(const Tensor& x);
Tensor maxpool2x2_backward(const Shape& input_shape, std::span<const std::size_t> argmax, const Tensor& grad_out);

// ---- dense: y = W x + b with W of shape out x in ----

Tensor dense_forward(const Tensor& x, const Tensor& weights, const Tensor& bias);

struct DenseGrads {
  Tensor input;
  Tensor weights;
  Tensor bias;
};

DenseGrads dense_backward(const Tensor& x, const Tensor& weights, const Tensor& grad_out);
void dense_backward_into(const Tensor& x, const Tensor& weights, const Tensor& grad_out, Tensor* grad_input,
                         Tensor& grad_weights, Tensor& grad_bias);

// ---- softmax / cross-entropy ----

/// Row-wise softmax of a K vector or N x K matrix. Throws NumericError on
/// non-finite logits.
Tensor softmax(const Tensor& logits);

struct LossGrad {
  double loss = 0.0;
  Tensor grad_logits;
};

/// -ln probs[label]; gradient is with respect to the logits that produced
/// `probs` through softmax, i.e. probs - onehot(label).
LossGrad cross_entropy(const Tensor& probs, std::size_t label);

/// Mean cross-entropy over an N x K batch; gradient is already divided by N.
LossGrad cross_entropy_batch(const Tensor& probs, std::span<const std::size_t> labels);

}  // namespace hgd
