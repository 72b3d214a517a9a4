#include "hgd/layers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "gemm.hpp"
#include "hgd/error.hpp"

namespace hgd {

namespace {

constexpr std::size_t kTaps = 9;

// Softmax can underflow to exactly 0 for hopeless predictions; keep the loss finite.
double safe_log(double p) { return std::log(std::max(p, std::numeric_limits<double>::min())); }

struct ImageDims {
  std::size_t batch, channels, height, width;
  bool batched;
};

ImageDims image_dims(const Tensor& t, const char* op) {
  if (t.rank() == 3) return {1, t.dim(0), t.dim(1), t.dim(2), false};
  if (t.rank() == 4) return {t.dim(0), t.dim(1), t.dim(2), t.dim(3), true};
  throw ShapeError(std::string(op) + ": expected CxHxW or NxCxHxW, got " + shape_str(t.shape()));
}

Shape image_shape(const ImageDims& d, std::size_t c, std::size_t h, std::size_t w) {
  if (d.batched) return {d.batch, c, h, w};
  return {c, h, w};
}

struct VectorDims {
  std::size_t batch, features;
  bool batched;
};

VectorDims vector_dims(const Tensor& t, const char* op) {
  if (t.rank() == 1) return {1, t.dim(0), false};
  if (t.rank() == 2) return {t.dim(0), t.dim(1), true};
  throw ShapeError(std::string(op) + ": expected F or NxF, got " + shape_str(t.shape()));
}

void check_conv_params(const ImageDims& d, const Tensor& weights, const Tensor* bias) {
  if (weights.rank() != 4 || weights.dim(1) != d.channels || weights.dim(2) != 3 || weights.dim(3) != 3) {
    throw ShapeError("conv2d: weights " + shape_str(weights.shape()) + " do not match " +
                     std::to_string(d.channels) + " input channels with a 3x3 kernel");
  }
  if (bias && (bias->rank() != 1 || bias->dim(0) != weights.dim(0))) {
    throw ShapeError("conv2d: bias " + shape_str(bias->shape()) + " does not match " +
                     std::to_string(weights.dim(0)) + " output channels");
  }
}

// col[(c*9 + ky*3 + kx) * hw + y*w + x] = in[c][y+ky-1][x+kx-1], zero outside.
void im2col(const double* in, std::size_t channels, std::size_t h, std::size_t w, double* col) {
  const std::size_t hw = h * w;
  for (std::size_t c = 0; c < channels; ++c) {
    const double* plane = in + c * hw;
    for (std::size_t ky = 0; ky < 3; ++ky) {
      for (std::size_t kx = 0; kx < 3; ++kx) {
        double* row = col + (c * kTaps + ky * 3 + kx) * hw;
        for (std::size_t y = 0; y < h; ++y) {
          const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + ky) - 1;
          double* dst = row + y * w;
          if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) {
            std::fill(dst, dst + w, 0.0);
            continue;
          }
          const double* src = plane + static_cast<std::size_t>(sy) * w;
          for (std::size_t x = 0; x < w; ++x) {
            const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(x + kx) - 1;
            dst[x] = (sx < 0 || sx >= static_cast<std::ptrdiff_t>(w)) ? 0.0 : src[sx];
          }
        }
      }
    }
  }
}

void col2im_add(const double* col, std::size_t channels, std::size_t h, std::size_t w, double* out) {
  const std::size_t hw = h * w;
  std::fill(out, out + channels * hw, 0.0);
  for (std::size_t c = 0; c < channels; ++c) {
    double* plane = out + c * hw;
    for (std::size_t ky = 0; ky < 3; ++ky) {
      for (std::size_t kx = 0; kx < 3; ++kx) {
        const double* row = col + (c * kTaps + ky * 3 + kx) * hw;
        for (std::size_t y = 0; y < h; ++y) {
          const std::ptrdiff_t sy = static_cast<std::ptrdiff_t>(y + ky) - 1;
          if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
          double* dst = plane + static_cast<std::size_t>(sy) * w;
          const double* src = row + y * w;
          for (std::size_t x = 0; x < w; ++x) {
            const std::ptrdiff_t sx = static_cast<std::ptrdiff_t>(x + kx) - 1;
            if (sx >= 0 && sx < static_cast<std::ptrdiff_t>(w)) dst[sx] += src[x];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d_forward(const Tensor& input, const Tensor& weights, const Tensor& bias) {
  const auto d = image_dims(input, "conv2d");
  check_conv_params(d, weights, &bias);
  const std::size_t out_c = weights.dim(0);
  const std::size_t hw = d.height * d.width;
  const std::size_t taps = d.channels * kTaps;

  Tensor out(image_shape(d, out_c, d.height, d.width));
  std::vector<double> col(taps * hw);
  for (std::size_t n = 0; n < d.batch; ++n) {
    im2col(input.data() + n * d.channels * hw, d.channels, d.height, d.width, col.data());
    double* dst = out.data() + n * out_c * hw;
    for (std::size_t o = 0; o < out_c; ++o) std::fill(dst + o * hw, dst + (o + 1) * hw, bias[o]);
    detail::gemm_nn(out_c, hw, taps, weights.data(), col.data(), dst, true);
  }
  return out;
}

void conv2d_backward_into(const Tensor& input, const Tensor& weights, const Tensor& grad_out, Tensor* grad_input,
                          Tensor& grad_weights, Tensor& grad_bias) {
  const auto d = image_dims(input, "conv2d_backward");
  check_conv_params(d, weights, nullptr);
  const std::size_t out_c = weights.dim(0);
  if (grad_out.shape() != image_shape(d, out_c, d.height, d.width)) {
    throw ShapeError("conv2d_backward: grad_out " + shape_str(grad_out.shape()) + " does not match forward output");
  }
  if (grad_weights.shape() != weights.shape() || grad_bias.shape() != Shape{out_c}) {
    throw ShapeError("conv2d_backward: gradient buffers have the wrong shape");
  }
  const std::size_t hw = d.height * d.width;
  const std::size_t taps = d.channels * kTaps;

  std::vector<double> col(taps * hw);
  std::vector<double> grad_col;
  std::vector<double> weights_t;
  if (grad_input) {
    *grad_input = Tensor(input.shape());
    grad_col.resize(taps * hw);
    weights_t.resize(out_c * taps);
    detail::transpose(weights.data(), out_c, taps, weights_t.data());
  }
  for (std::size_t n = 0; n < d.batch; ++n) {
    const double* go = grad_out.data() + n * out_c * hw;
    for (std::size_t o = 0; o < out_c; ++o) {
      double s = 0.0;
      for (std::size_t p = 0; p < hw; ++p) s += go[o * hw + p];
      grad_bias[o] += s;
    }
    im2col(input.data() + n * d.channels * hw, d.channels, d.height, d.width, col.data());
    detail::gemm_nt(out_c, taps, hw, go, col.data(), grad_weights.data(), true);
    if (grad_input) {
      detail::gemm_nn(taps, hw, out_c, weights_t.data(), go, grad_col.data(), false);
      col2im_add(grad_col.data(), d.channels, d.height, d.width, grad_input->data() + n * d.channels * hw);
    }
  }
}

Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& weights, const Tensor& grad_out) {
  Conv2dGrads g{Tensor{}, Tensor(weights.shape()), Tensor({weights.rank() == 4 ? weights.dim(0) : 0})};
  conv2d_backward_into(input, weights, grad_out, &g.input, g.weights, g.bias);
  return g;
}

Tensor relu_forward(const Tensor& x) {
  Tensor y = x;
  for (auto& v : y.values()) v = v > 0.0 ? v : 0.0;
  return y;
}

Tensor relu_backward(const Tensor& x, const Tensor& grad_out) {
  if (x.shape() != grad_out.shape()) throw ShapeError("relu_backward: shape mismatch");
  Tensor g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!(x[i] > 0.0)) g[i] = 0.0;
  }
  return g;
}

PoolResult maxpool2x2_forward(const Tensor& x) {
  const auto d = image_dims(x, "maxpool2x2");
  if (d.height % 2 != 0 || d.width % 2 != 0) {
    throw ShapeError("maxpool2x2: spatial size " + std::to_string(d.height) + "x" + std::to_string(d.width) +
                     " is not even");
  }
  const std::size_t oh = d.height / 2;
  const std::size_t ow = d.width / 2;
  PoolResult r{Tensor(image_shape(d, d.channels, oh, ow)), {}};
  r.argmax.resize(r.output.size());
  const std::size_t planes = d.batch * d.channels;
  for (std::size_t p = 0; p < planes; ++p) {
    const std::size_t in_base = p * d.height * d.width;
    const std::size_t out_base = p * oh * ow;
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t xo = 0; xo < ow; ++xo) {
        const std::size_t i00 = in_base + (2 * y) * d.width + 2 * xo;
        const std::size_t cells[4] = {i00, i00 + 1, i00 + d.width, i00 + d.width + 1};
        std::size_t best = cells[0];
        for (std::size_t c = 1; c < 4; ++c) {
          if (x[cells[c]] > x[best]) best = cells[c];
        }
        r.output[out_base + y * ow + xo] = x[best];
        r.argmax[out_base + y * ow + xo] = best;
      }
    }
  }
  return r;
}

Tensor maxpool2x2_backward(const Shape& input_shape, std::span<const std::size_t> argmax, const Tensor& grad_out) {
  if (argmax.size() != grad_out.size()) throw ShapeError("maxpool2x2_backward: argmax/grad_out size mismatch");
  Tensor g(input_shape);
  for (std::size_t i = 0; i < grad_out.size(); ++i) {
    if (argmax[i] >= g.size()) throw ShapeError("maxpool2x2_backward: argmax index out of range");
    g[argmax[i]] += grad_out[i];
  }
  return g;
}

Tensor dense_forward(const Tensor& x, const Tensor& weights, const Tensor& bias) {
  const auto d = vector_dims(x, "dense");
  if (weights.rank() != 2 || weights.dim(1) != d.features) {
    throw ShapeError("dense: weights " + shape_str(weights.shape()) + " do not accept " +
                     std::to_string(d.features) + " inputs");
  }
  const std::size_t out_f = weights.dim(0);
  if (bias.rank() != 1 || bias.dim(0) != out_f) throw ShapeError("dense: bias " + shape_str(bias.shape()) + " mismatch");

  Tensor y(d.batched ? Shape{d.batch, out_f} : Shape{out_f});
  std::vector<double> yt(out_f * d.batch);
  detail::gemm_nt(out_f, d.batch, d.features, weights.data(), x.data(), yt.data(), false);
  for (std::size_t n = 0; n < d.batch; ++n) {
    for (std::size_t m = 0; m < out_f; ++m) y[n * out_f + m] = yt[m * d.batch + n] + bias[m];
  }
  return y;
}

void dense_backward_into(const Tensor& x, const Tensor& weights, const Tensor& grad_out, Tensor* grad_input,
                         Tensor& grad_weights, Tensor& grad_bias) {
  const auto d = vector_dims(x, "dense_backward");
  if (weights.rank() != 2 || weights.dim(1) != d.features) throw ShapeError("dense_backward: weight shape mismatch");
  const std::size_t out_f = weights.dim(0);
  const Shape expected = d.batched ? Shape{d.batch, out_f} : Shape{out_f};
  if (grad_out.shape() != expected) {
    throw ShapeError("dense_backward: grad_out " + shape_str(grad_out.shape()) + " expected " + shape_str(expected));
  }
  if (grad_weights.shape() != weights.shape() || grad_bias.shape() != Shape{out_f}) {
    throw ShapeError("dense_backward: gradient buffers have the wrong shape");
  }
  for (std::size_t n = 0; n < d.batch; ++n) {
    for (std::size_t m = 0; m < out_f; ++m) grad_bias[m] += grad_out[n * out_f + m];
  }
  std::vector<double> go_t(out_f * d.batch);
  detail::transpose(grad_out.data(), d.batch, out_f, go_t.data());
  detail::gemm_nn(out_f, d.features, d.batch, go_t.data(), x.data(), grad_weights.data(), true);
  if (grad_input) {
    *grad_input = Tensor(x.shape());
    detail::gemm_nn(d.batch, d.features, out_f, grad_out.data(), weights.data(), grad_input->data(), false);
  }
}

DenseGrads dense_backward(const Tensor& x, const Tensor& weights, const Tensor& grad_out) {
  DenseGrads g{Tensor{}, Tensor(weights.shape()), Tensor({weights.rank() == 2 ? weights.dim(0) : 0})};
  dense_backward_into(x, weights, grad_out, &g.input, g.weights, g.bias);
  return g;
}

Tensor softmax(const Tensor& logits) {
  const auto d = vector_dims(logits, "softmax");
  if (!logits.all_finite()) throw NumericError("softmax: non-finite logits");
  Tensor p(logits.shape());
  for (std::size_t n = 0; n < d.batch; ++n) {
    const double* in = logits.data() + n * d.features;
    double* out = p.data() + n * d.features;
    const double mx = *std::max_element(in, in + d.features);
    double sum = 0.0;
    for (std::size_t k = 0; k < d.features; ++k) {
      out[k] = std::exp(in[k] - mx);
      sum += out[k];
    }
    for (std::size_t k = 0; k < d.features; ++k) out[k] /= sum;
  }
  return p;
}

LossGrad cross_entropy(const Tensor& probs, std::size_t label) {
  if (probs.rank() != 1) throw ShapeError("cross_entropy: expected a K vector, got " + shape_str(probs.shape()));
  if (label >= probs.size()) {
    throw ArgumentError("cross_entropy: label " + std::to_string(label) + " out of range for " +
                        std::to_string(probs.size()) + " classes");
  }
  LossGrad r{-safe_log(probs[label]), probs};
  r.grad_logits[label] -= 1.0;
  return r;
}

LossGrad cross_entropy_batch(const Tensor& probs, std::span<const std::size_t> labels) {
  if (probs.rank() != 2 || probs.dim(0) != labels.size()) {
    throw ShapeError("cross_entropy_batch: probs " + shape_str(probs.shape()) + " vs " +
                     std::to_string(labels.size()) + " labels");
  }
  const std::size_t batch = probs.dim(0);
  const std::size_t k = probs.dim(1);
  const double scale = 1.0 / static_cast<double>(batch);
  LossGrad r{0.0, probs};
  for (std::size_t n = 0; n < batch; ++n) {
    if (labels[n] >= k) {
      throw ArgumentError("cross_entropy: label " + std::to_string(labels[n]) + " out of range for " +
                          std::to_string(k) + " classes");
    }
    r.loss += -safe_log(probs[n * k + labels[n]]);
    r.grad_logits[n * k + labels[n]] -= 1.0;
  }
  r.loss *= scale;
  for (auto& g : r.grad_logits.values()) g *= scale;
  return r;
}

}  // namespace hgd
