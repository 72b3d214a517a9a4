#include "hgd/network.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hgd/error.hpp"
#include "hgd/layers.hpp"

namespace hgd {

const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::relu: return "relu";
    case LayerKind::maxpool2x2: return "maxpool2x2";
    case LayerKind::flatten: return "flatten";
    case LayerKind::dense: return "dense";
    case LayerKind::softmax: return "softmax";
  }
  return "?";
}

LayerKind layer_kind_from_string(const std::string& name) {
  for (auto k : {LayerKind::conv2d, LayerKind::relu, LayerKind::maxpool2x2, LayerKind::flatten, LayerKind::dense,
                 LayerKind::softmax}) {
    if (name == to_string(k)) return k;
  }
  throw ArgumentError("unknown layer kind '" + name + "'");
}

Network::Network(Shape input_shape, std::vector<LayerSpec> layers)
    : input_shape_(std::move(input_shape)), layers_(std::move(layers)) {
  if (input_shape_.size() != 3 || shape_size(input_shape_) == 0) {
    throw ShapeError("network input must be a non-empty CxHxW shape, got " + shape_str(input_shape_));
  }
  if (layers_.size() < 2 || layers_.back().kind != LayerKind::softmax) {
    throw ShapeError("network must end with a softmax layer");
  }
  Shape cur = input_shape_;
  params_.resize(layers_.size());
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    const std::string where = "layer " + std::to_string(i) + " (" + to_string(l.kind) + "): ";
    switch (l.kind) {
      case LayerKind::conv2d:
        if (cur.size() != 3 || cur[0] != l.in || l.out == 0) {
          throw ShapeError(where + "expects " + std::to_string(l.in) + " channels, got " + shape_str(cur));
        }
        cur = {l.out, cur[1], cur[2]};
        params_[i].weight = Tensor({l.out, l.in, 3, 3});
        params_[i].bias = Tensor({l.out});
        break;
      case LayerKind::relu:
        break;
      case LayerKind::maxpool2x2:
        if (cur.size() != 3 || cur[1] % 2 != 0 || cur[2] % 2 != 0) {
          throw ShapeError(where + "needs an even CxHxW input, got " + shape_str(cur));
        }
        cur = {cur[0], cur[1] / 2, cur[2] / 2};
        break;
      case LayerKind::flatten:
        cur = {shape_size(cur)};
        break;
      case LayerKind::dense:
        if (cur.size() != 1 || cur[0] != l.in || l.out == 0) {
          throw ShapeError(where + "expects " + std::to_string(l.in) + " features, got " + shape_str(cur));
        }
        cur = {l.out};
        params_[i].weight = Tensor({l.out, l.in});
        params_[i].bias = Tensor({l.out});
        break;
      case LayerKind::softmax:
        if (i + 1 != layers_.size()) throw ShapeError(where + "softmax is only allowed as the last layer");
        if (cur.size() != 1) throw ShapeError(where + "needs a vector input, got " + shape_str(cur));
        break;
    }
    if (l.has_params()) {
      auto& p = params_[i];
      p.grad_weight = Tensor(p.weight.shape());
      p.grad_bias = Tensor(p.bias.shape());
      p.velocity_weight = Tensor(p.weight.shape());
      p.velocity_bias = Tensor(p.bias.shape());
    }
    output_shapes_.push_back(cur);
  }
}

std::vector<std::size_t> Network::param_layers() const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    if (layers_[i].has_params()) idx.push_back(i);
  }
  return idx;
}

std::size_t Network::param_count() const {
  std::size_t n = 0;
  for (auto i : param_layers()) n += params_[i].weight.size() + params_[i].bias.size();
  return n;
}

void Network::init_layer_he(std::size_t layer, Rng& rng) {
  auto& p = params_.at(layer);
  if (!layers_[layer].has_params()) throw ArgumentError("layer " + std::to_string(layer) + " has no parameters");
  const std::size_t fan_in = p.weight.size() / p.weight.dim(0);
  const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (auto& w : p.weight.values()) w = rng.normal(0.0, stddev);
  p.bias.fill(0.0);
  p.grad_weight.fill(0.0);
  p.grad_bias.fill(0.0);
  p.velocity_weight.fill(0.0);
  p.velocity_bias.fill(0.0);
}

void Network::init_he(std::uint64_t seed) {
  Rng rng(seed);
  for (auto i : param_layers()) init_layer_he(i, rng);
  meta_.seed = seed;
}

Tensor Network::as_batch(const Tensor& x) const {
  if (x.shape() == input_shape_) {
    Shape s{1};
    s.insert(s.end(), input_shape_.begin(), input_shape_.end());
    return x.reshaped(std::move(s));
  }
  if (x.rank() == 4 && x.dim(0) > 0 && Shape(x.shape().begin() + 1, x.shape().end()) == input_shape_) return x;
  throw ShapeError("network expects input " + shape_str(input_shape_) + " (optionally batched), got " +
                   shape_str(x.shape()));
}

Tensor Network::forward(const Tensor& x) const {
  ForwardTrace trace;
  return forward(x, trace);
}

Tensor Network::forward(const Tensor& x, ForwardTrace& trace) const {
  const bool single = x.shape() == input_shape_;
  trace.inputs.clear();
  trace.argmax.assign(layers_.size(), {});
  trace.inputs.reserve(layers_.size() + 1);
  trace.inputs.push_back(as_batch(x));
  const std::size_t batch = trace.inputs.front().dim(0);

  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const Tensor& in = trace.inputs.back();
    const auto& p = params_[i];
    Tensor out;
    switch (layers_[i].kind) {
      case LayerKind::conv2d: out = conv2d_forward(in, p.weight, p.bias); break;
      case LayerKind::relu: out = relu_forward(in); break;
      case LayerKind::maxpool2x2: {
        auto r = maxpool2x2_forward(in);
        out = std::move(r.output);
        trace.argmax[i] = std::move(r.argmax);
        break;
      }
      case LayerKind::flatten: out = in.reshaped({batch, shape_size(output_shapes_[i])}); break;
      case LayerKind::dense: out = dense_forward(in, p.weight, p.bias); break;
      case LayerKind::softmax: out = softmax(in); break;
    }
    if (!out.all_finite()) {
      throw NumericError("non-finite activation after layer " + std::to_string(i) + " (" + to_string(layers_[i].kind) +
                         ")");
    }
    trace.inputs.push_back(std::move(out));
  }
  Tensor probs = trace.inputs.back();
  if (single) probs.reshape(output_shapes_.back());
  return probs;
}

void Network::backward(const ForwardTrace& trace, const Tensor& grad_logits) {
  if (trace.inputs.size() != layers_.size() + 1) throw ArgumentError("backward: trace does not belong to this network");
  Tensor g = grad_logits;
  if (g.shape() == output_shapes_.back()) g.reshape({1, g.size()});
  if (g.shape() != trace.inputs.back().shape()) {
    throw ShapeError("backward: grad_logits " + shape_str(grad_logits.shape()) + " vs output " +
                     shape_str(trace.inputs.back().shape()));
  }
  // The softmax layer is folded into grad_logits.
  for (std::size_t i = layers_.size() - 1; i-- > 0;) {
    const Tensor& in = trace.inputs[i];
    auto& p = params_[i];
    const bool need_input = i > 0;
    switch (layers_[i].kind) {
      case LayerKind::conv2d: {
        Tensor gin;
        conv2d_backward_into(in, p.weight, g, need_input ? &gin : nullptr, p.grad_weight, p.grad_bias);
        g = std::move(gin);
        break;
      }
      case LayerKind::dense: {
        Tensor gin;
        dense_backward_into(in, p.weight, g, need_input ? &gin : nullptr, p.grad_weight, p.grad_bias);
        g = std::move(gin);
        break;
      }
      case LayerKind::relu: g = relu_backward(in, g); break;
      case LayerKind::maxpool2x2: g = maxpool2x2_backward(in.shape(), trace.argmax[i], g); break;
      case LayerKind::flatten: g.reshape(in.shape()); break;
      case LayerKind::softmax: break;
    }
  }
}

void Network::zero_grad() {
  for (auto i : param_layers()) {
    params_[i].grad_weight.fill(0.0);
    params_[i].grad_bias.fill(0.0);
  }
}

double Network::train_batch(const Tensor& batch, std::span<const std::size_t> labels, Tensor* probs_out) {
  ForwardTrace trace;
  Tensor probs = forward(batch, trace);
  if (probs.rank() == 1) probs.reshape({1, probs.size()});
  auto lg = cross_entropy_batch(probs, labels);
  backward(trace, lg.grad_logits);
  if (probs_out) *probs_out = std::move(probs);
  return lg.loss;
}

bool operator==(const Network& a, const Network& b) {
  if (a.input_shape_ != b.input_shape_ || a.layers_ != b.layers_) return false;
  for (std::size_t i = 0; i < a.params_.size(); ++i) {
    const auto& pa = a.params_[i];
    const auto& pb = b.params_[i];
    if (pa.weight != pb.weight || pa.bias != pb.bias || pa.trainable != pb.trainable) return false;
  }
  return true;
}

void sgd_step(Network& net, double lr, double momentum) {
  for (auto i : net.param_layers()) {
    auto& p = net.params(i);
    if (!p.trainable) continue;
    auto update = [&](Tensor& param, Tensor& vel, const Tensor& grad) {
      for (std::size_t k = 0; k < param.size(); ++k) {
        vel[k] = momentum * vel[k] + grad[k];
        param[k] -= lr * vel[k];
      }
    };
    update(p.weight, p.velocity_weight, p.grad_weight);
    update(p.bias, p.velocity_bias, p.grad_bias);
  }
}

namespace {

// True when both passes took the same ReLU and max-pool branches everywhere.
bool same_branches(const Network& net, const ForwardTrace& a, const ForwardTrace& b) {
  for (std::size_t i = 0; i < net.layers().size(); ++i) {
    const auto kind = net.layers()[i].kind;
    if (kind == LayerKind::maxpool2x2 && a.argmax[i] != b.argmax[i]) return false;
    if (kind == LayerKind::relu) {
      const auto& xa = a.inputs[i];
      const auto& xb = b.inputs[i];
      for (std::size_t k = 0; k < xa.size(); ++k) {
        if ((xa[k] > 0.0) != (xb[k] > 0.0)) return false;
      }
    }
  }
  return true;
}

double sample_loss(const Tensor& probs, std::size_t label) { return cross_entropy(probs, label).loss; }

}  // namespace

GradCheckResult grad_check(Network& net, const Tensor& input, std::size_t label, const GradCheckOptions& opts) {
  if (input.shape() != net.input_shape()) {
    throw ShapeError("grad_check: input " + shape_str(input.shape()) + " expected " + shape_str(net.input_shape()));
  }
  if (label >= net.num_classes()) throw ArgumentError("grad_check: label out of range");

  net.zero_grad();
  ForwardTrace base;
  const Tensor probs = net.forward(input, base);
  net.backward(base, cross_entropy(probs, label).grad_logits);

  GradCheckResult result;
  Rng picker(opts.sample_seed);
  ForwardTrace probe;
  auto check_tensor = [&](Tensor& param, const Tensor& analytic) {
    std::vector<std::size_t> idx(param.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    if (opts.max_per_tensor != 0 && idx.size() > opts.max_per_tensor) {
      picker.shuffle(idx);
      idx.resize(opts.max_per_tensor);
      std::sort(idx.begin(), idx.end());
    }
    for (auto k : idx) {
      const double original = param[k];
      bool done = false;
      for (double eps = opts.eps; eps >= opts.eps * 1e-2 && !done; eps /= 10.0) {
        param[k] = original + eps;
        const double plus = sample_loss(net.forward(input, probe), label);
        const bool plus_ok = same_branches(net, base, probe);
        param[k] = original - eps;
        const double minus = sample_loss(net.forward(input, probe), label);
        const bool minus_ok = same_branches(net, base, probe);
        param[k] = original;
        if (!plus_ok || !minus_ok) continue;
        const double numeric = (plus - minus) / (2.0 * eps);
        const double a = analytic[k];
        const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-8});
        result.max_rel_error = std::max(result.max_rel_error, rel);
        ++result.checked;
        done = true;
      }
      if (!done) ++result.skipped;
    }
  };
  for (auto i : net.param_layers()) {
    auto& p = net.params(i);
    check_tensor(p.weight, p.grad_weight);
    check_tensor(p.bias, p.grad_bias);
  }
  return result;
}

double grad_check(Network& net, const Tensor& input, std::size_t label, double eps) {
  return grad_check(net, input, label, GradCheckOptions{eps, 0, 0}).max_rel_error;
}

}  // namespace hgd
