// Copyright 2026 the pyrreg authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstdint>
#include <variant>
#include <vector>

#include "pyrreg/image.hpp"
#include "pyrreg/random.hpp"

namespace pyrreg {

enum class Activation { relu, linear };
enum class NetMode { infer, train };

template <class Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Valid (unpadded) convolution. Weights are a (kh*kw*cin) x cout matrix;
/// weight_row gives the row for a tap, and serialization walks taps in
/// (ky, kx, ci) order with the output channel innermost.
template <class Scalar>
struct ConvLayer {
  int kh = 1, kw = 1, cin = 1, cout = 1;
  Activation act = Activation::relu;
  Mat<Scalar> weights;
  Vec<Scalar> bias;

  ConvLayer() = default;
  ConvLayer(int kh_, int kw_, int cin_, int cout_, Activation act_)
      : kh(kh_), kw(kw_), cin(cin_), cout(cout_), act(act_) {
    require(kh >= 1 && kw >= 1 && cin >= 1 && cout >= 1,
            "ConvLayer: dimensions must be positive");
    weights = Mat<Scalar>::Zero(kh * kw * cin, cout);
    bias = Vec<Scalar>::Zero(cout);
  }

  int weight_row(int ky, int kx, int ci) const {
    return ci * kh * kw + ky * kw + kx;
  }

  long parameter_count() const {
    return static_cast<long>(kh) * kw * cin * cout + cout;
  }
};

/// Inverted dropout: in train mode each value survives with probability
/// 1 - rate and is scaled by 1 / (1 - rate); in infer mode it passes through.
template <class Scalar>
struct DropoutLayer {
  Scalar rate = 0;

  DropoutLayer() = default;
  explicit DropoutLayer(Scalar rate_) : rate(rate_) {
    require(rate >= Scalar(0) && rate < Scalar(1),
            "DropoutLayer: rate must lie in [0, 1)");
  }
};

template <class Scalar>
using NetworkItem = std::variant<ConvLayer<Scalar>, DropoutLayer<Scalar>>;

template <class Scalar>
struct Network {
  std::vector<NetworkItem<Scalar>> items;
  NetMode mode = NetMode::infer;
};

template <class Scalar>
long count_parameters(const Network<Scalar>& net) {
  long n = 0;
  for (const auto& item : net.items)
    if (const auto* conv = std::get_if<ConvLayer<Scalar>>(&item))
      n += conv->parameter_count();
  return n;
}

/// Smallest input (rows, cols) that yields a 1x1 output: every valid conv
/// shrinks each dimension by kernel size minus one.
template <class Scalar>
std::pair<int, int> input_window(const Network<Scalar>& net) {
  int rows = 1, cols = 1;
  for (const auto& item : net.items)
    if (const auto* conv = std::get_if<ConvLayer<Scalar>>(&item)) {
      rows += conv->kh - 1;
      cols += conv->kw - 1;
    }
  return {rows, cols};
}

struct ItemShape {
  int height = 0;
  int width = 0;
  int channels = 0;
};

/// Shape after every item for the given input size, dropout included
/// (it never changes shape).
template <class Scalar>
std::vector<ItemShape> layer_output_shapes(const Network<Scalar>& net, int in_h,
                                           int in_w, int in_c) {
  std::vector<ItemShape> shapes;
  shapes.reserve(net.items.size());
  ItemShape cur{in_h, in_w, in_c};
  for (const auto& item : net.items) {
    if (const auto* conv = std::get_if<ConvLayer<Scalar>>(&item)) {
      require(conv->cin == cur.channels, "layer_output_shapes: channel mismatch");
      cur.height -= conv->kh - 1;
      cur.width -= conv->kw - 1;
      cur.channels = conv->cout;
      require(cur.height >= 1 && cur.width >= 1,
              "layer_output_shapes: input too small for network");
    }
    shapes.push_back(cur);
  }
  return shapes;
}

template <class Scalar>
int network_input_channels(const Network<Scalar>& net) {
  for (const auto& item : net.items)
    if (const auto* conv = std::get_if<ConvLayer<Scalar>>(&item))
      return conv->cin;
  fail_invalid("network_input_channels: no conv layer");
}

/// Checks that consecutive conv layers agree on channel counts.
template <class Scalar>
void validate_network(const Network<Scalar>& net) {
  int channels = -1;
  for (const auto& item : net.items)
    if (const auto* conv = std::get_if<ConvLayer<Scalar>>(&item)) {
      require(channels < 0 || conv->cin == channels,
              "validate_network: channel mismatch between layers");
      require(conv->weights.rows() == conv->kh * conv->kw * conv->cin &&
                  conv->weights.cols() == conv->cout &&
                  conv->bias.size() == conv->cout,
              "validate_network: weight storage does not match layer shape");
      channels = conv->cout;
    }
  require(channels >= 0, "validate_network: network has no conv layer");
}

namespace detail {

// Gathers every kh x kw patch of the input into one column: K x N with
// K = kh*kw*cin, N = oh*ow, pixel n = y*ow + x. Column segments for a fixed
// (channel, ky) are contiguous rows of the source plane.
template <class Scalar>
Mat<Scalar> im2col(const Image<Scalar>& in, int kh, int kw, int y0, int oh,
                   int ow) {
  const int cin = in.channels();
  Mat<Scalar> P(kh * kw * cin, oh * ow);
  parallel_for(0, oh, [&](int y) {
    for (int x = 0; x < ow; ++x) {
      const int n = y * ow + x;
      Scalar* col = P.data() + static_cast<ptrdiff_t>(n) * P.rows();
      for (int ci = 0; ci < cin; ++ci) {
        const auto& plane = in[ci];
        for (int ky = 0; ky < kh; ++ky) {
          const Scalar* src = plane.data() +
                              static_cast<ptrdiff_t>(y0 + y + ky) * plane.cols() + x;
          Scalar* dst = col + ci * kh * kw + ky * kw;
          for (int kx = 0; kx < kw; ++kx) dst[kx] = src[kx];
        }
      }
    }
  });
  return P;
}

// Reverse of im2col: accumulates column patches back into an image.
template <class Scalar>
void col2im_add(const Mat<Scalar>& P, int kh, int kw, int oh, int ow,
                Image<Scalar>& out) {
  const int cin = out.channels();
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      const int n = y * ow + x;
      const Scalar* col = P.data() + static_cast<ptrdiff_t>(n) * P.rows();
      for (int ci = 0; ci < cin; ++ci) {
        auto& plane = out[ci];
        for (int ky = 0; ky < kh; ++ky) {
          Scalar* dst = plane.data() +
                        static_cast<ptrdiff_t>(y + ky) * plane.cols() + x;
          const Scalar* src = col + ci * kh * kw + ky * kw;
          for (int kx = 0; kx < kw; ++kx) dst[kx] += src[kx];
        }
      }
    }
  }
}

template <class Scalar>
Image<Scalar> mat_to_image(const Mat<Scalar>& m, int oh, int ow) {
  Image<Scalar> out(oh, ow, static_cast<int>(m.cols()));
  for (int co = 0; co < m.cols(); ++co) {
    Eigen::Map<const Plane<Scalar>> view(m.col(co).data(), oh, ow);
    out[co] = view;
  }
  return out;
}

}  // namespace detail

/// Per-item records kept by forward_cached so backward can replay the pass.
template <class Scalar>
struct ConvCache {
  Mat<Scalar> patches;  // K x N
  Mat<Scalar> pre;      // N x cout, before activation
  int in_h = 0, in_w = 0;
};

template <class Scalar>
struct DropoutCache {
  Image<Scalar> scaled_mask;  // empty when the layer ran as identity
};

template <class Scalar>
struct ForwardCache {
  std::vector<std::variant<ConvCache<Scalar>, DropoutCache<Scalar>>> items;
  Image<Scalar> output;
};

namespace detail {

template <class Scalar>
Image<Scalar> conv_forward(const ConvLayer<Scalar>& layer,
                           const Image<Scalar>& in, ConvCache<Scalar>* cache) {
  const int h = in.height();
  const int w = in.width();
  require(in.channels() == layer.cin, "conv_forward: channel mismatch");
  require(h >= layer.kh && w >= layer.kw, "conv_forward: input below kernel size");
  const int oh = h - layer.kh + 1;
  const int ow = w - layer.kw + 1;
  Mat<Scalar> P = im2col(in, layer.kh, layer.kw, 0, oh, ow);
  Mat<Scalar> Z = P.transpose() * layer.weights;
  Z.rowwise() += layer.bias.transpose();
  Mat<Scalar> A =
      layer.act == Activation::relu ? Z.cwiseMax(Scalar(0)).eval() : Z;
  if (cache) {
    cache->patches = std::move(P);
    cache->pre = Z;
    cache->in_h = h;
    cache->in_w = w;
  }
  return mat_to_image(A, oh, ow);
}

template <class Scalar>
Image<Scalar> dropout_forward(const DropoutLayer<Scalar>& layer,
                              const Image<Scalar>& in, NetMode mode, Rng* rng,
                              DropoutCache<Scalar>* cache) {
  if (mode == NetMode::infer) {
    if (cache) cache->scaled_mask = Image<Scalar>();
    return in;
  }
  require(rng != nullptr, "dropout_forward: train mode needs a random source");
  const Scalar keep = Scalar(1) - layer.rate;
  Image<Scalar> mask(in.height(), in.width(), in.channels());
  for (int c = 0; c < in.channels(); ++c)
    for (int y = 0; y < in.height(); ++y)
      for (int x = 0; x < in.width(); ++x)
        mask[c](y, x) = rng->uniform() < static_cast<double>(layer.rate)
                            ? Scalar(0)
                            : Scalar(1) / keep;
  Image<Scalar> out = in;
  for (int c = 0; c < in.channels(); ++c) out[c] *= mask[c];
  if (cache) cache->scaled_mask = std::move(mask);
  return out;
}

}  // namespace detail

/// Runs the network. rng is only consulted by dropout layers in train mode.
template <class Scalar>
Image<Scalar> forward_cached(const Network<Scalar>& net, const Image<Scalar>& input,
                             Rng* rng, ForwardCache<Scalar>* cache) {
  validate_network(net);
  if (cache) {
    cache->items.clear();
    cache->items.reserve(net.items.size());
  }
  Image<Scalar> cur = input;
  for (const auto& item : net.items) {
    if (const auto* conv = std::get_if<ConvLayer<Scalar>>(&item)) {
      ConvCache<Scalar> cc;
      cur = detail::conv_forward(*conv, cur, cache ? &cc : nullptr);
      if (cache) cache->items.emplace_back(std::move(cc));
    } else {
      const auto& drop = std::get<DropoutLayer<Scalar>>(item);
      DropoutCache<Scalar> dc;
      cur = detail::dropout_forward(drop, cur, net.mode, rng,
                                    cache ? &dc : nullptr);
      if (cache) cache->items.emplace_back(std::move(dc));
    }
  }
  if (cache) cache->output = cur;
  return cur;
}

template <class Scalar>
Image<Scalar> forward(const Network<Scalar>& net, const Image<Scalar>& input,
                      Rng* rng = nullptr) {
  return forward_cached<Scalar>(net, input, rng, nullptr);
}

template <class Scalar>
struct LayerGradients {
  Mat<Scalar> weights;  // empty for non-conv items
  Vec<Scalar> bias;
};

template <class Scalar>
struct Gradients {
  std::vector<LayerGradients<Scalar>> items;
  Image<Scalar> input;

  void add(const Gradients& other) {
    require(items.size() == other.items.size(), "Gradients::add: layer mismatch");
    for (size_t i = 0; i < items.size(); ++i) {
      if (items[i].weights.size() == 0) continue;
      items[i].weights += other.items[i].weights;
      items[i].bias += other.items[i].bias;
    }
    // Input gradients only combine when the passes saw one input shape;
    // accumulating across differently sized inputs drops them instead.
    if (input.channels() == other.input.channels() &&
        input.height() == other.input.height() &&
        input.width() == other.input.width()) {
      for (int c = 0; c < input.channels(); ++c) input[c] += other.input[c];
    } else {
      input = Image<Scalar>();
    }
  }

  void scale(Scalar s) {
    for (auto& g : items) {
      if (g.weights.size() == 0) continue;
      g.weights *= s;
      g.bias *= s;
    }
    for (int c = 0; c < input.channels(); ++c) input[c] *= s;
  }
};

/// Backpropagates output_grad through a cached forward pass, producing
/// parameter gradients for every conv layer plus the input gradient.
template <class Scalar>
Gradients<Scalar> backward(const Network<Scalar>& net,
                           const ForwardCache<Scalar>& cache,
                           const Image<Scalar>& output_grad) {
  require(cache.items.size() == net.items.size(),
          "backward: cache does not match network");
  Gradients<Scalar> grads;
  grads.items.resize(net.items.size());

  require(output_grad.height() == cache.output.height() &&
              output_grad.width() == cache.output.width() &&
              output_grad.channels() == cache.output.channels(),
          "backward: output gradient shape mismatch");

  Image<Scalar> g = output_grad;
  for (int i = static_cast<int>(net.items.size()) - 1; i >= 0; --i) {
    const auto idx = static_cast<size_t>(i);
    if (const auto* conv = std::get_if<ConvLayer<Scalar>>(&net.items[idx])) {
      const auto& cc = std::get<ConvCache<Scalar>>(cache.items[idx]);
      const int oh = cc.in_h - conv->kh + 1;
      const int ow = cc.in_w - conv->kw + 1;
      const int n = oh * ow;
      // Flatten g into N x cout, matching the forward layout.
      Mat<Scalar> gz(n, conv->cout);
      for (int co = 0; co < conv->cout; ++co)
        gz.col(co) = Eigen::Map<const Vec<Scalar>>(g[co].data(), n);
      if (conv->act == Activation::relu)
        gz.array() *= (cc.pre.array() > Scalar(0)).template cast<Scalar>();
      grads.items[idx].weights = cc.patches * gz;
      grads.items[idx].bias = gz.colwise().sum().transpose();
      const Mat<Scalar> gp = conv->weights * gz.transpose();
      Image<Scalar> gin(cc.in_h, cc.in_w, conv->cin);
      detail::col2im_add(gp, conv->kh, conv->kw, oh, ow, gin);
      g = std::move(gin);
    } else {
      const auto& dc = std::get<DropoutCache<Scalar>>(cache.items[idx]);
      if (dc.scaled_mask.channels() > 0)
        for (int c = 0; c < g.channels(); ++c) g[c] *= dc.scaled_mask[c];
    }
  }
  grads.input = std::move(g);
  return grads;
}

/// He-uniform fan-in bounds for relu layers, symmetric Glorot bounds for
/// linear ones; biases start at zero. Weights are drawn tap by tap in
/// (ky, kx, ci, co) order so the stream layout is reproducible.
template <class Scalar>
void init_weights(Network<Scalar>& net, Rng& rng) {
  for (auto& item : net.items) {
    auto* conv = std::get_if<ConvLayer<Scalar>>(&item);
    if (!conv) continue;
    const double fan_in = static_cast<double>(conv->kh) * conv->kw * conv->cin;
    const double fan_out = static_cast<double>(conv->kh) * conv->kw * conv->cout;
    const double limit = conv->act == Activation::relu
                             ? std::sqrt(6.0 / fan_in)
                             : std::sqrt(6.0 / (fan_in + fan_out));
    for (int ky = 0; ky < conv->kh; ++ky)
      for (int kx = 0; kx < conv->kw; ++kx)
        for (int ci = 0; ci < conv->cin; ++ci)
          for (int co = 0; co < conv->cout; ++co)
            conv->weights(conv->weight_row(ky, kx, ci), co) =
                static_cast<Scalar>(rng.uniform(-limit, limit));
    conv->bias.setZero();
  }
}

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

template <class Scalar>
struct AdamState {
  long t = 0;
  std::vector<LayerGradients<Scalar>> m;
  std::vector<LayerGradients<Scalar>> v;
};

template <class Scalar>
AdamState<Scalar> make_adam_state(const Network<Scalar>& net) {
  AdamState<Scalar> st;
  st.m.resize(net.items.size());
  st.v.resize(net.items.size());
  for (size_t i = 0; i < net.items.size(); ++i) {
    const auto* conv = std::get_if<ConvLayer<Scalar>>(&net.items[i]);
    if (!conv) continue;
    st.m[i].weights = Mat<Scalar>::Zero(conv->weights.rows(), conv->weights.cols());
    st.m[i].bias = Vec<Scalar>::Zero(conv->bias.size());
    st.v[i].weights = Mat<Scalar>::Zero(conv->weights.rows(), conv->weights.cols());
    st.v[i].bias = Vec<Scalar>::Zero(conv->bias.size());
  }
  return st;
}

/// One bias-corrected Adam update. Epsilon is added after the square root:
/// p -= lr * mhat / (sqrt(vhat) + eps).
template <class Scalar>
void adam_step(Network<Scalar>& net, const Gradients<Scalar>& grads,
               AdamState<Scalar>& state, const AdamConfig& cfg) {
  require(grads.items.size() == net.items.size() &&
              state.m.size() == net.items.size(),
          "adam_step: structure mismatch");
  state.t += 1;
  const Scalar b1 = Scalar(cfg.beta1);
  const Scalar b2 = Scalar(cfg.beta2);
  const Scalar bc1 = Scalar(1) - Scalar(std::pow(cfg.beta1, static_cast<double>(state.t)));
  const Scalar bc2 = Scalar(1) - Scalar(std::pow(cfg.beta2, static_cast<double>(state.t)));
  auto update = [&](auto& param, const auto& g, auto& m, auto& v) {
    m = b1 * m + (Scalar(1) - b1) * g;
    v.array() = b2 * v.array() + (Scalar(1) - b2) * g.array().square();
    param.array() -= Scalar(cfg.lr) * (m.array() / bc1) /
                     ((v.array() / bc2).sqrt() + Scalar(cfg.eps));
  };
  for (size_t i = 0; i < net.items.size(); ++i) {
    auto* conv = std::get_if<ConvLayer<Scalar>>(&net.items[i]);
    if (!conv) continue;
    update(conv->weights, grads.items[i].weights, state.m[i].weights,
           state.v[i].weights);
    update(conv->bias, grads.items[i].bias, state.m[i].bias, state.v[i].bias);
  }
}

/// The production stereo network: twelve valid convolutions that collapse a
/// 15 x 19 two-view RGB window (six channels) to a single residual value,
/// with dropout after the third and sixth convolutions. 552,775 parameters.
template <class Scalar>
Network<Scalar> make_stereo_network() {
  Network<Scalar> net;
  auto conv = [&](int kh, int kw, int cin, int cout, Activation act) {
    net.items.emplace_back(ConvLayer<Scalar>(kh, kw, cin, cout, act));
  };
  conv(3, 3, 6, 12, Activation::relu);
  conv(3, 3, 12, 24, Activation::relu);
  conv(3, 3, 24, 32, Activation::relu);
  net.items.emplace_back(DropoutLayer<Scalar>(Scalar(0.1)));
  conv(3, 3, 32, 46, Activation::relu);
  conv(3, 3, 46, 72, Activation::relu);
  net.items.emplace_back(DropoutLayer<Scalar>(Scalar(0.1)));
  conv(1, 3, 72, 100, Activation::relu);
  conv(3, 3, 100, 200, Activation::relu);
  conv(1, 1, 200, 200, Activation::relu);
  conv(3, 3, 200, 128, Activation::relu);
  conv(1, 3, 128, 64, Activation::relu);
  conv(1, 1, 64, 32, Activation::relu);
  conv(1, 1, 32, 1, Activation::linear);
  return net;
}

/// A small six-layer net (9 x 9 window) for quick experiments and the
/// training smoke test; about 13k parameters for two grayscale channels.
template <class Scalar>
Network<Scalar> make_compact_network(int in_channels) {
  require(in_channels >= 1, "make_compact_network: bad channel count");
  Network<Scalar> net;
  auto conv = [&](int kh, int kw, int cin, int cout, Activation act) {
    net.items.emplace_back(ConvLayer<Scalar>(kh, kw, cin, cout, act));
  };
  conv(3, 3, in_channels, 12, Activation::relu);
  conv(3, 3, 12, 16, Activation::relu);
  conv(3, 3, 16, 24, Activation::relu);
  conv(3, 3, 24, 32, Activation::relu);
  conv(1, 1, 32, 16, Activation::relu);
  conv(1, 1, 16, 1, Activation::linear);
  return net;
}

}  // namespace pyrreg
