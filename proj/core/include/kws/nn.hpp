#ifndef KWS_NN_HPP
#define KWS_NN_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "kws/tensor.hpp"

namespace kws {

enum class ConvAxis { time, freq };
enum class Padding { same, valid };

// 3-tap convolution along one axis. Weights laid out [tap][cin][cout],
// flat length 3*in_channels*out_channels; bias length out_channels.
template <typename S>
struct ConvParamsT {
  ConvAxis axis = ConvAxis::time;
  Padding padding = Padding::same;
  int in_channels = 0;
  int out_channels = 0;
  std::vector<S> weights;
  std::vector<S> bias;

  ConvParamsT() = default;
  ConvParamsT(ConvAxis ax, int cin, int cout, Padding pad = Padding::same)
      : axis(ax), padding(pad), in_channels(cin), out_channels(cout),
        weights(static_cast<std::size_t>(3) * cin * cout, S(0)),
        bias(cout, S(0)) {}

  std::size_t param_count() const { return weights.size() + bias.size(); }
};

template <typename S>
struct DenseParamsT {
  int in_dim = 0;
  int out_dim = 0;
  std::vector<S> weights;  // [in][out]
  std::vector<S> bias;

  DenseParamsT() = default;
  DenseParamsT(int in, int out)
      : in_dim(in), out_dim(out),
        weights(static_cast<std::size_t>(in) * out, S(0)), bias(out, S(0)) {}

  std::size_t param_count() const { return weights.size() + bias.size(); }
};

using ConvParams = ConvParamsT<float>;
using DenseParams = DenseParamsT<float>;

namespace detail {
inline void check(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}
}  // namespace detail

template <typename S>
Tensor3T<S> conv3_forward(const Tensor3T<S>& x, const ConvParamsT<S>& p) {
  detail::check(x.c == p.in_channels, "conv3_forward: channel mismatch");
  const bool time_axis = (p.axis == ConvAxis::time);
  const int axis_len = time_axis ? x.t : x.f;
  const int shrink = (p.padding == Padding::valid) ? 2 : 0;
  detail::check(p.padding == Padding::same || axis_len >= 3,
                "conv3_forward: valid padding needs axis length >= 3");

  const int out_t = time_axis ? x.t - shrink : x.t;
  const int out_f = time_axis ? x.f : x.f - shrink;
  const int cin = p.in_channels;
  const int cout = p.out_channels;
  Tensor3T<S> y(out_t, out_f, cout);

  // offset of output position relative to input for tap 0
  const int base = (p.padding == Padding::same) ? -1 : 0;
  for (int to = 0; to < out_t; ++to) {
    for (int fo = 0; fo < out_f; ++fo) {
      S* acc = &y.at(to, fo, 0);
      for (int co = 0; co < cout; ++co) acc[co] = p.bias[co];
      for (int tap = 0; tap < 3; ++tap) {
        const int ti = time_axis ? to + base + tap : to;
        const int fi = time_axis ? fo : fo + base + tap;
        if (ti < 0 || ti >= x.t || fi < 0 || fi >= x.f) continue;
        const S* xp = &x.at(ti, fi, 0);
        const S* wrow = &p.weights[static_cast<std::size_t>(tap) * cin * cout];
        for (int ci = 0; ci < cin; ++ci) {
          const S xv = xp[ci];
          const S* wp = wrow + static_cast<std::size_t>(ci) * cout;
          for (int co = 0; co < cout; ++co) acc[co] += xv * wp[co];
        }
      }
    }
  }
  return y;
}

template <typename S>
struct ConvGradsT {
  std::vector<S> weights;
  std::vector<S> bias;
};

template <typename S>
Tensor3T<S> conv3_backward(const Tensor3T<S>& x, const ConvParamsT<S>& p,
                           const Tensor3T<S>& grad_out, ConvGradsT<S>& grad_p) {
  Tensor3T<S> probe_shape;  // validate against forward shape
  {
    const bool time_axis = (p.axis == ConvAxis::time);
    const int shrink = (p.padding == Padding::valid) ? 2 : 0;
    const int out_t = time_axis ? x.t - shrink : x.t;
    const int out_f = time_axis ? x.f : x.f - shrink;
    detail::check(grad_out.t == out_t && grad_out.f == out_f &&
                      grad_out.c == p.out_channels,
                  "conv3_backward: grad_out shape mismatch");
  }
  const bool time_axis = (p.axis == ConvAxis::time);
  const int cin = p.in_channels;
  const int cout = p.out_channels;
  const int base = (p.padding == Padding::same) ? -1 : 0;

  Tensor3T<S> grad_x(x.t, x.f, x.c);
  grad_p.weights.assign(p.weights.size(), S(0));
  grad_p.bias.assign(p.bias.size(), S(0));

  // weights transposed to [tap][cout][cin] so the grad_x update below is a
  // contiguous axpy over input channels
  std::vector<S> wt(p.weights.size());
  for (int tap = 0; tap < 3; ++tap) {
    for (int ci = 0; ci < cin; ++ci) {
      for (int co = 0; co < cout; ++co) {
        wt[(static_cast<std::size_t>(tap) * cout + co) * cin + ci] =
            p.weights[(static_cast<std::size_t>(tap) * cin + ci) * cout + co];
      }
    }
  }

  for (int to = 0; to < grad_out.t; ++to) {
    for (int fo = 0; fo < grad_out.f; ++fo) {
      const S* go = &grad_out.at(to, fo, 0);
      for (int co = 0; co < cout; ++co) grad_p.bias[co] += go[co];
      for (int tap = 0; tap < 3; ++tap) {
        const int ti = time_axis ? to + base + tap : to;
        const int fi = time_axis ? fo : fo + base + tap;
        if (ti < 0 || ti >= x.t || fi < 0 || fi >= x.f) continue;
        const S* xp = &x.at(ti, fi, 0);
        S* gxp = &grad_x.at(ti, fi, 0);
        const std::size_t woff = static_cast<std::size_t>(tap) * cin * cout;
        for (int ci = 0; ci < cin; ++ci) {
          const S xv = xp[ci];
          S* gwp = &grad_p.weights[woff + static_cast<std::size_t>(ci) * cout];
          for (int co = 0; co < cout; ++co) gwp[co] += xv * go[co];
        }
        for (int co = 0; co < cout; ++co) {
          const S gov = go[co];
          const S* wrow = &wt[woff + static_cast<std::size_t>(co) * cin];
          for (int ci = 0; ci < cin; ++ci) gxp[ci] += gov * wrow[ci];
        }
      }
    }
  }
  return grad_x;
}

// Non-overlapping max pooling, stride = pool size, trailing remainder dropped.
// argmax holds flat indices into x, one per output element; ties break toward
// the lowest flat index.
template <typename S>
Tensor3T<S> maxpool_forward(const Tensor3T<S>& x, int pool_t, int pool_f,
                            std::vector<std::int64_t>& argmax) {
  detail::check(pool_t >= 1 && pool_f >= 1, "maxpool: pool sizes must be >= 1");
  const int out_t = x.t / pool_t;
  const int out_f = x.f / pool_f;
  detail::check(out_t >= 1 && out_f >= 1, "maxpool: output dimension is 0");

  Tensor3T<S> y(out_t, out_f, x.c);
  argmax.assign(y.size(), 0);
  std::size_t oi = 0;
  for (int to = 0; to < out_t; ++to) {
    for (int fo = 0; fo < out_f; ++fo) {
      for (int ci = 0; ci < x.c; ++ci, ++oi) {
        S best = x.at(to * pool_t, fo * pool_f, ci);
        std::int64_t best_idx =
            (static_cast<std::int64_t>(to) * pool_t * x.f + fo * pool_f) * x.c +
            ci;
        for (int dt = 0; dt < pool_t; ++dt) {
          for (int df = 0; df < pool_f; ++df) {
            const int ti = to * pool_t + dt;
            const int fi = fo * pool_f + df;
            const S v = x.at(ti, fi, ci);
            if (v > best) {
              best = v;
              best_idx =
                  (static_cast<std::int64_t>(ti) * x.f + fi) * x.c + ci;
            }
          }
        }
        y.data[oi] = best;
        argmax[oi] = best_idx;
      }
    }
  }
  return y;
}

template <typename S>
Tensor3T<S> maxpool_backward(const std::vector<std::int64_t>& argmax,
                             const Tensor3T<S>& grad_out, int in_t, int in_f,
                             int in_c) {
  detail::check(argmax.size() == grad_out.size(),
                "maxpool_backward: argmax/grad_out size mismatch");
  Tensor3T<S> grad_x(in_t, in_f, in_c);
  for (std::size_t i = 0; i < argmax.size(); ++i) {
    detail::check(argmax[i] >= 0 &&
                      argmax[i] < static_cast<std::int64_t>(grad_x.size()),
                  "maxpool_backward: argmax out of range");
    grad_x.data[static_cast<std::size_t>(argmax[i])] += grad_out.data[i];
  }
  return grad_x;
}

template <typename S>
Tensor3T<S> relu_forward(const Tensor3T<S>& x) {
  Tensor3T<S> y(x.t, x.f, x.c);
  for (std::size_t i = 0; i < x.size(); ++i)
    y.data[i] = x.data[i] > S(0) ? x.data[i] : S(0);
  return y;
}

template <typename S>
Tensor3T<S> relu_backward(const Tensor3T<S>& x, const Tensor3T<S>& grad_out) {
  detail::check(x.same_shape(grad_out), "relu_backward: shape mismatch");
  Tensor3T<S> grad_x(x.t, x.f, x.c);
  for (std::size_t i = 0; i < x.size(); ++i)
    grad_x.data[i] = x.data[i] > S(0) ? grad_out.data[i] : S(0);
  return grad_x;
}

template <typename S>
std::vector<S> dense_forward(std::span<const S> v, const DenseParamsT<S>& p) {
  detail::check(static_cast<int>(v.size()) == p.in_dim,
                "dense_forward: input length mismatch");
  std::vector<S> out(p.bias.begin(), p.bias.end());
  for (int i = 0; i < p.in_dim; ++i) {
    const S vi = v[i];
    const S* wp = &p.weights[static_cast<std::size_t>(i) * p.out_dim];
    for (int o = 0; o < p.out_dim; ++o) out[o] += vi * wp[o];
  }
  return out;
}

template <typename S>
struct DenseGradsT {
  std::vector<S> weights;
  std::vector<S> bias;
};

template <typename S>
std::vector<S> dense_backward(std::span<const S> v, const DenseParamsT<S>& p,
                              std::span<const S> grad_out,
                              DenseGradsT<S>& grad_p) {
  detail::check(static_cast<int>(v.size()) == p.in_dim &&
                    static_cast<int>(grad_out.size()) == p.out_dim,
                "dense_backward: length mismatch");
  grad_p.weights.assign(p.weights.size(), S(0));
  grad_p.bias.assign(grad_out.begin(), grad_out.end());
  std::vector<S> grad_v(p.in_dim, S(0));
  for (int i = 0; i < p.in_dim; ++i) {
    const S* wp = &p.weights[static_cast<std::size_t>(i) * p.out_dim];
    S* gwp = &grad_p.weights[static_cast<std::size_t>(i) * p.out_dim];
    S gv = S(0);
    for (int o = 0; o < p.out_dim; ++o) {
      gwp[o] = v[i] * grad_out[o];
      gv += wp[o] * grad_out[o];
    }
    grad_v[i] = gv;
  }
  return grad_v;
}

// Softmax cross-entropy with max-subtraction; grad = softmax - onehot(label).
template <typename S>
S softmax_xent(std::span<const S> logits, int label,
               std::vector<S>& grad_logits) {
  detail::check(label >= 0 && label < static_cast<int>(logits.size()),
                "softmax_xent: label out of range");
  S mx = logits[0];
  for (S v : logits) mx = std::max(mx, v);
  S denom = S(0);
  grad_logits.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    grad_logits[i] = std::exp(logits[i] - mx);
    denom += grad_logits[i];
  }
  const S loss = std::log(denom) - (logits[label] - mx);
  for (std::size_t i = 0; i < logits.size(); ++i) grad_logits[i] /= denom;
  grad_logits[static_cast<std::size_t>(label)] -= S(1);
  return loss;
}

struct AdamState {
  std::int64_t step = 0;
  float lr = 1e-3f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float epsilon = 1e-8f;
  std::vector<float> m;
  std::vector<float> v;

  explicit AdamState(std::size_t n = 0, float lr_ = 1e-3f)
      : lr(lr_), m(n, 0.0f), v(n, 0.0f) {}
};

inline void adam_step(std::span<float> params, std::span<const float> grads,
                      AdamState& state) {
  detail::check(params.size() == grads.size() && params.size() == state.m.size(),
                "adam_step: length mismatch");
  state.step += 1;
  const double bc1 = 1.0 - std::pow(static_cast<double>(state.beta1),
                                    static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(static_cast<double>(state.beta2),
                                    static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const float g = grads[i];
    state.m[i] = state.beta1 * state.m[i] + (1.0f - state.beta1) * g;
    state.v[i] = state.beta2 * state.v[i] + (1.0f - state.beta2) * g * g;
    const double mh = state.m[i] / bc1;
    const double vh = state.v[i] / bc2;
    params[i] -= static_cast<float>(state.lr * mh /
                                    (std::sqrt(vh) + state.epsilon));
  }
}

// Scalar-valued function of a flat double vector with an analytic gradient.
struct DiffFunction {
  std::function<double(std::span<const double>)> eval;
  std::function<std::vector<double>(std::span<const double>)> analytic_grad;
};

// Central finite differences vs analytic gradient; returns the max over all
// coordinates of |a - n| / max(|a|, |n|, 1e-8).
inline double gradient_check(const DiffFunction& fn, std::vector<double> x,
                             double eps) {
  detail::check(eps > 0.0, "gradient_check: eps must be positive");
  const std::vector<double> analytic = fn.analytic_grad(x);
  detail::check(analytic.size() == x.size(),
                "gradient_check: gradient length mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + eps;
    const double fp = fn.eval(x);
    x[i] = saved - eps;
    const double fm = fn.eval(x);
    x[i] = saved;
    const double numeric = (fp - fm) / (2.0 * eps);
    const double denom =
        std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

}  // namespace kws

#endif
