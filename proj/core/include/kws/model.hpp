#ifndef KWS_MODEL_HPP
#define KWS_MODEL_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "kws/frontend.hpp"
#include "kws/nn.hpp"
#include "kws/tensor.hpp"

namespace kws {

constexpr int kEmbeddingDim = 96;

template <typename S>
struct LayerT {
  enum class Kind { conv, pool };
  Kind kind = Kind::conv;
  ConvParamsT<S> conv;  // kind == conv; ReLU applied after
  int pool_t = 1;
  int pool_f = 1;
};

// Ordered conv/pool stack with a flat parameter view (conv weights then bias,
// in layer order).
template <typename S>
struct StackT {
  std::vector<LayerT<S>> layers;

  void add_conv(ConvAxis axis, int cin, int cout) {
    LayerT<S> l;
    l.kind = LayerT<S>::Kind::conv;
    l.conv = ConvParamsT<S>(axis, cin, cout);
    layers.push_back(std::move(l));
  }
  void add_pool(int pt, int pf) {
    LayerT<S> l;
    l.kind = LayerT<S>::Kind::pool;
    l.pool_t = pt;
    l.pool_f = pf;
    layers.push_back(std::move(l));
  }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (const auto& l : layers)
      if (l.kind == LayerT<S>::Kind::conv) n += l.conv.param_count();
    return n;
  }

  void get_params(std::vector<S>& out) const {
    out.clear();
    out.reserve(param_count());
    for (const auto& l : layers) {
      if (l.kind != LayerT<S>::Kind::conv) continue;
      out.insert(out.end(), l.conv.weights.begin(), l.conv.weights.end());
      out.insert(out.end(), l.conv.bias.begin(), l.conv.bias.end());
    }
  }

  void set_params(std::span<const S> flat) {
    detail::check(flat.size() == param_count(),
                  "Stack::set_params: length mismatch");
    std::size_t off = 0;
    for (auto& l : layers) {
      if (l.kind != LayerT<S>::Kind::conv) continue;
      std::copy_n(flat.begin() + off, l.conv.weights.size(),
                  l.conv.weights.begin());
      off += l.conv.weights.size();
      std::copy_n(flat.begin() + off, l.conv.bias.size(), l.conv.bias.begin());
      off += l.conv.bias.size();
    }
  }
};

template <typename S>
struct StackTapeT {
  std::vector<Tensor3T<S>> inputs;    // input to each layer
  std::vector<Tensor3T<S>> pre_act;   // conv layers: pre-ReLU output
  std::vector<std::vector<std::int64_t>> argmax;  // pool layers
};

template <typename S>
Tensor3T<S> stack_forward(const StackT<S>& stack, Tensor3T<S> x,
                          StackTapeT<S>* tape = nullptr) {
  if (tape) {
    tape->inputs.clear();
    tape->pre_act.assign(stack.layers.size(), {});
    tape->argmax.assign(stack.layers.size(), {});
  }
  for (std::size_t i = 0; i < stack.layers.size(); ++i) {
    const auto& l = stack.layers[i];
    if (tape) tape->inputs.push_back(x);
    if (l.kind == LayerT<S>::Kind::conv) {
      Tensor3T<S> z = conv3_forward(x, l.conv);
      if (tape) tape->pre_act[i] = z;
      x = relu_forward(z);
    } else {
      std::vector<std::int64_t> am;
      x = maxpool_forward(x, l.pool_t, l.pool_f, am);
      if (tape) tape->argmax[i] = std::move(am);
    }
  }
  return x;
}

// grad_params receives the flat-layout gradient, accumulated (+=).
template <typename S>
Tensor3T<S> stack_backward(const StackT<S>& stack, const StackTapeT<S>& tape,
                           Tensor3T<S> grad, std::span<S> grad_params) {
  detail::check(grad_params.size() == stack.param_count(),
                "stack_backward: grad_params length mismatch");
  // parameter offsets per layer
  std::vector<std::size_t> offs(stack.layers.size(), 0);
  std::size_t off = 0;
  for (std::size_t i = 0; i < stack.layers.size(); ++i) {
    offs[i] = off;
    if (stack.layers[i].kind == LayerT<S>::Kind::conv)
      off += stack.layers[i].conv.param_count();
  }
  for (std::size_t ii = stack.layers.size(); ii-- > 0;) {
    const auto& l = stack.layers[ii];
    const Tensor3T<S>& in = tape.inputs[ii];
    if (l.kind == LayerT<S>::Kind::conv) {
      grad = relu_backward(tape.pre_act[ii], grad);
      ConvGradsT<S> gp;
      grad = conv3_backward(in, l.conv, grad, gp);
      S* dst = grad_params.data() + offs[ii];
      for (std::size_t k = 0; k < gp.weights.size(); ++k) dst[k] += gp.weights[k];
      dst += gp.weights.size();
      for (std::size_t k = 0; k < gp.bias.size(); ++k) dst[k] += gp.bias[k];
    } else {
      grad = maxpool_backward(tape.argmax[ii], grad, in.t, in.f, in.c);
    }
  }
  return grad;
}

using Stack = StackT<float>;
using StackTape = StackTapeT<float>;

// Shared trunk: 5 conv blocks, channels 1-24-48-72-96-96, pooling
// (2,2)x3 then (1,2)x2. Maps T x 32 x 1 input to floor(T/8) x 1 x 96.
struct EmbeddingModel {
  Stack stack;
};

enum class HeadMode { pooled_dense, streaming };

// Per-task head: two time convolutions on the 96-dim embedding stream plus a
// classifier (global time maxpool + dense, or per-step 1x1 conv).
struct HeadModel {
  Stack conv_block;
  HeadMode mode = HeadMode::pooled_dense;
  int num_classes = 0;
  DenseParams classifier;  // streaming mode applies this per time step

  std::size_t param_count() const {
    return conv_block.param_count() + classifier.param_count();
  }
  void get_params(std::vector<float>& out) const;
  void set_params(std::span<const float> flat);
};

struct HeadTape {
  StackTape conv_tape;
  Tensor3 conv_out;
  std::vector<std::int64_t> pool_argmax;
  std::vector<float> pooled;
};

EmbeddingModel build_embedding(std::uint64_t seed);
HeadModel build_head(int num_classes, HeadMode mode, std::uint64_t seed);

std::size_t param_count(const EmbeddingModel& m);
std::size_t param_count(const HeadModel& m);

// Feature-context bytes scaled into [0,1] reals, shape T x 32 x 1.
Tensor3 features_to_tensor(std::span<const std::uint8_t> bytes, int frames);

// Embedding stream as a T x 1 x 96 tensor.
Tensor3 forward_embedding(const EmbeddingModel& m, const Tensor3& input,
                          StackTape* tape = nullptr);

std::vector<float> forward_head(const HeadModel& h, const Tensor3& emb,
                                HeadTape* tape = nullptr);
// One logit vector per embedding step (streaming classifier).
std::vector<std::vector<float>> forward_head_streaming(const HeadModel& h,
                                                       const Tensor3& emb);

// Gradient wrt the embedding input; head parameter gradient accumulated into
// grad_params (conv block params, then classifier weights, then bias).
Tensor3 backward_head(const HeadModel& h, const HeadTape& tape,
                      std::span<const float> grad_logits,
                      std::span<float> grad_params);

void save_embedding(const EmbeddingModel& m, const std::string& path);
EmbeddingModel load_embedding(const std::string& path);
void save_head(const HeadModel& h, const std::string& path);
HeadModel load_head(const std::string& path);

std::uint64_t param_checksum(std::span<const float> params);

}  // namespace kws

#endif
