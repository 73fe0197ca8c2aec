#include "kws/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "kws/util.hpp"
#include "nlohmann/json.hpp"

namespace kws {

namespace {

void he_uniform_init(ConvParams& p, Rng& rng) {
  const double fan_in = 3.0 * p.in_channels;
  const double limit = std::sqrt(6.0 / fan_in);
  for (auto& w : p.weights) w = static_cast<float>(rng.uniform(-limit, limit));
  // biases stay zero
}

void he_uniform_init(DenseParams& p, Rng& rng) {
  const double limit = std::sqrt(6.0 / p.in_dim);
  for (auto& w : p.weights) w = static_cast<float>(rng.uniform(-limit, limit));
}

void add_block(Stack& s, int cin, int cout, int pool_t, int pool_f) {
  s.add_conv(ConvAxis::freq, cin, cout);
  s.add_conv(ConvAxis::time, cout, cout);
  s.add_pool(pool_t, pool_f);
  s.add_conv(ConvAxis::freq, cout, cout);
  s.add_conv(ConvAxis::time, cout, cout);
}

}  // namespace

void HeadModel::get_params(std::vector<float>& out) const {
  conv_block.get_params(out);
  out.insert(out.end(), classifier.weights.begin(), classifier.weights.end());
  out.insert(out.end(), classifier.bias.begin(), classifier.bias.end());
}

void HeadModel::set_params(std::span<const float> flat) {
  detail::check(flat.size() == param_count(),
                "HeadModel::set_params: length mismatch");
  const std::size_t cb = conv_block.param_count();
  conv_block.set_params(flat.subspan(0, cb));
  std::size_t off = cb;
  std::copy_n(flat.begin() + off, classifier.weights.size(),
              classifier.weights.begin());
  off += classifier.weights.size();
  std::copy_n(flat.begin() + off, classifier.bias.size(),
              classifier.bias.begin());
}

EmbeddingModel build_embedding(std::uint64_t seed) {
  EmbeddingModel m;
  Rng rng(seed);
  add_block(m.stack, 1, 24, 2, 2);
  add_block(m.stack, 24, 48, 2, 2);
  add_block(m.stack, 48, 72, 2, 2);
  add_block(m.stack, 72, 96, 1, 2);
  add_block(m.stack, 96, 96, 1, 2);
  for (auto& l : m.stack.layers) {
    if (l.kind == LayerT<float>::Kind::conv) he_uniform_init(l.conv, rng);
  }
  return m;
}

HeadModel build_head(int num_classes, HeadMode mode, std::uint64_t seed) {
  if (num_classes < 2) {
    throw std::invalid_argument("build_head: num_classes must be >= 2");
  }
  HeadModel h;
  h.mode = mode;
  h.num_classes = num_classes;
  h.conv_block.add_conv(ConvAxis::time, kEmbeddingDim, kEmbeddingDim);
  h.conv_block.add_conv(ConvAxis::time, kEmbeddingDim, kEmbeddingDim);
  h.classifier = DenseParams(kEmbeddingDim, num_classes);
  Rng rng(seed);
  for (auto& l : h.conv_block.layers) he_uniform_init(l.conv, rng);
  he_uniform_init(h.classifier, rng);
  return h;
}

std::size_t param_count(const EmbeddingModel& m) {
  return m.stack.param_count();
}

std::size_t param_count(const HeadModel& m) { return m.param_count(); }

Tensor3 features_to_tensor(std::span<const std::uint8_t> bytes, int frames) {
  detail::check(bytes.size() == static_cast<std::size_t>(frames) * kNumMelBins,
                "features_to_tensor: byte count mismatch");
  Tensor3 x(frames, kNumMelBins, 1);
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    x.data[i] = bytes[i] * (1.0f / 255.0f);
  }
  return x;
}

Tensor3 forward_embedding(const EmbeddingModel& m, const Tensor3& input,
                          StackTape* tape) {
  detail::check(input.f == kNumMelBins && input.c == 1,
                "forward_embedding: input must be T x 32 x 1");
  detail::check(input.t >= 8, "forward_embedding: need at least 8 frames");
  return stack_forward(m.stack, input, tape);
}

std::vector<float> forward_head(const HeadModel& h, const Tensor3& emb,
                                HeadTape* tape) {
  detail::check(emb.t >= 1 && emb.f == 1 && emb.c == kEmbeddingDim,
                "forward_head: embedding must be T x 1 x 96");
  HeadTape local;
  HeadTape& tp = tape ? *tape : local;
  tp.conv_out = stack_forward(h.conv_block, emb, tape ? &tp.conv_tape : nullptr);
  Tensor3 pooled =
      maxpool_forward(tp.conv_out, tp.conv_out.t, 1, tp.pool_argmax);
  tp.pooled.assign(pooled.data.begin(), pooled.data.end());
  return dense_forward<float>(tp.pooled, h.classifier);
}

std::vector<std::vector<float>> forward_head_streaming(const HeadModel& h,
                                                       const Tensor3& emb) {
  StackTape unused;
  Tensor3 conv_out = stack_forward(h.conv_block, emb);
  std::vector<std::vector<float>> out;
  out.reserve(conv_out.t);
  std::vector<float> step(kEmbeddingDim);
  for (int t = 0; t < conv_out.t; ++t) {
    for (int c = 0; c < kEmbeddingDim; ++c) step[c] = conv_out.at(t, 0, c);
    out.push_back(dense_forward<float>(step, h.classifier));
  }
  return out;
}

Tensor3 backward_head(const HeadModel& h, const HeadTape& tape,
                      std::span<const float> grad_logits,
                      std::span<float> grad_params) {
  detail::check(grad_params.size() == h.param_count(),
                "backward_head: grad_params length mismatch");
  const std::size_t cb = h.conv_block.param_count();
  DenseGradsT<float> dg;
  std::vector<float> grad_pooled =
      dense_backward<float>(tape.pooled, h.classifier, grad_logits, dg);
  float* dst = grad_params.data() + cb;
  for (std::size_t i = 0; i < dg.weights.size(); ++i) dst[i] += dg.weights[i];
  dst += dg.weights.size();
  for (std::size_t i = 0; i < dg.bias.size(); ++i) dst[i] += dg.bias[i];

  Tensor3 grad_pool_out(1, 1, kEmbeddingDim);
  std::copy(grad_pooled.begin(), grad_pooled.end(), grad_pool_out.data.begin());
  Tensor3 grad_conv = maxpool_backward(tape.pool_argmax, grad_pool_out,
                                       tape.conv_out.t, 1, kEmbeddingDim);
  return stack_backward(h.conv_block, tape.conv_tape, std::move(grad_conv),
                        grad_params.subspan(0, cb));
}

namespace {

constexpr char kMagic[4] = {'K', 'W', 'S', 'W'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t read_u32(std::istream& is, const char* what) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) {
    throw std::runtime_error(std::string("weights file: truncated ") + what);
  }
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_weights_file(const std::string& path, const nlohmann::json& header,
                        std::span<const float> params) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for write: " + path);
  os.write(kMagic, 4);
  write_u32(os, kVersion);
  const std::string hdr = header.dump();
  write_u32(os, static_cast<std::uint32_t>(hdr.size()));
  os.write(hdr.data(), static_cast<std::streamsize>(hdr.size()));
  for (float v : params) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    write_u32(os, bits);
  }
  if (!os) throw std::runtime_error("write failed: " + path);
}

std::pair<nlohmann::json, std::vector<float>> read_weights_file(
    const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open weights file: " + path);
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("weights file: bad magic at offset 0: " + path);
  }
  const std::uint32_t version = read_u32(is, "version");
  if (version != kVersion) {
    throw std::runtime_error("weights file: unsupported version " +
                             std::to_string(version) + ": " + path);
  }
  const std::uint32_t hdr_len = read_u32(is, "header length");
  std::string hdr(hdr_len, '\0');
  if (!is.read(hdr.data(), hdr_len)) {
    throw std::runtime_error("weights file: truncated header at offset 12: " +
                             path);
  }
  nlohmann::json header = nlohmann::json::parse(hdr);
  std::vector<float> params;
  const std::size_t expect = header.at("param_count").get<std::size_t>();
  params.reserve(expect);
  while (true) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (is.gcount() == 0 && is.eof()) break;
    if (is.gcount() != 4) {
      throw std::runtime_error(
          "weights file: truncated payload at param " +
          std::to_string(params.size()) + ": " + path);
    }
    std::uint32_t bits = static_cast<std::uint32_t>(b[0]) |
                         (static_cast<std::uint32_t>(b[1]) << 8) |
                         (static_cast<std::uint32_t>(b[2]) << 16) |
                         (static_cast<std::uint32_t>(b[3]) << 24);
    float v;
    std::memcpy(&v, &bits, 4);
    params.push_back(v);
  }
  if (params.size() != expect) {
    throw std::runtime_error("weights file: payload has " +
                             std::to_string(params.size()) +
                             " params, header says " + std::to_string(expect) +
                             ": " + path);
  }
  return {std::move(header), std::move(params)};
}

}  // namespace

void save_embedding(const EmbeddingModel& m, const std::string& path) {
  std::vector<float> params;
  m.stack.get_params(params);
  nlohmann::json header = {
      {"kind", "embedding"},
      {"layers", "5x(conv_freq3,conv_time3,maxpool,conv_freq3,conv_time3)"},
      {"channels", {1, 24, 48, 72, 96, 96}},
      {"param_count", params.size()},
  };
  write_weights_file(path, header, params);
}

EmbeddingModel load_embedding(const std::string& path) {
  auto [header, params] = read_weights_file(path);
  if (header.at("kind") != "embedding") {
    throw std::runtime_error("weights file: expected kind 'embedding', got '" +
                             header.at("kind").get<std::string>() + "': " + path);
  }
  EmbeddingModel m = build_embedding(0);
  if (params.size() != m.stack.param_count()) {
    throw std::runtime_error("weights file: embedding param count mismatch: " +
                             path);
  }
  m.stack.set_params(params);
  return m;
}

void save_head(const HeadModel& h, const std::string& path) {
  std::vector<float> params;
  h.get_params(params);
  nlohmann::json header = {
      {"kind", "head"},
      {"num_classes", h.num_classes},
      {"mode", h.mode == HeadMode::pooled_dense ? "pooled_dense" : "streaming"},
      {"param_count", params.size()},
  };
  write_weights_file(path, header, params);
}

HeadModel load_head(const std::string& path) {
  auto [header, params] = read_weights_file(path);
  if (header.at("kind") != "head") {
    throw std::runtime_error("weights file: expected kind 'head', got '" +
                             header.at("kind").get<std::string>() + "': " + path);
  }
  const int num_classes = header.at("num_classes").get<int>();
  const std::string mode = header.at("mode").get<std::string>();
  HeadModel h = build_head(num_classes,
                           mode == "streaming" ? HeadMode::streaming
                                               : HeadMode::pooled_dense,
                           0);
  if (params.size() != h.param_count()) {
    throw std::runtime_error("weights file: head param count mismatch: " + path);
  }
  h.set_params(params);
  return h;
}

std::uint64_t param_checksum(std::span<const float> params) {
  return fnv1a(kFnvOffset, params.data(), params.size() * sizeof(float));
}

}  // namespace kws
