#include "navguard/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include <zlib.h>

#include <json.hpp>

#include "navguard/errors.hpp"

namespace navguard::nn {

int worker_threads() {
  const char* env = std::getenv("NAVGUARD_THREADS");
  if (env) {
    int n = std::atoi(env);
    if (n >= 1) return n;
  }
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

std::string NetworkSpec::to_json() const {
  nlohmann::json j;
  j["encoder"] = encoder == Encoder::kVector ? "vector" : "conv";
  j["vector_dim"] = vector_dim;
  j["image_side"] = image_side;
  j["image_channels"] = image_channels;
  nlohmann::json convs = nlohmann::json::array();
  for (const ConvSpec& c : conv)
    convs.push_back({{"out_channels", c.out_channels},
                     {"kernel", c.kernel},
                     {"stride", c.stride}});
  j["conv"] = convs;
  j["aux_dim"] = aux_dim;
  j["trunk"] = trunk;
  j["out_dim"] = out_dim;
  j["tanh_head"] = tanh_head;
  return j.dump();
}

NetworkSpec NetworkSpec::from_json(const std::string& s) {
  nlohmann::json j = nlohmann::json::parse(s);
  NetworkSpec spec;
  spec.encoder = j.at("encoder").get<std::string>() == "conv"
                     ? Encoder::kConv
                     : Encoder::kVector;
  spec.vector_dim = j.at("vector_dim").get<int>();
  spec.image_side = j.at("image_side").get<int>();
  spec.image_channels = j.at("image_channels").get<int>();
  spec.conv.clear();
  for (const auto& c : j.at("conv"))
    spec.conv.push_back({c.at("out_channels").get<int>(),
                         c.at("kernel").get<int>(), c.at("stride").get<int>()});
  spec.aux_dim = j.at("aux_dim").get<int>();
  spec.trunk = j.at("trunk").get<std::vector<int>>();
  spec.out_dim = j.at("out_dim").get<int>();
  spec.tanh_head = j.at("tanh_head").get<bool>();
  return spec;
}

namespace {

inline float act_grad(int act, float y) {
  switch (act) {
    case 1:  // relu
      return y > 0.0f ? 1.0f : 0.0f;
    case 2:  // tanh
      return 1.0f - y * y;
    default:
      return 1.0f;
  }
}

// ---- dense kernels ------------------------------------------------------

void dense_forward(const float* W, const float* b, int act, const float* in,
                   int in_stride, int n, int in_dim, int out_dim, float* out,
                   Exec exec) {
  auto body = [&](int s, int j) {
    const float* x = in + static_cast<size_t>(s) * in_stride;
    float acc = b[j];
    const float* wj = W + static_cast<size_t>(j) * in_dim;
    for (int i = 0; i < in_dim; i++) acc += wj[i] * x[i];
    if (act == 1)
      acc = acc > 0.0f ? acc : 0.0f;
    else if (act == 2)
      acc = std::tanh(acc);
    out[static_cast<size_t>(s) * out_dim + j] = acc;
  };
  if (exec == Exec::kParallel) {
#pragma omp parallel for collapse(2) schedule(static)
    for (int s = 0; s < n; s++)
      for (int j = 0; j < out_dim; j++) body(s, j);
  } else {
    for (int s = 0; s < n; s++)
      for (int j = 0; j < out_dim; j++) body(s, j);
  }
}

void dense_backward_data(const float* W, const float* dpre, int n, int in_dim,
                         int out_dim, float* din, int din_stride, Exec exec) {
  auto body = [&](int s, int i) {
    const float* dp = dpre + static_cast<size_t>(s) * out_dim;
    float acc = 0.0f;
    for (int j = 0; j < out_dim; j++) acc += W[static_cast<size_t>(j) * in_dim + i] * dp[j];
    din[static_cast<size_t>(s) * din_stride + i] += acc;
  };
  if (exec == Exec::kParallel) {
#pragma omp parallel for collapse(2) schedule(static)
    for (int s = 0; s < n; s++)
      for (int i = 0; i < in_dim; i++) body(s, i);
  } else {
    for (int s = 0; s < n; s++)
      for (int i = 0; i < in_dim; i++) body(s, i);
  }
}

// Weight gradients sum over the batch serially per entry so the result is
// independent of the thread count.
void dense_backward_weights(const float* in, int in_stride, const float* dpre,
                            int n, int in_dim, int out_dim, float* dW,
                            float* db, Exec exec) {
  auto wbody = [&](int j, int i) {
    float acc = 0.0f;
    for (int s = 0; s < n; s++)
      acc += dpre[static_cast<size_t>(s) * out_dim + j] *
             in[static_cast<size_t>(s) * in_stride + i];
    dW[static_cast<size_t>(j) * in_dim + i] += acc;
  };
  if (exec == Exec::kParallel) {
#pragma omp parallel for collapse(2) schedule(static)
    for (int j = 0; j < out_dim; j++)
      for (int i = 0; i < in_dim; i++) wbody(j, i);
  } else {
    for (int j = 0; j < out_dim; j++)
      for (int i = 0; i < in_dim; i++) wbody(j, i);
  }
  for (int j = 0; j < out_dim; j++) {
    float acc = 0.0f;
    for (int s = 0; s < n; s++) acc += dpre[static_cast<size_t>(s) * out_dim + j];
    db[j] += acc;
  }
}

// ---- conv kernels (ReLU activation) -------------------------------------

struct ConvDims {
  int in_ch, in_side, out_ch, k, stride, out_side, in_stride;
};

void conv_forward(const float* W, const float* b, const float* in,
                  const ConvDims& d, int n, float* out, Exec exec) {
  int out_plane = d.out_side * d.out_side;
  int out_size = d.out_ch * out_plane;
  auto body = [&](int s, int o) {
    int oc = o / out_plane;
    int rem = o % out_plane;
    int oy = rem / d.out_side, ox = rem % d.out_side;
    const float* x = in + static_cast<size_t>(s) * d.in_stride;
    float acc = b[oc];
    for (int ic = 0; ic < d.in_ch; ic++) {
      const float* xc = x + static_cast<size_t>(ic) * d.in_side * d.in_side;
      const float* wc = W + ((static_cast<size_t>(oc) * d.in_ch + ic) * d.k) * d.k;
      for (int ky = 0; ky < d.k; ky++) {
        const float* xr = xc + static_cast<size_t>(oy * d.stride + ky) * d.in_side +
                          ox * d.stride;
        for (int kx = 0; kx < d.k; kx++) acc += wc[ky * d.k + kx] * xr[kx];
      }
    }
    out[static_cast<size_t>(s) * out_size + o] = acc > 0.0f ? acc : 0.0f;
  };
  if (exec == Exec::kParallel) {
#pragma omp parallel for collapse(2) schedule(static)
    for (int s = 0; s < n; s++)
      for (int o = 0; o < out_size; o++) body(s, o);
  } else {
    for (int s = 0; s < n; s++)
      for (int o = 0; o < out_size; o++) body(s, o);
  }
}

void conv_backward_data(const float* W, const float* dpre, const ConvDims& d,
                        int n, float* din, Exec exec) {
  int in_plane = d.in_side * d.in_side;
  int in_size = d.in_ch * in_plane;
  int out_plane = d.out_side * d.out_side;
  int out_size = d.out_ch * out_plane;
  auto body = [&](int s, int idx) {
    int ic = idx / in_plane;
    int rem = idx % in_plane;
    int iy = rem / d.in_side, ix = rem % d.in_side;
    float acc = 0.0f;
    for (int oc = 0; oc < d.out_ch; oc++) {
      const float* dp = dpre + static_cast<size_t>(s) * out_size + oc * out_plane;
      const float* wc = W + ((static_cast<size_t>(oc) * d.in_ch + ic) * d.k) * d.k;
      for (int ky = 0; ky < d.k; ky++) {
        int num = iy - ky;
        if (num < 0 || num % d.stride) continue;
        int oy = num / d.stride;
        if (oy >= d.out_side) continue;
        for (int kx = 0; kx < d.k; kx++) {
          int numx = ix - kx;
          if (numx < 0 || numx % d.stride) continue;
          int ox = numx / d.stride;
          if (ox >= d.out_side) continue;
          acc += wc[ky * d.k + kx] * dp[oy * d.out_side + ox];
        }
      }
    }
    din[static_cast<size_t>(s) * d.in_stride + idx] += acc;
  };
  if (exec == Exec::kParallel) {
#pragma omp parallel for collapse(2) schedule(static)
    for (int s = 0; s < n; s++)
      for (int idx = 0; idx < in_size; idx++) body(s, idx);
  } else {
    for (int s = 0; s < n; s++)
      for (int idx = 0; idx < in_size; idx++) body(s, idx);
  }
}

void conv_backward_weights(const float* in, const float* dpre,
                           const ConvDims& d, int n, float* dW, float* db,
                           Exec exec) {
  int out_plane = d.out_side * d.out_side;
  int out_size = d.out_ch * out_plane;
  int w_count = d.out_ch * d.in_ch * d.k * d.k;
  auto body = [&](int widx) {
    int kx = widx % d.k;
    int ky = (widx / d.k) % d.k;
    int ic = (widx / (d.k * d.k)) % d.in_ch;
    int oc = widx / (d.k * d.k * d.in_ch);
    float acc = 0.0f;
    for (int s = 0; s < n; s++) {
      const float* x = in + static_cast<size_t>(s) * d.in_stride +
                       static_cast<size_t>(ic) * d.in_side * d.in_side;
      const float* dp = dpre + static_cast<size_t>(s) * out_size + oc * out_plane;
      for (int oy = 0; oy < d.out_side; oy++) {
        const float* xr = x + static_cast<size_t>(oy * d.stride + ky) * d.in_side + kx;
        for (int ox = 0; ox < d.out_side; ox++)
          acc += dp[oy * d.out_side + ox] * xr[ox * d.stride];
      }
    }
    dW[widx] += acc;
  };
  if (exec == Exec::kParallel) {
#pragma omp parallel for schedule(static)
    for (int widx = 0; widx < w_count; widx++) body(widx);
  } else {
    for (int widx = 0; widx < w_count; widx++) body(widx);
  }
  for (int oc = 0; oc < d.out_ch; oc++) {
    float acc = 0.0f;
    for (int s = 0; s < n; s++) {
      const float* dp = dpre + static_cast<size_t>(s) * out_size + oc * out_plane;
      for (int o = 0; o < out_plane; o++) acc += dp[o];
    }
    db[oc] += acc;
  }
}

}  // namespace

void Network::build_layout() {
  layers_.clear();
  size_t off = 0;
  int enc_out;
  if (spec.encoder == NetworkSpec::Encoder::kConv) {
    int ch = spec.image_channels, side = spec.image_side;
    for (const ConvSpec& c : spec.conv) {
      Layer l;
      l.kind = Layer::kConv;
      l.in_ch = ch;
      l.in_side = side;
      l.out_ch = c.out_channels;
      l.kernel = c.kernel;
      l.stride = c.stride;
      l.out_side = (side - c.kernel) / c.stride + 1;
      if (l.out_side < 1) throw ConfigError("conv stack shrinks image below 1");
      l.in_size = static_cast<size_t>(ch) * side * side;
      l.out_size = static_cast<size_t>(l.out_ch) * l.out_side * l.out_side;
      l.w_off = off;
      off += static_cast<size_t>(l.out_ch) * l.in_ch * l.kernel * l.kernel;
      l.b_off = off;
      off += l.out_ch;
      layers_.push_back(l);
      ch = l.out_ch;
      side = l.out_side;
    }
    enc_out = ch * side * side;
    concat_level_ = static_cast<int>(spec.conv.size()) + 1;
  } else {
    enc_out = spec.vector_dim;
    concat_level_ = -1;
  }
  first_dense_ = static_cast<int>(layers_.size());

  int in_dim = enc_out + spec.aux_dim;
  std::vector<int> widths = spec.trunk;
  widths.push_back(spec.out_dim);
  for (size_t k = 0; k < widths.size(); k++) {
    Layer l;
    l.kind = Layer::kDense;
    l.in_dim = in_dim;
    l.out_dim = widths[k];
    bool head = k + 1 == widths.size();
    l.act = head ? (spec.tanh_head ? Layer::kTanh : Layer::kLinear) : Layer::kRelu;
    l.in_size = in_dim;
    l.out_size = widths[k];
    l.w_off = off;
    off += static_cast<size_t>(l.out_dim) * l.in_dim;
    l.b_off = off;
    off += l.out_dim;
    layers_.push_back(l);
    in_dim = widths[k];
  }
  params.assign(off, 0.0f);
}

Network Network::build_zero(const NetworkSpec& spec) {
  Network net;
  net.spec = spec;
  net.build_layout();
  return net;
}

Network Network::build(const NetworkSpec& spec, Rng& rng) {
  Network net = build_zero(spec);
  for (size_t li = 0; li < net.layers_.size(); li++) {
    const Layer& l = net.layers_[li];
    int fan_in = l.kind == Layer::kDense ? l.in_dim : l.in_ch * l.kernel * l.kernel;
    float bound = 1.0f / std::sqrt(static_cast<float>(fan_in));
    // Near-zero initial policy: shrink the head of tanh-squashed networks.
    float scale = (li + 1 == net.layers_.size() && spec.tanh_head) ? 0.01f : 1.0f;
    size_t w_count = l.b_off - l.w_off;
    size_t b_count = l.kind == Layer::kDense ? static_cast<size_t>(l.out_dim)
                                             : static_cast<size_t>(l.out_ch);
    for (size_t i = 0; i < w_count; i++)
      net.params[l.w_off + i] =
          scale * static_cast<float>(rng.uniform(-bound, bound));
    for (size_t i = 0; i < b_count; i++)
      net.params[l.b_off + i] =
          scale * static_cast<float>(rng.uniform(-bound, bound));
  }
  return net;
}

void Network::forward_batch(const float* inputs, int n, float* outputs,
                            BatchTape* tape) const {
  BatchTape local;
  BatchTape& tp = tape ? *tape : local;
  tp.n = n;
  tp.levels.assign(layers_.size() + (concat_level_ >= 0 ? 2 : 1), {});
  int input_size = spec.input_size();
  tp.levels[0].assign(inputs, inputs + static_cast<size_t>(n) * input_size);

  int lvl = 0;
  for (size_t li = 0; li < layers_.size(); li++) {
    const Layer& l = layers_[li];
    if (l.kind == Layer::kConv) {
      int in_stride = lvl == 0 ? input_size : static_cast<int>(l.in_size);
      tp.levels[lvl + 1].assign(static_cast<size_t>(n) * l.out_size, 0.0f);
      ConvDims d{l.in_ch, l.in_side, l.out_ch, l.kernel, l.stride, l.out_side,
                 in_stride};
      conv_forward(params.data() + l.w_off, params.data() + l.b_off,
                   tp.levels[lvl].data(), d, n, tp.levels[lvl + 1].data(), exec);
      lvl++;
    } else {
      if (static_cast<int>(li) == first_dense_ && concat_level_ >= 0) {
        // Assemble [conv_out, aux] as its own tape level.
        int enc_out = static_cast<int>(layers_[first_dense_ - 1].out_size);
        int cat = enc_out + spec.aux_dim;
        std::vector<float>& buf = tp.levels[lvl + 1];
        buf.resize(static_cast<size_t>(n) * cat);
        int enc_in = spec.encoder_input_size();
        for (int s = 0; s < n; s++) {
          std::memcpy(&buf[static_cast<size_t>(s) * cat],
                      &tp.levels[lvl][static_cast<size_t>(s) * enc_out],
                      sizeof(float) * enc_out);
          std::memcpy(&buf[static_cast<size_t>(s) * cat + enc_out],
                      &tp.levels[0][static_cast<size_t>(s) * input_size + enc_in],
                      sizeof(float) * spec.aux_dim);
        }
        lvl++;
      }
      tp.levels[lvl + 1].assign(static_cast<size_t>(n) * l.out_dim, 0.0f);
      dense_forward(params.data() + l.w_off, params.data() + l.b_off,
                    static_cast<int>(l.act), tp.levels[lvl].data(), l.in_dim, n,
                    l.in_dim, l.out_dim, tp.levels[lvl + 1].data(), exec);
      lvl++;
    }
  }
  std::memcpy(outputs, tp.levels[lvl].data(),
              sizeof(float) * static_cast<size_t>(n) * spec.out_dim);
}

std::vector<float> Network::forward(const std::vector<float>& input) const {
  if (static_cast<int>(input.size()) != spec.input_size())
    throw ShapeMismatch("forward: input size mismatch");
  std::vector<float> out(spec.out_dim);
  forward_batch(input.data(), 1, out.data(), nullptr);
  return out;
}

void Network::backward_batch(const BatchTape& tape, const float* dout, int n,
                             float* grad, float* dinput) const {
  if (tape.n != n) throw ShapeMismatch("backward: tape batch size mismatch");
  int input_size = spec.input_size();
  int top_level = static_cast<int>(tape.levels.size()) - 1;

  // d w.r.t. the current level's activations, walked backwards.
  std::vector<float> dcur(dout, dout + static_cast<size_t>(n) * spec.out_dim);
  std::vector<float> dpre, dprev;
  int lvl = top_level;
  for (int li = static_cast<int>(layers_.size()) - 1; li >= 0; li--) {
    const Layer& l = layers_[li];
    const std::vector<float>& y = tape.levels[lvl];
    // Activation gradient (post-activation values suffice for all three).
    dpre.resize(dcur.size());
    if (l.kind == Layer::kConv) {
      for (size_t i = 0; i < dcur.size(); i++)
        dpre[i] = y[i] > 0.0f ? dcur[i] : 0.0f;
    } else {
      for (size_t i = 0; i < dcur.size(); i++)
        dpre[i] = dcur[i] * act_grad(static_cast<int>(l.act), y[i]);
    }

    bool input_level_is_raw =
        (l.kind == Layer::kConv && lvl - 1 == 0);
    int in_stride = input_level_is_raw ? input_size : static_cast<int>(l.in_size);
    const std::vector<float>& x = tape.levels[lvl - 1];

    if (l.kind == Layer::kDense) {
      dense_backward_weights(x.data(), in_stride, dpre.data(), n, l.in_dim,
                             l.out_dim, grad + l.w_off, grad + l.b_off, exec);
      dprev.assign(static_cast<size_t>(n) * l.in_dim, 0.0f);
      dense_backward_data(params.data() + l.w_off, dpre.data(), n, l.in_dim,
                          l.out_dim, dprev.data(), l.in_dim, exec);
    } else {
      ConvDims d{l.in_ch, l.in_side, l.out_ch, l.kernel, l.stride, l.out_side,
                 in_stride};
      conv_backward_weights(x.data(), dpre.data(), d, n, grad + l.w_off,
                            grad + l.b_off, exec);
      if (input_level_is_raw) {
        if (dinput) {
          conv_backward_data(params.data() + l.w_off, dpre.data(), d, n, dinput,
                             exec);
        }
        dprev.clear();
      } else {
        dprev.assign(static_cast<size_t>(n) * l.in_size, 0.0f);
        ConvDims d2 = d;
        d2.in_stride = static_cast<int>(l.in_size);
        conv_backward_data(params.data() + l.w_off, dpre.data(), d2, n,
                           dprev.data(), exec);
      }
    }

    // Crossing the concat level: split into conv-out and aux gradients.
    if (concat_level_ >= 0 && lvl - 1 == concat_level_) {
      int enc_out = static_cast<int>(layers_[first_dense_ - 1].out_size);
      int cat = enc_out + spec.aux_dim;
      int enc_in = spec.encoder_input_size();
      if (dinput) {
        for (int s = 0; s < n; s++)
          for (int a = 0; a < spec.aux_dim; a++)
            dinput[static_cast<size_t>(s) * input_size + enc_in + a] +=
                dprev[static_cast<size_t>(s) * cat + enc_out + a];
      }
      std::vector<float> dconv(static_cast<size_t>(n) * enc_out);
      for (int s = 0; s < n; s++)
        std::memcpy(&dconv[static_cast<size_t>(s) * enc_out],
                    &dprev[static_cast<size_t>(s) * cat], sizeof(float) * enc_out);
      dprev.swap(dconv);
      lvl -= 2;  // skip past the concat level
    } else {
      lvl -= 1;
    }
    dcur.swap(dprev);
  }
  // Vector mode: dcur now holds d w.r.t. the raw input.
  if (concat_level_ < 0 && dinput) {
    for (size_t i = 0; i < static_cast<size_t>(n) * input_size; i++)
      dinput[i] += dcur[i];
  }
}

void adam_step(std::vector<float>& params, const std::vector<float>& grad,
               AdamState& state, const AdamConfig& cfg) {
  if (params.size() != grad.size())
    throw ShapeMismatch("adam_step: gradient size mismatch");
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0f);
    state.v.assign(params.size(), 0.0f);
  }
  if (state.m.size() != params.size())
    throw ShapeMismatch("adam_step: optimizer state size mismatch");
  state.t++;
  double b1t = 1.0 - std::pow(static_cast<double>(cfg.beta1), static_cast<double>(state.t));
  double b2t = 1.0 - std::pow(static_cast<double>(cfg.beta2), static_cast<double>(state.t));
  for (size_t i = 0; i < params.size(); i++) {
    float g = grad[i];
    state.m[i] = cfg.beta1 * state.m[i] + (1.0f - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0f - cfg.beta2) * g * g;
    float mhat = static_cast<float>(state.m[i] / b1t);
    float vhat = static_cast<float>(state.v[i] / b2t);
    params[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
}

void soft_update(Network& target, const Network& online, float tau) {
  if (target.params.size() != online.params.size())
    throw ShapeMismatch("soft_update: parameter count mismatch");
  for (size_t i = 0; i < target.params.size(); i++)
    target.params[i] = tau * online.params[i] + (1.0f - tau) * target.params[i];
}

PolicyBundle PolicyBundle::make(const NetworkSpec& actor_spec,
                                const NetworkSpec& critic_spec,
                                const AdamConfig& adam, uint64_t seed) {
  PolicyBundle b;
  b.adam = adam;
  Rng rng(Rng::derive(seed, 0xB0D1));
  b.actor = Network::build(actor_spec, rng);
  b.critic1 = Network::build(critic_spec, rng);
  b.critic2 = Network::build(critic_spec, rng);
  // Targets start as exact copies.
  b.actor_target = b.actor;
  b.critic1_target = b.critic1;
  b.critic2_target = b.critic2;
  return b;
}

// ---- checkpoint I/O -----------------------------------------------------

namespace {

constexpr char kMagic[4] = {'E', '2', 'T', '3'};
constexpr uint16_t kVersion = 1;

void put_bytes(std::string& buf, const void* p, size_t n) {
  buf.append(static_cast<const char*>(p), n);
}

template <typename T>
void put_pod(std::string& buf, T v) {
  put_bytes(buf, &v, sizeof(v));
}

void put_floats(std::string& buf, const std::vector<float>& v) {
  put_pod<uint64_t>(buf, v.size());
  put_bytes(buf, v.data(), v.size() * sizeof(float));
}

struct Reader {
  const std::string& buf;
  size_t pos = 0;
  void read(void* p, size_t n) {
    if (pos + n > buf.size())
      throw CheckpointError(CheckpointError::kTruncatedFile,
                            "checkpoint truncated");
    std::memcpy(p, buf.data() + pos, n);
    pos += n;
  }
  template <typename T>
  T pod() {
    T v;
    read(&v, sizeof(v));
    return v;
  }
  std::vector<float> floats() {
    uint64_t n = pod<uint64_t>();
    if (pos + n * sizeof(float) > buf.size())
      throw CheckpointError(CheckpointError::kTruncatedFile,
                            "checkpoint truncated");
    std::vector<float> v(n);
    read(v.data(), n * sizeof(float));
    return v;
  }
};

void put_adam(std::string& buf, const AdamState& s) {
  put_floats(buf, s.m);
  put_floats(buf, s.v);
  put_pod<int64_t>(buf, s.t);
}

AdamState read_adam(Reader& r) {
  AdamState s;
  s.m = r.floats();
  s.v = r.floats();
  s.t = r.pod<int64_t>();
  return s;
}

}  // namespace

void save_checkpoint(const PolicyBundle& bundle, const std::string& path) {
  std::string buf;
  put_bytes(buf, kMagic, 4);
  put_pod<uint16_t>(buf, kVersion);

  nlohmann::json header;
  header["actor_spec"] = nlohmann::json::parse(bundle.actor.spec.to_json());
  header["critic_spec"] = nlohmann::json::parse(bundle.critic1.spec.to_json());
  header["adam"] = {{"lr", bundle.adam.lr},
                    {"beta1", bundle.adam.beta1},
                    {"beta2", bundle.adam.beta2},
                    {"eps", bundle.adam.eps}};
  std::string hs = header.dump();
  put_pod<uint32_t>(buf, static_cast<uint32_t>(hs.size()));
  put_bytes(buf, hs.data(), hs.size());

  for (const Network* net :
       {&bundle.actor, &bundle.critic1, &bundle.critic2, &bundle.actor_target,
        &bundle.critic1_target, &bundle.critic2_target})
    put_floats(buf, net->params);
  put_adam(buf, bundle.opt_actor);
  put_adam(buf, bundle.opt_critic1);
  put_adam(buf, bundle.opt_critic2);

  uint32_t crc = static_cast<uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(buf.data()), buf.size()));
  put_pod<uint32_t>(buf, crc);

  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError(CheckpointError::kIo, "cannot write " + path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

PolicyBundle load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(CheckpointError::kIo, "cannot open " + path);
  std::string buf((std::istreambuf_iterator<char>(in)),
                  std::istreambuf_iterator<char>());

  if (buf.size() < 4 + sizeof(uint16_t) + sizeof(uint32_t))
    throw CheckpointError(CheckpointError::kTruncatedFile, "checkpoint too small");
  if (std::memcmp(buf.data(), kMagic, 4) != 0)
    throw CheckpointError(CheckpointError::kBadMagic, "bad checkpoint magic");

  uint32_t stored_crc;
  std::memcpy(&stored_crc, buf.data() + buf.size() - sizeof(uint32_t),
              sizeof(uint32_t));
  std::string body = buf.substr(0, buf.size() - sizeof(uint32_t));
  uint32_t crc = static_cast<uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(body.data()), body.size()));
  if (crc != stored_crc)
    throw CheckpointError(CheckpointError::kBadCrc, "checkpoint CRC mismatch");

  Reader r{body, 4};
  uint16_t version = r.pod<uint16_t>();
  if (version != kVersion)
    throw CheckpointError(CheckpointError::kVersionMismatch,
                          "unsupported checkpoint version " +
                              std::to_string(version));
  uint32_t hlen = r.pod<uint32_t>();
  std::string hs(hlen, '\0');
  r.read(hs.data(), hlen);
  nlohmann::json header = nlohmann::json::parse(hs);

  PolicyBundle b;
  NetworkSpec actor_spec = NetworkSpec::from_json(header.at("actor_spec").dump());
  NetworkSpec critic_spec = NetworkSpec::from_json(header.at("critic_spec").dump());
  b.adam.lr = header.at("adam").at("lr").get<float>();
  b.adam.beta1 = header.at("adam").at("beta1").get<float>();
  b.adam.beta2 = header.at("adam").at("beta2").get<float>();
  b.adam.eps = header.at("adam").at("eps").get<float>();

  b.actor = Network::build_zero(actor_spec);
  b.critic1 = Network::build_zero(critic_spec);
  b.critic2 = Network::build_zero(critic_spec);
  b.actor_target = Network::build_zero(actor_spec);
  b.critic1_target = Network::build_zero(critic_spec);
  b.critic2_target = Network::build_zero(critic_spec);
  for (Network* net : {&b.actor, &b.critic1, &b.critic2, &b.actor_target,
                       &b.critic1_target, &b.critic2_target}) {
    std::vector<float> p = r.floats();
    if (p.size() != net->params.size())
      throw CheckpointError(CheckpointError::kTruncatedFile,
                            "parameter block size mismatch");
    net->params = std::move(p);
  }
  b.opt_actor = read_adam(r);
  b.opt_critic1 = read_adam(r);
  b.opt_critic2 = read_adam(r);
  return b;
}

}  // namespace navguard::nn
