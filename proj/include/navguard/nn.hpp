#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "navguard/rng.hpp"

namespace navguard::nn {

// Kernel execution mode. Serial is the reference implementation; the
// parallel kernels are written so every output element is produced by a
// single iteration, making the two bit-identical for any thread count.
enum class Exec { kSerial, kParallel };

// Worker cap from NAVGUARD_THREADS (falls back to the OpenMP default).
int worker_threads();

struct ConvSpec {
  int out_channels = 8;
  int kernel = 3;
  int stride = 2;
  bool operator==(const ConvSpec&) const = default;
};

struct NetworkSpec {
  enum class Encoder { kVector, kConv };
  Encoder encoder = Encoder::kVector;
  int vector_dim = 0;  // encoder input width in vector mode
  int image_side = 0;  // conv mode input is image_channels x side x side
  int image_channels = 1;
  std::vector<ConvSpec> conv;
  int aux_dim = 0;  // velocity + waypoint (+ action for the critic)
  std::vector<int> trunk = {256, 256};
  int out_dim = 1;
  bool tanh_head = false;

  int encoder_input_size() const {
    return encoder == Encoder::kVector ? vector_dim
                                       : image_channels * image_side * image_side;
  }
  int input_size() const { return encoder_input_size() + aux_dim; }

  std::string to_json() const;
  static NetworkSpec from_json(const std::string& s);
  bool operator==(const NetworkSpec&) const = default;
};

// Per-batch activation record for backprop. Level 0 is the raw input.
struct BatchTape {
  int n = 0;
  std::vector<std::vector<float>> levels;  // each: n * level_size
};

// Fixed feed-forward network: optional conv encoder, aux concatenation,
// dense trunk (ReLU), dense head (optional tanh). Parameters live in one
// contiguous buffer so soft updates and checkpoints are trivial.
class Network {
 public:
  NetworkSpec spec;
  std::vector<float> params;
  Exec exec = Exec::kParallel;

  static Network build(const NetworkSpec& spec, Rng& rng);
  static Network build_zero(const NetworkSpec& spec);  // all-zero parameters

  size_t param_count() const { return params.size(); }

  // inputs: n x input_size, outputs: n x out_dim.
  void forward_batch(const float* inputs, int n, float* outputs,
                     BatchTape* tape) const;
  std::vector<float> forward(const std::vector<float>& input) const;

  // dout: n x out_dim (already scaled by any 1/N loss factor). Accumulates
  // parameter gradients into `grad` (param_count sized, caller-zeroed) and
  // optionally writes input gradients (n x input_size).
  void backward_batch(const BatchTape& tape, const float* dout, int n,
                      float* grad, float* dinput = nullptr) const;

 private:
  struct Layer {
    enum Kind { kDense, kConv } kind;
    // dense
    int in_dim = 0, out_dim = 0;
    enum Act { kLinear, kRelu, kTanh } act = kLinear;
    // conv (ReLU activation)
    int in_ch = 0, in_side = 0, out_ch = 0, kernel = 0, stride = 0,
        out_side = 0;
    size_t w_off = 0, b_off = 0;
    size_t in_size = 0, out_size = 0;  // flat sizes
  };
  std::vector<Layer> layers_;
  int concat_level_ = -1;  // tape level holding [conv_out, aux]; -1 in vector mode
  int first_dense_ = 0;    // index of the first dense layer in layers_

  void build_layout();
  friend struct BundleIo;
};

struct AdamConfig {
  float lr = 3e-4f;
  float beta1 = 0.9f;
  float beta2 = 0.999f;
  float eps = 1e-8f;
};

struct AdamState {
  std::vector<float> m, v;
  int64_t t = 0;
};

void adam_step(std::vector<float>& params, const std::vector<float>& grad,
               AdamState& state, const AdamConfig& cfg);

// target <- tau * online + (1 - tau) * target, elementwise.
void soft_update(Network& target, const Network& online, float tau);

// Actor, twin critics and their target copies plus optimizer state.
struct PolicyBundle {
  Network actor, critic1, critic2;
  Network actor_target, critic1_target, critic2_target;
  AdamState opt_actor, opt_critic1, opt_critic2;
  AdamConfig adam;

  static PolicyBundle make(const NetworkSpec& actor_spec,
                           const NetworkSpec& critic_spec,
                           const AdamConfig& adam, uint64_t seed);
};

// Binary checkpoint: magic "E2T3", u16 version, JSON spec header, f32
// parameters in declaration order, trailing CRC32.
void save_checkpoint(const PolicyBundle& bundle, const std::string& path);
PolicyBundle load_checkpoint(const std::string& path);

}  // namespace navguard::nn
