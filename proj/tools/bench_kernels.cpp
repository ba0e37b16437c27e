// Timing comparison of the serial reference kernels against the OpenMP
// variants on representative network shapes, with a bitwise equality check.
#include <chrono>
#include <cstdio>
#include <cstring>
#include <vector>

#include "navguard/nn.hpp"
#include "navguard/rng.hpp"

using namespace navguard;

namespace {

double bench(const nn::Network& net, const std::vector<float>& inputs, int n,
             int reps, bool backward) {
  int in_sz = net.spec.input_size();
  std::vector<float> out(static_cast<size_t>(n) * net.spec.out_dim);
  std::vector<float> dout(out.size(), 1.0f);
  std::vector<float> grad(net.param_count());
  std::vector<float> dinput(static_cast<size_t>(n) * in_sz);
  nn::BatchTape tape;
  auto t0 = std::chrono::steady_clock::now();
  for (int r = 0; r < reps; r++) {
    net.forward_batch(inputs.data(), n, out.data(), backward ? &tape : nullptr);
    if (backward) {
      std::fill(grad.begin(), grad.end(), 0.0f);
      net.backward_batch(tape, dout.data(), n, grad.data(), dinput.data());
    }
  }
  auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

bool identical(const nn::Network& a, const std::vector<float>& inputs, int n) {
  int out_sz = n * a.spec.out_dim;
  std::vector<float> out_s(out_sz), out_p(out_sz);
  std::vector<float> grad_s(a.param_count(), 0.0f), grad_p(a.param_count(), 0.0f);
  std::vector<float> din_s(inputs.size()), din_p(inputs.size());
  std::vector<float> dout(out_sz, 0.5f);
  nn::BatchTape tape;

  nn::Network net = a;
  net.exec = nn::Exec::kSerial;
  net.forward_batch(inputs.data(), n, out_s.data(), &tape);
  net.backward_batch(tape, dout.data(), n, grad_s.data(), din_s.data());

  net.exec = nn::Exec::kParallel;
  net.forward_batch(inputs.data(), n, out_p.data(), &tape);
  net.backward_batch(tape, dout.data(), n, grad_p.data(), din_p.data());

  return std::memcmp(out_s.data(), out_p.data(), out_sz * sizeof(float)) == 0 &&
         std::memcmp(grad_s.data(), grad_p.data(),
                     grad_s.size() * sizeof(float)) == 0 &&
         std::memcmp(din_s.data(), din_p.data(),
                     din_s.size() * sizeof(float)) == 0;
}

void run_case(const char* name, const nn::NetworkSpec& spec, int n, int reps) {
  Rng rng(7);
  nn::Network net = nn::Network::build(spec, rng);
  std::vector<float> inputs(static_cast<size_t>(n) * spec.input_size());
  for (float& x : inputs) x = static_cast<float>(rng.uniform(-1.0, 1.0));

  bool ok = identical(net, inputs, n);
  net.exec = nn::Exec::kSerial;
  double fs = bench(net, inputs, n, reps, false);
  double bs = bench(net, inputs, n, reps, true);
  net.exec = nn::Exec::kParallel;
  double fp = bench(net, inputs, n, reps, false);
  double bp = bench(net, inputs, n, reps, true);
  std::printf("%-22s batch=%-4d fwd %8.3f / %8.3f ms  fwd+bwd %8.3f / %8.3f ms"
              "  (serial/parallel, %d threads)  bitwise: %s\n",
              name, n, fs, fp, bs, bp, nn::worker_threads(),
              ok ? "identical" : "DIFFER");
  if (!ok) std::exit(1);
}

}  // namespace

int main() {
  nn::NetworkSpec dense;
  dense.encoder = nn::NetworkSpec::Encoder::kVector;
  dense.vector_dim = 20;
  dense.trunk = {256, 256};
  dense.out_dim = 2;
  dense.tanh_head = true;
  run_case("dense 20-256-256-2", dense, 256, 20);

  nn::NetworkSpec conv;
  conv.encoder = nn::NetworkSpec::Encoder::kConv;
  conv.image_side = 60;
  conv.image_channels = 1;
  conv.conv = {{8, 5, 2}, {16, 3, 2}, {16, 3, 2}};
  conv.aux_dim = 4;
  conv.trunk = {128, 128};
  conv.out_dim = 2;
  conv.tanh_head = true;
  run_case("conv 60x60 encoder", conv, 32, 5);
  return 0;
}
