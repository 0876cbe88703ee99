// Timings: serial vs OpenMP batch gradients, dense layer evolution vs the gate kernels.
#include <omp.h>

#include <chrono>
#include <cstdio>
#include <numeric>

#include "qmit/data.hpp"
#include "qmit/train.hpp"

using namespace qmit;

template <class F>
static double seconds(F&& f, int reps) {
  const auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) f();
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / reps;
}

int main(int argc, char** argv) {
  const int batch = argc > 1 ? std::atoi(argv[1]) : 64;
  Rng rng(1);
  TrainConfig cfg;
  cfg.layers = 4;
  const Dataset data = synthetic_blobs(4, (batch + 3) / 4, 3.0, 1);
  const EncodedSet set = EncodedSet::from(data, EncoderSpec{});
  const CircuitSpec circuit = random_circuit(4, 4, Design::U2, rng, 0.1);
  const auto noise = true_noise(cfg, 1);
  const MitigationModel mitigation = MitigationModel::zeros(4, 4);
  std::vector<std::size_t> idx(set.size());
  std::iota(idx.begin(), idx.end(), 0);
  const ObjectiveSettings settings = cfg.objective();

  auto run = [&](Execution e) {
    return loss_and_gradients(set.states, set.labels, idx, circuit, mitigation, noise, settings, e);
  };
  const BatchResult s = run(Execution::Serial), p = run(Execution::Parallel);
  const bool same = s.loss == p.loss && s.grad == p.grad;
  const double ts = seconds([&] { run(Execution::Serial); }, 3);
  const double tp = seconds([&] { run(Execution::Parallel); }, 3);
  std::printf("batch gradients  n=%zu  threads=%d  serial %.4fs  parallel %.4fs  speedup %.2fx  identical=%s\n",
              set.size(), omp_get_max_threads(), ts, tp, ts / tp, same ? "yes" : "no");

  for (int n : {4, 6, 8}) {
    const CircuitSpec c = random_circuit(n, 1, Design::U3, rng, 3.0);
    const Unitary u = build_layer_unitary(c.layers[0]);
    CMatrix rho = random_density_matrix(n, rng).matrix();
    const int reps = n == 8 ? 5 : 50;
    const double dense = seconds([&] { rho = u.matrix() * rho * u.matrix().adjoint(); }, reps);
    const double kern = seconds([&] { apply_layer(rho, c.layers[0]); }, reps);
    std::printf("layer evolution  n=%d  dense %.6fs  kernels %.6fs  speedup %.2fx\n", n, dense, kern, dense / kern);
  }
  return same ? 0 : 1;
}
