// Acceptance criteria 1-12. One PASS/FAIL line per criterion; exit status 0 iff all pass.
// Usage: acceptance [criterion numbers...]   (default: all)
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>
#include <string>

#include "qmit/data.hpp"
#include "qmit/experiment.hpp"
#include "qmit/gradient.hpp"
#include "qmit/losses.hpp"
#include "qmit/train.hpp"

using namespace qmit;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// --- 1: channel inversion ------------------------------------------------------

Outcome channel_inversion() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(1001);
  double worst = 0.0;
  for (int t = 0; t < 200; ++t) {
    const int n = 1 + t % 4;
    const DensityMatrix rho = random_density_matrix(n, rng);
    const NoiseModel m = random_noise_model(n, rng, 0.0, 0.1);
    worst = std::max(worst, (apply_inverse_channel(apply_channel(rho, m), m).matrix() - rho.matrix()).norm());
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-10 && secs < 10.0, fmt("max Frobenius error %.2e (<= 1e-10), %.2fs (< 10s)", worst, secs)};
}

// --- 2: overhead dual form -----------------------------------------------------

Outcome overhead_dual_form() {
  Rng rng(1002);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const NoiseModel m = random_noise_model(1 + t % 4, rng, 0.0, 0.5);
    const double a = sampling_overhead(m), b = sampling_overhead_product(m);
    worst = std::max(worst, std::abs(a - b) / a);
  }
  return {worst <= 1e-12, fmt("max relative difference %.2e (<= 1e-12)", worst)};
}

// --- 3: noise-free invariance --------------------------------------------------

Outcome noise_free_invariance() {
  Rng rng(1003);
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    const CircuitSpec c = random_circuit(4, 8, static_cast<Design>(t % 3), rng, std::numbers::pi);
    const DensityMatrix rho0 = random_density_matrix(4, rng, 1 + t % 4);
    const double d0 = divergence_to_maximally_mixed(rho0);
    for (const auto& s : forward_noise_free(rho0, c))
      worst = std::max(worst, std::abs(divergence_to_maximally_mixed(s) - d0));
  }
  return {worst <= 1e-9, fmt("max divergence drift %.2e (<= 1e-9)", worst)};
}

// --- 4: monotone traces ------------------------------------------------------

Outcome divergence_traces() {
  const auto t0 = std::chrono::steady_clock::now();
  TraceConfig dep;
  dep.channel = "depolarizing";
  dep.rate = 0.01;
  dep.operations = 500;
  dep.seed = 1004;
  const auto d = divergence_trace(dep);
  bool strict = true;
  for (std::size_t i = 1; i < d.size(); ++i) strict = strict && d[i] < d[i - 1];
  const double ratio = d.back() / d.front();

  // amplitude damping: strictly decreasing over the first 100 operations
  const int window = 100;
  TraceConfig ad = dep;
  ad.channel = "amplitude_damping";
  ad.gamma = 0.01;
  ad.operations = 1500;
  const auto a = divergence_trace(ad);
  bool ad_window = true;
  for (int i = 1; i <= window; ++i) ad_window = ad_window && a[static_cast<std::size_t>(i)] < a[static_cast<std::size_t>(i - 1)];
  const auto min_it = std::min_element(a.begin(), a.end());
  const double secs = seconds_since(t0);
  return {strict && ratio < 0.01 && ad_window && secs < 60.0,
          fmt("depolarizing: strictly decreasing=%s, final/initial=%.2e (< 0.01); amplitude damping: decreasing over "
              "first %d ops=%s, minimum %.3g at op %td; %.1fs",
              strict ? "yes" : "no", ratio, window, ad_window ? "yes" : "no", *min_it, min_it - a.begin(), secs)};
}

// --- 5: perfect mitigation -------------------------------------------------------

Outcome perfect_mitigation() {
  Rng rng(1005);
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    const CircuitSpec c = random_circuit(4, 4, static_cast<Design>(t % 3), rng, std::numbers::pi);
    std::vector<NoiseModel> noise;
    for (int l = 0; l < 4; ++l) noise.push_back(random_noise_model(4, rng, 0.002, 0.02));
    const DensityMatrix rho0 = random_density_matrix(4, rng, t % 2 ? 1 : 0);
    const auto z = predict_readout(rho0.matrix(), c, noise, MitigationModel{noise}, ExecutionMode::Cascaded);
    const auto ref = readout(forward_noise_free(rho0, c).back(), c);
    for (std::size_t i = 0; i < z.size(); ++i) worst = std::max(worst, std::abs(z[i] - ref[i]));
  }
  return {worst <= 1e-8, fmt("max readout difference %.2e (<= 1e-8)", worst)};
}

// --- 6: fidelity suite ---------------------------------------------------------

Outcome fidelity_suite() {
  Rng rng(1006);
  double bound = 0.0, sym = 0.0, inv = 0.0, pure = 0.0;
  for (int t = 0; t < 500; ++t) {
    const int n = 1 + t % 3;
    const DensityMatrix a = random_density_matrix(n, rng, t % 4);
    const DensityMatrix b = random_density_matrix(n, rng, (t / 4) % 3);
    const double f = fidelity(a, b);
    bound = std::max({bound, -f, f - 1.0});
    sym = std::max(sym, std::abs(f - fidelity(b, a)));
    const Unitary u = random_unitary(n, rng);
    inv = std::max(inv, std::abs(fidelity(evolve(a, u), evolve(b, u)) - f));
    const CVector x = random_state_vector(n, rng), y = random_state_vector(n, rng);
    const auto px = pure_state({x.data(), static_cast<std::size_t>(x.size())});
    const auto py = pure_state({y.data(), static_cast<std::size_t>(y.size())});
    pure = std::max(pure, std::abs(fidelity(px, py) - std::norm(x.dot(y))));
  }
  const double worst = std::max({bound, sym, inv, pure});
  return {worst <= 1e-9, fmt("bounds %.1e, symmetry %.1e, unitary invariance %.1e, pure overlap %.1e (all <= 1e-9)",
                             bound, sym, inv, pure)};
}

// --- 7: gradient contract --------------------------------------------------------

Outcome gradient_contract() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(1007);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Design designs[] = {Design::RX, Design::U2, Design::U3};
  const int steps[] = {1, 2, 4};
  double worst = 0.0;
  std::size_t components = 0;
  for (int t = 0; t < 20; ++t) {
    CircuitSpec c = random_circuit(4, 4, designs[t % 3], rng, std::numbers::pi);
    std::vector<NoiseModel> noise;
    MitigationModel m;
    // lambda-hat <= lambda per generator: the mitigated states stay PSD, away from the clamp kink
    for (int l = 0; l < 4; ++l) {
      noise.push_back(random_noise_model(4, rng, 0.002, 0.02));
      NoiseModel hat = noise.back();
      auto r = hat.rates();
      for (double& x : r) x *= 0.2 + 0.8 * unit(rng);
      hat.set_rates(r);
      m.layers.push_back(hat);
    }
    ObjectiveSettings s;
    s.step = steps[(t / 3) % 3];
    s.mode = t % 2 ? ExecutionMode::Cascaded : ExecutionMode::LossOnly;
    s.classes = t % 4 < 2 ? 4 : 2;
    s.weights = {0.5 + unit(rng), 0.5 + unit(rng)};
    std::vector<CMatrix> states;
    std::vector<int> labels;
    for (int b = 0; b < 2; ++b) {
      // full rank: near-pure inputs put the fidelity in its non-smooth regime at scale h
      states.push_back(random_density_matrix(4, rng).matrix());
      labels.push_back(static_cast<int>(unit(rng) * s.classes));
    }
    const std::vector<std::size_t> idx{0, 1};
    const auto g = loss_and_gradients(states, labels, idx, c, m, noise, s, Execution::Serial).grad;
    auto params = c.flat_theta();
    const auto rates = m.flat_rates();
    params.insert(params.end(), rates.begin(), rates.end());
    const std::size_t nt = c.num_params();
    auto loss = [&](const std::vector<double>& p) {
      CircuitSpec cc = c;
      MitigationModel mm = m;
      cc.set_flat_theta({p.begin(), p.begin() + static_cast<std::ptrdiff_t>(nt)});
      mm.set_flat_rates({p.begin() + static_cast<std::ptrdiff_t>(nt), p.end()});
      double sum = 0.0;
      for (std::size_t b = 0; b < 2; ++b) sum += evaluate_sample(states[b], labels[b], cc, noise, mm, s, false).loss;
      return sum / 2.0;
    };
    const double h = 1e-4;
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto up = params, down = params;
      up[i] += h;
      down[i] -= h;
      const double fd = (loss(up) - loss(down)) / (2 * h);
      const double allowed = std::abs(fd) < 1e-6 ? 1e-6 : 1e-3 * std::abs(fd);
      const double v = std::abs(g[i] - fd) / allowed;
      worst = std::max(worst, v);
      ++components;
    }
  }
  const double secs = seconds_since(t0);
  return {worst <= 1.0 && secs < 300.0,
          fmt("%zu components, worst error / allowance %.3f (<= 1), %.1fs (< 300s)", components, worst, secs)};
}

// --- 8: identifiability ----------------------------------------------------------

Outcome identifiability() {
  const auto t0 = std::chrono::steady_clock::now();
  TrainConfig cfg;
  cfg.n = 4;
  cfg.layers = 4;
  cfg.design = Design::U2;
  cfg.step = 1;
  cfg.mode = ExecutionMode::LossOnly;
  cfg.weights = {1.0, 0.0};
  cfg.train_theta = false;
  cfg.train_rates = true;
  cfg.classes = 2;
  const auto truth = true_noise(cfg, 1008);

  Rng rng(2008);
  TrainState st;
  st.circuit = random_circuit(4, 4, Design::U2, rng, std::numbers::pi);
  st.mitigation = MitigationModel::zeros(4, 4);
  st.velocity.assign(st.circuit.num_params() + st.mitigation.num_rates(), 0.0);
  std::vector<CMatrix> states;
  std::vector<int> labels(64, 0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < 64; ++i) {
    std::vector<double> x(kFeatureCount);
    for (double& v : x) v = unit(rng);
    states.push_back(encode(x, st.circuit.encoder).matrix());
  }
  std::vector<std::size_t> all(64);
  std::iota(all.begin(), all.end(), 0);
  const ObjectiveSettings s = cfg.objective();
  const int steps = 200;
  double fb = 0.0;
  for (int k = 0; k < steps; ++k) {
    const auto r = loss_and_gradients(states, labels, all, st.circuit, st.mitigation, truth, s, Execution::Parallel);
    fb = r.fb;
    optimizer_step(st, r.grad, cfg);
  }
  std::vector<double> per_layer;
  for (std::size_t l = 0; l < truth.size(); ++l) {
    const auto want = truth[l].rates(), got = st.mitigation.layers[l].rates();
    double w = 0.0;
    for (std::size_t g = 0; g < want.size(); ++g) w = std::max(w, std::abs(got[g] - want[g]) / want[g]);
    per_layer.push_back(w);
  }
  const double worst = *std::max_element(per_layer.begin(), per_layer.end());
  std::string layers;
  for (std::size_t l = 0; l < per_layer.size(); ++l) layers += fmt("%s%.4f", l ? "/" : "", per_layer[l]);
  const double secs = seconds_since(t0);
  return {worst <= 0.2, fmt("%d full-batch steps on 64 encoded states, final L_fb %.2e, worst relative rate error %.3f "
                            "(<= 0.2), per layer [%s], %.1fs",
                            steps, fb, worst, layers.c_str(), secs)};
}

// --- 9-11: trends on MNIST-4 ------------------------------------------------------

struct TrendProtocol {
  Split data;
  int epochs;
  std::vector<std::uint64_t> seeds{0, 1, 2};
};

const TrendProtocol& protocol() {
  static const TrendProtocol p = [] {
    const std::string dir = std::string(QMIT_SOURCE_DIR) + "/data/";
    const RawDataset raw = load_idx(dir + "mnist5k-images-idx3-ubyte.gz", dir + "mnist5k-labels-idx1-ubyte.gz");
    TrendProtocol t{make_benchmark(raw, benchmark_spec("MNIST-4"), 1000, 500, 7), 50};
    if (const char* e = std::getenv("QMIT_TREND_EPOCHS")) t.epochs = std::atoi(e);
    return t;
  }();
  return p;
}

TrainConfig trend_config(int layers, int step, double alpha_fb) {
  TrainConfig c;
  c.n = 4;
  c.layers = layers;
  c.design = Design::U2;
  c.step = step;
  c.weights = {alpha_fb, 1.0};
  c.classes = 4;
  c.epochs = protocol().epochs;
  return c;
}

/// Mean test accuracy over the protocol seeds; results are cached per setting.
double mean_accuracy(int layers, int step, double alpha_fb, std::string* per_seed = nullptr) {
  static std::map<std::tuple<int, int, double>, std::vector<double>> cache;
  auto key = std::make_tuple(layers, step, alpha_fb);
  if (!cache.count(key)) {
    const TrendProtocol& p = protocol();
    std::vector<double> acc;
    for (std::uint64_t seed : p.seeds) {
      TrainConfig c = trend_config(layers, step, alpha_fb);
      c.seed = seed;
      const auto noise = true_noise(c, seed);
      acc.push_back(train_model(c, p.data.train, p.data.test, seed, noise).test_accuracy);
    }
    cache[key] = acc;
  }
  const auto& acc = cache[key];
  if (per_seed) {
    std::ostringstream s;
    for (std::size_t i = 0; i < acc.size(); ++i) s << (i ? "/" : "") << fmt("%.3f", acc[i]);
    *per_seed = s.str();
  }
  return std::accumulate(acc.begin(), acc.end(), 0.0) / static_cast<double>(acc.size());
}

Outcome mitigation_trend() {
  const auto t0 = std::chrono::steady_clock::now();
  std::string a, b;
  const double with = mean_accuracy(4, 1, 1.0, &a), without = mean_accuracy(4, 1, 0.0, &b);
  const double secs = seconds_since(t0);
  return {with - without >= 0.02 && secs <= 1800.0,
          fmt("alpha_fb=1 %.4f [%s] vs alpha_fb=0 %.4f [%s], gain %+.2f points (>= +2), %d epochs, %.0fs", with,
              a.c_str(), without, b.c_str(), 100 * (with - without), protocol().epochs, secs)};
}

Outcome step_trend() {
  std::string a, b;
  const double k1 = mean_accuracy(4, 1, 1.0, &a), k4 = mean_accuracy(4, 4, 1.0, &b);
  return {k1 >= k4, fmt("step 1 %.4f [%s] vs step 4 %.4f [%s]", k1, a.c_str(), k4, b.c_str())};
}

Outcome layer_trend() {
  std::string s1, s2, s3, s4;
  const double m2 = mean_accuracy(2, 1, 1.0, &s1), m8 = mean_accuracy(8, 1, 1.0, &s2);
  const double b2 = mean_accuracy(2, 1, 0.0, &s3), b8 = mean_accuracy(8, 1, 0.0, &s4);
  const double drop_m = m2 - m8, drop_b = b2 - b8;
  return {drop_m < drop_b, fmt("drop L=2->8 with mitigation %+.4f (%.4f [%s] -> %.4f [%s]), without %+.4f (%.4f [%s] -> "
                               "%.4f [%s])",
                               drop_m, m2, s1.c_str(), m8, s2.c_str(), drop_b, b2, s3.c_str(), b8, s4.c_str())};
}

// --- 12: determinism ---------------------------------------------------------------

Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "qmit_acceptance_determinism";
  fs::remove_all(root);
  const nlohmann::json j = {{"seed", 12},
                            {"repeats", 2},
                            {"data", {{"benchmark", "synthetic"}, {"classes", 4}, {"per_class", 20}, {"test_per_class", 10}}},
                            {"model", {{"layers", 4}, {"design", "U2"}}},
                            {"loss", {{"alpha_fb", 1.0}, {"step", 2}}},
                            {"optimizer", {{"epochs", 3}, {"batch_size", 16}}}};
  const ExperimentConfig cfg = parse_config(j);
  run_train_command(cfg, root / "a");
  run_train_command(cfg, root / "b");
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
  };
  const std::string a = slurp(root / "a" / "metrics.csv"), b = slurp(root / "b" / "metrics.csv");
  fs::remove_all(root);
  return {!a.empty() && a == b, fmt("metrics.csv %zu bytes, identical=%s", a.size(), a == b ? "yes" : "no")};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"channel inversion exactness", channel_inversion},
      {"sampling overhead dual form", overhead_dual_form},
      {"noise-free divergence invariance", noise_free_invariance},
      {"divergence trace monotonicity", divergence_traces},
      {"perfect mitigation oracle", perfect_mitigation},
      {"fidelity suite", fidelity_suite},
      {"gradient contract", gradient_contract},
      {"noise-rate identifiability", identifiability},
      {"mitigation accuracy trend", mitigation_trend},
      {"step-size trend", step_trend},
      {"layer-robustness trend", layer_trend},
      {"determinism", determinism},
  };
  std::set<int> chosen;
  for (int i = 1; i < argc; ++i) chosen.insert(std::atoi(argv[i]));
  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i + 1);
    if (!chosen.empty() && !chosen.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    all = all && o.pass;
    std::printf("%s  %2d %-34s %s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return all ? 0 : 1;
}
