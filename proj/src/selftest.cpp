#include "qmit/selftest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iomanip>

#include "qmit/data.hpp"
#include "qmit/gradient.hpp"
#include "qmit/kernels.hpp"
#include "qmit/losses.hpp"
#include "qmit/train.hpp"

namespace qmit {

namespace {

/// A check returns the worst observed error; it passes when that is within `bound`.
struct Check {
  const char* name;
  double bound;
  std::function<double()> worst;
};

std::string describe(double worst, double bound) {
  char buf[80];
  std::snprintf(buf, sizeof buf, "worst %.3g (bound %.3g)", worst, bound);
  return buf;
}

double frob(const CMatrix& m) { return m.norm(); }

NoiseModel reversed_rates(const NoiseModel& m) {
  auto r = m.rates();
  std::reverse(r.begin(), r.end());
  NoiseModel out = m;
  out.set_rates(r);
  return out;
}

std::vector<Check> build_checks(const SelftestOptions& opt) {
  std::vector<Check> checks;

  checks.push_back({"qsim.evolve_preserves_spectrum", 1e-9, [] {
                      Rng rng(101);
                      double worst = 0.0;
                      for (int t = 0; t < 200; ++t) {
                        const int n = 1 + t % 4;
                        const DensityMatrix rho = random_density_matrix(n, rng);
                        const DensityMatrix out = evolve(rho, random_unitary(n, rng));
                        worst = std::max(worst, std::abs(out.trace() - 1.0));
                        worst = std::max(worst, std::abs(out.min_eigenvalue() - rho.min_eigenvalue()));
                        worst = std::max(worst, std::abs(von_neumann_entropy(out) - von_neumann_entropy(rho)));
                      }
                      return worst;
                    }});

  checks.push_back({"qsim.rotation_inverse", 1e-10, [] {
                      Rng rng(102);
                      std::uniform_real_distribution<double> ang(-10.0, 10.0);
                      double worst = 0.0;
                      for (int t = 0; t < 100; ++t) {
                        const Axis a = static_cast<Axis>(t % 3);
                        const double th = ang(rng);
                        const Unitary u = rotation_gate(a, th, t % 3, 3) * rotation_gate(a, -th, t % 3, 3);
                        worst = std::max(worst, max_abs(u.matrix() - CMatrix::Identity(8, 8)));
                      }
                      return worst;
                    }});

  checks.push_back({"noise.round_trip", 1e-10, [opt] {
                      Rng rng(103);
                      double worst = 0.0;
                      for (int t = 0; t < 200; ++t) {
                        const int n = 1 + t % 4;
                        const DensityMatrix rho = random_density_matrix(n, rng);
                        // correlated generators so that a rate/generator mismatch is visible
                        std::vector<NoiseGenerator> gens;
                        std::uniform_real_distribution<double> rate(0.0, 0.1);
                        for (const auto& p : default_generators(n)) gens.push_back({p, rate(rng)});
                        const NoiseModel m(n, gens);
                        const NoiseModel inv = opt.corrupt_inverse_order ? reversed_rates(m) : m;
                        const DensityMatrix back = apply_inverse_channel(apply_channel(rho, m), inv);
                        worst = std::max(worst, frob(back.matrix() - rho.matrix()));
                      }
                      return worst;
                    }});

  checks.push_back({"noise.trace_and_fixed_point", 1e-12, [] {
                      Rng rng(104);
                      double worst = 0.0;
                      for (int t = 0; t < 100; ++t) {
                        const int n = 1 + t % 4;
                        const NoiseModel m = random_noise_model(n, rng, 0.0, 0.1);
                        const DensityMatrix rho = random_density_matrix(n, rng);
                        worst = std::max(worst, std::abs(apply_channel(rho, m).trace() - 1.0));
                        worst = std::max(worst, std::abs(apply_inverse_channel(rho, m).trace() - 1.0));
                        const DensityMatrix mm = maximally_mixed(n);
                        worst = std::max(worst, max_abs(apply_channel(mm, m).matrix() - mm.matrix()));
                      }
                      return worst;
                    }});

  checks.push_back({"noise.overhead_dual_form", 1e-12, [] {
                      Rng rng(105);
                      double worst = 0.0;
                      for (int t = 0; t < 100; ++t) {
                        const NoiseModel m = random_noise_model(1 + t % 4, rng, 0.0, 0.5);
                        const double a = sampling_overhead(m), b = sampling_overhead_product(m);
                        worst = std::max(worst, std::abs(a - b) / a);
                      }
                      return worst;
                    }});

  checks.push_back({"noise.pauli_involution", 1e-12, [] {
                      double worst = 0.0;
                      const char* letters = "IXYZ";
                      for (int code = 1; code < 64; ++code) {
                        std::string s;
                        for (int q = 0; q < 3; ++q) s += letters[(code >> (2 * q)) & 3];
                        const CMatrix p = PauliString(s).matrix();
                        worst = std::max(worst, max_abs(p * p - CMatrix::Identity(8, 8)));
                      }
                      return worst;
                    }});

  checks.push_back({"noise.divergence_contraction", 0.0, [] {
                      // count of violations of D(Lambda(rho)) < D(rho)
                      Rng rng(106);
                      double bad = 0.0;
                      for (int t = 0; t < 100; ++t) {
                        const int n = 1 + t % 4;
                        const DensityMatrix rho = random_density_matrix(n, rng);
                        const NoiseModel m = random_noise_model(n, rng, 0.001, 0.1);
                        const double before = divergence_to_maximally_mixed(rho);
                        const double after = divergence_to_maximally_mixed(apply_channel(rho, m));
                        if (!(after < before)) bad += 1.0;
                      }
                      return bad;
                    }});

  checks.push_back({"pqc.unitary_invariance_of_divergence", 1e-9, [] {
                      Rng rng(107);
                      double worst = 0.0;
                      for (int t = 0; t < 20; ++t) {
                        const CircuitSpec c = random_circuit(4, 8, static_cast<Design>(t % 3), rng, 3.0);
                        const DensityMatrix rho0 = random_density_matrix(4, rng);
                        const double d0 = divergence_to_maximally_mixed(rho0);
                        for (const auto& s : forward_noise_free(rho0, c))
                          worst = std::max(worst, std::abs(divergence_to_maximally_mixed(s) - d0));
                      }
                      return worst;
                    }});

  checks.push_back({"pqc.noisy_monotonicity", 0.0, [] {
                      Rng rng(108);
                      double bad = 0.0;
                      for (double lam : {0.01, 0.05}) {
                        for (int t = 0; t < 20; ++t) {
                          const CircuitSpec c = random_circuit(4, 8, Design::U3, rng, 3.0);
                          const std::vector<NoiseModel> noise(8, depolarizing_model(4, lam));
                          const DensityMatrix rho0 = random_pure_state(4, rng);
                          double prev = divergence_to_maximally_mixed(rho0);
                          for (const auto& s : forward_noisy(rho0, c, noise)) {
                            const double d = divergence_to_maximally_mixed(s);
                            if (!(d < prev - 1e-12)) bad += 1.0;
                            prev = d;
                          }
                        }
                      }
                      return bad;
                    }});

  checks.push_back({"pqc.perfect_mitigation", 1e-8, [] {
                      Rng rng(109);
                      double worst = 0.0;
                      for (int t = 0; t < 50; ++t) {
                        const CircuitSpec c = random_circuit(4, 4, static_cast<Design>(t % 3), rng, 3.0);
                        std::vector<NoiseModel> noise;
                        for (int l = 0; l < 4; ++l) noise.push_back(random_noise_model(4, rng, 0.002, 0.02));
                        const DensityMatrix rho0 = random_density_matrix(4, rng);
                        const auto z = predict_readout(rho0.matrix(), c, noise, MitigationModel{noise},
                                                       ExecutionMode::Cascaded);
                        const auto ref = readout(forward_noise_free(rho0, c).back(), c);
                        for (std::size_t i = 0; i < z.size(); ++i) worst = std::max(worst, std::abs(z[i] - ref[i]));
                      }
                      return worst;
                    }});

  checks.push_back({"losses.fidelity_suite", 1e-9, [] {
                      Rng rng(110);
                      double worst = 0.0;
                      for (int t = 0; t < 200; ++t) {
                        const int n = 1 + t % 3;
                        const DensityMatrix a = random_density_matrix(n, rng, 1 + t % 3);
                        const DensityMatrix b = random_density_matrix(n, rng);
                        const double f = fidelity(a, b);
                        worst = std::max({worst, -f, f - 1.0, std::abs(f - fidelity(b, a))});
                        const Unitary u = random_unitary(n, rng);
                        worst = std::max(worst, std::abs(fidelity(evolve(a, u), evolve(b, u)) - f));
                        const CVector x = random_state_vector(n, rng), y = random_state_vector(n, rng);
                        const double overlap = std::norm(x.dot(y));
                        worst = std::max(worst, std::abs(fidelity(pure_state({x.data(), static_cast<std::size_t>(x.size())}),
                                                                       pure_state({y.data(), static_cast<std::size_t>(y.size())})) - overlap));
                      }
                      return worst;
                    }});

  checks.push_back({"losses.data_processing", 1e-12, [] {
                      Rng rng(111);
                      double worst = 0.0;
                      for (int t = 0; t < 200; ++t) {
                        const int n = 1 + t % 3;
                        const DensityMatrix rho = random_density_matrix(n, rng);
                        const NoiseModel m = random_noise_model(n, rng, 0.0, 0.2);
                        const double gap =
                            divergence_to_maximally_mixed(apply_channel(rho, m)) - divergence_to_maximally_mixed(rho);
                        worst = std::max(worst, gap);
                      }
                      return worst;
                    }});

  checks.push_back({"gradient.central_differences", 1e-3, [] {
                      Rng rng(112);
                      double worst = 0.0;
                      for (int t = 0; t < 2; ++t) {
                        CircuitSpec c = random_circuit(4, 2, Design::U2, rng, 3.0);
                        std::vector<NoiseModel> noise;
                        MitigationModel m;
                        for (int l = 0; l < 2; ++l) {
                          noise.push_back(random_noise_model(4, rng, 0.002, 0.02));
                          m.layers.push_back(random_noise_model(4, rng, 0.001, 0.01));
                        }
                        ObjectiveSettings s;
                        s.mode = t == 0 ? ExecutionMode::LossOnly : ExecutionMode::Cascaded;
                        const CMatrix rho0 = random_density_matrix(4, rng).matrix();
                        const auto g = evaluate_sample(rho0, 1, c, noise, m, s, true).grad;
                        auto params = c.flat_theta();
                        const auto rates = m.flat_rates();
                        params.insert(params.end(), rates.begin(), rates.end());
                        const std::size_t nt = c.num_params();
                        auto loss = [&](const std::vector<double>& p) {
                          CircuitSpec cc = c;
                          MitigationModel mm = m;
                          cc.set_flat_theta({p.begin(), p.begin() + static_cast<std::ptrdiff_t>(nt)});
                          mm.set_flat_rates({p.begin() + static_cast<std::ptrdiff_t>(nt), p.end()});
                          return evaluate_sample(rho0, 1, cc, noise, mm, s, false).loss;
                        };
                        for (std::size_t i = 0; i < params.size(); ++i) {
                          auto up = params, down = params;
                          up[i] += 1e-4;
                          down[i] -= 1e-4;
                          const double fd = (loss(up) - loss(down)) / 2e-4;
                          const double scale = std::abs(fd) < 1e-6 ? 1e-3 : std::abs(fd);
                          worst = std::max(worst, std::abs(g[i] - fd) / scale);
                        }
                      }
                      return worst;
                    }});

  checks.push_back({"train.determinism_and_projection", 0.0, [] {
                      TrainConfig cfg;
                      cfg.classes = 2;
                      cfg.layers = 2;
                      cfg.epochs = 2;
                      cfg.batch_size = 8;
                      cfg.learning_rate = 0.2;
                      const Dataset data = synthetic_blobs(2, 16, 3.0, 7);
                      const auto noise = true_noise(cfg, 1);
                      auto run = [&] { return train_model(cfg, data, data, 3, noise); };
                      const RunResult a = run(), b = run();
                      double bad = 0.0;
                      for (std::size_t e = 0; e < a.history.size(); ++e)
                        if (a.history[e].task != b.history[e].task || a.history[e].fb != b.history[e].fb) bad += 1.0;
                      for (double r : a.best.mitigation.flat_rates())
                        if (r < 0.0) bad += 1.0;
                      return bad;
                    }});

  checks.push_back({"data.preprocess_constants", 1e-15, [] {
                      double worst = 0.0;
                      for (int v : {0, 17, 128, 255}) {
                        const std::vector<std::uint8_t> img(kImageSide * kImageSide, static_cast<std::uint8_t>(v));
                        for (double x : preprocess(img)) worst = std::max(worst, std::abs(x - v / 255.0));
                      }
                      return worst;
                    }});

  return checks;
}

}  // namespace

std::vector<CheckResult> run_selftest(const SelftestOptions& options) {
  std::vector<CheckResult> out;
  for (const auto& c : build_checks(options)) {
    try {
      const double w = c.worst();
      out.push_back({c.name, w <= c.bound, describe(w, c.bound)});
    } catch (const std::exception& e) {
      out.push_back({c.name, false, std::string("threw: ") + e.what()});
    }
  }
  return out;
}

bool print_results(std::ostream& out, const std::vector<CheckResult>& results) {
  bool all = true;
  for (const auto& r : results) {
    out << (r.passed ? "PASS  " : "FAIL  ") << std::left << std::setw(40) << r.name << r.detail << "\n";
    all = all && r.passed;
  }
  if (!all) {
    out << "failing:";
    for (const auto& r : results)
      if (!r.passed) out << " " << r.name;
    out << "\n";
  }
  return all;
}

}  // namespace qmit
