#include "qmit/train.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include "qmit/errors.hpp"

namespace qmit {

namespace {

constexpr double kDivergenceThreshold = 1e4;

int resolve_threads(int threads) { return threads > 0 ? threads : omp_get_max_threads(); }

/// Runs body(i) for i < count, serially or with OpenMP; the first exception is rethrown.
template <class F>
void for_each_index(std::size_t count, Execution exec, int threads, F&& body) {
  if (exec == Execution::Serial) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::exception_ptr error;
  const auto total = static_cast<long>(count);
#pragma omp parallel for schedule(dynamic) num_threads(resolve_threads(threads))
  for (long i = 0; i < total; ++i) {
    try {
      body(static_cast<std::size_t>(i));
    } catch (...) {
#pragma omp critical(qmit_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
}

int argmax(const std::vector<double>& z, int classes) {
  int best = 0;
  for (int i = 1; i < classes; ++i)
    if (z[static_cast<std::size_t>(i)] > z[static_cast<std::size_t>(best)]) best = i;
  return best;
}

}  // namespace

ObjectiveSettings TrainConfig::objective() const {
  ObjectiveSettings s;
  s.weights = weights;
  s.step = step;
  s.classes = classes;
  s.mode = mode;
  s.grad_theta = train_theta;
  s.grad_rates = learns_rates();
  return s;
}

void TrainConfig::validate() const {
  check_qubit_count(n);
  if (layers < 1) throw ValidationError("layers must be >= 1");
  if (step < 1 || layers % step != 0)
    throw ValidationError("step " + std::to_string(step) + " must divide layers " + std::to_string(layers));
  weights.validate();
  if (classes < 2 || classes > n)
    throw ValidationError("classes must be in [2, n], got " + std::to_string(classes));
  if (epochs < 0) throw ValidationError("epochs must be >= 0");
  if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ValidationError("learning_rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ValidationError("momentum must be in [0, 1)");
  if (!(init_range >= 0.0) || !std::isfinite(init_range)) throw ValidationError("init_range must be >= 0");
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0))
    throw ValidationError("validation_fraction must be in [0, 1)");
  if (!train_theta && !learns_rates()) throw ValidationError("nothing to train: theta and rates both frozen");
  if (noise.kind == NoiseSource::Kind::Seeded && !(noise.lo >= 0.0 && noise.lo <= noise.hi && std::isfinite(noise.hi)))
    throw ValidationError("noise range must satisfy 0 <= lo <= hi");
  if (noise.kind == NoiseSource::Kind::File && noise.path.empty()) throw ValidationError("noise file path is empty");
  if (threads < 0) throw ValidationError("threads must be >= 0");
}

std::vector<NoiseModel> true_noise(const TrainConfig& config, std::uint64_t base_seed) {
  const auto layers = static_cast<std::size_t>(config.layers);
  std::vector<NoiseModel> out;
  switch (config.noise.kind) {
    case NoiseSource::Kind::None:
      for (std::size_t l = 0; l < layers; ++l) out.push_back(uniform_model(default_generators(config.n), config.n, 0.0));
      break;
    case NoiseSource::Kind::Seeded: {
      Rng rng(config.noise.seed.value_or(base_seed));
      for (std::size_t l = 0; l < layers; ++l) out.push_back(random_noise_model(config.n, rng, config.noise.lo, config.noise.hi));
      break;
    }
    case NoiseSource::Kind::File: {
      std::ifstream in(config.noise.path);
      if (!in) throw ValidationError("cannot open noise file " + config.noise.path);
      nlohmann::json j;
      try {
        in >> j;
      } catch (const nlohmann::json::exception& e) {
        throw ValidationError("noise file " + config.noise.path + ": " + e.what());
      }
      // one model for every layer, or a list with one per layer
      if (j.is_array()) {
        if (j.size() != layers)
          throw ValidationError("noise file has " + std::to_string(j.size()) + " layers, config has " +
                                std::to_string(layers));
        for (const auto& m : j) out.push_back(noise_model_from_json(m));
      } else {
        const NoiseModel m = noise_model_from_json(j);
        out.assign(layers, m);
      }
      for (const auto& m : out)
        if (m.qubits() != config.n) throw ValidationError("noise file qubit count differs from config");
      break;
    }
  }
  return out;
}

TrainingSetup prepare_training(const TrainConfig& config, const Dataset& data, std::uint64_t seed) {
  if (data.empty()) throw DataError("training set is empty");
  TrainingSetup setup{{}, {}, {}};
  TrainState& st = setup.state;
  st.rng.seed(seed);

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), st.rng);
  const auto n_val = static_cast<std::size_t>(std::floor(config.validation_fraction * static_cast<double>(data.size())));
  setup.train.classes = setup.validation.classes = data.classes;
  for (std::size_t i = 0; i < order.size(); ++i)
    (i < n_val ? setup.validation : setup.train).samples.push_back(data.samples[order[i]]);
  if (setup.train.empty()) throw DataError("validation split leaves no training samples");

  st.circuit = random_circuit(config.n, static_cast<std::size_t>(config.layers), config.design, st.rng, config.init_range);
  st.mitigation = MitigationModel::zeros(config.n, static_cast<std::size_t>(config.layers));
  st.velocity.assign(st.circuit.num_params() + st.mitigation.num_rates(), 0.0);
  return setup;
}

EncodedSet EncodedSet::from(const Dataset& data, const EncoderSpec& encoder) {
  EncodedSet e;
  e.classes = data.classes;
  e.states.reserve(data.size());
  for (const auto& s : data.samples) {
    e.states.push_back(encode(s.features, encoder).matrix());
    e.labels.push_back(s.label);
  }
  return e;
}

BatchResult loss_and_gradients(std::span<const CMatrix> states, std::span<const int> labels,
                               std::span<const std::size_t> indices, const CircuitSpec& circuit,
                               const MitigationModel& mitigation, const std::vector<NoiseModel>& noise,
                               const ObjectiveSettings& settings, Execution exec, int threads) {
  if (indices.empty()) throw ValidationError("empty batch");
  if (states.size() != labels.size()) throw ValidationError("state and label counts differ");
  std::vector<SampleEvaluation> evals(indices.size());
  for_each_index(indices.size(), exec, threads, [&](std::size_t i) {
    const std::size_t k = indices[i];
    evals[i] = evaluate_sample(states[k], labels[k], circuit, noise, mitigation, settings, true);
  });

  // fixed-order reduction
  BatchResult r;
  r.grad.assign(evals.front().grad.size(), 0.0);
  for (std::size_t i = 0; i < evals.size(); ++i) {
    const auto& e = evals[i];
    r.loss += e.loss;
    r.fb += e.fb;
    r.task += e.task;
    r.clamped_mass += e.clamped_mass;
    r.capped_blocks += e.capped_blocks;
    if (argmax(e.z, settings.classes) == labels[indices[i]]) ++r.correct;
    for (std::size_t p = 0; p < r.grad.size(); ++p) r.grad[p] += e.grad[p];
  }
  const auto m = static_cast<double>(evals.size());
  r.loss /= m;
  r.fb /= m;
  r.task /= m;
  r.clamped_mass /= m;
  for (auto& g : r.grad) g /= m;
  return r;
}

void optimizer_step(TrainState& state, const std::vector<double>& grad, const TrainConfig& config) {
  std::vector<double> theta = state.circuit.flat_theta();
  std::vector<double> rates = state.mitigation.flat_rates();
  if (grad.size() != theta.size() + rates.size() || state.velocity.size() != grad.size())
    throw ValidationError("gradient length does not match the parameter layout");
  const double lr = config.learning_rate;
  const double mu = config.momentum;
  if (config.train_theta) {
    for (std::size_t i = 0; i < theta.size(); ++i) {
      state.velocity[i] = mu * state.velocity[i] + grad[i];
      theta[i] -= lr * state.velocity[i];
    }
    state.circuit.set_flat_theta(theta);
  }
  if (config.learns_rates()) {
    for (std::size_t i = 0; i < rates.size(); ++i) {
      double& v = state.velocity[theta.size() + i];
      v = mu * v + grad[theta.size() + i];
      rates[i] = std::max(0.0, rates[i] - lr * v);
    }
    state.mitigation.set_flat_rates(rates);
  }
}

EpochMetrics train_epoch(TrainState& state, const EncodedSet& train, const std::vector<NoiseModel>& noise,
                         const TrainConfig& config, Execution exec) {
  if (train.size() == 0) throw DataError("training set is empty");
  const ObjectiveSettings settings = config.objective();
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), state.rng);

  EpochMetrics m;
  m.epoch = state.epoch + 1;
  std::size_t correct = 0;
  const auto batch = static_cast<std::size_t>(config.batch_size);
  for (std::size_t start = 0; start < order.size(); start += batch) {
    const std::size_t end = std::min(start + batch, order.size());
    const std::span<const std::size_t> idx(order.data() + start, end - start);
    BatchResult r;
    try {
      r = loss_and_gradients(train.states, train.labels, idx, state.circuit, state.mitigation, noise, settings, exec,
                             config.threads);
    } catch (const ComputationError& e) {
      throw TrainingError("numerical breakdown in epoch " + std::to_string(m.epoch) + ": " + e.what());
    }
    if (!std::isfinite(r.loss) || r.loss > kDivergenceThreshold) {
      std::ostringstream msg;
      msg << "training diverged in epoch " << m.epoch << " at sample offset " << start << ": loss " << r.loss
          << " (fb " << r.fb << ", task " << r.task << ", capped blocks " << r.capped_blocks << ")";
      throw TrainingError(msg.str());
    }
    for (double g : r.grad)
      if (!std::isfinite(g)) throw TrainingError("non-finite gradient in epoch " + std::to_string(m.epoch));
    const auto w = static_cast<double>(idx.size());
    m.fb += r.fb * w;
    m.task += r.task * w;
    m.clamped_mass += r.clamped_mass * w;
    correct += static_cast<std::size_t>(r.correct);
    optimizer_step(state, r.grad, config);
  }
  const auto total = static_cast<double>(order.size());
  m.fb /= total;
  m.task /= total;
  m.clamped_mass /= total;
  m.train_acc = static_cast<double>(correct) / total;
  m.val_acc = std::numeric_limits<double>::quiet_NaN();
  state.epoch = m.epoch;
  return m;
}

Evaluation evaluate(const TrainState& state, const EncodedSet& data, const std::vector<NoiseModel>& noise,
                    const TrainConfig& config) {
  Evaluation ev;
  ev.correct.assign(static_cast<std::size_t>(config.classes), 0);
  ev.total.assign(static_cast<std::size_t>(config.classes), 0);
  if (data.size() == 0) return ev;
  std::vector<int> predicted(data.size());
  for_each_index(data.size(), Execution::Parallel, config.threads, [&](std::size_t i) {
    const auto z = predict_readout(data.states[i], state.circuit, noise, state.mitigation, config.mode);
    predicted[i] = argmax(z, config.classes);
  });
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const int label = data.labels[i];
    if (label < 0 || label >= config.classes) throw ValidationError("label outside class range");
    ++ev.total[static_cast<std::size_t>(label)];
    if (predicted[i] == label) {
      ++ev.correct[static_cast<std::size_t>(label)];
      ++hits;
    }
  }
  ev.accuracy = static_cast<double>(hits) / static_cast<double>(data.size());
  return ev;
}

RunResult train_model(const TrainConfig& config, const Dataset& train, const Dataset& test, std::uint64_t seed,
                      const std::vector<NoiseModel>& noise, const EpochCallback& on_epoch) {
  config.validate();
  TrainingSetup setup = prepare_training(config, train, seed);
  const EncodedSet train_set = EncodedSet::from(setup.train, setup.state.circuit.encoder);
  const EncodedSet val_set = EncodedSet::from(setup.validation, setup.state.circuit.encoder);
  const EncodedSet test_set = EncodedSet::from(test, setup.state.circuit.encoder);

  RunResult result{{}, setup.state, 0, 0.0};
  double best_val = -1.0;
  TrainState& state = setup.state;
  for (int e = 0; e < config.epochs; ++e) {
    EpochMetrics m = train_epoch(state, train_set, noise, config);
    if (val_set.size() > 0) {
      m.val_acc = evaluate(state, val_set, noise, config).accuracy;
      if (m.val_acc > best_val) {
        best_val = m.val_acc;
        result.best = state;
        result.best_epoch = m.epoch;
      }
    } else {
      result.best = state;
      result.best_epoch = m.epoch;
    }
    result.history.push_back(m);
    if (on_epoch) on_epoch(m);
  }
  result.test_accuracy = evaluate(result.best, test_set, noise, config).accuracy;
  return result;
}

double sample_stddev(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

ExperimentResult run_experiment(const TrainConfig& config, const Dataset& train, const Dataset& test, int repeats,
                                const RepeatCallback& on_epoch) {
  if (repeats < 1) throw ValidationError("repeats must be >= 1");
  config.validate();
  const std::vector<NoiseModel> noise = true_noise(config, config.seed);
  ExperimentResult out;
  for (int r = 0; r < repeats; ++r) {
    EpochCallback cb;
    if (on_epoch) cb = [&, r](const EpochMetrics& m) { on_epoch(r, m); };
    out.runs.push_back(train_model(config, train, test, config.seed + static_cast<std::uint64_t>(r), noise, cb));
    out.accuracies.push_back(out.runs.back().test_accuracy);
  }
  out.mean = std::accumulate(out.accuracies.begin(), out.accuracies.end(), 0.0) / repeats;
  out.stddev = sample_stddev(out.accuracies);
  return out;
}

nlohmann::json checkpoint_json(const TrainState& state, const TrainConfig& config, std::uint64_t seed) {
  nlohmann::json j;
  j["seed"] = seed;
  j["epoch"] = state.epoch;
  j["circuit"] = to_json(state.circuit);
  j["mitigation"] = nlohmann::json::array();
  for (const auto& m : state.mitigation.layers) j["mitigation"].push_back(to_json(m));
  j["optimizer"] = {{"kind", "sgd_momentum"},
                    {"learning_rate", config.learning_rate},
                    {"momentum", config.momentum},
                    {"velocity", state.velocity}};
  std::ostringstream rng;
  rng << state.rng;
  j["rng"] = rng.str();
  return j;
}

TrainState state_from_checkpoint(const nlohmann::json& j) {
  try {
    TrainState st;
    st.circuit = circuit_from_json(j.at("circuit"));
    for (const auto& m : j.at("mitigation")) st.mitigation.layers.push_back(noise_model_from_json(m));
    if (st.mitigation.num_layers() != st.circuit.num_layers())
      throw ValidationError("checkpoint: mitigation and circuit layer counts differ");
    st.velocity = j.at("optimizer").at("velocity").get<std::vector<double>>();
    if (st.velocity.size() != st.circuit.num_params() + st.mitigation.num_rates())
      throw ValidationError("checkpoint: optimizer buffer length mismatch");
    st.epoch = j.at("epoch").get<int>();
    std::istringstream rng(j.at("rng").get<std::string>());
    rng >> st.rng;
    if (!rng) throw ValidationError("checkpoint: unreadable rng state");
    return st;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("checkpoint: ") + e.what());
  }
}

}  // namespace qmit
