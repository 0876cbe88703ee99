#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "qmit/data.hpp"
#include "qmit/gradient.hpp"

namespace qmit {

/// Where the simulated hardware noise comes from.
struct NoiseSource {
  enum class Kind { Seeded, File, None };
  Kind kind = Kind::Seeded;
  double lo = 0.002;
  double hi = 0.02;
  std::optional<std::uint64_t> seed;  // defaults to the experiment's base seed
  std::string path;                   // JSON list of per-layer noise models
};

struct TrainConfig {
  int n = 4;
  int layers = 4;
  Design design = Design::U2;
  int step = 1;
  ExecutionMode mode = ExecutionMode::LossOnly;
  LossWeights weights;
  int classes = 4;

  int epochs = 50;
  int batch_size = 32;
  double learning_rate = 0.05;
  double momentum = 0.9;
  std::uint64_t seed = 0;
  double init_range = 0.1;
  double validation_fraction = 0.1;

  bool train_theta = true;
  /// Unset: rates are learned only when alpha_fb > 0, so an alpha_fb = 0 run is the unmitigated baseline.
  std::optional<bool> train_rates;

  NoiseSource noise;
  int threads = 0;  // 0 = OpenMP default

  bool learns_rates() const { return train_rates.value_or(weights.fb > 0.0); }
  ObjectiveSettings objective() const;
  void validate() const;
};

/// Per-layer true noise for a config. Seeded draws use noise.seed, falling back to `base_seed`.
std::vector<NoiseModel> true_noise(const TrainConfig& config, std::uint64_t base_seed);

struct TrainState {
  CircuitSpec circuit;
  MitigationModel mitigation;
  std::vector<double> velocity;  // momentum buffer over [theta..., rates...]
  int epoch = 0;
  Rng rng;
};

/// Draws the validation split, then theta, from one stream seeded with `seed`.
struct TrainingSetup {
  TrainState state;
  Dataset train;
  Dataset validation;
};
TrainingSetup prepare_training(const TrainConfig& config, const Dataset& data, std::uint64_t seed);

enum class Execution { Serial, Parallel };

struct BatchResult {
  double loss = 0.0;  // batch means
  double fb = 0.0;
  double task = 0.0;
  double clamped_mass = 0.0;
  int capped_blocks = 0;
  int correct = 0;
  std::vector<double> grad;  // mean gradient over the batch
};

/// Mean loss and gradient over `indices` of an encoded set. Both executions give bitwise-identical results.
BatchResult loss_and_gradients(std::span<const CMatrix> states, std::span<const int> labels,
                               std::span<const std::size_t> indices, const CircuitSpec& circuit,
                               const MitigationModel& mitigation, const std::vector<NoiseModel>& noise,
                               const ObjectiveSettings& settings, Execution exec, int threads = 0);

/// One SGD-with-momentum update over `grad`, then rates projected to >= 0.
void optimizer_step(TrainState& state, const std::vector<double>& grad, const TrainConfig& config);

struct EpochMetrics {
  int epoch = 0;
  double fb = 0.0;
  double task = 0.0;
  double train_acc = 0.0;  // running accuracy over the epoch's batches
  double val_acc = 0.0;    // NaN without a validation set
  double clamped_mass = 0.0;
};

struct EncodedSet {
  std::vector<CMatrix> states;
  std::vector<int> labels;
  int classes = 0;

  static EncodedSet from(const Dataset& data, const EncoderSpec& encoder);
  std::size_t size() const noexcept { return states.size(); }
};

EpochMetrics train_epoch(TrainState& state, const EncodedSet& train, const std::vector<NoiseModel>& noise,
                         const TrainConfig& config, Execution exec = Execution::Parallel);

struct Evaluation {
  double accuracy = 0.0;
  std::vector<std::size_t> correct;  // per class
  std::vector<std::size_t> total;    // per class
};

Evaluation evaluate(const TrainState& state, const EncodedSet& data, const std::vector<NoiseModel>& noise,
                    const TrainConfig& config);

struct RunResult {
  std::vector<EpochMetrics> history;
  TrainState best;
  int best_epoch = 0;
  double test_accuracy = 0.0;
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

/// Full training run for one seed with best-validation checkpointing.
RunResult train_model(const TrainConfig& config, const Dataset& train, const Dataset& test, std::uint64_t seed,
                      const std::vector<NoiseModel>& noise, const EpochCallback& on_epoch = {});

struct ExperimentResult {
  std::vector<double> accuracies;  // one per repeat
  double mean = 0.0;
  double stddev = 0.0;  // sample standard deviation, 0 for one repeat
  std::vector<RunResult> runs;
};

/// Trains with seeds config.seed + r, r = 0..repeats-1. True noise is drawn once from the base seed.
using RepeatCallback = std::function<void(int repeat, const EpochMetrics&)>;
ExperimentResult run_experiment(const TrainConfig& config, const Dataset& train, const Dataset& test, int repeats,
                                const RepeatCallback& on_epoch = {});

double sample_stddev(const std::vector<double>& xs);

nlohmann::json checkpoint_json(const TrainState& state, const TrainConfig& config, std::uint64_t seed);
TrainState state_from_checkpoint(const nlohmann::json& j);

}  // namespace qmit
