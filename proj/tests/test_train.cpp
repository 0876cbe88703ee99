#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "qmit/errors.hpp"
#include "qmit/train.hpp"

using namespace qmit;

namespace {

TrainConfig small_config() {
  TrainConfig c;
  c.layers = 2;
  c.classes = 2;
  c.epochs = 3;
  c.batch_size = 8;
  c.learning_rate = 0.1;
  return c;
}

bool same_metrics(const EpochMetrics& a, const EpochMetrics& b) {
  auto eq = [](double x, double y) { return x == y || (std::isnan(x) && std::isnan(y)); };
  return a.epoch == b.epoch && a.fb == b.fb && a.task == b.task && a.train_acc == b.train_acc &&
         eq(a.val_acc, b.val_acc) && a.clamped_mass == b.clamped_mass;
}

}  // namespace

TEST_CASE("config validation") {
  TrainConfig c = small_config();
  CHECK_NOTHROW(c.validate());
  c.step = 3;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = small_config();
  c.weights = {0.0, 0.0};
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = small_config();
  c.learning_rate = 0.0;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = small_config();
  c.classes = 5;
  CHECK_THROWS_AS(c.validate(), ValidationError);
  c = small_config();
  c.train_theta = false;
  c.weights = {0.0, 1.0};
  CHECK_THROWS_AS(c.validate(), ValidationError);
}

TEST_CASE("rates are learned by default only with the forward-backward term") {
  TrainConfig c = small_config();
  CHECK(c.learns_rates());
  c.weights = {0.0, 1.0};
  CHECK_FALSE(c.learns_rates());
  c.train_rates = true;
  CHECK(c.learns_rates());
}

TEST_CASE("true noise sources") {
  TrainConfig c = small_config();
  const auto a = true_noise(c, 4), b = true_noise(c, 4), other = true_noise(c, 5);
  REQUIRE(a.size() == 2);
  CHECK(a[1].rates() == b[1].rates());
  CHECK(a[0].rates() != other[0].rates());
  for (const auto& m : a)
    for (double r : m.rates()) CHECK((r >= 0.002 && r <= 0.02));
  c.noise.seed = 77;
  CHECK(true_noise(c, 4)[0].rates() == true_noise(c, 5)[0].rates());
  c.noise.kind = NoiseSource::Kind::None;
  CHECK(true_noise(c, 1)[0].total_rate() == 0.0);

  const auto path = std::filesystem::temp_directory_path() / "qmit_noise.json";
  std::ofstream(path) << to_json(depolarizing_model(4, 0.01)).dump();
  c.noise.kind = NoiseSource::Kind::File;
  c.noise.path = path.string();
  const auto f = true_noise(c, 1);
  CHECK(f.size() == 2);
  CHECK(f[1].rates() == std::vector<double>(12, 0.01));
  std::ofstream(path) << nlohmann::json::array({to_json(depolarizing_model(4, 0.01))}).dump();
  CHECK_THROWS_AS(true_noise(c, 1), ValidationError);
  std::filesystem::remove(path);
}

TEST_CASE("setup: validation split then initial angles, from one seed") {
  const Dataset data = synthetic_blobs(2, 50, 3.0, 1);
  const TrainConfig c = small_config();
  const TrainingSetup a = prepare_training(c, data, 9), b = prepare_training(c, data, 9);
  CHECK(a.validation.size() == 10);
  CHECK(a.train.size() == 90);
  CHECK(a.state.circuit.flat_theta() == b.state.circuit.flat_theta());
  for (double t : a.state.circuit.flat_theta()) CHECK(std::abs(t) <= 0.1);
  for (double r : a.state.mitigation.flat_rates()) CHECK(r == 0.0);
  CHECK(prepare_training(c, data, 10).state.circuit.flat_theta() != a.state.circuit.flat_theta());
  CHECK_THROWS_AS(prepare_training(c, Dataset{}, 1), DataError);
}

TEST_CASE("serial and parallel batch gradients are bitwise identical") {
  const Dataset data = synthetic_blobs(4, 8, 3.0, 2);
  const EncodedSet set = EncodedSet::from(data, EncoderSpec{});
  TrainConfig c = small_config();
  c.classes = 4;
  Rng rng(3);
  const CircuitSpec circuit = random_circuit(4, 2, Design::U3, rng, 1.0);
  MitigationModel m;
  for (int l = 0; l < 2; ++l) m.layers.push_back(random_noise_model(4, rng, 0.0, 0.01));
  const auto noise = true_noise(c, 1);
  std::vector<std::size_t> idx(set.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = (i * 7) % idx.size();
  const auto s = loss_and_gradients(set.states, set.labels, idx, circuit, m, noise, c.objective(), Execution::Serial);
  for (int threads : {1, 2, 4}) {
    const auto p =
        loss_and_gradients(set.states, set.labels, idx, circuit, m, noise, c.objective(), Execution::Parallel, threads);
    CHECK(p.loss == s.loss);
    CHECK(p.grad == s.grad);
    CHECK(p.correct == s.correct);
  }
  CHECK_THROWS_AS(loss_and_gradients(set.states, set.labels, {}, circuit, m, noise, c.objective(), Execution::Serial),
                  ValidationError);
}

TEST_CASE("batch gradient is the mean of per-sample gradients") {
  const Dataset data = synthetic_blobs(2, 3, 3.0, 4);
  const EncodedSet set = EncodedSet::from(data, EncoderSpec{});
  TrainConfig c = small_config();
  Rng rng(5);
  const CircuitSpec circuit = random_circuit(4, 2, Design::U2, rng, 1.0);
  const auto noise = true_noise(c, 1);
  const MitigationModel m = MitigationModel::zeros(4, 2);
  const std::vector<std::size_t> idx{0, 1, 2, 3, 4, 5};
  const auto r = loss_and_gradients(set.states, set.labels, idx, circuit, m, noise, c.objective(), Execution::Serial);
  std::vector<double> sum(r.grad.size(), 0.0);
  for (std::size_t k : idx) {
    const auto e = evaluate_sample(set.states[k], set.labels[k], circuit, noise, m, c.objective(), true);
    for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += e.grad[i] / 6.0;
  }
  for (std::size_t i = 0; i < sum.size(); ++i) CHECK(r.grad[i] == doctest::Approx(sum[i]).epsilon(1e-12));
}

TEST_CASE("zero learning rate leaves parameters unchanged") {
  const Dataset data = synthetic_blobs(2, 20, 3.0, 6);
  TrainConfig c = small_config();
  TrainingSetup s = prepare_training(c, data, 1);
  const EncodedSet set = EncodedSet::from(s.train, EncoderSpec{});
  c.learning_rate = 0.0;
  const auto theta = s.state.circuit.flat_theta();
  const auto rates = s.state.mitigation.flat_rates();
  train_epoch(s.state, set, true_noise(c, 1), c);
  CHECK(s.state.circuit.flat_theta() == theta);
  CHECK(s.state.mitigation.flat_rates() == rates);
  CHECK(s.state.epoch == 1);
}

TEST_CASE("optimizer projects rates to be nonnegative and respects frozen groups") {
  TrainConfig c = small_config();
  TrainState st;
  Rng rng(7);
  st.circuit = random_circuit(4, 2, Design::U2, rng, 0.1);
  st.mitigation = MitigationModel::zeros(4, 2);
  st.velocity.assign(st.circuit.num_params() + st.mitigation.num_rates(), 0.0);
  std::vector<double> grad(st.velocity.size(), 1.0);
  optimizer_step(st, grad, c);
  for (double r : st.mitigation.flat_rates()) CHECK(r == 0.0);
  std::fill(grad.begin(), grad.end(), -1.0);
  optimizer_step(st, grad, c);
  for (double r : st.mitigation.flat_rates()) CHECK(r >= 0.0);
  const auto theta = st.circuit.flat_theta();
  c.train_theta = false;
  optimizer_step(st, grad, c);
  CHECK(st.circuit.flat_theta() == theta);
  CHECK_THROWS_AS(optimizer_step(st, std::vector<double>(3, 0.0), c), ValidationError);
}

TEST_CASE("training is deterministic and keeps rates nonnegative") {
  const Dataset data = synthetic_blobs(2, 30, 3.0, 8);
  TrainConfig c = small_config();
  const auto noise = true_noise(c, 1);
  const RunResult a = train_model(c, data, data, 5, noise), b = train_model(c, data, data, 5, noise);
  REQUIRE(a.history.size() == 3);
  for (std::size_t e = 0; e < a.history.size(); ++e) CHECK(same_metrics(a.history[e], b.history[e]));
  CHECK(a.test_accuracy == b.test_accuracy);
  CHECK(a.best.circuit.flat_theta() == b.best.circuit.flat_theta());
  for (double r : a.best.mitigation.flat_rates()) CHECK(r >= 0.0);
  // with alpha_fb > 0 the mitigation rates move
  double moved = 0.0;
  for (double r : a.best.mitigation.flat_rates()) moved += r;
  CHECK(moved > 0.0);
}

TEST_CASE("baseline run never touches the mitigation rates") {
  const Dataset data = synthetic_blobs(2, 20, 3.0, 9);
  TrainConfig c = small_config();
  c.weights = {0.0, 1.0};
  const RunResult r = train_model(c, data, data, 1, true_noise(c, 1));
  for (double x : r.best.mitigation.flat_rates()) CHECK(x == 0.0);
}

TEST_CASE("synthetic two-class set is learned") {
  const Dataset data = synthetic_blobs(2, 100, 3.0, 10);
  TrainConfig c;
  c.layers = 2;
  c.classes = 2;
  c.epochs = 30;
  c.batch_size = 16;
  c.learning_rate = 0.1;
  c.weights = {0.0, 1.0};
  c.validation_fraction = 0.0;
  c.noise.kind = NoiseSource::Kind::None;
  double best = 0.0;
  const RunResult r = train_model(c, data, data, 1, true_noise(c, 1),
                                  [&](const EpochMetrics& m) { best = std::max(best, m.train_acc); });
  CHECK(best >= 0.95);
}

TEST_CASE("evaluation") {
  const Dataset data = synthetic_blobs(4, 50, 3.0, 11);
  TrainConfig c;
  const TrainingSetup s = prepare_training(c, data, 2);
  const EncodedSet set = EncodedSet::from(data, EncoderSpec{});
  const auto noise = true_noise(c, 1);
  const Evaluation e = evaluate(s.state, set, noise, c);
  CHECK(e.accuracy >= 0.1);
  CHECK(e.accuracy <= 0.5);
  CHECK(e.total == std::vector<std::size_t>{50, 50, 50, 50});
  CHECK(evaluate(s.state, set, noise, c).accuracy == e.accuracy);

  // one sample, predicted correctly
  EncodedSet one;
  one.states.push_back(set.states[0]);
  const auto z = predict_readout(set.states[0], s.state.circuit, noise, s.state.mitigation, c.mode);
  one.labels.push_back(static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin()));
  one.classes = 4;
  CHECK(evaluate(s.state, one, noise, c).accuracy == 1.0);
}

TEST_CASE("experiment repeats") {
  const Dataset data = synthetic_blobs(2, 20, 3.0, 12);
  TrainConfig c = small_config();
  c.epochs = 1;
  const ExperimentResult one = run_experiment(c, data, data, 1);
  CHECK(one.stddev == 0.0);
  CHECK(one.mean == one.accuracies[0]);
  const ExperimentResult three = run_experiment(c, data, data, 3);
  CHECK(three.accuracies.size() == 3);
  CHECK(three.accuracies[0] == one.accuracies[0]);
  CHECK(sample_stddev({1.0, 2.0, 3.0}) == doctest::Approx(1.0));
  CHECK_THROWS_AS(run_experiment(c, data, data, 0), ValidationError);
}

TEST_CASE("checkpoint round trip resumes identically") {
  const Dataset data = synthetic_blobs(2, 20, 3.0, 13);
  TrainConfig c = small_config();
  TrainingSetup s = prepare_training(c, data, 3);
  const EncodedSet set = EncodedSet::from(s.train, EncoderSpec{});
  const auto noise = true_noise(c, 1);
  train_epoch(s.state, set, noise, c);
  TrainState resumed = state_from_checkpoint(nlohmann::json::parse(checkpoint_json(s.state, c, 3).dump()));
  const EpochMetrics a = train_epoch(s.state, set, noise, c);
  const EpochMetrics b = train_epoch(resumed, set, noise, c);
  CHECK(same_metrics(a, b));
  CHECK(s.state.circuit.flat_theta() == resumed.circuit.flat_theta());
  CHECK_THROWS_AS(state_from_checkpoint(nlohmann::json::object()), ValidationError);
}

TEST_CASE("divergence aborts training") {
  const Dataset data = synthetic_blobs(2, 10, 3.0, 14);
  TrainConfig c = small_config();
  c.learning_rate = 1e6;
  c.momentum = 0.0;
  TrainingSetup s = prepare_training(c, data, 4);
  const EncodedSet set = EncodedSet::from(s.train, EncoderSpec{});
  const auto noise = true_noise(c, 1);
  bool threw = false;
  try {
    for (int e = 0; e < 20; ++e) train_epoch(s.state, set, noise, c);
  } catch (const TrainingError&) {
    threw = true;
  }
  CHECK(threw);
}
