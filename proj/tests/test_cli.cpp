#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "qmit/experiment.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "qmit_cli_test" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

/// Runs the CLI; stdout and stderr go to `log`. Returns the exit status.
int run(const std::string& args, const fs::path& log) {
  const char* cli = std::getenv("QMIT_CLI");
  REQUIRE(cli != nullptr);
  const std::string cmd = std::string(cli) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path write_config(const fs::path& dir, const json& j) {
  const fs::path p = dir / "config.json";
  std::ofstream(p) << j.dump(2);
  return p;
}

json tiny_train() {
  return json{{"seed", 4},
              {"repeats", 2},
              {"data", {{"benchmark", "synthetic"}, {"classes", 2}, {"per_class", 12}, {"test_per_class", 6}}},
              {"model", {{"n", 4}, {"layers", 2}, {"design", "U2"}}},
              {"loss", {{"alpha_fb", 1.0}, {"alpha_task", 1.0}, {"step", 1}}},
              {"optimizer", {{"epochs", 2}, {"batch_size", 8}, {"learning_rate", 0.1}}}};
}

std::vector<std::string> data_rows(const std::string& csv) {
  std::vector<std::string> rows;
  std::istringstream in(csv);
  std::string line;
  while (std::getline(in, line))
    if (!line.empty() && line[0] != '#') rows.push_back(line);
  return rows;
}

}  // namespace

TEST_CASE("selftest passes and a corrupted inverse is named") {
  const fs::path dir = scratch("selftest");
  CHECK(run("selftest", dir / "ok.log") == 0);
  CHECK(slurp(dir / "ok.log").find("FAIL") == std::string::npos);
  CHECK(run("selftest --inject-fault", dir / "bad.log") == 1);
  const std::string out = slurp(dir / "bad.log");
  CHECK(out.find("FAIL  noise.round_trip") != std::string::npos);
  CHECK(out.find("failing: noise.round_trip") != std::string::npos);
}

TEST_CASE("train writes metrics, checkpoints and a summary; reruns are byte identical") {
  const fs::path dir = scratch("train");
  const fs::path cfg = write_config(dir, tiny_train());
  REQUIRE(run("train --config " + cfg.string() + " --out " + (dir / "a").string(), dir / "a.log") == 0);
  REQUIRE(run("train --config " + cfg.string() + " --out " + (dir / "b").string(), dir / "b.log") == 0);
  const std::string a = slurp(dir / "a" / "metrics.csv");
  CHECK(a == slurp(dir / "b" / "metrics.csv"));
  CHECK(a.rfind("# qmit ", 0) == 0);
  CHECK(a.find("# config {") != std::string::npos);
  const auto rows = data_rows(a);
  REQUIRE(rows.size() == 5);
  CHECK(rows[0] == "repeat,epoch,L_fb,L_task,train_acc,val_acc,clamped_mass");
  CHECK(rows[1].rfind("0,1,", 0) == 0);
  CHECK(rows[4].rfind("1,2,", 0) == 0);
  CHECK(fs::exists(dir / "a" / "checkpoint-0.json"));
  CHECK(fs::exists(dir / "a" / "checkpoint-1.json"));
  const json summary = json::parse(slurp(dir / "a" / "summary.json"));
  CHECK(summary["label"] == "mitigated");
  CHECK(summary["accuracies"].size() == 2);
  CHECK(summary.contains("config"));
  CHECK(summary.contains("version"));
  const json ck = json::parse(slurp(dir / "a" / "checkpoint-0.json"));
  CHECK(ck.contains("config"));
  CHECK(qmit::state_from_checkpoint(ck).circuit.num_layers() == 2);
}

TEST_CASE("alpha_fb = 0 labels the run as the baseline") {
  const fs::path dir = scratch("baseline");
  json j = tiny_train();
  j["repeats"] = 1;
  j["loss"]["alpha_fb"] = 0.0;
  const fs::path cfg = write_config(dir, j);
  REQUIRE(run("train --config " + cfg.string() + " --out " + (dir / "o").string(), dir / "o.log") == 0);
  const json summary = json::parse(slurp(dir / "o" / "summary.json"));
  CHECK(summary["label"] == "baseline");
  CHECK(summary["std"] == 0.0);
}

TEST_CASE("config errors exit with code 2 and name the field") {
  const fs::path dir = scratch("config");
  auto expect_config_error = [&](const json& j, const std::string& field) {
    const fs::path cfg = write_config(dir, j);
    CHECK(run("train --config " + cfg.string() + " --out " + (dir / "o").string(), dir / "o.log") == 2);
    const std::string log = slurp(dir / "o.log");
    CHECK_MESSAGE(log.find(field) != std::string::npos, log);
  };
  json j = tiny_train();
  j["optimizer"]["learnng_rate"] = 0.1;
  expect_config_error(j, "optimizer.learnng_rate");
  j = tiny_train();
  j["extra"] = 1;
  expect_config_error(j, "extra");
  j = tiny_train();
  j["loss"]["step"] = 3;
  expect_config_error(j, "step");
  j = tiny_train();
  j["loss"]["alpha_fb"] = 0.0;
  j["loss"]["alpha_task"] = 0.0;
  expect_config_error(j, "alpha");
  j = tiny_train();
  j["model"]["design"] = "U9";
  expect_config_error(j, "model.design");
  j = tiny_train();
  j["optimizer"]["epochs"] = "ten";
  expect_config_error(j, "optimizer.epochs");
  j = tiny_train();
  j["ablation"] = {{"designs", json::array()}};
  expect_config_error(j, "ablation");

  std::ofstream(dir / "broken.json") << "{ not json";
  CHECK(run("train --config " + (dir / "broken.json").string() + " --out " + (dir / "o").string(), dir / "o.log") ==
        2);
  CHECK(run("train --out " + (dir / "o").string(), dir / "o.log") == 2);
  CHECK(run("frobnicate", dir / "o.log") == 2);
}

TEST_CASE("runtime failures exit with code 3") {
  const fs::path dir = scratch("runtime");
  json j = tiny_train();
  j["data"] = {{"benchmark", "MNIST-4"}, {"images", "missing-images.gz"}, {"labels", "missing-labels.gz"}};
  const fs::path cfg = write_config(dir, j);
  CHECK(run("train --config " + cfg.string() + " --out " + (dir / "o").string(), dir / "o.log") == 3);
}

TEST_CASE("ablation emits one row per design x step x loss setting") {
  const fs::path dir = scratch("ablation");
  json j = tiny_train();
  j["repeats"] = 1;
  j["model"]["layers"] = 2;
  j["optimizer"]["epochs"] = 1;
  j["ablation"] = {{"designs", {"RX", "U2", "U3"}}, {"steps", {2, 1}}, {"alpha_fb", {0.0, 1.0}}, {"layers", {1, 2}}};
  const fs::path cfg = write_config(dir, j);
  REQUIRE(run("ablation --config " + cfg.string() + " --out " + (dir / "o").string(), dir / "o.log") == 0);
  const auto rows = data_rows(slurp(dir / "o" / "ablation.csv"));
  REQUIRE(rows.size() == 1 + 3 * 2 * 2);
  CHECK(rows[0] == "design,step,alpha_fb,setting,mean_acc,std_acc,accuracies");
  CHECK(rows[1].rfind("RX,2,0,without_L_fb,", 0) == 0);
  CHECK(rows[2].rfind("RX,2,1,with_L_fb,", 0) == 0);
  CHECK(data_rows(slurp(dir / "o" / "layers.csv")).size() == 1 + 2 * 2);
}

TEST_CASE("divergence traces") {
  const fs::path dir = scratch("trace");
  auto trace = [&](const json& t) {
    const fs::path cfg = write_config(dir, json{{"trace", t}});
    REQUIRE(run("trace-divergence --config " + cfg.string() + " --out " + (dir / "o").string(), dir / "o.log") == 0);
    std::vector<double> d;
    const auto rows = data_rows(slurp(dir / "o" / "trace.csv"));
    CHECK(rows[0] == "operation,divergence");
    for (std::size_t i = 1; i < rows.size(); ++i) d.push_back(std::stod(rows[i].substr(rows[i].find(',') + 1)));
    return d;
  };
  const auto flat = trace({{"channel", "pauli"}, {"rate", 0.0}, {"operations", 50}});
  REQUIRE(flat.size() == 51);
  for (double x : flat) CHECK(std::abs(x - flat[0]) <= 1e-12);
  const auto dep = trace({{"channel", "depolarizing"}, {"rate", 0.01}, {"operations", 100}});
  for (std::size_t i = 1; i < dep.size(); ++i) CHECK(dep[i] < dep[i - 1]);
  const auto random = trace({{"channel", "pauli"}, {"rate", 0.02}, {"operations", 100}});
  for (std::size_t i = 1; i < random.size(); ++i) CHECK(random[i] <= random[i - 1]);

  const fs::path cfg = write_config(dir, json{{"trace", {{"channel", "thermal"}}}});
  CHECK(run("trace-divergence --config " + cfg.string() + " --out " + (dir / "o").string(), dir / "o.log") == 2);
}

TEST_CASE("config parsing resolves relative paths and thread overrides") {
  const json j = {{"data", {{"benchmark", "MNIST-4"}, {"images", "img.gz"}, {"labels", "/abs/lbl.gz"}}}};
  const qmit::ExperimentConfig cfg = qmit::parse_config(j, "/some/dir");
  CHECK(cfg.data.images == "/some/dir/img.gz");
  CHECK(cfg.data.labels == "/abs/lbl.gz");
  CHECK(cfg.train.classes == 4);
  qmit::ExperimentConfig c2 = cfg;
  setenv("QMIT_THREADS", "3", 1);
  qmit::apply_thread_env(c2);
  CHECK(c2.train.threads == 3);
  unsetenv("QMIT_THREADS");
  CHECK(qmit::format_double(0.1) == "0.10000000000000001");
  CHECK(std::stod(qmit::format_double(1.0 / 3.0)) == 1.0 / 3.0);
}
