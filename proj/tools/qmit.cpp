// qmit: training, ablation grids, divergence traces and the self-test suite.
#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "qmit/errors.hpp"
#include "qmit/experiment.hpp"
#include "qmit/selftest.hpp"

namespace {

enum Exit { kOk = 0, kSelftestFailed = 1, kConfigError = 2, kRuntimeError = 3 };

using Command = void (*)(const qmit::ExperimentConfig&, const std::filesystem::path&);

int run_command(Command cmd, const std::string& config_path, const std::string& out_dir) {
  qmit::ExperimentConfig cfg;
  try {
    cfg = qmit::load_config(config_path);
    qmit::apply_thread_env(cfg);
  } catch (const qmit::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const qmit::ValidationError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  }
  try {
    cmd(cfg, out_dir);
  } catch (const qmit::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Density-matrix simulation and training for learned noise mitigation"};
  app.set_version_flag("--version", std::string("qmit ") + qmit::code_version());
  app.require_subcommand(1);

  std::string config, out;
  auto add_io = [&](CLI::App* sub) {
    sub->add_option("--config", config, "JSON config file")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out, "output directory")->required();
  };
  CLI::App* train = app.add_subcommand("train", "train a model, repeated over seeds");
  add_io(train);
  CLI::App* ablation = app.add_subcommand("ablation", "design x step x loss grid, optional layer sweep");
  add_io(ablation);
  CLI::App* trace = app.add_subcommand("trace-divergence", "divergence to the maximally mixed state per operation");
  add_io(trace);
  CLI::App* selftest = app.add_subcommand("selftest", "run the invariant suite");
  bool inject_fault = false;
  selftest->add_flag("--inject-fault", inject_fault)->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  if (*train) return run_command(qmit::run_train_command, config, out);
  if (*ablation) return run_command(qmit::run_ablation_command, config, out);
  if (*trace) return run_command(qmit::run_trace_command, config, out);

  qmit::SelftestOptions opts;
  opts.corrupt_inverse_order = inject_fault;
  try {
    return qmit::print_results(std::cout, qmit::run_selftest(opts)) ? kOk : kSelftestFailed;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
}
