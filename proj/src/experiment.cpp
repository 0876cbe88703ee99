#include "qmit/experiment.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <set>

#include "qmit/errors.hpp"
#include "qmit/losses.hpp"

namespace qmit {

namespace fs = std::filesystem;
using nlohmann::json;

const char* code_version() { return QMIT_VERSION; }

// --- config reading -------------------------------------------------------------

namespace {

/// Reads one JSON object, remembering which keys were consumed.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + ": expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  template <class T>
  T get(const std::string& key, T fallback) {
    seen_.insert(key);
    if (!has(key)) return fallback;
    try {
      return j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigError(field(key) + ": wrong type (" + j_.at(key).dump() + ")");
    }
  }

  template <class T>
  std::optional<T> maybe(const std::string& key) {
    seen_.insert(key);
    if (!has(key)) return std::nullopt;
    return get<T>(key, T{});
  }

  Section sub(const std::string& key) {
    seen_.insert(key);
    static const json empty = json::object();
    return Section(has(key) ? j_.at(key) : empty, field(key));
  }

  /// Rejects keys nobody asked for.
  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) throw ConfigError(field(it.key()) + ": unknown key");
  }

  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  std::string where() const { return path_.empty() ? "config" : path_; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::string resolve_path(const std::string& p, const fs::path& base) {
  if (p.empty() || fs::path(p).is_absolute() || base.empty()) return p;
  return (base / p).lexically_normal().string();
}

template <class F>
auto field_check(const std::string& field, F&& f) {
  try {
    return f();
  } catch (const ValidationError& e) {
    throw ConfigError(field + ": " + e.what());
  }
}

}  // namespace

ExperimentConfig parse_config(const json& j, const fs::path& base_dir) {
  ExperimentConfig cfg;
  cfg.source = j;
  Section root(j, "");
  TrainConfig& t = cfg.train;

  t.seed = root.get<std::uint64_t>("seed", 0);
  cfg.repeats = root.get<int>("repeats", 1);
  if (cfg.repeats < 1) throw ConfigError("repeats: must be >= 1");
  t.threads = root.get<int>("threads", 0);
  t.validation_fraction = root.get<double>("validation_fraction", t.validation_fraction);
  t.train_theta = root.get<bool>("train_theta", true);
  t.train_rates = root.maybe<bool>("train_rates");

  {
    Section d = root.sub("data");
    DataConfig& dc = cfg.data;
    dc.benchmark = d.get<std::string>("benchmark", dc.benchmark);
    dc.images = resolve_path(d.get<std::string>("images", ""), base_dir);
    dc.labels = resolve_path(d.get<std::string>("labels", ""), base_dir);
    dc.test_images = resolve_path(d.get<std::string>("test_images", ""), base_dir);
    dc.test_labels = resolve_path(d.get<std::string>("test_labels", ""), base_dir);
    dc.train_cap = d.get<std::size_t>("train_cap", dc.train_cap);
    dc.test_cap = d.get<std::size_t>("test_cap", dc.test_cap);
    dc.seed = d.maybe<std::uint64_t>("seed");
    dc.classes = d.get<int>("classes", dc.classes);
    dc.per_class = d.get<std::size_t>("per_class", dc.per_class);
    dc.test_per_class = d.get<std::size_t>("test_per_class", dc.test_per_class);
    dc.separation = d.get<double>("separation", dc.separation);
    d.finish();
    if (dc.benchmark == "synthetic") {
      if (dc.classes != 2 && dc.classes != 4) throw ConfigError("data.classes: must be 2 or 4");
      if (dc.per_class == 0) throw ConfigError("data.per_class: must be >= 1");
      t.classes = dc.classes;
    } else {
      t.classes = field_check("data.benchmark", [&] { return benchmark_spec(dc.benchmark).classes(); });
      if (dc.test_images.empty() != dc.test_labels.empty())
        throw ConfigError("data.test_images/data.test_labels: give both or neither");
    }
  }
  {
    Section m = root.sub("model");
    t.n = m.get<int>("n", t.n);
    t.layers = m.get<int>("layers", t.layers);
    t.design = field_check("model.design", [&] { return parse_design(m.get<std::string>("design", "U2")); });
    t.mode = field_check("model.mode", [&] { return parse_mode(m.get<std::string>("mode", "loss_only")); });
    m.finish();
  }
  {
    Section l = root.sub("loss");
    t.weights.fb = l.get<double>("alpha_fb", 1.0);
    t.weights.task = l.get<double>("alpha_task", 1.0);
    t.step = l.get<int>("step", 1);
    l.finish();
  }
  {
    Section o = root.sub("optimizer");
    t.epochs = o.get<int>("epochs", t.epochs);
    t.batch_size = o.get<int>("batch_size", t.batch_size);
    t.learning_rate = o.get<double>("learning_rate", t.learning_rate);
    t.momentum = o.get<double>("momentum", t.momentum);
    t.init_range = o.get<double>("init_range", t.init_range);
    o.finish();
  }
  {
    Section nz = root.sub("noise");
    const auto source = nz.get<std::string>("source", "seeded");
    if (source == "seeded") t.noise.kind = NoiseSource::Kind::Seeded;
    else if (source == "file") t.noise.kind = NoiseSource::Kind::File;
    else if (source == "none") t.noise.kind = NoiseSource::Kind::None;
    else throw ConfigError("noise.source: expected seeded, file or none, got '" + source + "'");
    t.noise.lo = nz.get<double>("lo", t.noise.lo);
    t.noise.hi = nz.get<double>("hi", t.noise.hi);
    t.noise.seed = nz.maybe<std::uint64_t>("seed");
    t.noise.path = resolve_path(nz.get<std::string>("path", ""), base_dir);
    nz.finish();
  }
  if (root.has("ablation")) {
    Section a = root.sub("ablation");
    AblationGrid g;
    for (const auto& s : a.get<std::vector<std::string>>("designs", {"RX", "U2", "U3"}))
      g.designs.push_back(field_check("ablation.designs", [&] { return parse_design(s); }));
    g.steps = a.get<std::vector<int>>("steps", {4, 2, 1});
    g.alpha_fb = a.get<std::vector<double>>("alpha_fb", {0.0, 1.0});
    g.layers = a.get<std::vector<int>>("layers", {});
    a.finish();
    if (g.designs.empty() || g.steps.empty() || g.alpha_fb.empty()) throw ConfigError("ablation: empty grid axis");
    for (int k : g.steps)
      if (k < 1 || t.layers % k != 0)
        throw ConfigError("ablation.steps: " + std::to_string(k) + " does not divide model.layers");
    for (int l : g.layers)
      if (l < 1) throw ConfigError("ablation.layers: must be >= 1");
    for (double a_fb : g.alpha_fb)
      if (!(a_fb >= 0.0)) throw ConfigError("ablation.alpha_fb: must be >= 0");
    for (double a_fb : g.alpha_fb) {
      TrainConfig probe = t;
      probe.weights.fb = a_fb;
      field_check("ablation.alpha_fb", [&] { probe.weights.validate(); return 0; });
    }
    cfg.ablation = g;
  } else {
    root.sub("ablation");
  }
  {
    Section tr = root.sub("trace");
    TraceConfig& tc = cfg.trace;
    tc.channel = tr.get<std::string>("channel", tc.channel);
    tc.n = tr.get<int>("n", tc.n);
    tc.operations = tr.get<int>("operations", tc.operations);
    tc.alpha = tr.get<double>("alpha", tc.alpha);
    tc.rate = tr.get<double>("rate", tc.rate);
    tc.gamma = tr.get<double>("gamma", tc.gamma);
    tc.seed = tr.get<std::uint64_t>("seed", t.seed);
    tr.finish();
    if (tc.channel != "pauli" && tc.channel != "depolarizing" && tc.channel != "amplitude_damping")
      throw ConfigError("trace.channel: expected pauli, depolarizing or amplitude_damping");
    if (tc.operations < 0) throw ConfigError("trace.operations: must be >= 0");
    if (!(tc.alpha > 0.0) || tc.alpha == 1.0) throw ConfigError("trace.alpha: must be > 0 and != 1");
    if (!(tc.rate >= 0.0)) throw ConfigError("trace.rate: must be >= 0");
    if (!(tc.gamma >= 0.0 && tc.gamma <= 1.0)) throw ConfigError("trace.gamma: must be in [0, 1]");
    field_check("trace.n", [&] { check_qubit_count(tc.n); return 0; });
  }
  root.finish();
  field_check("config", [&] { t.validate(); return 0; });
  return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_config(j, path.parent_path());
}

json resolved_json(const ExperimentConfig& cfg) {
  const TrainConfig& t = cfg.train;
  const DataConfig& d = cfg.data;
  json j;
  j["seed"] = t.seed;
  j["repeats"] = cfg.repeats;
  j["threads"] = t.threads;
  j["validation_fraction"] = t.validation_fraction;
  j["train_theta"] = t.train_theta;
  j["train_rates"] = t.learns_rates();
  j["data"] = {{"benchmark", d.benchmark}, {"images", d.images}, {"labels", d.labels},
               {"test_images", d.test_images}, {"test_labels", d.test_labels}, {"train_cap", d.train_cap},
               {"test_cap", d.test_cap}, {"seed", d.seed.value_or(t.seed)}, {"classes", t.classes},
               {"per_class", d.per_class}, {"test_per_class", d.test_per_class}, {"separation", d.separation}};
  j["model"] = {{"n", t.n}, {"layers", t.layers}, {"design", design_name(t.design)}, {"mode", mode_name(t.mode)}};
  j["loss"] = {{"alpha_fb", t.weights.fb}, {"alpha_task", t.weights.task}, {"step", t.step}};
  j["optimizer"] = {{"epochs", t.epochs}, {"batch_size", t.batch_size}, {"learning_rate", t.learning_rate},
                    {"momentum", t.momentum}, {"init_range", t.init_range}};
  const char* sources[] = {"seeded", "file", "none"};
  j["noise"] = {{"source", sources[static_cast<int>(t.noise.kind)]}, {"lo", t.noise.lo}, {"hi", t.noise.hi},
                {"seed", t.noise.seed.value_or(t.seed)}, {"path", t.noise.path}};
  if (cfg.ablation) {
    std::vector<std::string> designs;
    for (Design ds : cfg.ablation->designs) designs.push_back(design_name(ds));
    j["ablation"] = {{"designs", designs}, {"steps", cfg.ablation->steps}, {"alpha_fb", cfg.ablation->alpha_fb},
                     {"layers", cfg.ablation->layers}};
  }
  const TraceConfig& tc = cfg.trace;
  j["trace"] = {{"channel", tc.channel}, {"n", tc.n}, {"operations", tc.operations}, {"alpha", tc.alpha},
                {"rate", tc.rate}, {"gamma", tc.gamma}, {"seed", tc.seed}};
  return j;
}

void apply_thread_env(ExperimentConfig& cfg) {
  const char* env = std::getenv("QMIT_THREADS");
  if (!env || !*env) return;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v < 0) throw ConfigError(std::string("QMIT_THREADS: expected a nonnegative integer, got '") + env + "'");
  cfg.train.threads = static_cast<int>(v);
}

Split load_datasets(const ExperimentConfig& cfg) {
  const DataConfig& d = cfg.data;
  const std::uint64_t seed = d.seed.value_or(cfg.train.seed);
  if (d.benchmark == "synthetic") {
    // one draw, so train and test share the class anchors
    Dataset all = synthetic_blobs(d.classes, d.per_class + d.test_per_class, d.separation, seed);
    Split s;
    s.train.classes = s.test.classes = d.classes;
    const auto per = static_cast<std::size_t>(d.classes);
    for (std::size_t i = 0; i < all.size(); ++i)
      (i < d.per_class * per ? s.train : s.test).samples.push_back(std::move(all.samples[i]));
    return s;
  }
  if (d.images.empty() || d.labels.empty()) throw ConfigError("data.images/data.labels: required for " + d.benchmark);
  const BenchmarkSpec spec = benchmark_spec(d.benchmark);
  const RawDataset raw = load_idx(d.images, d.labels);
  if (d.test_images.empty()) return make_benchmark(raw, spec, d.train_cap, d.test_cap, seed);
  const RawDataset test_raw = load_idx(d.test_images, d.test_labels);
  return make_benchmark(raw, test_raw, spec, d.train_cap, d.test_cap, seed);
}

// --- output --------------------------------------------------------------------

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_provenance(std::ostream& out, const ExperimentConfig& cfg) {
  out << "# qmit " << code_version() << "\n";
  out << "# config " << resolved_json(cfg).dump() << "\n";
}

namespace {

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

void write_json(const fs::path& path, const json& j) {
  auto out = open_output(path);
  out << j.dump(2) << "\n";
}

json noise_json(const std::vector<NoiseModel>& noise) {
  json j = json::array();
  for (const auto& m : noise) j.push_back(to_json(m));
  return j;
}

std::string join_accuracies(const std::vector<double>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? ";" : "") + format_double(xs[i]);
  return s;
}

}  // namespace

void run_train_command(const ExperimentConfig& cfg, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  const Split split = load_datasets(cfg);
  const TrainConfig& t = cfg.train;
  const std::vector<NoiseModel> noise = true_noise(t, t.seed);

  auto metrics = open_output(out_dir / "metrics.csv");
  write_provenance(metrics, cfg);
  metrics << "repeat,epoch,L_fb,L_task,train_acc,val_acc,clamped_mass\n";

  json summary;
  summary["label"] = t.weights.fb == 0.0 ? "baseline" : "mitigated";
  summary["benchmark"] = cfg.data.benchmark;
  summary["version"] = code_version();
  summary["config"] = resolved_json(cfg);
  summary["true_noise"] = noise_json(noise);
  summary["train_size"] = split.train.size();
  summary["test_size"] = split.test.size();

  std::vector<double> accuracies;
  json runs = json::array();
  for (int r = 0; r < cfg.repeats; ++r) {
    const std::uint64_t seed = t.seed + static_cast<std::uint64_t>(r);
    const RunResult run = train_model(t, split.train, split.test, seed, noise, [&](const EpochMetrics& m) {
      metrics << r << ',' << m.epoch << ',' << format_double(m.fb) << ',' << format_double(m.task) << ','
              << format_double(m.train_acc) << ',' << format_double(m.val_acc) << ','
              << format_double(m.clamped_mass) << '\n';
      metrics.flush();
    });
    json ck = checkpoint_json(run.best, t, seed);
    ck["version"] = code_version();
    ck["config"] = resolved_json(cfg);
    write_json(out_dir / ("checkpoint-" + std::to_string(r) + ".json"), ck);
    accuracies.push_back(run.test_accuracy);
    runs.push_back({{"seed", seed}, {"best_epoch", run.best_epoch}, {"test_accuracy", run.test_accuracy}});
  }
  double mean = 0.0;
  for (double a : accuracies) mean += a;
  mean /= static_cast<double>(accuracies.size());
  summary["runs"] = runs;
  summary["accuracies"] = accuracies;
  summary["mean"] = mean;
  summary["std"] = sample_stddev(accuracies);
  write_json(out_dir / "summary.json", summary);
}

void run_ablation_command(const ExperimentConfig& cfg, const fs::path& out_dir) {
  if (!cfg.ablation) throw ConfigError("ablation: section missing");
  const AblationGrid& g = *cfg.ablation;
  fs::create_directories(out_dir);
  const Split split = load_datasets(cfg);

  auto table = open_output(out_dir / "ablation.csv");
  write_provenance(table, cfg);
  table << "design,step,alpha_fb,setting,mean_acc,std_acc,accuracies\n";
  for (Design d : g.designs) {
    for (int k : g.steps) {
      for (double a : g.alpha_fb) {
        TrainConfig t = cfg.train;
        t.design = d;
        t.step = k;
        t.weights.fb = a;
        const ExperimentResult r = run_experiment(t, split.train, split.test, cfg.repeats);
        table << design_name(d) << ',' << k << ',' << format_double(a) << ','
              << (a == 0.0 ? "without_L_fb" : "with_L_fb") << ',' << format_double(r.mean) << ','
              << format_double(r.stddev) << ',' << join_accuracies(r.accuracies) << '\n';
        table.flush();
      }
    }
  }
  if (g.layers.empty()) return;

  auto layers = open_output(out_dir / "layers.csv");
  write_provenance(layers, cfg);
  layers << "layers,step,alpha_fb,setting,mean_acc,std_acc,accuracies\n";
  for (int L : g.layers) {
    for (double a : g.alpha_fb) {
      TrainConfig t = cfg.train;
      t.layers = L;
      if (L % t.step != 0) t.step = 1;
      t.weights.fb = a;
      const ExperimentResult r = run_experiment(t, split.train, split.test, cfg.repeats);
      layers << L << ',' << t.step << ',' << format_double(a) << ',' << (a == 0.0 ? "without_L_fb" : "with_L_fb")
             << ',' << format_double(r.mean) << ',' << format_double(r.stddev) << ','
             << join_accuracies(r.accuracies) << '\n';
      layers.flush();
    }
  }
}

// --- divergence trace ------------------------------------------------------------

namespace {

struct Gate {
  bool is_cnot;
  Axis axis;
  int a;  // qubit, or control
  int b;  // target
  double angle;
};

/// The gate sequence of an 8-layer U3 circuit with uniformly random angles.
std::vector<Gate> random_gate_sequence(int n, Rng& rng) {
  std::uniform_real_distribution<double> angle(-std::numbers::pi, std::numbers::pi);
  std::vector<Gate> gates;
  for (int layer = 0; layer < 8; ++layer) {
    for (int q = 0; q < n; ++q)
      for (int s = 0; s < 3; ++s) gates.push_back({false, design_axis(s), q, 0, angle(rng)});
    for (auto [c, t] : cnot_ring(n)) gates.push_back({true, Axis::X, c, t, 0.0});
  }
  return gates;
}

}  // namespace

std::vector<double> divergence_trace(const TraceConfig& cfg) {
  check_qubit_count(cfg.n);
  Rng rng(cfg.seed);
  const auto gates = random_gate_sequence(cfg.n, rng);
  std::optional<NoiseModel> pauli;
  if (cfg.channel == "depolarizing") pauli = depolarizing_model(cfg.n, cfg.rate);
  else if (cfg.channel == "pauli") pauli = random_noise_model(cfg.n, rng, 0.0, cfg.rate);
  else if (cfg.channel != "amplitude_damping") throw ValidationError("unknown channel '" + cfg.channel + "'");

  // Pauli channels and unitaries fix I, so for them rho holds the deviation rho - I/d
  CMatrix rho = basis_state(0, cfg.n).matrix();
  const bool unital = pauli.has_value();
  if (unital) rho.diagonal().array() -= 1.0 / static_cast<double>(rho.rows());
  auto divergence = [&] {
    return unital ? divergence_from_deviation(rho, cfg.alpha)
                  : divergence_to_maximally_mixed(DensityMatrix(cfg.n, rho, StateCheck::None), cfg.alpha);
  };
  std::vector<double> trace{divergence()};
  for (int k = 0; k < cfg.operations; ++k) {
    const Gate& g = gates[static_cast<std::size_t>(k) % gates.size()];
    if (g.is_cnot) kernels::conjugate_cnot(rho, g.a, g.b, cfg.n);
    else kernels::conjugate_single(rho, rotation_matrix(g.axis, g.angle), g.a, cfg.n);
    if (pauli) {
      apply_channel_inplace(rho, *pauli);
    } else {
      DensityMatrix s(cfg.n, rho, StateCheck::None);
      for (int q = 0; q < cfg.n; ++q) s = amplitude_damping(s, cfg.gamma, q);
      rho = s.matrix();
    }
    trace.push_back(divergence());
  }
  return trace;
}

void run_trace_command(const ExperimentConfig& cfg, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  const auto trace = divergence_trace(cfg.trace);
  auto out = open_output(out_dir / "trace.csv");
  write_provenance(out, cfg);
  out << "operation,divergence\n";
  for (std::size_t i = 0; i < trace.size(); ++i) out << i << ',' << format_double(trace[i]) << '\n';
}

}  // namespace qmit
