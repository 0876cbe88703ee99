#include "qmit/pqc.hpp"

#include <cmath>
#include <numbers>

#include "qmit/errors.hpp"
#include "qmit/kernels.hpp"

namespace qmit {

int rotations_per_qubit(Design d) {
  switch (d) {
    case Design::RX: return 1;
    case Design::U2: return 2;
    case Design::U3: return 3;
  }
  return 0;
}

std::string design_name(Design d) {
  switch (d) {
    case Design::RX: return "RX";
    case Design::U2: return "U2";
    case Design::U3: return "U3";
  }
  return "?";
}

Design parse_design(std::string_view s) {
  if (s == "RX") return Design::RX;
  if (s == "U2") return Design::U2;
  if (s == "U3") return Design::U3;
  throw ValidationError("unknown circuit design \"" + std::string(s) + "\" (expected RX, U2 or U3)");
}

Axis design_axis(int slot) {
  static constexpr Axis order[] = {Axis::X, Axis::Y, Axis::Z};
  return order[slot];
}

std::string mode_name(ExecutionMode m) { return m == ExecutionMode::LossOnly ? "loss_only" : "cascaded"; }

ExecutionMode parse_mode(std::string_view s) {
  if (s == "loss_only") return ExecutionMode::LossOnly;
  if (s == "cascaded") return ExecutionMode::Cascaded;
  throw ValidationError("unknown execution mode \"" + std::string(s) + "\" (expected loss_only or cascaded)");
}

// --- LayerSpec -----------------------------------------------------------------

LayerSpec::LayerSpec(Design design, int n, std::vector<double> theta) : design_(design), n_(n) {
  check_qubit_count(n);
  set_theta(std::move(theta));
}

void LayerSpec::set_theta(std::vector<double> theta) {
  const auto expected = static_cast<std::size_t>(n_ * slots());
  if (theta.size() != expected)
    throw ValidationError(design_name(design_) + " layer on " + std::to_string(n_) + " qubits needs " +
                          std::to_string(expected) + " angles, got " + std::to_string(theta.size()));
  for (double t : theta)
    if (!std::isfinite(t)) throw ValidationError("layer angle is not finite");
  theta_ = std::move(theta);
}

std::vector<std::pair<int, int>> cnot_ring(int n) {
  std::vector<std::pair<int, int>> ring;
  if (n < 2) return ring;
  for (int j = 0; j < n; ++j) ring.emplace_back(j, (j + 1) % n);
  return ring;
}

// --- CircuitSpec -----------------------------------------------------------------

std::size_t CircuitSpec::num_params() const {
  std::size_t total = 0;
  for (const auto& l : layers) total += l.num_params();
  return total;
}

std::vector<double> CircuitSpec::flat_theta() const {
  std::vector<double> out;
  out.reserve(num_params());
  for (const auto& l : layers) out.insert(out.end(), l.theta().begin(), l.theta().end());
  return out;
}

void CircuitSpec::set_flat_theta(const std::vector<double>& theta) {
  if (theta.size() != num_params()) throw ValidationError("theta vector length mismatch");
  auto it = theta.begin();
  for (auto& l : layers) {
    const auto k = static_cast<std::ptrdiff_t>(l.num_params());
    l.set_theta(std::vector<double>(it, it + k));
    it += k;
  }
}

std::vector<Observable> CircuitSpec::observables() const {
  std::vector<Observable> out;
  for (int i = 0; i < n; ++i) out.push_back(pauli_z_observable(i, n));
  return out;
}

void CircuitSpec::validate() const {
  check_qubit_count(n);
  if (layers.empty()) throw ValidationError("circuit needs at least one layer");
  if (encoder.n != n) throw ValidationError("encoder qubit count differs from circuit");
  if (encoder.axes.empty()) throw ValidationError("encoder axis cycle is empty");
  for (char c : encoder.axes) parse_axis(c);
  for (const auto& l : layers)
    if (l.qubits() != n) throw ValidationError("layer qubit count differs from circuit");
}

CircuitSpec make_circuit(int n, std::size_t num_layers, Design design, const std::vector<double>& theta) {
  CircuitSpec c;
  c.n = n;
  c.encoder.n = n;
  const auto per = static_cast<std::size_t>(n * rotations_per_qubit(design));
  if (theta.size() != per * num_layers) throw ValidationError("make_circuit: theta length mismatch");
  for (std::size_t l = 0; l < num_layers; ++l)
    c.layers.emplace_back(design, n,
                          std::vector<double>(theta.begin() + static_cast<std::ptrdiff_t>(l * per),
                                              theta.begin() + static_cast<std::ptrdiff_t>((l + 1) * per)));
  c.validate();
  return c;
}

CircuitSpec random_circuit(int n, std::size_t num_layers, Design design, Rng& rng, double angle_range) {
  std::uniform_real_distribution<double> dist(-angle_range, angle_range);
  std::vector<double> theta(static_cast<std::size_t>(n * rotations_per_qubit(design)) * num_layers);
  for (auto& t : theta) t = dist(rng);
  return make_circuit(n, num_layers, design, theta);
}

// --- layer application -------------------------------------------------------------

Unitary build_layer_unitary(const LayerSpec& layer) {
  const int n = layer.qubits();
  Unitary u = Unitary::identity(n);
  for (int q = 0; q < n; ++q)
    for (int s = 0; s < layer.slots(); ++s) u = rotation_gate(design_axis(s), layer.angle(q, s), q, n) * u;
  for (auto [c, t] : cnot_ring(n)) u = cnot_gate(c, t, n) * u;
  return u;
}

void apply_layer(CMatrix& rho, const LayerSpec& layer) {
  const int n = layer.qubits();
  for (int q = 0; q < n; ++q)
    for (int s = 0; s < layer.slots(); ++s)
      kernels::conjugate_single(rho, rotation_matrix(design_axis(s), layer.angle(q, s)), q, n);
  for (auto [c, t] : cnot_ring(n)) kernels::conjugate_cnot(rho, c, t, n);
}

void apply_layer_adjoint(CMatrix& rho, const LayerSpec& layer) {
  const int n = layer.qubits();
  const auto ring = cnot_ring(n);
  for (auto it = ring.rbegin(); it != ring.rend(); ++it) kernels::conjugate_cnot(rho, it->first, it->second, n);
  for (int q = n - 1; q >= 0; --q)
    for (int s = layer.slots() - 1; s >= 0; --s)
      kernels::conjugate_single(rho, rotation_matrix(design_axis(s), -layer.angle(q, s)), q, n);
}

// --- encoder -------------------------------------------------------------------------

DensityMatrix encode(std::span<const double> x, const EncoderSpec& spec) {
  check_qubit_count(spec.n);
  if (static_cast<int>(x.size()) != spec.features)
    throw ValidationError("encoder expects " + std::to_string(spec.features) + " features, got " +
                          std::to_string(x.size()));
  for (double v : x)
    if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("feature " + std::to_string(v) + " outside [0, 1]");
  if (spec.axes.empty()) throw ValidationError("encoder axis cycle is empty");

  const int n = spec.n;
  const std::size_t d = dimension(n);
  CVector psi = CVector::Zero(static_cast<Eigen::Index>(d));
  psi[0] = 1.0;
  for (int t = 0; t < spec.sublayers(); ++t) {
    const Axis axis = parse_axis(spec.axes[static_cast<std::size_t>(t) % spec.axes.size()]);
    for (int j = 0; j < n; ++j) {
      const int f = t * n + j;
      if (f >= spec.features) break;
      const Eigen::Matrix2cd g = rotation_matrix(axis, std::numbers::pi * x[static_cast<std::size_t>(f)]);
      const std::size_t bit = qubit_bit(j, n);
      for (std::size_t k0 = 0; k0 < d; ++k0) {
        if (k0 & bit) continue;
        const auto i0 = static_cast<Eigen::Index>(k0), i1 = static_cast<Eigen::Index>(k0 | bit);
        const cplx a = psi[i0], b = psi[i1];
        psi[i0] = g(0, 0) * a + g(0, 1) * b;
        psi[i1] = g(1, 0) * a + g(1, 1) * b;
      }
    }
  }
  return DensityMatrix(n, psi * psi.adjoint(), StateCheck::None);
}

// --- execution regimes ----------------------------------------------------------------

namespace {

void check_state(const DensityMatrix& rho0, const CircuitSpec& circuit) {
  circuit.validate();
  if (rho0.qubits() != circuit.n) throw ValidationError("initial state qubit count differs from circuit");
}

void check_noise(const CircuitSpec& circuit, const std::vector<NoiseModel>& noise) {
  if (noise.size() != circuit.num_layers())
    throw ValidationError("need one noise model per layer: " + std::to_string(circuit.num_layers()) +
                          " layers, " + std::to_string(noise.size()) + " models");
  for (const auto& m : noise)
    if (m.qubits() != circuit.n) throw ValidationError("noise model qubit count differs from circuit");
}

}  // namespace

std::vector<DensityMatrix> forward_noise_free(const DensityMatrix& rho0, const CircuitSpec& circuit) {
  check_state(rho0, circuit);
  std::vector<DensityMatrix> out;
  CMatrix rho = rho0.matrix();
  for (const auto& layer : circuit.layers) {
    apply_layer(rho, layer);
    out.emplace_back(circuit.n, rho, StateCheck::None);
  }
  return out;
}

std::vector<DensityMatrix> forward_noisy(const DensityMatrix& rho0, const CircuitSpec& circuit,
                                         const std::vector<NoiseModel>& noise) {
  check_state(rho0, circuit);
  check_noise(circuit, noise);
  std::vector<DensityMatrix> out;
  CMatrix rho = rho0.matrix();
  for (std::size_t l = 0; l < circuit.num_layers(); ++l) {
    apply_layer(rho, circuit.layers[l]);
    apply_channel_inplace(rho, noise[l]);
    out.emplace_back(circuit.n, rho, StateCheck::None);
  }
  return out;
}

MitigatedPass forward_mitigated(const DensityMatrix& rho0, const CircuitSpec& circuit,
                                const std::vector<NoiseModel>& noise, const MitigationModel& mitigation,
                                ExecutionMode mode) {
  check_state(rho0, circuit);
  check_noise(circuit, noise);
  if (mitigation.num_layers() != circuit.num_layers())
    throw ValidationError("need one mitigation model per layer");
  MitigatedPass pass;
  CMatrix rho = rho0.matrix();
  for (std::size_t l = 0; l < circuit.num_layers(); ++l) {
    apply_layer(rho, circuit.layers[l]);
    apply_channel_inplace(rho, noise[l]);
    CMatrix mitigated = rho;
    apply_inverse_channel_inplace(mitigated, mitigation.layers[l]);
    pass.states.emplace_back(circuit.n, rho, StateCheck::None);
    if (mode == ExecutionMode::Cascaded) rho = mitigated;
    pass.mitigated.emplace_back(circuit.n, std::move(mitigated), StateCheck::None);
  }
  return pass;
}

std::vector<double> readout_z(const CMatrix& rho, int n) {
  std::vector<double> z(static_cast<std::size_t>(n), 0.0);
  const std::size_t d = dimension(n);
  for (std::size_t k = 0; k < d; ++k) {
    const double p = rho(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)).real();
    for (int i = 0; i < n; ++i) z[static_cast<std::size_t>(i)] += (k & qubit_bit(i, n)) ? -p : p;
  }
  return z;
}

std::vector<double> readout(const DensityMatrix& rho, const CircuitSpec& circuit) {
  if (rho.qubits() != circuit.n) throw ValidationError("readout: qubit count mismatch");
  return readout_z(rho.matrix(), circuit.n);
}

// --- JSON ------------------------------------------------------------------------------

nlohmann::json to_json(const CircuitSpec& circuit) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : circuit.layers) {
    nlohmann::json rows = nlohmann::json::array();
    for (int q = 0; q < l.qubits(); ++q) {
      nlohmann::json row = nlohmann::json::array();
      for (int s = 0; s < l.slots(); ++s) row.push_back(l.angle(q, s));
      rows.push_back(row);
    }
    layers.push_back({{"design", design_name(l.design())}, {"theta", rows}});
  }
  return {{"n", circuit.n}, {"layers", layers}, {"encoder", {{"axes", circuit.encoder.axes}}}};
}

CircuitSpec circuit_from_json(const nlohmann::json& j) {
  try {
    CircuitSpec c;
    c.n = j.at("n").get<int>();
    check_qubit_count(c.n);
    c.encoder.n = c.n;
    if (j.contains("encoder")) c.encoder.axes = j.at("encoder").value("axes", std::string("XYZ"));
    for (const auto& lj : j.at("layers")) {
      const Design d = parse_design(lj.at("design").get<std::string>());
      std::vector<double> theta;
      const auto& rows = lj.at("theta");
      if (rows.size() != static_cast<std::size_t>(c.n))
        throw ValidationError("layer theta must have one row per qubit");
      for (const auto& row : rows) {
        if (row.size() != static_cast<std::size_t>(rotations_per_qubit(d)))
          throw ValidationError("layer theta row has wrong length for design " + design_name(d));
        for (const auto& v : row) theta.push_back(v.get<double>());
      }
      c.layers.emplace_back(d, c.n, std::move(theta));
    }
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("circuit JSON: ") + e.what());
  }
}

}  // namespace qmit
