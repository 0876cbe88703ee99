#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "qmit/noise.hpp"
#include "qmit/qsim.hpp"
#include "qmit/random.hpp"

namespace qmit {

/// Per-qubit rotation block of a layer: RX; U2 = RX then RY; U3 = RX, RY, RZ.
enum class Design { RX, U2, U3 };

int rotations_per_qubit(Design d);
std::string design_name(Design d);
Design parse_design(std::string_view s);
Axis design_axis(int slot);

/// One parameterized layer: rotations on every qubit, then a CNOT ring.
class LayerSpec {
 public:
  /// `theta` is qubit-major: theta[q * rotations_per_qubit(design) + slot].
  LayerSpec(Design design, int n, std::vector<double> theta);

  Design design() const noexcept { return design_; }
  int qubits() const noexcept { return n_; }
  int slots() const noexcept { return rotations_per_qubit(design_); }
  std::size_t num_params() const noexcept { return theta_.size(); }
  const std::vector<double>& theta() const noexcept { return theta_; }
  double angle(int qubit, int slot) const { return theta_[static_cast<std::size_t>(qubit * slots() + slot)]; }
  void set_theta(std::vector<double> theta);

 private:
  Design design_;
  int n_;
  std::vector<double> theta_;
};

/// CNOT(j, j+1 mod n) for ascending j; empty for n = 1.
std::vector<std::pair<int, int>> cnot_ring(int n);

struct EncoderSpec {
  int n = 4;
  std::string axes = "XYZ";
  int features = 64;

  /// ceil(features / n)
  int sublayers() const { return (features + n - 1) / n; }
};

enum class ExecutionMode { LossOnly, Cascaded };

std::string mode_name(ExecutionMode m);
ExecutionMode parse_mode(std::string_view s);

struct CircuitSpec {
  int n = 4;
  EncoderSpec encoder;
  std::vector<LayerSpec> layers;

  std::size_t num_layers() const noexcept { return layers.size(); }
  std::size_t num_params() const;
  std::vector<double> flat_theta() const;
  void set_flat_theta(const std::vector<double>& theta);

  /// H_i = I^{(x)i} (x) sigma_z (x) I^{(x)(n-i-1)}, i = 0..n-1
  std::vector<Observable> observables() const;

  void validate() const;
};

CircuitSpec make_circuit(int n, std::size_t num_layers, Design design, const std::vector<double>& theta);
CircuitSpec random_circuit(int n, std::size_t num_layers, Design design, Rng& rng, double angle_range);

/// Dense layer unitary: CNOT ring composed after the rotations.
Unitary build_layer_unitary(const LayerSpec& layer);

/// Kernel path: rho <- V rho V^dagger and rho <- V^dagger rho V.
void apply_layer(CMatrix& rho, const LayerSpec& layer);
void apply_layer_adjoint(CMatrix& rho, const LayerSpec& layer);

/// Phase encoding: sub-layer t rotates qubit j by pi * x[t*n + j] about axes[t mod |axes|].
DensityMatrix encode(std::span<const double> x, const EncoderSpec& spec);

/// rho_1..rho_L
std::vector<DensityMatrix> forward_noise_free(const DensityMatrix& rho0, const CircuitSpec& circuit);

/// rho~_i = Lambda_i(V_i rho~_{i-1} V_i^dagger), i = 1..L
std::vector<DensityMatrix> forward_noisy(const DensityMatrix& rho0, const CircuitSpec& circuit,
                                         const std::vector<NoiseModel>& noise);

struct MitigatedPass {
  std::vector<DensityMatrix> states;     // noisy outputs of each layer
  std::vector<DensityMatrix> mitigated;  // Lambda^-1 applied to each of them
};

/// LossOnly: the unmitigated chain propagates, mitigation is applied per layer on the side.
/// Cascaded: each layer consumes the previous mitigated state.
MitigatedPass forward_mitigated(const DensityMatrix& rho0, const CircuitSpec& circuit,
                                const std::vector<NoiseModel>& noise, const MitigationModel& mitigation,
                                ExecutionMode mode);

/// z_i = Tr(H_i rho)
std::vector<double> readout(const DensityMatrix& rho, const CircuitSpec& circuit);
std::vector<double> readout_z(const CMatrix& rho, int n);

nlohmann::json to_json(const CircuitSpec& circuit);
CircuitSpec circuit_from_json(const nlohmann::json& j);

}  // namespace qmit
