#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "qmit/kernels.hpp"
#include "qmit/qsim.hpp"
#include "qmit/random.hpp"

namespace qmit {

/// Tensor product of I/X/Y/Z letters; letter i acts on qubit i.
class PauliString {
 public:
  explicit PauliString(std::string_view letters);

  /// Single-letter string on `qubit` of an n-qubit register.
  static PauliString single(Axis axis, int qubit, int n);

  int qubits() const noexcept { return static_cast<int>(letters_.size()); }
  const std::string& letters() const noexcept { return letters_; }
  bool is_identity() const;
  kernels::PauliMask mask() const noexcept { return mask_; }

  /// Dense 2^n x 2^n matrix.
  CMatrix matrix() const;

  friend bool operator==(const PauliString& a, const PauliString& b) { return a.letters_ == b.letters_; }

 private:
  std::string letters_;
  kernels::PauliMask mask_;
};

struct NoiseGenerator {
  PauliString pauli;
  double rate;
};

/// Pauli-Lindblad model: generators sigma with nonnegative rates lambda_sigma.
class NoiseModel {
 public:
  NoiseModel(int n, std::vector<NoiseGenerator> generators);

  int qubits() const noexcept { return n_; }
  std::size_t size() const noexcept { return generators_.size(); }
  const std::vector<NoiseGenerator>& generators() const noexcept { return generators_; }

  std::vector<double> rates() const;
  /// Replaces all rates, keeping the generator set. Rates must be finite and >= 0.
  void set_rates(const std::vector<double>& rates);
  double total_rate() const;

 private:
  int n_;
  std::vector<NoiseGenerator> generators_;
};

/// w = (1 + e^{-2 lambda}) / 2
double channel_weight(double rate);

/// X_j, Y_j, Z_j for j = 0..n-1, in (qubit, X<Y<Z) order.
std::vector<PauliString> default_generators(int n);

NoiseModel depolarizing_model(int n, double rate);
NoiseModel uniform_model(const std::vector<PauliString>& generators, int n, double rate);

/// Independent uniform rates in [lo, hi] over the default generator set.
NoiseModel random_noise_model(int n, Rng& rng, double lo, double hi);

/// rho + sum lambda (sigma rho sigma - rho)
DensityMatrix apply_linear_channel(const DensityMatrix& rho, const NoiseModel& model);

/// prod over generators (in order) of rho -> w rho + (1 - w) sigma rho sigma
DensityMatrix apply_channel(const DensityMatrix& rho, const NoiseModel& model);

/// Exact inverse of apply_channel. The result is trace-one and Hermitian but may be non-positive.
DensityMatrix apply_inverse_channel(const DensityMatrix& rho, const NoiseModel& model);

/// exp(2 sum lambda)
double sampling_overhead(const NoiseModel& model);
/// prod (2w - 1)^{-1}
double sampling_overhead_product(const NoiseModel& model);

/// Kraus pair diag(1, sqrt(1-g)) and sqrt(g)|0><1| on `target`.
DensityMatrix amplitude_damping(const DensityMatrix& rho, double gamma, int target);

// In-place variants used on the hot paths.
void apply_channel_inplace(CMatrix& rho, const NoiseModel& model);
void apply_inverse_channel_inplace(CMatrix& rho, const NoiseModel& model);

/// One learnable noise model per circuit layer, sharing a generator set.
struct MitigationModel {
  std::vector<NoiseModel> layers;

  static MitigationModel zeros(int n, std::size_t num_layers);
  std::size_t num_layers() const noexcept { return layers.size(); }
  std::size_t num_rates() const;
  std::vector<double> flat_rates() const;
  void set_flat_rates(const std::vector<double>& rates);
};

nlohmann::json to_json(const NoiseModel& model);
NoiseModel noise_model_from_json(const nlohmann::json& j);

}  // namespace qmit
