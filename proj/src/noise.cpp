#include "qmit/noise.hpp"

#include <cmath>
#include <numeric>

#include "qmit/errors.hpp"

namespace qmit {

// --- PauliString -------------------------------------------------------------

PauliString::PauliString(std::string_view letters) : letters_(letters) {
  const int n = static_cast<int>(letters_.size());
  check_qubit_count(n);
  for (int q = 0; q < n; ++q) {
    const auto bit = static_cast<std::uint32_t>(qubit_bit(q, n));
    switch (letters_[static_cast<std::size_t>(q)]) {
      case 'I': break;
      case 'X': mask_.x |= bit; break;
      case 'Y': mask_.x |= bit; mask_.z |= bit; break;
      case 'Z': mask_.z |= bit; break;
      default:
        throw ValidationError("invalid Pauli letter '" + std::string(1, letters_[static_cast<std::size_t>(q)]) +
                              "' in \"" + letters_ + "\"");
    }
  }
}

PauliString PauliString::single(Axis axis, int qubit, int n) {
  check_qubit_count(n);
  check_qubit_index(qubit, n, "Pauli");
  std::string s(static_cast<std::size_t>(n), 'I');
  s[static_cast<std::size_t>(qubit)] = axis_name(axis);
  return PauliString(s);
}

bool PauliString::is_identity() const { return mask_.x == 0 && mask_.z == 0; }

CMatrix PauliString::matrix() const {
  CMatrix m = CMatrix::Identity(1, 1);
  for (char c : letters_) {
    const CMatrix f = c == 'I' ? CMatrix(CMatrix::Identity(2, 2)) : pauli_matrix(parse_axis(c));
    CMatrix next(m.rows() * 2, m.cols() * 2);
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) next.block(2 * i, 2 * j, 2, 2) = m(i, j) * f;
    m = std::move(next);
  }
  return m;
}

// --- NoiseModel --------------------------------------------------------------

namespace {

void check_rate(double r) {
  if (!std::isfinite(r)) throw ValidationError("noise rate is not finite");
  if (r < 0.0) throw ValidationError("noise rate " + std::to_string(r) + " is negative");
}

void check_dims(const DensityMatrix& rho, const NoiseModel& model) {
  if (rho.qubits() != model.qubits())
    throw ValidationError("noise model acts on " + std::to_string(model.qubits()) +
                          " qubits but state has " + std::to_string(rho.qubits()));
}

// 1 - w computed without cancellation
double one_minus_weight(double rate) { return -0.5 * std::expm1(-2.0 * rate); }

}  // namespace

NoiseModel::NoiseModel(int n, std::vector<NoiseGenerator> generators) : n_(n), generators_(std::move(generators)) {
  check_qubit_count(n_);
  for (const auto& g : generators_) {
    if (g.pauli.qubits() != n_) throw ValidationError("generator " + g.pauli.letters() + " has wrong qubit count");
    if (g.pauli.is_identity()) throw ValidationError("identity Pauli is not a valid noise generator");
    check_rate(g.rate);
  }
}

std::vector<double> NoiseModel::rates() const {
  std::vector<double> out;
  out.reserve(generators_.size());
  for (const auto& g : generators_) out.push_back(g.rate);
  return out;
}

void NoiseModel::set_rates(const std::vector<double>& rates) {
  if (rates.size() != generators_.size()) throw ValidationError("rate vector length mismatch");
  for (double r : rates) check_rate(r);
  for (std::size_t i = 0; i < rates.size(); ++i) generators_[i].rate = rates[i];
}

double NoiseModel::total_rate() const {
  return std::accumulate(generators_.begin(), generators_.end(), 0.0,
                         [](double acc, const NoiseGenerator& g) { return acc + g.rate; });
}

double channel_weight(double rate) { return 0.5 * (1.0 + std::exp(-2.0 * rate)); }

std::vector<PauliString> default_generators(int n) {
  std::vector<PauliString> out;
  out.reserve(static_cast<std::size_t>(3 * n));
  for (int q = 0; q < n; ++q)
    for (Axis a : {Axis::X, Axis::Y, Axis::Z}) out.push_back(PauliString::single(a, q, n));
  return out;
}

NoiseModel uniform_model(const std::vector<PauliString>& generators, int n, double rate) {
  std::vector<NoiseGenerator> gens;
  gens.reserve(generators.size());
  for (const auto& p : generators) gens.push_back({p, rate});
  return NoiseModel(n, std::move(gens));
}

NoiseModel depolarizing_model(int n, double rate) { return uniform_model(default_generators(n), n, rate); }

NoiseModel random_noise_model(int n, Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<NoiseGenerator> gens;
  for (auto& p : default_generators(n)) gens.push_back({std::move(p), dist(rng)});
  return NoiseModel(n, std::move(gens));
}

// --- channels ----------------------------------------------------------------

void apply_channel_inplace(CMatrix& rho, const NoiseModel& model) {
  for (const auto& g : model.generators()) {
    if (g.rate == 0.0) continue;
    const double q = one_minus_weight(g.rate);
    kernels::pauli_mix(rho, g.pauli.mask(), 1.0 - q, q);
  }
}

void apply_inverse_channel_inplace(CMatrix& rho, const NoiseModel& model) {
  for (const auto& g : model.generators()) {
    if (!std::isfinite(g.rate)) throw ValidationError("inverse channel needs finite rates");
    if (g.rate == 0.0) continue;
    const double q = one_minus_weight(g.rate);
    const double norm = std::exp(2.0 * g.rate);  // (2w - 1)^{-1}
    kernels::pauli_mix(rho, g.pauli.mask(), norm * (1.0 - q), -norm * q);
  }
}

DensityMatrix apply_linear_channel(const DensityMatrix& rho, const NoiseModel& model) {
  check_dims(rho, model);
  const CMatrix& in = rho.matrix();
  CMatrix out = in;
  for (const auto& g : model.generators()) {
    if (g.rate == 0.0) continue;
    out += g.rate * (kernels::pauli_conjugate(in, g.pauli.mask()) - in);
  }
  return DensityMatrix(rho.qubits(), std::move(out), StateCheck::None);
}

DensityMatrix apply_channel(const DensityMatrix& rho, const NoiseModel& model) {
  check_dims(rho, model);
  CMatrix out = rho.matrix();
  apply_channel_inplace(out, model);
  return DensityMatrix(rho.qubits(), std::move(out), StateCheck::None);
}

DensityMatrix apply_inverse_channel(const DensityMatrix& rho, const NoiseModel& model) {
  check_dims(rho, model);
  CMatrix out = rho.matrix();
  apply_inverse_channel_inplace(out, model);
  return DensityMatrix(rho.qubits(), std::move(out), StateCheck::None);
}

double sampling_overhead(const NoiseModel& model) { return std::exp(2.0 * model.total_rate()); }

double sampling_overhead_product(const NoiseModel& model) {
  double gamma = 1.0;
  for (const auto& g : model.generators()) gamma /= 2.0 * channel_weight(g.rate) - 1.0;
  return gamma;
}

DensityMatrix amplitude_damping(const DensityMatrix& rho, double gamma, int target) {
  if (!(gamma >= 0.0 && gamma <= 1.0))
    throw ValidationError("amplitude damping probability " + std::to_string(gamma) + " outside [0, 1]");
  const int n = rho.qubits();
  check_qubit_index(target, n, "damping target");
  Eigen::Matrix2cd k0, k1;
  k0 << 1.0, 0.0, 0.0, std::sqrt(1.0 - gamma);
  k1 << 0.0, std::sqrt(gamma), 0.0, 0.0;
  CMatrix a = rho.matrix();
  CMatrix b = rho.matrix();
  kernels::conjugate_single(a, k0, target, n);
  kernels::conjugate_single(b, k1, target, n);
  return DensityMatrix(n, a + b, StateCheck::None);
}

// --- MitigationModel -----------------------------------------------------------

MitigationModel MitigationModel::zeros(int n, std::size_t num_layers) {
  MitigationModel m;
  const auto gens = default_generators(n);
  for (std::size_t l = 0; l < num_layers; ++l) m.layers.push_back(uniform_model(gens, n, 0.0));
  return m;
}

std::size_t MitigationModel::num_rates() const {
  std::size_t total = 0;
  for (const auto& l : layers) total += l.size();
  return total;
}

std::vector<double> MitigationModel::flat_rates() const {
  std::vector<double> out;
  for (const auto& l : layers)
    for (const auto& g : l.generators()) out.push_back(g.rate);
  return out;
}

void MitigationModel::set_flat_rates(const std::vector<double>& rates) {
  if (rates.size() != num_rates()) throw ValidationError("mitigation rate vector length mismatch");
  auto it = rates.begin();
  for (auto& l : layers) {
    std::vector<double> chunk(it, it + static_cast<std::ptrdiff_t>(l.size()));
    l.set_rates(chunk);
    it += static_cast<std::ptrdiff_t>(l.size());
  }
}

// --- JSON --------------------------------------------------------------------

nlohmann::json to_json(const NoiseModel& model) {
  nlohmann::json gens = nlohmann::json::array();
  for (const auto& g : model.generators()) gens.push_back({{"pauli", g.pauli.letters()}, {"lambda", g.rate}});
  return {{"n", model.qubits()}, {"generators", gens}};
}

NoiseModel noise_model_from_json(const nlohmann::json& j) {
  try {
    const int n = j.at("n").get<int>();
    std::vector<NoiseGenerator> gens;
    for (const auto& g : j.at("generators"))
      gens.push_back({PauliString(g.at("pauli").get<std::string>()), g.at("lambda").get<double>()});
    return NoiseModel(n, std::move(gens));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("noise model JSON: ") + e.what());
  }
}

}  // namespace qmit
