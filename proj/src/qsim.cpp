#include "qmit/qsim.hpp"

#include <bit>
#include <cmath>
#include <string>

#include "qmit/errors.hpp"

namespace qmit {

namespace {

bool is_power_of_two(std::size_t v) { return v != 0 && std::has_single_bit(v); }

int qubits_for_dim(Eigen::Index d) {
  if (d <= 0 || !is_power_of_two(static_cast<std::size_t>(d)))
    throw ValidationError("matrix dimension " + std::to_string(d) + " is not a power of two");
  return std::countr_zero(static_cast<std::size_t>(d));
}

void check_square(int n, const CMatrix& data, const char* what) {
  check_qubit_count(n);
  const auto d = static_cast<Eigen::Index>(dimension(n));
  if (data.rows() != d || data.cols() != d)
    throw ValidationError(std::string(what) + ": expected " + std::to_string(d) + "x" +
                          std::to_string(d) + " matrix, got " + std::to_string(data.rows()) +
                          "x" + std::to_string(data.cols()));
}

}  // namespace

char axis_name(Axis a) {
  switch (a) {
    case Axis::X: return 'X';
    case Axis::Y: return 'Y';
    case Axis::Z: return 'Z';
  }
  return '?';
}

Axis parse_axis(char c) {
  switch (c) {
    case 'X': case 'x': return Axis::X;
    case 'Y': case 'y': return Axis::Y;
    case 'Z': case 'z': return Axis::Z;
    default: throw ValidationError(std::string("unknown rotation axis '") + c + "'");
  }
}

void check_qubit_count(int n) {
  if (n < 1 || n > kMaxQubits)
    throw ValidationError("qubit count " + std::to_string(n) + " outside [1, " +
                          std::to_string(kMaxQubits) + "]");
}

void check_qubit_index(int q, int n, const char* what) {
  if (q < 0 || q >= n)
    throw ValidationError(std::string(what) + " qubit " + std::to_string(q) +
                          " out of range for " + std::to_string(n) + " qubits");
}

// --- DensityMatrix ---------------------------------------------------------

DensityMatrix::DensityMatrix(int n, CMatrix data, StateCheck check) : n_(n), data_(std::move(data)) {
  check_square(n_, data_, "DensityMatrix");
  validate(check);
}

double DensityMatrix::purity() const { return real_trace_product(data_, data_); }

double DensityMatrix::min_eigenvalue() const { return hermitian_eig(data_).values[0]; }

void DensityMatrix::validate(StateCheck check) const {
  if (check == StateCheck::None) return;
  if (!data_.allFinite()) throw ValidationError("density matrix has non-finite entries");
  const double herm = hermiticity_defect(data_);
  if (herm > kStateTolerance)
    throw ValidationError("density matrix not Hermitian (defect " + std::to_string(herm) + ")");
  const cplx tr = data_.trace();
  if (std::abs(tr - cplx(1.0, 0.0)) > kStateTolerance)
    throw ValidationError("density matrix trace " + std::to_string(tr.real()) + " != 1");
  const double floor = check == StateCheck::Physical ? -kStateTolerance : kQuasiEigenFloor;
  const double lo = min_eigenvalue();
  if (lo < floor)
    throw ValidationError("density matrix eigenvalue " + std::to_string(lo) + " below " +
                          std::to_string(floor));
}

// --- Unitary / Observable --------------------------------------------------

Unitary::Unitary(int n, CMatrix data, bool check) : n_(n), data_(std::move(data)) {
  check_square(n_, data_, "Unitary");
  if (!check) return;
  const CMatrix eye = CMatrix::Identity(data_.rows(), data_.cols());
  const double defect = max_abs(data_ * data_.adjoint() - eye);
  if (defect > 1e-10) throw ValidationError("matrix is not unitary (defect " + std::to_string(defect) + ")");
}

Unitary Unitary::identity(int n) {
  check_qubit_count(n);
  const auto d = static_cast<Eigen::Index>(dimension(n));
  return Unitary(n, CMatrix::Identity(d, d), false);
}

Unitary operator*(const Unitary& a, const Unitary& b) {
  if (a.qubits() != b.qubits()) throw ValidationError("unitary product: qubit count mismatch");
  return Unitary(a.qubits(), a.matrix() * b.matrix(), false);
}

Observable::Observable(int n, CMatrix data) : n_(n), data_(std::move(data)) {
  check_square(n_, data_, "Observable");
  if (hermiticity_defect(data_) > kStateTolerance) throw ValidationError("observable is not Hermitian");
}

// --- constructors ----------------------------------------------------------

DensityMatrix pure_state(std::span<const cplx> amplitudes) {
  const int n = qubits_for_dim(static_cast<Eigen::Index>(amplitudes.size()));
  check_qubit_count(n);
  const Eigen::Map<const CVector> psi(amplitudes.data(), static_cast<Eigen::Index>(amplitudes.size()));
  const double norm = psi.norm();
  if (std::abs(norm - 1.0) > 1e-10)
    throw ValidationError("state vector norm " + std::to_string(norm) + " is not 1");
  return DensityMatrix(n, psi * psi.adjoint(), StateCheck::None);
}

DensityMatrix basis_state(std::size_t index, int n) {
  check_qubit_count(n);
  if (index >= dimension(n)) throw ValidationError("basis index out of range");
  const auto d = static_cast<Eigen::Index>(dimension(n));
  CMatrix m = CMatrix::Zero(d, d);
  m(static_cast<Eigen::Index>(index), static_cast<Eigen::Index>(index)) = 1.0;
  return DensityMatrix(n, std::move(m), StateCheck::None);
}

DensityMatrix maximally_mixed(int n) {
  check_qubit_count(n);
  const auto d = static_cast<Eigen::Index>(dimension(n));
  return DensityMatrix(n, CMatrix::Identity(d, d) / static_cast<double>(d), StateCheck::None);
}

// --- gates -----------------------------------------------------------------

CMatrix pauli_matrix(Axis a) {
  CMatrix p(2, 2);
  const cplx i(0.0, 1.0);
  switch (a) {
    case Axis::X: p << 0.0, 1.0, 1.0, 0.0; break;
    case Axis::Y: p << 0.0, -i, i, 0.0; break;
    case Axis::Z: p << 1.0, 0.0, 0.0, -1.0; break;
  }
  return p;
}

Eigen::Matrix2cd rotation_matrix(Axis axis, double theta) {
  const double c = std::cos(theta / 2.0);
  const double s = std::sin(theta / 2.0);
  const cplx i(0.0, 1.0);
  Eigen::Matrix2cd r;
  switch (axis) {
    case Axis::X: r << c, -i * s, -i * s, c; break;
    case Axis::Y: r << c, -s, s, c; break;
    case Axis::Z: r << std::exp(-i * theta / 2.0), 0.0, 0.0, std::exp(i * theta / 2.0); break;
  }
  return r;
}

CMatrix embed_single(const Eigen::Matrix2cd& op, int target, int n) {
  check_qubit_count(n);
  check_qubit_index(target, n, "target");
  const std::size_t d = dimension(n);
  const std::size_t bit = qubit_bit(target, n);
  CMatrix m = CMatrix::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  for (std::size_t row = 0; row < d; ++row) {
    const int r = (row & bit) ? 1 : 0;
    for (int c = 0; c < 2; ++c) {
      const std::size_t col = c ? (row | bit) : (row & ~bit);
      m(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(col)) = op(r, c);
    }
  }
  return m;
}

Unitary rotation_gate(Axis axis, double theta, int target, int n) {
  return Unitary(n, embed_single(rotation_matrix(axis, theta), target, n), false);
}

Unitary cnot_gate(int control, int target, int n) {
  check_qubit_count(n);
  check_qubit_index(control, n, "control");
  check_qubit_index(target, n, "target");
  if (control == target) throw ValidationError("CNOT control and target must differ");
  const std::size_t d = dimension(n);
  const std::size_t cbit = qubit_bit(control, n);
  const std::size_t tbit = qubit_bit(target, n);
  CMatrix m = CMatrix::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  for (std::size_t k = 0; k < d; ++k) {
    const std::size_t image = (k & cbit) ? (k ^ tbit) : k;
    m(static_cast<Eigen::Index>(image), static_cast<Eigen::Index>(k)) = 1.0;
  }
  return Unitary(n, std::move(m), false);
}

// --- evolution / measurement ----------------------------------------------

DensityMatrix evolve(const DensityMatrix& rho, const Unitary& u) {
  if (rho.qubits() != u.qubits())
    throw ValidationError("evolve: state has " + std::to_string(rho.qubits()) +
                          " qubits, unitary has " + std::to_string(u.qubits()));
  return DensityMatrix(rho.qubits(), u.matrix() * rho.matrix() * u.matrix().adjoint(), StateCheck::None);
}

double expectation(const DensityMatrix& rho, const Observable& h) {
  if (rho.qubits() != h.qubits()) throw ValidationError("expectation: qubit count mismatch");
  const cplx v = trace_product(h.matrix(), rho.matrix());
  const double scale = std::max(1.0, std::abs(v));
  if (std::abs(v.imag()) > 1e-10 * scale)
    throw ComputationError("expectation has imaginary part " + std::to_string(v.imag()));
  return v.real();
}

Observable pauli_z_observable(int qubit, int n) {
  check_qubit_count(n);
  check_qubit_index(qubit, n, "observable");
  const std::size_t d = dimension(n);
  const std::size_t bit = qubit_bit(qubit, n);
  CMatrix m = CMatrix::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  for (std::size_t k = 0; k < d; ++k)
    m(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)) = (k & bit) ? -1.0 : 1.0;
  return Observable(n, std::move(m));
}

double von_neumann_entropy(const DensityMatrix& rho) {
  const RVector e = hermitian_eig(rho.matrix()).values;
  double s = 0.0;
  for (Eigen::Index i = 0; i < e.size(); ++i)
    if (e[i] > 0.0) s -= e[i] * std::log(e[i]);
  return s;
}

}  // namespace qmit
