#pragma once

#include <span>

#include "qmit/linalg.hpp"

namespace qmit {

/// Qubit 0 is the most significant bit of a computational-basis index.
inline constexpr std::size_t qubit_bit(int qubit, int n) {
  return std::size_t{1} << (n - 1 - qubit);
}

inline constexpr std::size_t dimension(int n) { return std::size_t{1} << n; }

enum class Axis { X, Y, Z };

char axis_name(Axis a);
Axis parse_axis(char c);

/// How strictly a state is checked on construction.
enum class StateCheck {
  Physical,  // Hermitian, unit trace, PSD
  Quasi,     // Hermitian, unit trace, eigenvalues >= -0.05
  None,      // internal fast path; caller guarantees the invariants
};

inline constexpr double kStateTolerance = 1e-10;
inline constexpr double kQuasiEigenFloor = -0.05;

/// A (possibly quasi-probability) density matrix on n qubits.
class DensityMatrix {
 public:
  DensityMatrix(int n, CMatrix data, StateCheck check = StateCheck::Physical);

  int qubits() const noexcept { return n_; }
  Eigen::Index dim() const noexcept { return data_.rows(); }
  const CMatrix& matrix() const noexcept { return data_; }

  double trace() const { return data_.trace().real(); }
  double purity() const;
  double min_eigenvalue() const;

  /// Throws ValidationError if the invariants of `check` do not hold.
  void validate(StateCheck check) const;

 private:
  int n_;
  CMatrix data_;
};

class Unitary {
 public:
  Unitary(int n, CMatrix data, bool check = true);

  int qubits() const noexcept { return n_; }
  const CMatrix& matrix() const noexcept { return data_; }
  Unitary adjoint() const { return Unitary(n_, data_.adjoint(), false); }

  static Unitary identity(int n);

 private:
  int n_;
  CMatrix data_;
};

/// Composition: (a * b) applies b first.
Unitary operator*(const Unitary& a, const Unitary& b);

class Observable {
 public:
  Observable(int n, CMatrix data);

  int qubits() const noexcept { return n_; }
  const CMatrix& matrix() const noexcept { return data_; }

 private:
  int n_;
  CMatrix data_;
};

void check_qubit_count(int n);
void check_qubit_index(int q, int n, const char* what);

DensityMatrix pure_state(std::span<const cplx> amplitudes);
DensityMatrix basis_state(std::size_t index, int n);
DensityMatrix maximally_mixed(int n);

/// Single-qubit Pauli (2x2).
CMatrix pauli_matrix(Axis a);

/// exp(-i theta sigma / 2) as a 2x2 matrix.
Eigen::Matrix2cd rotation_matrix(Axis axis, double theta);

/// Embeds a 2x2 operator on `target` into n qubits.
CMatrix embed_single(const Eigen::Matrix2cd& op, int target, int n);

Unitary rotation_gate(Axis axis, double theta, int target, int n);
Unitary cnot_gate(int control, int target, int n);

/// U rho U^dagger
DensityMatrix evolve(const DensityMatrix& rho, const Unitary& u);

/// Tr(H rho). Imaginary residue up to 1e-10 (relative) is discarded.
double expectation(const DensityMatrix& rho, const Observable& h);

/// I^{(x)i} (x) sigma_z (x) I^{(x)(n-i-1)}
Observable pauli_z_observable(int qubit, int n);

/// In nats; 0 log 0 := 0.
double von_neumann_entropy(const DensityMatrix& rho);

}  // namespace qmit
