#pragma once

// Structured O(4^n) updates of density matrices. Each kernel has a dense
// counterpart in qsim/noise (embed_single, cnot_gate, PauliString::matrix)
// that the tests use as the reference.

#include <cstdint>

#include "qmit/linalg.hpp"

namespace qmit::kernels {

/// rho <- G rho G^dagger, G acting on `target`.
void conjugate_single(CMatrix& rho, const Eigen::Matrix2cd& g, int target, int n);

/// m <- G m (left multiplication only).
void left_multiply_single(CMatrix& m, const Eigen::Matrix2cd& g, int target, int n);

/// rho <- C rho C with C = CNOT(control, target).
void conjugate_cnot(CMatrix& rho, int control, int target, int n);

/// Pauli string in symplectic form; the global phase of Y letters drops out of conjugation.
struct PauliMask {
  std::uint32_t x = 0;
  std::uint32_t z = 0;
};

/// sigma rho sigma^dagger
CMatrix pauli_conjugate(const CMatrix& rho, PauliMask p);

/// rho <- a rho + b sigma rho sigma^dagger
void pauli_mix(CMatrix& rho, PauliMask p, double a, double b);

}  // namespace qmit::kernels
