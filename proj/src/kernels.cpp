#include "qmit/kernels.hpp"

#include <bit>

#include "qmit/qsim.hpp"

namespace qmit::kernels {

namespace {

inline double parity_sign(std::size_t v, std::uint32_t zmask) {
  return (std::popcount(static_cast<std::uint32_t>(v) & zmask) & 1) ? -1.0 : 1.0;
}

}  // namespace

void left_multiply_single(CMatrix& m, const Eigen::Matrix2cd& g, int target, int n) {
  const std::size_t d = dimension(n);
  const std::size_t bit = qubit_bit(target, n);
  const cplx g00 = g(0, 0), g01 = g(0, 1), g10 = g(1, 0), g11 = g(1, 1);
  const auto cols = m.cols();
  for (Eigen::Index c = 0; c < cols; ++c) {
    cplx* col = m.col(c).data();
    for (std::size_t r0 = 0; r0 < d; ++r0) {
      if (r0 & bit) continue;
      const std::size_t r1 = r0 | bit;
      const cplx a = col[r0], b = col[r1];
      col[r0] = g00 * a + g01 * b;
      col[r1] = g10 * a + g11 * b;
    }
  }
}

void conjugate_single(CMatrix& rho, const Eigen::Matrix2cd& g, int target, int n) {
  left_multiply_single(rho, g, target, n);
  // right multiplication by G^dagger mixes column pairs
  const std::size_t d = dimension(n);
  const std::size_t bit = qubit_bit(target, n);
  const cplx h00 = std::conj(g(0, 0)), h01 = std::conj(g(0, 1));
  const cplx h10 = std::conj(g(1, 0)), h11 = std::conj(g(1, 1));
  for (std::size_t c0 = 0; c0 < d; ++c0) {
    if (c0 & bit) continue;
    const std::size_t c1 = c0 | bit;
    cplx* col0 = rho.col(static_cast<Eigen::Index>(c0)).data();
    cplx* col1 = rho.col(static_cast<Eigen::Index>(c1)).data();
    for (std::size_t r = 0; r < d; ++r) {
      const cplx a = col0[r], b = col1[r];
      col0[r] = a * h00 + b * h01;
      col1[r] = a * h10 + b * h11;
    }
  }
}

void conjugate_cnot(CMatrix& rho, int control, int target, int n) {
  const std::size_t d = dimension(n);
  const std::size_t cbit = qubit_bit(control, n);
  const std::size_t tbit = qubit_bit(target, n);
  // rows
  for (std::size_t r = 0; r < d; ++r) {
    if (!(r & cbit) || (r & tbit)) continue;
    rho.row(static_cast<Eigen::Index>(r)).swap(rho.row(static_cast<Eigen::Index>(r | tbit)));
  }
  // columns
  for (std::size_t c = 0; c < d; ++c) {
    if (!(c & cbit) || (c & tbit)) continue;
    rho.col(static_cast<Eigen::Index>(c)).swap(rho.col(static_cast<Eigen::Index>(c | tbit)));
  }
}

CMatrix pauli_conjugate(const CMatrix& rho, PauliMask p) {
  const auto d = static_cast<std::size_t>(rho.rows());
  CMatrix out(rho.rows(), rho.cols());
  for (std::size_t k = 0; k < d; ++k) {
    const std::size_t ks = k ^ p.x;
    const double sk = parity_sign(ks, p.z);
    for (std::size_t j = 0; j < d; ++j) {
      const std::size_t js = j ^ p.x;
      out(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) =
          (sk * parity_sign(js, p.z)) * rho(static_cast<Eigen::Index>(js), static_cast<Eigen::Index>(ks));
    }
  }
  return out;
}

void pauli_mix(CMatrix& rho, PauliMask p, double a, double b) {
  const CMatrix conj = pauli_conjugate(rho, p);
  rho = a * rho + b * conj;
}

}  // namespace qmit::kernels
