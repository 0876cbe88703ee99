#include "qmit/random.hpp"

#include <cmath>

namespace qmit {

namespace {

CMatrix gaussian_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  CMatrix g(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) g(r, c) = cplx(normal(rng), normal(rng));
  return g;
}

}  // namespace

Unitary random_unitary(int n, Rng& rng) {
  check_qubit_count(n);
  const auto d = static_cast<Eigen::Index>(dimension(n));
  const CMatrix g = gaussian_matrix(d, d, rng);
  Eigen::HouseholderQR<CMatrix> qr(g);
  CMatrix q = qr.householderQ();
  const CMatrix r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index i = 0; i < d; ++i) {
    const cplx diag = r(i, i);
    const double mag = std::abs(diag);
    q.col(i) *= mag > 0.0 ? diag / mag : cplx(1.0, 0.0);
  }
  return Unitary(n, std::move(q), false);
}

CVector random_state_vector(int n, Rng& rng) {
  check_qubit_count(n);
  const auto d = static_cast<Eigen::Index>(dimension(n));
  CVector psi = gaussian_matrix(d, 1, rng).col(0);
  psi /= psi.norm();
  return psi;
}

DensityMatrix random_pure_state(int n, Rng& rng) {
  const CVector psi = random_state_vector(n, rng);
  return DensityMatrix(n, psi * psi.adjoint(), StateCheck::None);
}

DensityMatrix random_density_matrix(int n, Rng& rng, int rank) {
  check_qubit_count(n);
  const auto d = static_cast<Eigen::Index>(dimension(n));
  const Eigen::Index k = rank <= 0 ? d : std::min<Eigen::Index>(rank, d);
  const CMatrix g = gaussian_matrix(d, k, rng);
  CMatrix rho = g * g.adjoint();
  rho /= rho.trace().real();
  rho = 0.5 * (rho + rho.adjoint());
  return DensityMatrix(n, std::move(rho), StateCheck::None);
}

}  // namespace qmit
