#include "qmit/linalg.hpp"

#include <algorithm>
#include <cmath>

namespace qmit {

HermitianEig hermitian_eig(const CMatrix& m) {
  const CMatrix h = 0.5 * (m + m.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(h);
  return {solver.eigenvalues(), solver.eigenvectors()};
}

CMatrix reconstruct(const HermitianEig& eig, const std::function<double(double)>& f) {
  const Eigen::Index d = eig.values.size();
  RVector mapped(d);
  for (Eigen::Index i = 0; i < d; ++i) mapped[i] = f(eig.values[i]);
  return eig.vectors * mapped.asDiagonal() * eig.vectors.adjoint();
}

CMatrix hermitian_function(const CMatrix& m, const std::function<double(double)>& f) {
  return reconstruct(hermitian_eig(m), f);
}

CMatrix hermitian_sqrt(const CMatrix& m) {
  return hermitian_function(m, [](double e) { return std::sqrt(std::max(e, 0.0)); });
}

CMatrix hermitian_power(const CMatrix& m, double p) {
  const HermitianEig eig = hermitian_eig(m);
  const double top = std::max(eig.values.cwiseAbs().maxCoeff(), 1e-300);
  const double cutoff = 1e-14 * top;
  return reconstruct(eig, [p, cutoff](double e) {
    if (e <= 0.0) return 0.0;
    if (p < 0.0 && e <= cutoff) return 0.0;
    return std::pow(e, p);
  });
}

double max_abs(const CMatrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

double hermiticity_defect(const CMatrix& m) { return max_abs(m - m.adjoint()); }

cplx trace_product(const CMatrix& a, const CMatrix& b) {
  // Tr(AB) = sum_ij A_ij B_ji
  return (a.array() * b.transpose().array()).sum();
}

double real_trace_product(const CMatrix& a, const CMatrix& b) { return trace_product(a, b).real(); }

}  // namespace qmit
