#pragma once

#include <complex>
#include <functional>

#include <Eigen/Dense>

namespace qmit {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;

/// Largest supported register. Dense 1024x1024 matrices are the ceiling.
inline constexpr int kMaxQubits = 10;

struct HermitianEig {
  RVector values;   // ascending
  CMatrix vectors;  // columns are eigenvectors
};

/// Eigendecomposition of the Hermitian part of `m`.
HermitianEig hermitian_eig(const CMatrix& m);

/// Q f(diag) Q^dagger for a precomputed decomposition.
CMatrix reconstruct(const HermitianEig& eig, const std::function<double(double)>& f);

/// f(M) for Hermitian M via eigendecomposition.
CMatrix hermitian_function(const CMatrix& m, const std::function<double(double)>& f);

/// Principal square root; eigenvalues are clamped at zero first.
CMatrix hermitian_sqrt(const CMatrix& m);

/// M^p with eigenvalues clamped at zero. For p < 0 only the support is inverted.
CMatrix hermitian_power(const CMatrix& m, double p);

double max_abs(const CMatrix& m);
double hermiticity_defect(const CMatrix& m);

/// Re Tr(A B) without forming the product.
double real_trace_product(const CMatrix& a, const CMatrix& b);
cplx trace_product(const CMatrix& a, const CMatrix& b);

}  // namespace qmit
