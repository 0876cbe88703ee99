#pragma once

#include <random>

#include "qmit/qsim.hpp"

namespace qmit {

using Rng = std::mt19937_64;

/// Haar-random unitary: QR of a complex Gaussian matrix with the phases of R's diagonal removed.
Unitary random_unitary(int n, Rng& rng);

/// Uniformly random pure state vector.
CVector random_state_vector(int n, Rng& rng);
DensityMatrix random_pure_state(int n, Rng& rng);

/// G G^dagger / Tr for a complex Gaussian G with `rank` columns (0 = full rank).
DensityMatrix random_density_matrix(int n, Rng& rng, int rank = 0);

}  // namespace qmit
