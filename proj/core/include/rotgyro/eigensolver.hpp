#pragma once

#include "rotgyro/common.hpp"
#include "rotgyro/hamiltonian.hpp"

namespace rotgyro {

struct SolverOptions {
    /// Residual bound relative to the infinity norm of the matrix.
    double tol = 1e-10;
    /// Dimensions below this use a dense symmetric solve.
    Eigen::Index dense_threshold = 2000;
    /// Cap on matrix-vector products for the iterative path.
    int max_products = 20000;
    /// Krylov subspace size before a thick restart (0 picks k + 80).
    int subspace = 0;
};

/// Lowest eigenpairs of a real symmetric matrix.
struct EigenPairs {
    RealVector values;   // ascending
    RealMatrix vectors;  // columns, largest-magnitude component positive
    double max_residual = 0.0;
    int products = 0;    // matrix-vector products (0 on the dense path)
};

/// k lowest eigenpairs. The iterative path is a thick-restart Lanczos with full
/// reorthogonalisation; the normalised sum of the `seed` columns (if any) is the start vector.
/// Throws NumericalError if the residual bound is not met within max_products.
EigenPairs lowest_eigenpairs(const SparseMatrix& h, int k, const SolverOptions& options = {},
                             const RealMatrix* seed = nullptr);

/// Full spectrum of a (small) symmetric matrix, ascending, with the sign convention applied.
EigenPairs full_eigenpairs(const RealMatrix& h);

/// Flips each column so that its largest-magnitude entry is positive.
void fix_signs(RealMatrix& vectors);

}  // namespace rotgyro
