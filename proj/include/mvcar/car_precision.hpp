#pragma once

#include "mvcar/areal_graph.hpp"
#include "mvcar/sparse_symmetric.hpp"

namespace mvcar {

/// Admissible autocorrelation interval (1/lambda_min, 1/lambda_max) of the
/// eigenvalues of D^{-1/2} W D^{-1/2}. D - alpha W is PD strictly inside.
struct AlphaBounds {
  double lower = -1.0;
  double upper = 1.0;

  bool contains(double alpha, double tol = 0.0) const {
    return alpha >= lower - tol && alpha <= upper + tol;
  }
};

/// Throws ValidationError when some region has no neighbours.
void require_no_isolated(const ArealGraph& g);

/// D - W. Singular with rank I - C.
SparseSym intrinsic_precision(const ArealGraph& g);

/// D - alpha W. Throws DomainError when alpha is outside the closed
/// admissible interval; at the endpoints the matrix is singular and
/// factorization reports NotPositiveDefinite.
SparseSym proper_precision(const ArealGraph& g, double alpha);
SparseSym proper_precision(const ArealGraph& g, double alpha, const AlphaBounds& bounds);

/// Extreme eigenvalues by Lanczos with full reorthogonalization, tolerance
/// 1e-10 and a fixed-seed start vector.
AlphaBounds alpha_bounds(const ArealGraph& g);

/// log of the product of non-zero eigenvalues of D - W, via the matrix-tree
/// theorem: for each component, log n_c + log det of the Laplacian with one
/// row/column removed.
double intrinsic_log_pdet(const ArealGraph& g);

}  // namespace mvcar
