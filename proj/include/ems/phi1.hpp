#pragma once

#include "ems/types.hpp"

#include <functional>

namespace ems {

/// phi1(X) = (e^X - I) X^{-1} extended to singular X by the entire series
/// sum_k X^k / (k+1)!.
///
/// Evaluated by the degree-13 diagonal Pade approximant of the augmented
/// exponential exp([[X, I], [0, 0]]) — whose top-right block is phi1(X) —
/// with scaling and squaring applied through the phi1 recurrence
/// phi1(2Y) = (e^Y + I) phi1(Y) / 2. The block structure collapses every
/// polynomial in the augmented matrix to n x n arithmetic, so the cost is a
/// handful of GEMMs plus one LU solve, and X is never inverted.
/// Throws std::invalid_argument on non-finite input.
Matrix phi1_dense(const Matrix& x);

/// w = phi1(X) z from the action of X only (no Krylov subspace): the exact
/// substep recurrence y_{j+1} = e^{X/s} y_j + (1/s) phi1(X/s) z applied s
/// times with truncated-Taylor actions of e^{X/s} and phi1(X/s). `norm_hint`
/// is any upper-ish estimate of ||X||; the series fall back to more substeps
/// when it proves too small.
Vector phi1_apply(const std::function<Vector(const Vector&)>& apply_x, Real norm_hint,
                  const Vector& z);

/// Power-iteration estimate of ||A|| for an operator given by its action.
Real estimate_operator_norm(const std::function<Vector(const Vector&)>& apply_x, Index dim,
                            int iterations = 12);

/// Chebyshev variant of the phi1 action for operators whose spectrum lies
/// near [-interval, 0] (parabolic pencils): Clenshaw evaluation of the
/// Chebyshev expansion of phi1 on the interval, needing O(sqrt(interval))
/// applications instead of the Taylor path's O(interval). Returns false
/// (leaving `out` untouched) when the coefficient tail does not settle
/// within the degree cap.
bool phi1_chebyshev_apply(const std::function<Vector(const Vector&)>& apply_x, Real interval,
                          const Vector& z, Vector& out, Index degree_cap = 1500);

}  // namespace ems
