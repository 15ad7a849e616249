#pragma once

#include "ems/grid.hpp"
#include "ems/types.hpp"

#include <optional>
#include <vector>

namespace ems {

/// Relative errors at matching fine free-node vectors:
/// eps0 in the L2 (mass) norm, eps1 in the kappa-weighted energy norm.
/// Throws std::invalid_argument when the reference norm vanishes.
std::pair<Real, Real> compute_errors(const Vector& u_ref, const Vector& u_ms,
                                     const SparseMatrix& mass, const SparseMatrix& diffusion);

/// CR between consecutive H-halved errors: |ln e_H - ln e_{H/2}| / ln 2.
/// Zero errors yield a disengaged entry.
std::vector<std::optional<Real>> convergence_rate(const std::vector<Real>& errors);

/// Free energy E[u] = int ( |grad u|^2 / 2 + (u^2-1)^2 / (4 eps^2) ) dx of the
/// bilinear interpolant (full-node vector), 3x3 Gauss per element.
Real energy_functional(const StructuredGrid2D& grid, const Vector& full_nodal, Real epsilon);

Real max_norm(const Vector& full_nodal);

}  // namespace ems
