#include "ems/diagnostics.hpp"

#include <cmath>
#include <stdexcept>

namespace ems {

std::pair<Real, Real> compute_errors(const Vector& u_ref, const Vector& u_ms,
                                     const SparseMatrix& mass, const SparseMatrix& diffusion) {
  const Vector e = u_ref - u_ms;
  const Real ref_l2 = std::sqrt(u_ref.dot(mass * u_ref));
  const Real ref_en = std::sqrt(u_ref.dot(diffusion * u_ref));
  if (ref_l2 == 0.0 || ref_en == 0.0) {
    throw std::invalid_argument("compute_errors: zero-norm reference");
  }
  const Real eps0 = std::sqrt(e.dot(mass * e)) / ref_l2;
  const Real eps1 = std::sqrt(e.dot(diffusion * e)) / ref_en;
  return {eps0, eps1};
}

std::vector<std::optional<Real>> convergence_rate(const std::vector<Real>& errors) {
  std::vector<std::optional<Real>> cr(errors.size());
  for (std::size_t k = 1; k < errors.size(); ++k) {
    if (errors[k - 1] > 0.0 && errors[k] > 0.0) {
      cr[k] = std::abs(std::log(errors[k - 1]) - std::log(errors[k])) / std::log(2.0);
    }
  }
  return cr;
}

Real energy_functional(const StructuredGrid2D& grid, const Vector& full_nodal, Real epsilon) {
  if (full_nodal.size() != grid.num_nodes()) {
    throw std::invalid_argument("energy_functional: full nodal vector required");
  }
  const Real gx[3] = {0.5 - 0.5 * std::sqrt(0.6), 0.5, 0.5 + 0.5 * std::sqrt(0.6)};
  const Real gw[3] = {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0};
  const Real hx = grid.hx(), hy = grid.hy();
  const Real inv4eps2 = 1.0 / (4.0 * epsilon * epsilon);
  Real acc = 0.0;
  for (Index e = 0; e < grid.num_elements(); ++e) {
    const auto n = grid.element_nodes(e);
    const Real u0 = full_nodal[n[0]], u1 = full_nodal[n[1]], u2 = full_nodal[n[2]],
               u3 = full_nodal[n[3]];
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        const Real xi = gx[a], eta = gx[b];
        const Real u = u0 * (1 - xi) * (1 - eta) + u1 * xi * (1 - eta) + u2 * xi * eta +
                       u3 * (1 - xi) * eta;
        const Real ux = (-(1 - eta) * u0 + (1 - eta) * u1 + eta * u2 - eta * u3) / hx;
        const Real uy = (-(1 - xi) * u0 - xi * u1 + xi * u2 + (1 - xi) * u3) / hy;
        const Real w = gw[a] * gw[b] * hx * hy;
        const Real well = u * u - 1.0;
        acc += w * (0.5 * (ux * ux + uy * uy) + inv4eps2 * well * well);
      }
    }
  }
  return acc;
}

Real max_norm(const Vector& full_nodal) {
  return full_nodal.size() == 0 ? 0.0 : full_nodal.cwiseAbs().maxCoeff();
}

}  // namespace ems
