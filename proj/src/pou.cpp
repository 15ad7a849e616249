#include "ems/pou.hpp"

#include <Eigen/SparseCholesky>

#include <stdexcept>

namespace ems {

Real PartitionOfUnity::value(Index coarse_node, const StructuredGrid2D& fine,
                             Index fine_node) const {
  const PatchField& p = chi[coarse_node];
  auto [fi, fj] = fine.node_ij(fine_node);
  if (!p.contains(fi, fj)) return 0.0;
  return p.values[p.local(fi, fj)];
}

std::array<Vector, 4> solve_pou_element(const CoarseDecomposition& decomp,
                                        Index coarse_element, const CoefficientField& kappa) {
  const StructuredGrid2D& fine = decomp.fine;
  const Index r = decomp.ratio;
  if (kappa.values.size() != fine.num_elements()) {
    throw std::invalid_argument("solve_pou_element: kappa size mismatch");
  }
  auto [ci, cj] = decomp.coarse.element_ij(coarse_element);
  const Index fi0 = ci * r, fj0 = cj * r;
  const Index nn = (r + 1) * (r + 1);

  auto local_id = [&](Index fi, Index fj) { return (fj - fj0) * (r + 1) + (fi - fi0); };
  auto on_perimeter = [&](Index fi, Index fj) {
    return fi == fi0 || fi == fi0 + r || fj == fj0 || fj == fj0 + r;
  };

  // Local kappa-weighted stiffness over the (r x r) fine cells of K.
  const Eigen::Matrix4d ke = element_stiffness(fine.hx(), fine.hy());
  std::vector<Triplet> trips;
  trips.reserve(16 * r * r);
  for (Index ej = 0; ej < r; ++ej) {
    for (Index ei = 0; ei < r; ++ei) {
      const Real k = kappa.values[fine.element_id(fi0 + ei, fj0 + ej)];
      const Index c[4] = {local_id(fi0 + ei, fj0 + ej), local_id(fi0 + ei + 1, fj0 + ej),
                          local_id(fi0 + ei + 1, fj0 + ej + 1), local_id(fi0 + ei, fj0 + ej + 1)};
      for (int p = 0; p < 4; ++p)
        for (int q = 0; q < 4; ++q) trips.emplace_back(c[p], c[q], k * ke(p, q));
    }
  }
  SparseMatrix a(nn, nn);
  a.setFromTriplets(trips.begin(), trips.end());

  // Split into interior and perimeter unknowns.
  std::vector<Index> interior_of_local(nn, -1);
  std::vector<Index> local_of_interior;
  for (Index fj = fj0; fj <= fj0 + r; ++fj)
    for (Index fi = fi0; fi <= fi0 + r; ++fi)
      if (!on_perimeter(fi, fj)) {
        interior_of_local[local_id(fi, fj)] = static_cast<Index>(local_of_interior.size());
        local_of_interior.push_back(local_id(fi, fj));
      }
  const Index ni = static_cast<Index>(local_of_interior.size());

  std::vector<Triplet> tii;
  std::vector<Eigen::Triplet<Real>> tib;
  for (Index col = 0; col < a.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(a, col); it; ++it) {
      const Index ri = interior_of_local[it.row()];
      const Index ci_ = interior_of_local[it.col()];
      if (ri >= 0 && ci_ >= 0) tii.emplace_back(ri, ci_, it.value());
      else if (ri >= 0 && ci_ < 0) tib.emplace_back(ri, it.col(), it.value());
    }
  }
  SparseMatrix aii(ni, ni), aib(ni, nn);
  aii.setFromTriplets(tii.begin(), tii.end());
  aib.setFromTriplets(tib.begin(), tib.end());

  Eigen::SimplicialLDLT<SparseMatrix> solver(aii);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("solve_pou_element: local factorization failed");
  }

  // Affine boundary data: the trace of the corner hat of K.
  auto corner_hat = [&](int corner, Index fi, Index fj) {
    const Real xi = static_cast<Real>(fi - fi0) / static_cast<Real>(r);
    const Real eta = static_cast<Real>(fj - fj0) / static_cast<Real>(r);
    switch (corner) {
      case 0: return (1 - xi) * (1 - eta);
      case 1: return xi * (1 - eta);
      case 2: return xi * eta;
      default: return (1 - xi) * eta;
    }
  };

  std::array<Vector, 4> out;
  for (int corner = 0; corner < 4; ++corner) {
    Vector g = Vector::Zero(nn);
    for (Index fj = fj0; fj <= fj0 + r; ++fj)
      for (Index fi = fi0; fi <= fi0 + r; ++fi)
        if (on_perimeter(fi, fj)) g[local_id(fi, fj)] = corner_hat(corner, fi, fj);
    Vector xi_int = solver.solve(Vector(-(aib * g)));
    Vector full = g;
    for (Index k = 0; k < ni; ++k) full[local_of_interior[k]] = xi_int[k];
    out[corner] = std::move(full);
  }
  return out;
}

PartitionOfUnity assemble_pou(const CoarseDecomposition& decomp, const CoefficientField& kappa) {
  const StructuredGrid2D& coarse = decomp.coarse;
  const Index r = decomp.ratio;

  std::vector<std::array<Vector, 4>> per_element(coarse.num_elements());
#pragma omp parallel for schedule(dynamic)
  for (Index e = 0; e < coarse.num_elements(); ++e) {
    per_element[e] = solve_pou_element(decomp, e, kappa);
  }

  PartitionOfUnity pu;
  pu.chi.resize(coarse.num_nodes());
  for (Index cn = 0; cn < coarse.num_nodes(); ++cn) {
    const Neighborhood& nb = decomp.neighborhoods[cn];
    PatchField& p = pu.chi[cn];
    p.fi0 = nb.fi0;
    p.fi1 = nb.fi1;
    p.fj0 = nb.fj0;
    p.fj1 = nb.fj1;
    p.values = Vector::Zero(p.size());
    auto [ci, cj] = coarse.node_ij(cn);
    for (Index e : nb.coarse_elements) {
      auto [ei, ej] = coarse.element_ij(e);
      // Which corner of K is x_i: SW,SE,NE,NW as (ci-ei, cj-ej).
      const int corner = (ci - ei) == 0 ? ((cj - ej) == 0 ? 0 : 3) : ((cj - ej) == 0 ? 1 : 2);
      const Vector& loc = per_element[e][corner];
      const Index bi0 = ei * r, bj0 = ej * r;
      for (Index fj = bj0; fj <= bj0 + r; ++fj)
        for (Index fi = bi0; fi <= bi0 + r; ++fi)
          p.values[p.local(fi, fj)] = loc[(fj - bj0) * (r + 1) + (fi - bi0)];
    }
  }
  return pu;
}

}  // namespace ems
