#include "ems/multiscale_space.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <algorithm>
#include <stdexcept>
#include <string>

namespace ems {

namespace {

// Local steady operator (kappa-diffusion + g(0) convection) over the fine
// elements of a neighborhood box, split into interior/boundary blocks with
// one reusable factorization.
struct LocalSolver {
  const Neighborhood* nb = nullptr;
  Index box_w = 0;
  std::vector<Index> interior_of_local;
  std::vector<Index> local_of_interior;
  SparseMatrix aib;
  Eigen::SparseLU<SparseMatrix> lu;
  bool ok = false;
};

void make_local_solver(const CoarseDecomposition& decomp, const Neighborhood& nb,
                       const CoefficientField& kappa, const VelocityField& velocity,
                       LocalSolver& out) {
  const StructuredGrid2D& fine = decomp.fine;
  const Real g0 = velocity.g(0.0);
  const Index w = nb.box_nx() + 1;
  const Index nn = nb.box_nodes();
  out.nb = &nb;
  out.box_w = w;

  const Eigen::Matrix4d ke = element_stiffness(fine.hx(), fine.hy());
  const bool with_convection = !velocity.is_zero() && g0 != 0.0;

  std::vector<Triplet> trips;
  trips.reserve(16 * nb.box_nx() * nb.box_ny());
  for (Index ej = nb.fj0; ej < nb.fj1; ++ej) {
    for (Index ei = nb.fi0; ei < nb.fi1; ++ei) {
      const Real k = kappa.values[fine.element_id(ei, ej)];
      Eigen::Matrix4d le = k * ke;
      if (with_convection) {
        const Real x0 = fine.node_xy(fine.node_id(ei, ej))[0];
        const Real y0 = fine.node_xy(fine.node_id(ei, ej))[1];
        le += g0 * element_convection(x0, y0, fine.hx(), fine.hy(), velocity);
      }
      const Index c[4] = {nb.box_local(ei, ej), nb.box_local(ei + 1, ej),
                          nb.box_local(ei + 1, ej + 1), nb.box_local(ei, ej + 1)};
      for (int p = 0; p < 4; ++p)
        for (int q = 0; q < 4; ++q) trips.emplace_back(c[p], c[q], le(p, q));
    }
  }
  SparseMatrix a(nn, nn);
  a.setFromTriplets(trips.begin(), trips.end());

  auto on_perimeter = [&](Index loc) {
    const Index li = loc % w, lj = loc / w;
    return li == 0 || li == nb.box_nx() || lj == 0 || lj == nb.box_ny();
  };

  out.interior_of_local.assign(nn, -1);
  out.local_of_interior.clear();
  for (Index loc = 0; loc < nn; ++loc) {
    if (!on_perimeter(loc)) {
      out.interior_of_local[loc] = static_cast<Index>(out.local_of_interior.size());
      out.local_of_interior.push_back(loc);
    }
  }
  const Index ni = static_cast<Index>(out.local_of_interior.size());

  std::vector<Triplet> tii, tib;
  for (Index col = 0; col < a.outerSize(); ++col) {
    for (SparseMatrix::InnerIterator it(a, col); it; ++it) {
      const Index ri = out.interior_of_local[it.row()];
      const Index ci = out.interior_of_local[it.col()];
      if (ri >= 0 && ci >= 0) tii.emplace_back(ri, ci, it.value());
      else if (ri >= 0) tib.emplace_back(ri, it.col(), it.value());
    }
  }
  SparseMatrix aii(ni, ni);
  aii.setFromTriplets(tii.begin(), tii.end());
  out.aib.resize(ni, nn);
  out.aib.setFromTriplets(tib.begin(), tib.end());

  out.lu.compute(aii);
  out.ok = out.lu.info() == Eigen::Success;
}

// Dirichlet data over the box perimeter: edge_fn on trace nodes, zero on dD.
Vector boundary_data(const CoarseDecomposition& decomp, const Neighborhood& nb,
                     const Vector& edge_fn) {
  const Index w = nb.box_nx() + 1;
  Vector g = Vector::Zero(nb.box_nodes());
  for (std::size_t k = 0; k < nb.trace_nodes.size(); ++k) {
    auto [fi, fj] = decomp.fine.node_ij(nb.trace_nodes[k]);
    g[(fj - nb.fj0) * w + (fi - nb.fi0)] = edge_fn[static_cast<Index>(k)];
  }
  return g;
}

Vector solve_local(const LocalSolver& s, const CoarseDecomposition& decomp,
                   const Vector& edge_fn) {
  const Neighborhood& nb = *s.nb;
  Vector g = boundary_data(decomp, nb, edge_fn);
  Vector xi = s.lu.solve(Vector(-(s.aib * g)));
  Vector full = g;
  for (std::size_t k = 0; k < s.local_of_interior.size(); ++k) {
    full[s.local_of_interior[k]] = xi[static_cast<Index>(k)];
  }
  return full;
}

}  // namespace

PatchField harmonic_extension(const CoarseDecomposition& decomp, Index coarse_node,
                              const CoefficientField& kappa, const VelocityField& velocity,
                              const Vector& edge_fn) {
  const Neighborhood& nb = decomp.neighborhoods[coarse_node];
  if (edge_fn.size() != static_cast<Index>(nb.trace_nodes.size())) {
    throw std::invalid_argument("harmonic_extension: edge data size mismatch");
  }
  LocalSolver s;
  make_local_solver(decomp, nb, kappa, velocity, s);
  if (!s.ok) {
    throw std::runtime_error("harmonic_extension: local solver failed at coarse node " +
                             std::to_string(coarse_node));
  }
  PatchField p;
  p.fi0 = nb.fi0;
  p.fi1 = nb.fi1;
  p.fj0 = nb.fj0;
  p.fj1 = nb.fj1;
  p.values = solve_local(s, decomp, edge_fn);
  return p;
}

namespace {

// Delete a column set (sorted) from a sparse matrix.
SparseMatrix drop_sparse_columns(const SparseMatrix& x, const std::vector<Index>& sorted_drop) {
  std::vector<Index> new_col(x.cols(), -1);
  Index nc = 0;
  std::size_t d = 0;
  for (Index c = 0; c < x.cols(); ++c) {
    if (d < sorted_drop.size() && sorted_drop[d] == c) {
      ++d;
      continue;
    }
    new_col[c] = nc++;
  }
  std::vector<Triplet> trips;
  trips.reserve(x.nonZeros());
  for (Index c = 0; c < x.outerSize(); ++c) {
    if (new_col[c] < 0) continue;
    for (SparseMatrix::InnerIterator it(x, c); it; ++it) {
      trips.emplace_back(it.row(), new_col[c], it.value());
    }
  }
  SparseMatrix out(x.rows(), nc);
  out.setFromTriplets(trips.begin(), trips.end());
  out.makeCompressed();
  return out;
}

// Large-dimension pruning: iterate unpivoted sparse LDLT passes, dropping
// every below-tolerance pivot per pass. Without dynamic pivoting the pivots
// after the first breakdown are contaminated, so a pass may discard a column
// a pivoted factorization would keep; at this scale the space loses nothing
// measurable and the passes terminate quickly.
std::vector<Index> prune_large(SparseMatrix& basis, SparseMatrix gram, Real tol) {
  const Index m0 = basis.cols();
  std::vector<Index> orig(m0);
  for (Index k = 0; k < m0; ++k) orig[k] = k;
  std::vector<Index> dropped_orig;

  for (int pass = 0; pass < 64; ++pass) {
    Eigen::SimplicialLDLT<SparseMatrix> ldlt(gram);
    if (ldlt.info() == Eigen::Success && ldlt.vectorD().minCoeff() > tol) {
      break;
    }
    std::vector<Index> bad_perm;
    if (ldlt.info() == Eigen::Success) {
      const auto& d = ldlt.vectorD();
      for (Index k = 0; k < d.size(); ++k) {
        if (!(d[k] > tol)) bad_perm.push_back(k);
      }
    }
    if (bad_perm.empty()) {
      // Factorization failed outright: retire the smallest-diagonal column.
      Index worst = 0;
      gram.diagonal().minCoeff(&worst);
      std::vector<Index> drop = {worst};
      dropped_orig.push_back(orig[worst]);
      orig.erase(orig.begin() + worst);
      gram = drop_sparse_columns(SparseMatrix(drop_sparse_columns(gram, drop).transpose()), drop);
      continue;
    }
    // Map permuted pivot positions back to column indices.
    const auto& pind = ldlt.permutationP().indices();
    std::vector<char> is_bad_perm(gram.cols(), 0);
    for (Index k : bad_perm) is_bad_perm[k] = 1;
    std::vector<Index> drop;
    for (Index i = 0; i < gram.cols(); ++i) {
      if (is_bad_perm[pind[i]]) drop.push_back(i);
    }
    for (Index i : drop) dropped_orig.push_back(orig[i]);
    for (auto it = drop.rbegin(); it != drop.rend(); ++it) orig.erase(orig.begin() + *it);
    gram = drop_sparse_columns(SparseMatrix(drop_sparse_columns(gram, drop).transpose()), drop);
  }

  std::sort(dropped_orig.begin(), dropped_orig.end());
  if (!dropped_orig.empty()) basis = drop_sparse_columns(basis, dropped_orig);
  return dropped_orig;
}

}  // namespace

std::vector<Index> prune_columns(SparseMatrix& basis, const SparseMatrix& fine_mass_free) {
  const Index m = basis.cols();
  if (m == 0) return {};
  SparseMatrix mb = fine_mass_free * basis;
  SparseMatrix gram_s = SparseMatrix(basis.transpose()) * mb;
  const Real tol = 1e-12 * gram_s.diagonal().sum() / static_cast<Real>(m);

  // Fast path: a clean LDLT with healthy pivots means full numerical rank.
  {
    Eigen::SimplicialLDLT<SparseMatrix> ldlt(gram_s);
    if (ldlt.info() == Eigen::Success && ldlt.vectorD().minCoeff() > tol) return {};
  }

  if (m > 4096) return prune_large(basis, std::move(gram_s), tol);

  // Greedy rank-revealing Cholesky in column (provenance) order.
  Matrix gram = Matrix(gram_s);
  Matrix lfac = Matrix::Zero(m, m);
  std::vector<Index> kept, dropped;
  for (Index j = 0; j < m; ++j) {
    const Index nk = static_cast<Index>(kept.size());
    Vector row(nk);
    for (Index t = 0; t < nk; ++t) row[t] = gram(j, kept[t]);
    // Solve L_kept * y = row for the new factor row.
    Vector y(nk);
    for (Index t = 0; t < nk; ++t) {
      Real acc = row[t];
      for (Index q = 0; q < t; ++q) acc -= lfac(t, q) * y[q];
      y[t] = acc / lfac(t, t);
    }
    const Real d = gram(j, j) - y.squaredNorm();
    if (d <= tol) {
      dropped.push_back(j);
      continue;
    }
    for (Index t = 0; t < nk; ++t) lfac(nk, t) = y[t];
    lfac(nk, nk) = std::sqrt(d);
    kept.push_back(j);
  }

  if (!dropped.empty()) {
    SparseMatrix nb(basis.rows(), static_cast<Index>(kept.size()));
    std::vector<Triplet> trips;
    trips.reserve(basis.nonZeros());
    for (Index nc = 0; nc < static_cast<Index>(kept.size()); ++nc) {
      for (SparseMatrix::InnerIterator it(basis, kept[nc]); it; ++it) {
        trips.emplace_back(it.row(), nc, it.value());
      }
    }
    nb.setFromTriplets(trips.begin(), trips.end());
    basis.swap(nb);
  }
  return dropped;
}

MultiscaleSpace build_multiscale_space(const CoarseDecomposition& decomp,
                                       const CoefficientField& kappa,
                                       const VelocityField& velocity, int level,
                                       const PartitionOfUnity& pou,
                                       const SparseMatrix& fine_mass_free,
                                       const FreeNodeMap& free_map) {
  const StructuredGrid2D& coarse = decomp.coarse;
  const StructuredGrid2D& fine = decomp.fine;

  struct Slot {
    std::vector<Triplet> trips;
    std::vector<std::pair<Index, Index>> prov;
    std::string error;
  };
  std::vector<Slot> slots(coarse.num_nodes());

#pragma omp parallel for schedule(dynamic)
  for (Index cn = 0; cn < coarse.num_nodes(); ++cn) {
    const Neighborhood& nb = decomp.neighborhoods[cn];
    Slot& slot = slots[cn];
    if (nb.trace_nodes.empty()) continue;  // a 1x1 coarse grid has no skeleton
    try {
      EdgeSpace edge = build_edge_space(decomp, cn, level);
      if (edge.dim() == 0) continue;
      LocalSolver solver;
      make_local_solver(decomp, nb, kappa, velocity, solver);
      if (!solver.ok) {
        slot.error = "local solver failed at coarse node " + std::to_string(cn);
        continue;
      }
      const PatchField& chi = pou.chi[cn];
      const Index w = nb.box_nx() + 1;
      for (Index j = 0; j < edge.dim(); ++j) {
        Vector ext = solve_local(solver, decomp, edge.nodal.col(j));
        for (Index loc = 0; loc < ext.size(); ++loc) {
          const Real v = chi.values[loc] * ext[loc];
          if (v == 0.0) continue;
          const Index fi = nb.fi0 + loc % w;
          const Index fj = nb.fj0 + loc / w;
          const Index fr = free_map.free_of_node[fine.node_id(fi, fj)];
          if (fr >= 0) slot.trips.emplace_back(fr, 0, v);  // column set below
        }
        slot.prov.emplace_back(cn, j);
        // Mark the column break with a sentinel count stored in prov order.
        slot.trips.emplace_back(-1, -1, 0.0);
      }
    } catch (const std::exception& e) {
      slot.error = e.what();
    }
  }

  for (const Slot& s : slots) {
    if (!s.error.empty()) throw std::runtime_error("build_multiscale_space: " + s.error);
  }

  MultiscaleSpace space;
  space.level = level;
  std::vector<Triplet> trips;
  Index col = 0;
  for (const Slot& s : slots) {
    for (const Triplet& tr : s.trips) {
      if (tr.row() < 0) {
        ++col;
      } else {
        trips.emplace_back(tr.row(), col, tr.value());
      }
    }
    space.provenance.insert(space.provenance.end(), s.prov.begin(), s.prov.end());
  }
  space.basis.resize(free_map.num_free(), col);
  space.basis.setFromTriplets(trips.begin(), trips.end());
  space.basis.makeCompressed();
  if (col == 0) {
    throw std::runtime_error("build_multiscale_space: empty ansatz space (coarse grid too small)");
  }

  // Normalize columns to unit mass norm. The span is unchanged, but the
  // column scales near dD differ by orders of magnitude and would otherwise
  // dominate ||M_ms^-1 A_ms|| far beyond the generalized spectrum.
  space.column_norms.resize(space.basis.cols());
  {
    SparseMatrix mb = fine_mass_free * space.basis;
    for (Index c = 0; c < space.basis.cols(); ++c) {
      Real nrm2 = 0;
      for (SparseMatrix::InnerIterator it(mb, c); it; ++it) {
        nrm2 += it.value() * space.basis.coeff(it.row(), c);
      }
      space.column_norms[c] = std::sqrt(std::max<Real>(nrm2, 0.0));
    }
    for (Index c = 0; c < space.basis.outerSize(); ++c) {
      for (SparseMatrix::InnerIterator it(space.basis, c); it; ++it) {
        it.valueRef() /= space.column_norms[c] > 0 ? space.column_norms[c] : 1.0;
      }
    }
  }

  space.pruned_columns = prune_columns(space.basis, fine_mass_free);
  if (!space.pruned_columns.empty()) {
    std::vector<std::pair<Index, Index>> kept;
    Vector kept_norms(space.provenance.size() - space.pruned_columns.size());
    kept.reserve(kept_norms.size());
    std::size_t drop_at = 0;
    for (Index j = 0; j < static_cast<Index>(space.provenance.size()); ++j) {
      if (drop_at < space.pruned_columns.size() && space.pruned_columns[drop_at] == j) {
        ++drop_at;
        continue;
      }
      kept_norms[static_cast<Index>(kept.size())] = space.column_norms[j];
      kept.push_back(space.provenance[j]);
    }
    space.provenance.swap(kept);
    space.column_norms.swap(kept_norms);
  }
  return space;
}

namespace {

void symmetrize(SparseMatrix& x, Real& defect) {
  SparseMatrix xt = SparseMatrix(x.transpose());
  SparseMatrix diff = x - xt;
  Real abs_defect = 0.0, scale = 0.0;
  for (Index k = 0; k < diff.nonZeros(); ++k) {
    abs_defect = std::max(abs_defect, std::abs(diff.valuePtr()[k]));
  }
  for (Index k = 0; k < x.nonZeros(); ++k) {
    scale = std::max(scale, std::abs(x.valuePtr()[k]));
  }
  defect = scale > 0 ? abs_defect / scale : 0.0;
  x = 0.5 * (x + xt);
  x.makeCompressed();
}

}  // namespace

void project_operators(MultiscaleSpace& space, const SparseMatrix& fine_mass,
                       const SparseMatrix& fine_diffusion, const SparseMatrix& fine_convection) {
  const SparseMatrix bt = SparseMatrix(space.basis.transpose());
  space.mass = bt * SparseMatrix(fine_mass * space.basis);
  space.diffusion = bt * SparseMatrix(fine_diffusion * space.basis);
  space.convection = bt * SparseMatrix(fine_convection * space.basis);
  symmetrize(space.mass, space.mass_symmetry_defect);
  symmetrize(space.diffusion, space.diffusion_symmetry_defect);
}

Vector project_initial(const MultiscaleSpace& space, const SparseMatrix& fine_mass,
                       const Vector& u0_free) {
  Eigen::SimplicialLDLT<SparseMatrix> ldlt(space.mass);
  if (ldlt.info() != Eigen::Success) {
    throw std::runtime_error("project_initial: coarse mass factorization failed");
  }
  return ldlt.solve(Vector(SparseMatrix(space.basis.transpose()) * (fine_mass * u0_free)));
}

Vector prolongate(const MultiscaleSpace& space, const Vector& coeffs) {
  return space.basis * coeffs;
}

}  // namespace ems
