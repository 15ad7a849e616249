#include "ems/edge_basis.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <unordered_map>

namespace ems {

bool in_index_set(int m, Index j) {
  if (m < 0) return false;
  if (m == 0) return j == 0 || j == 1;
  return j >= 1 && j <= (Index{1} << m) - 1 && (j % 2 == 1);
}

Index hierarchical_dim(int level) { return (Index{1} << level) + 1; }

std::vector<std::pair<int, Index>> hierarchical_members(int level) {
  std::vector<std::pair<int, Index>> out;
  out.reserve(hierarchical_dim(level));
  for (int m = 0; m <= level; ++m) {
    for (Index j = 0; j <= (Index{1} << m); ++j) {
      if (in_index_set(m, j)) out.emplace_back(m, j);
    }
  }
  return out;
}

Real basis_1d_eval(int m, Index j, Real x) {
  if (!in_index_set(m, j)) {
    throw std::invalid_argument("basis_1d_eval: index not in B_m");
  }
  if (x < 0.0 || x > 1.0) return 0.0;
  const Real scaled = x * static_cast<Real>(Index{1} << m);
  return std::max<Real>(0.0, 1.0 - std::abs(scaled - static_cast<Real>(j)));
}

EdgeSpace build_edge_space(const CoarseDecomposition& decomp, Index coarse_node, int level) {
  if (level < 0) throw std::invalid_argument("build_edge_space: negative level");
  if (level > decomp.max_level()) {
    throw std::invalid_argument("build_edge_space: level exceeds log2(ratio)");
  }
  const Neighborhood& nb = decomp.neighborhoods[coarse_node];
  const Index nodes_per_seg = Index{1} << level;

  EdgeSpace space;
  space.coarse_node = coarse_node;
  space.level = level;

  // Create dofs: one per dyadic nodal point, merging shared segment corners
  // (same fine node) and dropping points on dD.
  std::unordered_map<Index, Index> dof_of_fine;
  for (int s = 0; s < static_cast<int>(nb.segments.size()); ++s) {
    const EdgeSegment& seg = nb.segments[s];
    const Index n = seg.num_intervals();
    if (n % nodes_per_seg != 0) {
      throw std::invalid_argument(
          "build_edge_space: level exceeds log2(ratio), dyadic nodes miss fine nodes");
    }
    const Index step = n / nodes_per_seg;
    for (Index j = 0; j <= nodes_per_seg; ++j) {
      const Index k = j * step;
      if (seg.on_dirichlet[k]) continue;
      const Index fine_node = seg.nodes[k];
      if (dof_of_fine.count(fine_node)) continue;
      dof_of_fine.emplace(fine_node, static_cast<Index>(space.dofs.size()));
      space.dofs.push_back({fine_node, s, j});
    }
  }

  const Index dim = static_cast<Index>(space.dofs.size());
  space.nodal = Matrix::Zero(static_cast<Index>(nb.trace_nodes.size()), dim);

  // Sample each dof's piecewise-linear hat at the fine trace nodes,
  // segment by segment.
  for (int s = 0; s < static_cast<int>(nb.segments.size()); ++s) {
    const EdgeSegment& seg = nb.segments[s];
    const Index n = seg.num_intervals();
    const Index step = n / nodes_per_seg;
    for (Index k = 0; k <= n; ++k) {
      if (seg.on_dirichlet[k]) continue;
      const auto trace_it = nb.trace_index.find(seg.nodes[k]);
      const Index row = trace_it->second;
      const Real t = static_cast<Real>(k) / static_cast<Real>(n);
      for (Index j = 0; j <= nodes_per_seg; ++j) {
        const Index kj = j * step;
        if (seg.on_dirichlet[kj]) continue;
        const Real val =
            std::max<Real>(0.0, 1.0 - std::abs(t * static_cast<Real>(nodes_per_seg) -
                                               static_cast<Real>(j)));
        if (val != 0.0) space.nodal(row, dof_of_fine.at(seg.nodes[kj])) = val;
      }
    }
  }
  return space;
}

SparseMatrix edge_trace_mass(const CoarseDecomposition& decomp, const Neighborhood& nb) {
  const Index nt = static_cast<Index>(nb.trace_nodes.size());
  std::vector<Triplet> trips;
  for (const EdgeSegment& seg : nb.segments) {
    const Real he = seg.axis == 0 ? decomp.fine.hx() : decomp.fine.hy();
    for (Index k = 0; k + 1 < static_cast<Index>(seg.nodes.size()); ++k) {
      const Index a = seg.on_dirichlet[k] ? -1 : nb.trace_index.at(seg.nodes[k]);
      const Index b = seg.on_dirichlet[k + 1] ? -1 : nb.trace_index.at(seg.nodes[k + 1]);
      if (a >= 0) trips.emplace_back(a, a, he / 3.0);
      if (b >= 0) trips.emplace_back(b, b, he / 3.0);
      if (a >= 0 && b >= 0) {
        trips.emplace_back(a, b, he / 6.0);
        trips.emplace_back(b, a, he / 6.0);
      }
    }
  }
  SparseMatrix m(nt, nt);
  m.setFromTriplets(trips.begin(), trips.end());
  m.makeCompressed();
  return m;
}

Real edge_trace_norm(const CoarseDecomposition& decomp, const Neighborhood& nb,
                     const Vector& v) {
  SparseMatrix m = edge_trace_mass(decomp, nb);
  return std::sqrt(v.dot(m * v));
}

Vector l2_project_edge(const CoarseDecomposition& decomp, const EdgeSpace& space,
                       const Vector& trace_values) {
  const Neighborhood& nb = decomp.neighborhoods[space.coarse_node];
  if (trace_values.size() != static_cast<Index>(nb.trace_nodes.size())) {
    throw std::invalid_argument("l2_project_edge: trace size mismatch");
  }
  const SparseMatrix mt = edge_trace_mass(decomp, nb);
  const Matrix gram = space.nodal.transpose() * (mt * space.nodal);
  const Vector rhs = space.nodal.transpose() * (mt * trace_values);
  return Eigen::LDLT<Matrix>(gram).solve(rhs);
}

}  // namespace ems
