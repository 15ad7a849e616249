#include "ems/assembly.hpp"

#include <Eigen/SparseCholesky>

#include <array>
#include <cmath>
#include <stdexcept>

namespace ems {

namespace {

// Bilinear shape functions on the reference square [0,1]^2, corners
// SW, SE, NE, NW.
inline std::array<Real, 4> shape(Real xi, Real eta) {
  return {(1 - xi) * (1 - eta), xi * (1 - eta), xi * eta, (1 - xi) * eta};
}

inline std::array<std::array<Real, 2>, 4> shape_grad(Real xi, Real eta, Real hx, Real hy) {
  return {{{-(1 - eta) / hx, -(1 - xi) / hy},
           {(1 - eta) / hx, -xi / hy},
           {eta / hx, xi / hy},
           {-eta / hx, (1 - xi) / hy}}};
}

struct QuadRule {
  std::array<Real, 3> x;
  std::array<Real, 3> w;
  int n;
};

inline QuadRule gauss2() {
  const Real d = 0.5 / std::sqrt(3.0);
  return {{0.5 - d, 0.5 + d, 0.0}, {0.5, 0.5, 0.0}, 2};
}

inline QuadRule gauss3() {
  const Real d = 0.5 * std::sqrt(0.6);
  return {{0.5 - d, 0.5, 0.5 + d}, {5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0}, 3};
}

}  // namespace

Eigen::Matrix4d element_mass(Real hx, Real hy) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Zero();
  const QuadRule q = gauss2();
  for (int a = 0; a < q.n; ++a) {
    for (int b = 0; b < q.n; ++b) {
      const Real w = q.w[a] * q.w[b] * hx * hy;
      auto phi = shape(q.x[a], q.x[b]);
      for (int p = 0; p < 4; ++p)
        for (int r = 0; r < 4; ++r) m(p, r) += w * phi[p] * phi[r];
    }
  }
  return m;
}

Eigen::Matrix4d element_stiffness(Real hx, Real hy) {
  Eigen::Matrix4d k = Eigen::Matrix4d::Zero();
  const QuadRule q = gauss2();
  for (int a = 0; a < q.n; ++a) {
    for (int b = 0; b < q.n; ++b) {
      const Real w = q.w[a] * q.w[b] * hx * hy;
      auto g = shape_grad(q.x[a], q.x[b], hx, hy);
      for (int p = 0; p < 4; ++p)
        for (int r = 0; r < 4; ++r)
          k(p, r) += w * (g[p][0] * g[r][0] + g[p][1] * g[r][1]);
    }
  }
  return k;
}

Eigen::Matrix4d element_convection(Real x0, Real y0, Real hx, Real hy,
                                   const VelocityField& beta) {
  Eigen::Matrix4d c = Eigen::Matrix4d::Zero();
  const QuadRule q = gauss3();
  for (int a = 0; a < q.n; ++a) {
    for (int b = 0; b < q.n; ++b) {
      const Real w = q.w[a] * q.w[b] * hx * hy;
      auto phi = shape(q.x[a], q.x[b]);
      auto g = shape_grad(q.x[a], q.x[b], hx, hy);
      auto bv = beta.beta0(x0 + q.x[a] * hx, y0 + q.x[b] * hy);
      for (int p = 0; p < 4; ++p)
        for (int r = 0; r < 4; ++r)
          c(p, r) += w * phi[p] * (bv[0] * g[r][0] + bv[1] * g[r][1]);
    }
  }
  return c;
}

namespace {

template <class LocalFn>
SparseMatrix scatter(const StructuredGrid2D& grid, LocalFn&& local) {
  std::vector<Triplet> trips;
  trips.reserve(16 * grid.num_elements());
  for (Index e = 0; e < grid.num_elements(); ++e) {
    const auto nodes = grid.element_nodes(e);
    const Eigen::Matrix4d le = local(e);
    for (int p = 0; p < 4; ++p)
      for (int r = 0; r < 4; ++r)
        trips.emplace_back(nodes[p], nodes[r], le(p, r));
  }
  SparseMatrix m(grid.num_nodes(), grid.num_nodes());
  m.setFromTriplets(trips.begin(), trips.end());
  m.makeCompressed();
  return m;
}

}  // namespace

SparseOperator assemble_mass(const StructuredGrid2D& grid) {
  const Eigen::Matrix4d me = element_mass(grid.hx(), grid.hy());
  return {scatter(grid, [&](Index) { return me; }), true};
}

SparseOperator assemble_stiffness(const StructuredGrid2D& grid, const CoefficientField& kappa) {
  if (kappa.values.size() != grid.num_elements()) {
    throw std::invalid_argument("assemble_stiffness: one kappa value per element required");
  }
  const Eigen::Matrix4d ke = element_stiffness(grid.hx(), grid.hy());
  return {scatter(grid, [&](Index e) { return Eigen::Matrix4d(kappa.values[e] * ke); }), true};
}

SparseOperator assemble_convection(const StructuredGrid2D& grid, const VelocityField& beta) {
  const Real hx = grid.hx(), hy = grid.hy();
  return {scatter(grid,
                  [&](Index e) {
                    auto [i, j] = grid.element_ij(e);
                    const Real x0 = grid.node_xy(grid.node_id(i, j))[0];
                    const Real y0 = grid.node_xy(grid.node_id(i, j))[1];
                    return element_convection(x0, y0, hx, hy, beta);
                  }),
          false};
}

Vector assemble_load(const StructuredGrid2D& grid, const std::function<Real(Real, Real)>& f) {
  Vector b = Vector::Zero(grid.num_nodes());
  const Real hx = grid.hx(), hy = grid.hy();
  const QuadRule q = gauss3();
  for (Index e = 0; e < grid.num_elements(); ++e) {
    const auto nodes = grid.element_nodes(e);
    auto [i, j] = grid.element_ij(e);
    const Real x0 = grid.node_xy(grid.node_id(i, j))[0];
    const Real y0 = grid.node_xy(grid.node_id(i, j))[1];
    for (int a = 0; a < q.n; ++a) {
      for (int c = 0; c < q.n; ++c) {
        const Real w = q.w[a] * q.w[c] * hx * hy;
        const Real fv = f(x0 + q.x[a] * hx, y0 + q.x[c] * hy);
        auto phi = shape(q.x[a], q.x[c]);
        for (int p = 0; p < 4; ++p) b[nodes[p]] += w * fv * phi[p];
      }
    }
  }
  return b;
}

Vector interpolate(const StructuredGrid2D& grid, const std::function<Real(Real, Real)>& f) {
  Vector v(grid.num_nodes());
  for (Index n = 0; n < grid.num_nodes(); ++n) {
    auto xy = grid.node_xy(n);
    v[n] = f(xy[0], xy[1]);
  }
  return v;
}

Vector l2_project_fine(const StructuredGrid2D& grid, const std::function<Real(Real, Real)>& f) {
  SparseOperator mass = assemble_mass(grid);
  Eigen::SimplicialLDLT<SparseMatrix> solver(mass.matrix);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("l2_project_fine: mass factorization failed");
  }
  return solver.solve(assemble_load(grid, f));
}

FreeNodeMap make_free_map(Index num_nodes, const std::vector<Index>& constrained) {
  FreeNodeMap map;
  map.free_of_node.assign(num_nodes, -1);
  std::vector<char> is_constrained(num_nodes, 0);
  for (Index n : constrained) is_constrained[n] = 1;
  map.node_of_free.reserve(num_nodes - static_cast<Index>(constrained.size()));
  for (Index n = 0; n < num_nodes; ++n) {
    if (!is_constrained[n]) {
      map.free_of_node[n] = static_cast<Index>(map.node_of_free.size());
      map.node_of_free.push_back(n);
    }
  }
  return map;
}

SparseMatrix reduce_matrix(const SparseMatrix& full, const FreeNodeMap& map) {
  std::vector<Triplet> trips;
  trips.reserve(full.nonZeros());
  for (Index col = 0; col < full.outerSize(); ++col) {
    const Index fc = map.free_of_node[col];
    if (fc < 0) continue;
    for (SparseMatrix::InnerIterator it(full, col); it; ++it) {
      const Index fr = map.free_of_node[it.row()];
      if (fr >= 0) trips.emplace_back(fr, fc, it.value());
    }
  }
  SparseMatrix out(map.num_free(), map.num_free());
  out.setFromTriplets(trips.begin(), trips.end());
  out.makeCompressed();
  return out;
}

Vector restrict_to_free(const Vector& full, const FreeNodeMap& map) {
  Vector out(map.num_free());
  for (Index k = 0; k < map.num_free(); ++k) out[k] = full[map.node_of_free[k]];
  return out;
}

Vector extend_to_all(const Vector& free_values, const FreeNodeMap& map, Index num_nodes) {
  Vector out = Vector::Zero(num_nodes);
  for (Index k = 0; k < map.num_free(); ++k) out[map.node_of_free[k]] = free_values[k];
  return out;
}

ReducedSystem apply_dirichlet(const SparseOperator& op, const Vector& rhs,
                              const std::vector<Index>& boundary) {
  ReducedSystem sys;
  sys.map = make_free_map(op.matrix.rows(), boundary);
  sys.matrix = reduce_matrix(op.matrix, sys.map);
  sys.rhs = restrict_to_free(rhs, sys.map);
  sys.symmetric = op.symmetric;
  return sys;
}

}  // namespace ems
