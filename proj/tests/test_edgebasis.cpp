#include "ems/edge_basis.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace ems;

namespace {

// Counterclockwise arclength of every trace node of an interior neighborhood
// (segments stored bottom, right, top, left; top/left run ccw against their
// storage order).
std::vector<Real> ccw_arclength(const CoarseDecomposition& d, const Neighborhood& nb,
                                Real* perimeter_out) {
  std::vector<Real> s(nb.trace_nodes.size(), 0.0);
  Real offset = 0.0;
  for (int seg_id = 0; seg_id < static_cast<int>(nb.segments.size()); ++seg_id) {
    const EdgeSegment& seg = nb.segments[seg_id];
    const Real he = seg.axis == 0 ? d.fine.hx() : d.fine.hy();
    const Index n = seg.num_intervals();
    const bool reversed = seg_id >= 2;  // top, left
    for (Index k = 0; k <= n; ++k) {
      if (seg.on_dirichlet[k]) continue;
      if (!seg.owned[k]) continue;  // assign each node once, by its owner
      const Real along = reversed ? static_cast<Real>(n - k) : static_cast<Real>(k);
      s[nb.trace_index.at(seg.nodes[k])] = offset + along * he;
    }
    offset += static_cast<Real>(n) * he;
  }
  if (perimeter_out) *perimeter_out = offset;
  return s;
}

Real projection_error(const CoarseDecomposition& d, const Neighborhood& nb,
                      const EdgeSpace& space, const Vector& trace) {
  Vector c = l2_project_edge(d, space, trace);
  Vector residual = trace - space.nodal * c;
  return edge_trace_norm(d, nb, residual);
}

}  // namespace

TEST_SUITE("edgebasis") {

TEST_CASE("hat evaluations") {
  CHECK(basis_1d_eval(0, 0, 0.0) == 1.0);
  CHECK(basis_1d_eval(0, 0, 1.0) == 0.0);
  CHECK(basis_1d_eval(0, 0, 0.5) == 0.5);
  CHECK(basis_1d_eval(1, 1, 0.5) == 1.0);
  CHECK(basis_1d_eval(1, 1, 0.0) == 0.0);
  CHECK(basis_1d_eval(2, 1, 0.125) == 0.5);
  CHECK_THROWS_AS(basis_1d_eval(1, 0, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(basis_1d_eval(2, 2, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(basis_1d_eval(3, 9, 0.5), std::invalid_argument);
}

TEST_CASE("index sets and dimensions") {
  CHECK(in_index_set(0, 0));
  CHECK(in_index_set(0, 1));
  CHECK(!in_index_set(0, 2));
  CHECK(in_index_set(3, 5));
  CHECK(!in_index_set(3, 4));
  for (int l = 0; l <= 5; ++l) {
    CHECK(hierarchical_dim(l) == (Index{1} << l) + 1);
    CHECK(static_cast<Index>(hierarchical_members(l).size()) == hierarchical_dim(l));
  }
}

TEST_CASE("hats vanish outside their support") {
  // psi_{2,1} is supported on [0, 0.5].
  CHECK(basis_1d_eval(2, 1, 0.55) == 0.0);
  CHECK(basis_1d_eval(2, 3, 0.45) == 0.0);
  // Level-m hats span piecewise linears: nodal interpolation of a hat of
  // level m at the 2^m grid reproduces itself at grid points.
  for (Index j : {Index{1}, Index{3}}) {
    for (Index k = 0; k <= 8; ++k) {
      Real x = static_cast<Real>(k) / 8.0;
      Real v = basis_1d_eval(3, j, x);
      CHECK(v == doctest::Approx(std::max<Real>(0.0, 1.0 - std::abs(8.0 * x - j))));
    }
  }
}

TEST_CASE("edge space dimension law") {
  auto c = build_grid({0, 1, 0, 1}, 4, 4);
  auto d = build_decomposition(c, 4);
  for (int l = 0; l <= 2; ++l) {
    auto interior = build_edge_space(d, c.node_id(2, 2), l);
    CHECK(interior.dim() == (Index{1} << (l + 2)));
    // Near dD: (#segments)(2^l+1) - (#interior corners) - (#endpoints on dD).
    auto corner = build_edge_space(d, c.node_id(0, 0), l);
    CHECK(corner.dim() == 2 * ((Index{1} << l) + 1) - 1 - 2);
    auto edge = build_edge_space(d, c.node_id(2, 0), l);
    CHECK(edge.dim() == 3 * ((Index{1} << l) + 1) - 2 - 2);
  }
  CHECK_THROWS_AS(build_edge_space(d, c.node_id(2, 2), 3), std::invalid_argument);
}

TEST_CASE("constant is representable on interior neighborhoods") {
  auto c = build_grid({0, 1, 0, 1}, 4, 4);
  auto d = build_decomposition(c, 8);
  for (int l = 0; l <= 3; ++l) {
    auto space = build_edge_space(d, c.node_id(2, 2), l);
    Vector sum = space.nodal.rowwise().sum();
    CHECK((sum - Vector::Ones(sum.size())).lpNorm<Eigen::Infinity>() < 1e-14);
  }
}

TEST_CASE("projection is idempotent on the space and zero on zero") {
  auto c = build_grid({0, 1, 0, 1}, 4, 4);
  auto d = build_decomposition(c, 8);
  auto space = build_edge_space(d, c.node_id(1, 2), 2);
  std::mt19937_64 rng(5);
  std::normal_distribution<Real> dist;
  Vector coeffs(space.dim());
  for (Index k = 0; k < space.dim(); ++k) coeffs[k] = dist(rng);
  Vector trace = space.nodal * coeffs;
  Vector back = l2_project_edge(d, space, trace);
  CHECK((back - coeffs).lpNorm<Eigen::Infinity>() < 1e-12);

  Vector zero = Vector::Zero(trace.size());
  CHECK(l2_project_edge(d, space, zero).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("nestedness: level-l members reproduce exactly in level l+1") {
  auto c = build_grid({0, 1, 0, 1}, 4, 4);
  auto d = build_decomposition(c, 8);
  const Neighborhood& nb = d.neighborhoods[c.node_id(2, 2)];
  for (int l = 0; l <= 2; ++l) {
    auto coarse_space = build_edge_space(d, c.node_id(2, 2), l);
    auto finer_space = build_edge_space(d, c.node_id(2, 2), l + 1);
    for (Index col = 0; col < coarse_space.dim(); ++col) {
      Vector member = coarse_space.nodal.col(col);
      Real res = projection_error(d, nb, finer_space, member);
      CHECK(res <= 1e-12 * std::max<Real>(1.0, edge_trace_norm(d, nb, member)));
    }
  }
}

TEST_CASE("projection error decay: smooth and sawtooth traces") {
  auto c = build_grid({0, 1, 0, 1}, 4, 4);
  auto d = build_decomposition(c, 32);
  const Index cn = c.node_id(2, 2);
  const Neighborhood& nb = d.neighborhoods[cn];
  Real perimeter = 0;
  auto s = ccw_arclength(d, nb, &perimeter);

  Vector smooth(nb.trace_nodes.size()), saw(nb.trace_nodes.size());
  constexpr Real kPi = 3.14159265358979323846;
  for (Index k = 0; k < smooth.size(); ++k) {
    smooth[k] = std::sin(2.0 * kPi * 2.0 * s[k] / perimeter);
    // 7 triangle periods around the loop; kinks sit away from dyadic nodes.
    Real u = 7.0 * s[k] / perimeter;
    saw[k] = 2.0 * std::abs(u - std::floor(u + 0.5));
  }

  std::vector<Real> es, ez;
  for (int l = 0; l <= 4; ++l) {
    auto space = build_edge_space(d, cn, l);
    es.push_back(projection_error(d, nb, space, smooth));
    ez.push_back(projection_error(d, nb, space, saw));
  }
  // Smooth data saturates the piecewise-linear rate 2^-2 per level.
  for (int l = 1; l <= 3; ++l) {
    Real ratio = es[l + 1] / es[l];
    CHECK(ratio >= 0.2);
    CHECK(ratio <= 0.35);
  }
  // Lipschitz sawtooth: at least halving per level.
  for (int l = 1; l <= 3; ++l) {
    CHECK(ez[l + 1] / ez[l] <= 0.6);
  }
}

}  // TEST_SUITE
