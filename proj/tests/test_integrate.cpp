#include "ems/integrate.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>

using namespace ems;

namespace {

SparseMatrix to_sparse(const Matrix& m) {
  SparseMatrix s = m.sparseView(1.0, 0.0);
  s.makeCompressed();
  return s;
}

// Coarse system with B = I: coefficients are nodal values, the reaction is
// exactly representable, and the stepper semantics can be checked against
// closed forms.
struct IdentityFixture {
  MultiscaleSpace space;
  SparseMatrix fine_mass;

  IdentityFixture(const Matrix& mass, const Matrix& diff, const Matrix& conv) {
    const Index n = mass.rows();
    SparseMatrix eye(n, n);
    eye.setIdentity();
    space.basis = eye;
    space.mass = to_sparse(mass);
    space.diffusion = to_sparse(diff);
    space.convection = to_sparse(conv);
    space.level = 0;
    for (Index k = 0; k < n; ++k) space.provenance.emplace_back(k, 0);
    fine_mass = space.mass;
  }

  SpeciesSystem system(VelocityField vel = zero_velocity()) {
    return {&space, &fine_mass, vel};
  }
};

}  // namespace

TEST_SUITE("integrate") {

TEST_CASE("linear scalar decay is exact per step") {
  const Real lambda = 3.7, dt = 0.01;
  IdentityFixture f(Matrix::Identity(1, 1), lambda * Matrix::Identity(1, 1),
                    Matrix::Zero(1, 1));
  IntegratorOptions opt;
  opt.dt = dt;
  opt.t_end = dt;
  ExponentialEuler stepper({f.system()}, no_reaction(), opt);
  StepperState s0;
  s0.coeffs = {Vector::Constant(1, 2.0)};
  StepperState s1 = stepper.step(s0);
  CHECK(s1.coeffs[0][0] == doctest::Approx(2.0 * std::exp(-dt * lambda)).epsilon(1e-14));
}

TEST_CASE("constant source scalar flow matches the closed form over 100 steps") {
  const Real lambda = 2.0, r = 0.7, dt = 1.0 / 128.0, u0 = -0.3;
  IdentityFixture f(Matrix::Identity(1, 1), lambda * Matrix::Identity(1, 1),
                    Matrix::Zero(1, 1));
  IntegratorOptions opt;
  opt.dt = dt;
  opt.t_end = 100 * dt;
  ExponentialEuler stepper({f.system()}, polynomial_reaction({r}), opt);
  auto traj = stepper.run({Vector::Constant(1, u0)});
  const Real t = 100 * dt;
  const Real exact = (u0 - r / lambda) * std::exp(-lambda * t) + r / lambda;
  CHECK(traj.back().coeffs[0][0] == doctest::Approx(exact).epsilon(1e-12));
}

TEST_CASE("affine systems are integrated exactly (dimension 5)") {
  Matrix a = oracle::random_matrix(5, 2.0, 9);
  a = Matrix(0.5 * (a + a.transpose()));
  a += (1.5 - a.eigenvalues().real().minCoeff()) * Matrix::Identity(5, 5);  // SPD
  IdentityFixture f(Matrix::Identity(5, 5), a, Matrix::Zero(5, 5));
  const Real r = 0.42, dt = 1.0 / 64.0;
  IntegratorOptions opt;
  opt.dt = dt;
  opt.t_end = 100 * dt;
  ExponentialEuler stepper({f.system()}, polynomial_reaction({r}), opt);
  Vector u0(5);
  u0 << 1.0, -0.5, 0.25, 0.0, 2.0;
  auto traj = stepper.run({u0});

  // Eigendecomposition oracle of the exact affine flow.
  Eigen::SelfAdjointEigenSolver<Matrix> es(a);
  Vector rv = Vector::Constant(5, r);
  Vector ustar = es.eigenvectors() *
                 (es.eigenvalues().cwiseInverse().asDiagonal() *
                  (es.eigenvectors().transpose() * rv));
  Vector w = es.eigenvectors().transpose() * (u0 - ustar);
  for (Index k = 0; k < 5; ++k) w[k] *= std::exp(-es.eigenvalues()[k] * opt.t_end);
  Vector exact = es.eigenvectors() * w + ustar;
  CHECK((traj.back().coeffs[0] - exact).lpNorm<Eigen::Infinity>() <= 1e-12);
}

TEST_CASE("schnakenberg constant state is a fixed point on a kernel fixture") {
  // 1-d Neumann-style Laplacian: constants are in the kernel.
  const Index n = 12;
  Matrix lap = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    if (i > 0) {
      lap(i, i) += 1;
      lap(i, i - 1) -= 1;
    }
    if (i + 1 < n) {
      lap(i, i) += 1;
      lap(i, i + 1) -= 1;
    }
  }
  IdentityFixture f1(Matrix::Identity(n, n), lap, Matrix::Zero(n, n));
  IdentityFixture f2(Matrix::Identity(n, n), 10.0 * lap, Matrix::Zero(n, n));
  const Real a = 0.1, b = 0.9;
  IntegratorOptions opt;
  opt.dt = 0.01;
  opt.t_end = 1.0;
  ExponentialEuler stepper({f1.system(), f2.system()}, schnakenberg_reaction(3.0, a, b), opt);
  Vector u1 = Vector::Constant(n, a + b);
  Vector u2 = Vector::Constant(n, b / ((a + b) * (a + b)));
  StepperState s;
  s.coeffs = {u1, u2};
  for (int k = 0; k < 100; ++k) {
    StepperState nxt = stepper.step(s);
    CHECK((nxt.coeffs[0] - u1).lpNorm<Eigen::Infinity>() <= 1e-10);
    CHECK((nxt.coeffs[1] - u2).lpNorm<Eigen::Infinity>() <= 1e-10);
    s = nxt;
    s.step = 0;
    s.t = 0;
  }
}

TEST_CASE("two species with zero reaction decouple bitwise") {
  Matrix a1 = oracle::random_matrix(6, 1.0, 31);
  a1 = Matrix(a1 * a1.transpose()) + Matrix::Identity(6, 6);
  Matrix a2 = oracle::random_matrix(6, 1.5, 32);
  a2 = Matrix(a2 * a2.transpose()) + Matrix::Identity(6, 6);
  IdentityFixture f1(Matrix::Identity(6, 6), a1, Matrix::Zero(6, 6));
  IdentityFixture f2(Matrix::Identity(6, 6), a2, Matrix::Zero(6, 6));
  IntegratorOptions opt;
  opt.dt = 0.05;
  opt.t_end = 1.0;
  Vector u1 = oracle::random_matrix(6, 1.0, 33).col(0);
  Vector u2 = oracle::random_matrix(6, 1.0, 34).col(0);

  ExponentialEuler both({f1.system(), f2.system()}, no_reaction(2), opt);
  auto tb = both.run({u1, u2});
  ExponentialEuler one1({f1.system()}, no_reaction(1), opt);
  ExponentialEuler one2({f2.system()}, no_reaction(1), opt);
  auto t1 = one1.run({u1});
  auto t2 = one2.run({u2});
  for (std::size_t k = 0; k < tb.size(); ++k) {
    CHECK((tb[k].coeffs[0] - t1[k].coeffs[0]).lpNorm<Eigen::Infinity>() == 0.0);
    CHECK((tb[k].coeffs[1] - t2[k].coeffs[0]).lpNorm<Eigen::Infinity>() == 0.0);
  }
}

TEST_CASE("blow-up aborts with the offending step") {
  IdentityFixture f(Matrix::Identity(2, 2), Matrix::Zero(2, 2), Matrix::Zero(2, 2));
  IntegratorOptions opt;
  opt.dt = 10.0;
  opt.t_end = 1000.0;
  ExponentialEuler stepper({f.system()}, polynomial_reaction({0, 0, 0, 1.0}), opt);
  try {
    stepper.run({Vector::Constant(2, 50.0)});
    FAIL("expected IntegrationError");
  } catch (const IntegrationError& e) {
    CHECK(e.step >= 1);
  }
}

TEST_CASE("trajectory bookkeeping") {
  IdentityFixture f(Matrix::Identity(2, 2), Matrix::Identity(2, 2), Matrix::Zero(2, 2));
  IntegratorOptions opt;
  opt.dt = 0.1;
  opt.t_end = 0.0;
  ExponentialEuler zero_steps({f.system()}, no_reaction(), opt);
  CHECK(zero_steps.run({Vector::Ones(2)}).size() == 1);

  opt.t_end = 1.2;  // 12 steps
  opt.snapshot_stride = 4;
  ExponentialEuler strided({f.system()}, no_reaction(), opt);
  CHECK(strided.run({Vector::Ones(2)}).size() == 4);  // steps 0, 4, 8, 12

  opt.t_end = 1.0;  // 10 steps, final recorded although off stride
  ExponentialEuler strided2({f.system()}, no_reaction(), opt);
  auto tr = strided2.run({Vector::Ones(2)});
  CHECK(tr.size() == 4);  // 0, 4, 8, 10
  CHECK(tr.back().step == 10);
}

TEST_CASE("propagator is cached per modulation value") {
  Matrix a = Matrix::Identity(3, 3);
  a(1, 1) = 2.0;
  a(2, 2) = 5.0;
  IdentityFixture f(Matrix::Identity(3, 3), a, Matrix::Zero(3, 3));
  IntegratorOptions opt;
  opt.dt = 0.25;
  opt.t_end = 1.0;
  ExponentialEuler stepper({f.system()}, no_reaction(), opt);
  const Matrix* p1 = stepper.propagator(0, 1.0);
  const Matrix* p2 = stepper.propagator(0, 1.0);
  CHECK(p1 == p2);

  // Diagonal spectral mapping: eigenvalues of P are dt*phi1(-dt*lambda),
  // real and in (0, dt] for lambda >= 0.
  for (Index k = 0; k < 3; ++k) {
    const Real expect = opt.dt * (1.0 - std::exp(-opt.dt * a(k, k))) / (opt.dt * a(k, k));
    CHECK((*p1)(k, k) == doctest::Approx(expect).epsilon(1e-13));
    CHECK((*p1)(k, k) > 0.0);
    CHECK((*p1)(k, k) <= opt.dt);
  }
}

TEST_CASE("propagator over dt tends to the identity") {
  Matrix a = oracle::random_matrix(4, 1.0, 3);
  a = Matrix(a * a.transpose());
  IdentityFixture f(Matrix::Identity(4, 4), a, Matrix::Zero(4, 4));
  IntegratorOptions opt;
  opt.dt = 1e-8;
  opt.t_end = 1e-8;
  ExponentialEuler stepper({f.system()}, no_reaction(), opt);
  const Matrix* p = stepper.propagator(0, 1.0);
  CHECK((*p / opt.dt - Matrix::Identity(4, 4)).lpNorm<Eigen::Infinity>() <= 1e-6);
}

TEST_CASE("action and dense stepping agree") {
  Matrix a = oracle::random_matrix(24, 4.0, 61);
  a = Matrix(a * a.transpose()) * 0.2 + Matrix::Identity(24, 24);
  Matrix c = oracle::random_matrix(24, 1.0, 62);
  c = Matrix(0.5 * (c - c.transpose()));
  IdentityFixture f(Matrix::Identity(24, 24), a, c);
  IntegratorOptions opt;
  opt.dt = 1.0 / 32.0;
  opt.t_end = 0.5;
  Vector u0 = oracle::random_matrix(24, 1.0, 63).col(0);

  ExponentialEuler dense({f.system(exp_rot_velocity())}, allen_cahn_reaction(0.5), opt);
  IntegratorOptions opt_action = opt;
  opt_action.dense_propagator_max_dim = 0;
  ExponentialEuler action({f.system(exp_rot_velocity())}, allen_cahn_reaction(0.5), opt_action);
  opt.g_quantum = 0.0;
  IntegratorOptions opt_exact = opt;
  ExponentialEuler dense_exact({f.system(exp_rot_velocity())}, allen_cahn_reaction(0.5),
                               opt_exact);

  auto td = dense_exact.run({u0});
  auto ta = action.run({u0});
  CHECK((td.back().coeffs[0] - ta.back().coeffs[0]).lpNorm<Eigen::Infinity>() <= 1e-10);
}

TEST_CASE("backward euler decays in the mass norm without reaction") {
  auto g = build_grid({0, 1, 0, 1}, 16, 16);
  auto map = make_free_map(g.num_nodes(), g.boundary_nodes());
  SparseMatrix m = reduce_matrix(assemble_mass(g).matrix, map);
  SparseMatrix a = reduce_matrix(assemble_stiffness(g, constant_coefficient(g, 1.0)).matrix, map);
  SparseMatrix c = reduce_matrix(assemble_convection(g, exp_rot_velocity()).matrix, map);
  Vector u0 = restrict_to_free(interpolate(g,
                                           [](Real x, Real y) {
                                             return std::sin(3.14159265358979 * x) *
                                                    std::sin(3.14159265358979 * y);
                                           }),
                               map);
  ReferenceOptions opt;
  opt.dt = 0.01;
  opt.t_end = 0.1;
  opt.snapshot_stride = 1;
  auto traj = backward_euler_reference({{&m, &a, &c, exp_rot_velocity()}}, no_reaction(), {u0},
                                       opt);
  REQUIRE(traj.states.size() == 11);
  Real prev = std::sqrt(u0.dot(m * u0));
  for (std::size_t k = 1; k < traj.states.size(); ++k) {
    Real cur = std::sqrt(traj.states[k][0].dot(m * traj.states[k][0]));
    CHECK(cur < prev);
    prev = cur;
  }
}

TEST_CASE("backward euler is first order in time (self convergence)") {
  auto g = build_grid({-1, 1, -1, 1}, 32, 32);
  auto map = make_free_map(g.num_nodes(), g.boundary_nodes());
  SparseMatrix m = reduce_matrix(assemble_mass(g).matrix, map);
  SparseMatrix a = reduce_matrix(assemble_stiffness(g, constant_coefficient(g, 1.0)).matrix, map);
  SparseMatrix c = reduce_matrix(assemble_convection(g, exp_rot_velocity()).matrix, map);
  constexpr Real kPi = 3.14159265358979323846;
  Vector u0 = restrict_to_free(
      interpolate(g, [&](Real x, Real y) { return std::sin(2 * kPi * x) * std::sin(2 * kPi * y); }),
      map);
  auto reaction = allen_cahn_reaction(0.1);
  auto run_at = [&](Real dt) {
    ReferenceOptions opt;
    opt.dt = dt;
    opt.t_end = 1.0 / 16.0;
    auto traj = backward_euler_reference({{&m, &a, &c, exp_rot_velocity()}}, reaction, {u0}, opt);
    return traj.states.back()[0];
  };
  const Real dt0 = 1.0 / 1024.0;
  Vector udt = run_at(dt0);
  Vector udt2 = run_at(dt0 / 2);
  Vector udt4 = run_at(dt0 / 4);
  Vector udt8 = run_at(dt0 / 8);
  auto mnorm = [&](const Vector& v) { return std::sqrt(v.dot(m * v)); };
  const Real e1 = mnorm(udt - udt4);
  const Real e2 = mnorm(udt2 - udt8);
  const Real ratio = e1 / e2;
  MESSAGE("temporal self-convergence ratio: ", ratio);
  CHECK(ratio >= 1.7);
  CHECK(ratio <= 2.3);
}

TEST_CASE("newton failure raises an integration error") {
  auto g = build_grid({0, 1, 0, 1}, 8, 8);
  auto map = make_free_map(g.num_nodes(), g.boundary_nodes());
  SparseMatrix m = reduce_matrix(assemble_mass(g).matrix, map);
  SparseMatrix a = reduce_matrix(assemble_stiffness(g, constant_coefficient(g, 1.0)).matrix, map);
  Vector u0 = Vector::Constant(map.num_free(), 2.0);
  ReferenceOptions opt;
  opt.dt = 1.0;
  opt.t_end = 2.0;
  // Strongly unstable cubic growth: Newton cannot reach 1e-10 at dt = 1.
  auto reaction = polynomial_reaction({0, 0, 0, 1e6});
  try {
    backward_euler_reference({{&m, &a, nullptr, zero_velocity()}}, reaction, {u0}, opt);
    FAIL("expected IntegrationError");
  } catch (const IntegrationError& e) {
    CHECK(e.step >= 1);
  }
}

}  // TEST_SUITE
