#include "ems/integrate.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <cmath>
#include <array>
#include <cstring>
#include <map>
#include <string>

namespace ems {

namespace {

Index checked_step_count(Real dt, Real t_end) {
  if (!(dt > 0.0)) throw std::invalid_argument("integrator: dt must be positive");
  const Real steps = t_end / dt;
  const Index n = static_cast<Index>(std::llround(steps));
  if (n < 0 || std::abs(steps - static_cast<Real>(n)) > 1e-9 * std::max<Real>(1.0, steps)) {
    throw std::invalid_argument("integrator: T/dt must be integral");
  }
  return n;
}

}  // namespace

struct ExponentialEuler::SpeciesWork {
  Eigen::SimplicialLDLT<SparseMatrix> mass_ldlt;
  bool dense_path = false;
  std::map<long long, std::shared_ptr<const Matrix>> propagators;
  Real norm_diffusion = -1.0;  ///< estimate of ||M^-1 A||, lazy
  Real norm_convection = -1.0;
  int cheb_state = 0;  ///< 0: unvalidated, 1: use Chebyshev, -1: Taylor only

  Vector apply_l(const MultiscaleSpace& s, Real g, const Vector& v) const {
    Vector k = s.diffusion * v;
    if (g != 0.0) k += g * (s.convection * v);
    return mass_ldlt.solve(k);
  }
};

ExponentialEuler::ExponentialEuler(std::vector<SpeciesSystem> systems, ReactionModel reaction,
                                   IntegratorOptions options)
    : systems_(std::move(systems)), reaction_(std::move(reaction)), opt_(options) {
  if (static_cast<int>(systems_.size()) != reaction_.species) {
    throw std::invalid_argument("ExponentialEuler: species count mismatch");
  }
  for (const SpeciesSystem& sys : systems_) {
    auto w = std::make_unique<SpeciesWork>();
    w->mass_ldlt.compute(sys.space->mass);
    if (w->mass_ldlt.info() != Eigen::Success) {
      throw std::runtime_error(
          "ExponentialEuler: coarse mass factorization failed (pruning insufficient)");
    }
    w->dense_path = sys.space->dim() <= opt_.dense_propagator_max_dim;
    work_.push_back(std::move(w));
  }
}

ExponentialEuler::~ExponentialEuler() = default;

Index ExponentialEuler::num_steps() const { return checked_step_count(opt_.dt, opt_.t_end); }

const Matrix* ExponentialEuler::propagator(int species, Real g) {
  SpeciesWork& w = *work_[species];
  if (!w.dense_path) return nullptr;
  const MultiscaleSpace& s = *systems_[species].space;

  long long key;
  Real g_used;
  if (opt_.g_quantum > 0.0) {
    key = std::llround(g / opt_.g_quantum);
    g_used = static_cast<Real>(key) * opt_.g_quantum;
  } else {
    static_assert(sizeof(long long) == sizeof(Real));
    std::memcpy(&key, &g, sizeof(key));
    g_used = g;
  }
  auto it = w.propagators.find(key);
  if (it == w.propagators.end()) {
    Matrix k = Matrix(s.diffusion);
    if (g_used != 0.0) k += g_used * Matrix(s.convection);
    Matrix l = w.mass_ldlt.solve(k);
    auto p = std::make_shared<Matrix>(opt_.dt * phi1_dense(Matrix(-opt_.dt * l)));
    it = w.propagators.emplace(key, std::move(p)).first;
  }
  return it->second.get();
}

StepperState ExponentialEuler::step(const StepperState& state) {
  const int ns = reaction_.species;
  std::vector<Vector> ufine(ns);
  for (int s = 0; s < ns; ++s) ufine[s] = systems_[s].space->basis * state.coeffs[s];

  std::vector<Vector> r;
  reaction_.evaluate(ufine, r);

  StepperState next;
  next.step = state.step + 1;
  next.t = state.t + opt_.dt;
  next.coeffs.resize(ns);
  for (int s = 0; s < ns; ++s) {
    const MultiscaleSpace& space = *systems_[s].space;
    SpeciesWork& w = *work_[s];
    const Real g = opt_.freeze_modulation ? systems_[s].velocity.g(0.0)
                                          : systems_[s].velocity.g(state.t);
    Vector rho = w.mass_ldlt.solve(
        Vector(SparseMatrix(space.basis.transpose()) * (*systems_[s].fine_mass * r[s])));
    Vector z = rho - w.apply_l(space, g, state.coeffs[s]);

    if (w.dense_path) {
      next.coeffs[s] = state.coeffs[s] + (*propagator(s, g)) * z;
    } else {
      if (w.norm_diffusion < 0.0) {
        w.norm_diffusion = estimate_operator_norm(
            [&](const Vector& v) { return w.apply_l(space, 0.0, v); }, space.dim());
        w.norm_convection = estimate_operator_norm(
            [&](const Vector& v) {
              return Vector(w.mass_ldlt.solve(Vector(space.convection * v)));
            },
            space.dim());
      }
      const Real hint = opt_.dt * (w.norm_diffusion + std::abs(g) * w.norm_convection);
      // One presummed operator per step keeps the inner loop at a single
      // matvec plus the mass solve.
      const SparseMatrix* op = &space.diffusion;
      SparseMatrix kg;
      if (g != 0.0 && space.convection.nonZeros() > 0) {
        kg = space.diffusion + g * space.convection;
        op = &kg;
      }
      auto apply_x = [&](const Vector& v) {
        return Vector(-opt_.dt * w.mass_ldlt.solve(Vector(*op * v)));
      };
      // Chebyshev needs O(sqrt) applications of the stiff pencil where the
      // Taylor substepping needs O(linear); validate it against the Taylor
      // path once per run, then trust it.
      Vector pz;
      bool have = false;
      if (w.cheb_state >= 0 && hint > 4.0) {
        Vector cheb;
        if (phi1_chebyshev_apply(apply_x, 1.1 * hint + 1.0, z, cheb)) {
          if (w.cheb_state == 0) {
            Vector taylor = phi1_apply(apply_x, hint, z);
            const Real scale = std::max<Real>(taylor.norm(), 1e-300);
            w.cheb_state = (cheb - taylor).norm() <= 1e-9 * scale ? 1 : -1;
            if (w.cheb_state < 0) cheb = taylor;
          }
          if (w.cheb_state >= 0) {
            pz = opt_.dt * cheb;
            have = true;
          } else {
            pz = opt_.dt * cheb;  // taylor copied above on rejection
            have = true;
          }
        }
      }
      if (!have) pz = opt_.dt * phi1_apply(apply_x, hint, z);
      next.coeffs[s] = state.coeffs[s] + pz;
    }
    if (!next.coeffs[s].allFinite()) {
      throw IntegrationError("exponential Euler: non-finite state (blow-up) at step " +
                                 std::to_string(next.step),
                             next.step);
    }
  }
  return next;
}

std::vector<StepperState> ExponentialEuler::run(
    std::vector<Vector> initial_coeffs, const std::function<void(const StepperState&)>& hook) {
  const Index n = num_steps();
  StepperState state;
  state.step = 0;
  state.t = 0.0;
  state.coeffs = std::move(initial_coeffs);

  std::vector<StepperState> snapshots;
  snapshots.push_back(state);
  if (hook) hook(state);
  for (Index k = 0; k < n; ++k) {
    state = step(state);
    if (hook) hook(state);
    if (state.step % opt_.snapshot_stride == 0 || state.step == n) {
      snapshots.push_back(state);
    }
  }
  return snapshots;
}

ReferenceTrajectory backward_euler_reference(const std::vector<ReferenceSystem>& systems,
                                             const ReactionModel& reaction,
                                             std::vector<Vector> u0,
                                             const ReferenceOptions& options,
                                             const std::vector<SourceFn>& sources,
                                             const StructuredGrid2D* grid,
                                             const FreeNodeMap* free_map) {
  const int ns = reaction.species;
  if (static_cast<int>(systems.size()) != ns || static_cast<int>(u0.size()) != ns) {
    throw std::invalid_argument("backward_euler_reference: species count mismatch");
  }
  if (!sources.empty() && (static_cast<int>(sources.size()) != ns || !grid || !free_map)) {
    throw std::invalid_argument("backward_euler_reference: sources need grid and free map");
  }
  const Index n_steps = checked_step_count(options.dt, options.t_end);
  const Real dt = options.dt;

  // Node coordinates of the free nodes, for source evaluation.
  std::vector<std::array<Real, 2>> xy;
  if (!sources.empty()) {
    xy.resize(free_map->num_free());
    for (Index k = 0; k < free_map->num_free(); ++k) {
      xy[k] = grid->node_xy(free_map->node_of_free[k]);
    }
  }

  struct Factor {
    Eigen::SparseLU<SparseMatrix> lu;
    bool valid = false;
    Real g = 0.0;
  };
  std::vector<Factor> factors(ns);
  std::vector<Vector> lumped(ns);
  for (int s = 0; s < ns; ++s) {
    lumped[s] = *systems[s].mass * Vector::Ones(systems[s].mass->rows());
  }

  auto refactor = [&](int s, Real g, const std::vector<Vector>& u) {
    const ReferenceSystem& sys = systems[s];
    SparseMatrix j = *sys.mass + dt * (*sys.diffusion);
    if (g != 0.0 && sys.convection) j += (dt * g) * (*sys.convection);
    // Lumped-mass reaction diagonal, kept approximate: the residual stays
    // exact, the factorization stays reusable.
    const Index nn = j.rows();
    std::vector<Triplet> dtr;
    dtr.reserve(nn);
    for (Index p = 0; p < nn; ++p) {
      const Real u1 = u[0][p];
      const Real u2 = ns > 1 ? u[1][p] : 0.0;
      dtr.emplace_back(p, p, -dt * lumped[s][p] * reaction.diagonal_derivative(s, u1, u2));
    }
    SparseMatrix d(nn, nn);
    d.setFromTriplets(dtr.begin(), dtr.end());
    j += d;
    factors[s].lu.compute(j);
    factors[s].valid = factors[s].lu.info() == Eigen::Success;
    factors[s].g = g;
    if (!factors[s].valid) {
      throw std::runtime_error("backward_euler_reference: Jacobian factorization failed");
    }
  };

  ReferenceTrajectory traj;
  traj.times.push_back(0.0);
  traj.states.push_back(u0);

  std::vector<Vector> u = u0;
  std::vector<Vector> r(ns);
  for (Index step = 1; step <= n_steps; ++step) {
    const Real t1 = static_cast<Real>(step) * dt;
    std::vector<Vector> mu_prev(ns);
    Real scale = 1.0;
    for (int s = 0; s < ns; ++s) {
      mu_prev[s] = *systems[s].mass * u[s];
      scale = std::max(scale, 1.0 + mu_prev[s].norm());
    }

    auto residual = [&](int s, const std::vector<Vector>& uu) {
      const ReferenceSystem& sys = systems[s];
      const Real g = sys.velocity.g(t1);
      Vector f = *sys.mass * uu[s] + dt * (*sys.diffusion * uu[s]) - mu_prev[s];
      if (g != 0.0 && sys.convection) f += (dt * g) * (*sys.convection * uu[s]);
      Vector rs = r[s];
      if (!sources.empty()) {
        for (Index p = 0; p < rs.size(); ++p) rs[p] += sources[s](xy[p][0], xy[p][1], t1);
      }
      f -= dt * (*sys.mass * rs);
      return f;
    };

    Real prev_norm = -1.0;
    bool converged = false;
    for (int iter = 0; iter <= options.newton_max_iters; ++iter) {
      reaction.evaluate(u, r);
      Real fnorm = 0.0;
      std::vector<Vector> f(ns);
      for (int s = 0; s < ns; ++s) {
        f[s] = residual(s, u);
        fnorm = std::max(fnorm, f[s].norm());
      }
      if (fnorm <= options.newton_tol * scale) {
        converged = true;
        break;
      }
      if (iter == options.newton_max_iters) {
        throw IntegrationError("backward Euler: Newton stalled at step " +
                                   std::to_string(step) + ", residual " + std::to_string(fnorm),
                               step);
      }
      const bool slow = prev_norm > 0.0 && fnorm > 0.25 * prev_norm;
      for (int s = 0; s < ns; ++s) {
        const Real g = systems[s].velocity.g(t1);
        const bool stale_g = std::abs(g - factors[s].g) > 0.02 * std::max<Real>(1.0, std::abs(g));
        if (!factors[s].valid || stale_g || slow) refactor(s, g, u);
        u[s] -= factors[s].lu.solve(f[s]);
        if (!u[s].allFinite()) {
          throw IntegrationError("backward Euler: non-finite state at step " +
                                     std::to_string(step),
                                 step);
        }
      }
      prev_norm = fnorm;
    }
    (void)converged;

    const bool record = options.snapshot_stride > 0 && step % options.snapshot_stride == 0;
    if (record || step == n_steps) {
      traj.times.push_back(t1);
      traj.states.push_back(u);
    }
  }
  return traj;
}

}  // namespace ems
