#pragma once

#include "ems/assembly.hpp"
#include "ems/multiscale_space.hpp"
#include "ems/phi1.hpp"
#include "ems/reaction.hpp"
#include "ems/types.hpp"

#include <functional>
#include <memory>
#include <stdexcept>
#include <vector>

namespace ems {

/// Thrown when a time step produces non-finite values or an implicit solve
/// fails to converge; carries the offending step.
struct IntegrationError : std::runtime_error {
  IntegrationError(const std::string& msg, Index step_index)
      : std::runtime_error(msg), step(step_index) {}
  Index step;
};

struct IntegratorOptions {
  Real dt = 0.0;
  Real t_end = 0.0;
  Index snapshot_stride = 1;
  /// Absolute quantum for caching propagators under time-varying modulation;
  /// 0 keys the cache on the exact g value.
  Real g_quantum = 1e-2;
  /// Above this coarse dimension the propagator is applied as a phi1 action
  /// instead of a cached dense matrix.
  Index dense_propagator_max_dim = 512;
  bool freeze_modulation = false;  ///< use g(0) for every step
};

/// One species' coarse system: the ansatz space plus the fine mass used for
/// reaction projection, and the velocity providing g(t).
struct SpeciesSystem {
  const MultiscaleSpace* space = nullptr;
  const SparseMatrix* fine_mass = nullptr;
  VelocityField velocity;
};

struct StepperState {
  Index step = 0;
  Real t = 0.0;
  std::vector<Vector> coeffs;  ///< per species
};

/// Exponential Euler stepper c^{n+1} = c^n + dt phi1(-dt L^n)(rho^n - L^n c^n)
/// with L^n = M_ms^{-1}(A_ms + g(t^n) C_ms) and rho^n the coarse L2 projection
/// of the nodewise reaction. The linear part is species-diagonal; coupling
/// enters through the reaction only.
class ExponentialEuler {
 public:
  ExponentialEuler(std::vector<SpeciesSystem> systems, ReactionModel reaction,
                   IntegratorOptions options);
  ~ExponentialEuler();
  ExponentialEuler(const ExponentialEuler&) = delete;
  ExponentialEuler& operator=(const ExponentialEuler&) = delete;

  StepperState step(const StepperState& state);

  /// Integrate from t = 0; states recorded every snapshot_stride steps (the
  /// initial and final states always). The hook runs after every step.
  std::vector<StepperState> run(std::vector<Vector> initial_coeffs,
                                const std::function<void(const StepperState&)>& hook = {});

  /// Dense propagator dt * phi1(-dt L(g)) for one species, built/cached on
  /// demand; nullptr when the species runs on the action path.
  const Matrix* propagator(int species, Real g);

  Index num_steps() const;

 private:
  struct SpeciesWork;
  std::vector<SpeciesSystem> systems_;
  ReactionModel reaction_;
  IntegratorOptions opt_;
  std::vector<std::unique_ptr<SpeciesWork>> work_;
};

/// Per-species fine free-node system for the reference solver.
struct ReferenceSystem {
  const SparseMatrix* mass = nullptr;
  const SparseMatrix* diffusion = nullptr;
  const SparseMatrix* convection = nullptr;
  VelocityField velocity;
};

struct ReferenceOptions {
  Real dt = 0.0;
  Real t_end = 0.0;
  Index snapshot_stride = 0;  ///< 0: keep initial and final states only
  Real newton_tol = 1e-10;
  int newton_max_iters = 25;
};

struct ReferenceTrajectory {
  std::vector<Real> times;
  std::vector<std::vector<Vector>> states;  ///< [snapshot][species]
};

/// Optional manufactured source S(x, y, t), added nodewise to the reaction.
using SourceFn = std::function<Real(Real, Real, Real)>;

/// Backward Euler with Newton on the nodewise reaction:
/// (M + dt(A + g(t^{n+1})C)) u^{n+1} = M u^n + dt M (R(u^{n+1}) + S(t^{n+1})).
/// The Jacobian uses the lumped-mass reaction diagonal and its factorization
/// is reused across steps while Newton contracts.
ReferenceTrajectory backward_euler_reference(
    const std::vector<ReferenceSystem>& systems, const ReactionModel& reaction,
    std::vector<Vector> u0, const ReferenceOptions& options,
    const std::vector<SourceFn>& sources = {}, const StructuredGrid2D* grid = nullptr,
    const FreeNodeMap* free_map = nullptr);

}  // namespace ems
