#pragma once

#include "ems/grid.hpp"
#include "ems/types.hpp"

#include <cstdint>
#include <functional>
#include <string>

namespace ems {

/// Piecewise-constant permeability, one value per fine element.
struct CoefficientField {
  Vector values;

  Real min_value() const { return values.minCoeff(); }
  Real max_value() const { return values.maxCoeff(); }
  Real contrast() const { return max_value() / min_value(); }
};

/// Validates positivity (throws) and warns once on stderr when min < 1.
CoefficientField make_coefficient(Vector values);

CoefficientField constant_coefficient(const StructuredGrid2D& grid, Real value);

/// Sample an analytic field at element centroids.
CoefficientField coefficient_from_function(const StructuredGrid2D& grid,
                                           const std::function<Real(Real, Real)>& f);

/// Log-uniform random field: kappa = exp(U[0, log(contrast)]), seeded.
CoefficientField log_uniform_coefficient(const StructuredGrid2D& grid, Real contrast,
                                         std::uint64_t seed);

/// Background-1 field with randomly placed rectangular inclusions of value
/// `contrast`, covering roughly `fraction` of the elements. Seeded.
CoefficientField inclusion_coefficient(const StructuredGrid2D& grid, Real contrast,
                                       Real fraction, std::uint64_t seed);

/// Divergence-free velocity presets with separable time modulation
/// beta(x, t) = g(t) * beta0(x).
struct VelocityField {
  enum class Preset { zero, constant, exp_rot, cellular, rigid_rotation };
  enum class Modulation { none, exp_decay };

  Preset preset = Preset::zero;
  Modulation modulation = Modulation::none;
  // constant: (p0, p1) = (bx, by); cellular: (p0, p1) = (alpha, k);
  // rigid_rotation: (p0, p1) = rotation center.
  Real p0 = 0.0;
  Real p1 = 0.0;

  std::array<Real, 2> beta0(Real x, Real y) const;
  Real g(Real t) const;
  bool is_zero() const { return preset == Preset::zero; }
  bool time_dependent() const { return modulation != Modulation::none; }
  Real sup_norm_hint() const;  ///< coarse bound on |beta0|, used for tolerances
};

VelocityField zero_velocity();
VelocityField constant_velocity(Real bx, Real by);
/// (cos(2 pi y), cos(2 pi x)); pairs with exp_decay modulation.
VelocityField exp_rot_velocity(VelocityField::Modulation m = VelocityField::Modulation::exp_decay);
/// alpha * (cos(k pi y) sin(k pi x), -cos(k pi x) sin(k pi y))
VelocityField cellular_velocity(Real alpha, Real k);
/// (y - cy, cx - x)
VelocityField rigid_rotation_velocity(Real cx = 0.5, Real cy = 0.5);

}  // namespace ems
