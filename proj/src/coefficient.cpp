#include "ems/coefficient.hpp"

#include <cmath>
#include <iostream>
#include <random>
#include <stdexcept>

namespace ems {

CoefficientField make_coefficient(Vector values) {
  if (values.size() == 0) throw std::invalid_argument("coefficient: empty field");
  if (!(values.minCoeff() > 0.0)) {
    throw std::invalid_argument("coefficient: all values must be positive");
  }
  if (values.minCoeff() < 1.0) {
    std::cerr << "warning: coefficient min " << values.minCoeff()
              << " < 1; the method assumes kappa >= 1\n";
  }
  CoefficientField f;
  f.values = std::move(values);
  return f;
}

CoefficientField constant_coefficient(const StructuredGrid2D& grid, Real value) {
  return make_coefficient(Vector::Constant(grid.num_elements(), value));
}

CoefficientField coefficient_from_function(const StructuredGrid2D& grid,
                                           const std::function<Real(Real, Real)>& f) {
  Vector v(grid.num_elements());
  for (Index e = 0; e < grid.num_elements(); ++e) {
    auto c = grid.element_centroid(e);
    v[e] = f(c[0], c[1]);
  }
  return make_coefficient(std::move(v));
}

CoefficientField log_uniform_coefficient(const StructuredGrid2D& grid, Real contrast,
                                         std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<Real> u(0.0, std::log(contrast));
  Vector v(grid.num_elements());
  for (Index e = 0; e < grid.num_elements(); ++e) v[e] = std::exp(u(rng));
  return make_coefficient(std::move(v));
}

CoefficientField inclusion_coefficient(const StructuredGrid2D& grid, Real contrast,
                                       Real fraction, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Vector v = Vector::Constant(grid.num_elements(), 1.0);
  const Index target = static_cast<Index>(fraction * static_cast<Real>(grid.num_elements()));
  std::uniform_int_distribution<Index> px(0, grid.nx - 1), py(0, grid.ny - 1);
  std::uniform_int_distribution<Index> sx(1, std::max<Index>(1, grid.nx / 8));
  std::uniform_int_distribution<Index> sy(1, std::max<Index>(1, grid.ny / 8));
  Index covered = 0;
  while (covered < target) {
    const Index i0 = px(rng), j0 = py(rng);
    const Index w = sx(rng), h = sy(rng);
    for (Index j = j0; j < std::min(grid.ny, j0 + h); ++j) {
      for (Index i = i0; i < std::min(grid.nx, i0 + w); ++i) {
        Real& val = v[grid.element_id(i, j)];
        if (val == 1.0) {
          val = contrast;
          ++covered;
        }
      }
    }
  }
  return make_coefficient(std::move(v));
}

std::array<Real, 2> VelocityField::beta0(Real x, Real y) const {
  constexpr Real pi = 3.14159265358979323846;
  switch (preset) {
    case Preset::zero:
      return {0.0, 0.0};
    case Preset::constant:
      return {p0, p1};
    case Preset::exp_rot:
      return {std::cos(2.0 * pi * y), std::cos(2.0 * pi * x)};
    case Preset::cellular:
      return {p0 * std::cos(p1 * pi * y) * std::sin(p1 * pi * x),
              -p0 * std::cos(p1 * pi * x) * std::sin(p1 * pi * y)};
    case Preset::rigid_rotation:
      return {y - p1, p0 - x};
  }
  return {0.0, 0.0};
}

Real VelocityField::g(Real t) const {
  switch (modulation) {
    case Modulation::none: return 1.0;
    case Modulation::exp_decay: return std::exp(-t);
  }
  return 1.0;
}

Real VelocityField::sup_norm_hint() const {
  switch (preset) {
    case Preset::zero: return 0.0;
    case Preset::constant: return std::hypot(p0, p1);
    case Preset::exp_rot: return std::sqrt(2.0);
    case Preset::cellular: return std::abs(p0) * std::sqrt(2.0);
    case Preset::rigid_rotation: return 2.0;  // order-one domains
  }
  return 1.0;
}

VelocityField zero_velocity() { return {}; }

VelocityField constant_velocity(Real bx, Real by) {
  VelocityField v;
  v.preset = VelocityField::Preset::constant;
  v.p0 = bx;
  v.p1 = by;
  return v;
}

VelocityField exp_rot_velocity(VelocityField::Modulation m) {
  VelocityField v;
  v.preset = VelocityField::Preset::exp_rot;
  v.modulation = m;
  return v;
}

VelocityField cellular_velocity(Real alpha, Real k) {
  VelocityField v;
  v.preset = VelocityField::Preset::cellular;
  v.p0 = alpha;
  v.p1 = k;
  return v;
}

VelocityField rigid_rotation_velocity(Real cx, Real cy) {
  VelocityField v;
  v.preset = VelocityField::Preset::rigid_rotation;
  v.p0 = cx;
  v.p1 = cy;
  return v;
}

}  // namespace ems
