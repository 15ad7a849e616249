#pragma once

#include "ems/types.hpp"

#include <stdexcept>
#include <vector>

namespace ems {

/// Nodewise semilinear reaction term for one or two species.
struct ReactionModel {
  enum class Kind { none, allen_cahn, schnakenberg, schnakenberg_hetero, custom_polynomial };

  Kind kind = Kind::none;
  int species = 1;
  Real epsilon = 0.1;            ///< allen_cahn interface width
  Real gamma = 3.0, a = 0.1, b = 0.9;  ///< schnakenberg parameters
  std::vector<Real> coeffs;      ///< custom polynomial sum c_k u^k

  Real eval(int s, Real u1, Real u2) const {
    switch (kind) {
      case Kind::none:
        return 0.0;
      case Kind::allen_cahn:
        return (u1 - u1 * u1 * u1) / (epsilon * epsilon);
      case Kind::schnakenberg:
        return s == 0 ? gamma * (a - u1 + u1 * u1 * u2) : gamma * (b - u1 * u1 * u2);
      case Kind::schnakenberg_hetero:
        return s == 0 ? u2 * (1.0 - u1) : u1 * (1.0 - u2 * u2);
      case Kind::custom_polynomial: {
        Real acc = 0.0, p = 1.0;
        for (Real c : coeffs) {
          acc += c * p;
          p *= u1;
        }
        return acc;
      }
    }
    return 0.0;
  }

  /// dR_s/du_s, the diagonal of the reaction Jacobian (used by the implicit
  /// reference solver; cross-species terms stay in the residual).
  Real diagonal_derivative(int s, Real u1, Real u2) const {
    switch (kind) {
      case Kind::none:
        return 0.0;
      case Kind::allen_cahn:
        return (1.0 - 3.0 * u1 * u1) / (epsilon * epsilon);
      case Kind::schnakenberg:
        return s == 0 ? gamma * (-1.0 + 2.0 * u1 * u2) : -gamma * u1 * u1;
      case Kind::schnakenberg_hetero:
        return s == 0 ? -u2 : -2.0 * u1 * u2;
      case Kind::custom_polynomial: {
        Real acc = 0.0, p = 1.0;
        for (std::size_t k = 1; k < coeffs.size(); ++k) {
          acc += static_cast<Real>(k) * coeffs[k] * p;
          p *= u1;
        }
        return acc;
      }
    }
    return 0.0;
  }

  void evaluate(const std::vector<Vector>& u, std::vector<Vector>& out) const {
    if (static_cast<int>(u.size()) != species) {
      throw std::invalid_argument("ReactionModel::evaluate: species count mismatch");
    }
    out.resize(u.size());
    const Index n = u[0].size();
    for (int s = 0; s < species; ++s) out[s].resize(n);
    for (Index p = 0; p < n; ++p) {
      const Real u1 = u[0][p];
      const Real u2 = species > 1 ? u[1][p] : 0.0;
      for (int s = 0; s < species; ++s) out[s][p] = eval(s, u1, u2);
    }
  }
};

inline ReactionModel no_reaction(int species = 1) {
  ReactionModel r;
  r.kind = ReactionModel::Kind::none;
  r.species = species;
  return r;
}

inline ReactionModel allen_cahn_reaction(Real epsilon) {
  ReactionModel r;
  r.kind = ReactionModel::Kind::allen_cahn;
  r.species = 1;
  r.epsilon = epsilon;
  return r;
}

inline ReactionModel schnakenberg_reaction(Real gamma, Real a, Real b) {
  ReactionModel r;
  r.kind = ReactionModel::Kind::schnakenberg;
  r.species = 2;
  r.gamma = gamma;
  r.a = a;
  r.b = b;
  return r;
}

inline ReactionModel schnakenberg_hetero_reaction() {
  ReactionModel r;
  r.kind = ReactionModel::Kind::schnakenberg_hetero;
  r.species = 2;
  return r;
}

inline ReactionModel polynomial_reaction(std::vector<Real> coeffs) {
  ReactionModel r;
  r.kind = ReactionModel::Kind::custom_polynomial;
  r.species = 1;
  r.coeffs = std::move(coeffs);
  return r;
}

}  // namespace ems
