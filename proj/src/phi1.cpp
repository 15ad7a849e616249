#include "ems/phi1.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace ems {

namespace {

// Higham's degree-13 Pade coefficients for the exponential.
constexpr Real kB[14] = {64764752532480000.0,
                         32382376266240000.0,
                         7771770303897600.0,
                         1187353796428800.0,
                         129060195264000.0,
                         10559470521600.0,
                         670442572800.0,
                         33522128640.0,
                         1323241920.0,
                         40840800.0,
                         960960.0,
                         16380.0,
                         182.0,
                         1.0};
constexpr Real kTheta13 = 5.371920351148152;
constexpr Real kPiCheb = 3.14159265358979323846;

}  // namespace

Matrix phi1_dense(const Matrix& x) {
  if (x.rows() != x.cols()) throw std::invalid_argument("phi1_dense: square matrix required");
  if (!x.allFinite()) throw std::invalid_argument("phi1_dense: non-finite entries");
  const Index n = x.rows();
  const Matrix id = Matrix::Identity(n, n);

  const Real norm = x.cwiseAbs().colwise().sum().maxCoeff();
  int s = 0;
  if (norm > kTheta13) {
    s = static_cast<int>(std::ceil(std::log2(norm / kTheta13)));
  }
  const Matrix b = x / std::ldexp(1.0, s);

  const Matrix b2 = b * b;
  const Matrix b4 = b2 * b2;
  const Matrix b6 = b2 * b4;

  // Odd part U = B u1(B), even part V; u1 doubles as the phi1 numerator:
  // the augmented Pade's top-right block is 2 (V - U)^{-1} u1.
  const Matrix w1 = kB[13] * b6 + kB[11] * b4 + kB[9] * b2;
  const Matrix w2 = kB[7] * b6 + kB[5] * b4 + kB[3] * b2 + kB[1] * id;
  const Matrix u1 = b6 * w1 + w2;
  const Matrix u = b * u1;
  const Matrix z1 = kB[12] * b6 + kB[10] * b4 + kB[8] * b2;
  const Matrix v = b6 * z1 + kB[6] * b6 + kB[4] * b4 + kB[2] * b2 + kB[0] * id;

  Eigen::PartialPivLU<Matrix> lu(v - u);
  Matrix expm = lu.solve(v + u);
  Matrix phi = lu.solve(2.0 * u1);

  for (int k = 0; k < s; ++k) {
    phi = 0.5 * ((expm + id) * phi);
    if (k + 1 < s) expm = expm * expm;
  }
  return phi;
}

namespace {

// Truncated-Taylor action of e^Y on v; returns false when the series fails
// to settle within the degree cap (norm hint too small).
bool exp_taylor_apply(const std::function<Vector(const Vector&)>& apply_y, const Vector& v,
                      Vector& out) {
  Vector term = v;
  out = v;
  Real prev = term.norm();
  for (int k = 1; k <= 64; ++k) {
    term = apply_y(term) / static_cast<Real>(k);
    out += term;
    const Real tn = term.norm();
    if (tn <= 1e-16 * out.norm()) return true;
    if (k > 48 && tn > prev) return false;
    prev = tn;
  }
  return false;
}

bool phi1_taylor_apply(const std::function<Vector(const Vector&)>& apply_y, const Vector& v,
                       Vector& out) {
  Vector term = v;  // Y^k v / (k+1)!
  out = v;
  Real prev = term.norm();
  for (int k = 1; k <= 64; ++k) {
    term = apply_y(term) / static_cast<Real>(k + 1);
    out += term;
    const Real tn = term.norm();
    if (tn <= 1e-16 * out.norm()) return true;
    if (k > 48 && tn > prev) return false;
    prev = tn;
  }
  return false;
}

}  // namespace

Vector phi1_apply(const std::function<Vector(const Vector&)>& apply_x, Real norm_hint,
                  const Vector& z) {
  if (z.size() == 0) return z;
  if (!z.allFinite()) throw std::invalid_argument("phi1_apply: non-finite input");

  Real target = std::max<Real>(norm_hint, 0.0);
  for (int attempt = 0; attempt < 6; ++attempt) {
    const Index s = std::max<Index>(1, static_cast<Index>(std::ceil(target / 3.0)));
    const Real inv_s = 1.0 / static_cast<Real>(s);
    auto apply_scaled = [&](const Vector& v) { return Vector(apply_x(v) * inv_s); };

    Vector p;
    if (!phi1_taylor_apply(apply_scaled, z, p)) {
      target = std::max<Real>(2.0 * target, 4.0);
      continue;
    }
    p *= inv_s;
    Vector y = p;
    bool ok = true;
    for (Index j = 1; j < s; ++j) {
      Vector ey;
      if (!exp_taylor_apply(apply_scaled, y, ey)) {
        ok = false;
        break;
      }
      y = ey + p;
    }
    if (!ok) {
      target = std::max<Real>(2.0 * target, 4.0);
      continue;
    }
    if (!y.allFinite()) throw std::invalid_argument("phi1_apply: non-finite result");
    return y;
  }
  throw std::runtime_error("phi1_apply: series failed to converge");
}

bool phi1_chebyshev_apply(const std::function<Vector(const Vector&)>& apply_x, Real interval,
                          const Vector& z, Vector& out, Index degree_cap) {
  const Real b = std::max<Real>(interval, 1e-8);

  // Chebyshev coefficients of phi1((b/2)(x - 1)) on x in [-1, 1] by the
  // discrete cosine transform over Chebyshev-Lobatto samples.
  const Index n_samp = 2048;
  std::vector<Real> f(n_samp + 1);
  for (Index j = 0; j <= n_samp; ++j) {
    const Real x = std::cos(kPiCheb * static_cast<Real>(j) / static_cast<Real>(n_samp));
    const Real y = 0.5 * b * (x - 1.0);
    f[j] = std::abs(y) < 1e-8 ? 1.0 + 0.5 * y : std::expm1(y) / y;
  }
  const Index kmax = std::min<Index>(std::min<Index>(degree_cap, n_samp - 1),
                                     static_cast<Index>(3.0 * b) + 160);
  std::vector<Real> coeff(kmax + 1);
  Real total = 0.0;
  for (Index k = 0; k <= kmax; ++k) {
    Real acc = 0.5 * (f[0] + (k % 2 == 0 ? f[n_samp] : -f[n_samp]));
    for (Index j = 1; j < n_samp; ++j) {
      acc += f[j] * std::cos(kPiCheb * static_cast<Real>(k * j) / static_cast<Real>(n_samp));
    }
    coeff[k] = 2.0 * acc / static_cast<Real>(n_samp);
    total += std::abs(coeff[k]);
  }
  coeff[0] *= 0.5;

  // Truncate at the decay point (individual coefficients reach the DCT
  // roundoff floor), with margin for the mildly nonnormal (convective)
  // part pushing the spectrum off the interval.
  Index degree = 0;
  for (Index k = kmax; k >= 1; --k) {
    if (std::abs(coeff[k]) > 1e-13 * std::max<Real>(1.0, total)) {
      degree = k;
      break;
    }
  }
  degree = degree + degree / 4 + 8;
  if (degree >= kmax) return false;

  // Clenshaw with Y = (2/b) X + I.
  auto apply_y = [&](const Vector& v) { return Vector((2.0 / b) * apply_x(v) + v); };
  Vector bk1 = Vector::Zero(z.size()), bk2 = Vector::Zero(z.size());
  for (Index k = degree; k >= 1; --k) {
    Vector bk = coeff[k] * z + 2.0 * apply_y(bk1) - bk2;
    bk2.swap(bk1);
    bk1.swap(bk);
  }
  out = coeff[0] * z + apply_y(bk1) - bk2;
  return out.allFinite();
}

Real estimate_operator_norm(const std::function<Vector(const Vector&)>& apply_x, Index dim,
                            int iterations) {
  if (dim == 0) return 0.0;
  // Deterministic quasi-random start (no RNG state shared with callers).
  Vector v(dim);
  for (Index k = 0; k < dim; ++k) {
    v[k] = 0.5 + 0.5 * std::sin(0.7548776662 * static_cast<Real>(k + 1));
  }
  v /= v.norm();
  Real est = 0.0;
  for (int it = 0; it < iterations; ++it) {
    Vector w = apply_x(v);
    const Real n = w.norm();
    if (n == 0.0 || !w.allFinite()) return est;
    est = n;
    v = w / n;
  }
  return 1.1 * est;
}

}  // namespace ems
