#pragma once

// Closed-form kernel for the third-order longitudinal model
//
//     p' = v,   v' = a,   tau a' + a = u
//
// i.e. x' = A x + B u with x = (p, v, a). Everything here is a pure function
// of value-type inputs.

#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "platoon/errors.hpp"

namespace platoon {

using Mat3 = Eigen::Matrix<double, 3, 3, Eigen::RowMajor>;
using Vec3 = Eigen::Vector3d;

// (position, velocity, acceleration). Also used for relative states and for
// the offset vectors (d, 0, 0) and (r, 0, 0).
using StateVec3 = Vec3;

inline StateVec3 make_state(double p, double v, double a) { return StateVec3(p, v, a); }

// (offset, 0, 0): the spacing offsets d_hat and r_hat.
inline StateVec3 position_offset(double value) { return StateVec3(value, 0.0, 0.0); }

inline bool all_finite(const Vec3& v) { return v.allFinite(); }

inline double max_abs(const Mat3& m) { return m.cwiseAbs().maxCoeff(); }

struct DynamicsMatrices {
  double tau = 1.0;
  Mat3 A = Mat3::Zero();
  Vec3 B = Vec3::Zero();
};

inline DynamicsMatrices make_dynamics(double tau) {
  if (!std::isfinite(tau) || tau <= 0.0) {
    throw InvalidParameter("engine time constant tau must be positive and finite, got " +
                           std::to_string(tau));
  }
  DynamicsMatrices dyn;
  dyn.tau = tau;
  dyn.A << 0.0, 1.0, 0.0,
           0.0, 0.0, 1.0,
           0.0, 0.0, -1.0 / tau;
  dyn.B << 0.0, 0.0, 1.0 / tau;
  return dyn;
}

// e^{tA}; valid for any real t.
inline Mat3 expm_tA(const DynamicsMatrices& dyn, double t) {
  if (!std::isfinite(t)) throw InvalidParameter("expm_tA: time must be finite");
  const double tau = dyn.tau;
  const double decay = std::exp(-t / tau);
  const double one_minus = -std::expm1(-t / tau);  // 1 - e^{-t/tau}
  Mat3 e;
  e << 1.0, t, tau * t - tau * tau * one_minus,
       0.0, 1.0, tau * one_minus,
       0.0, 0.0, decay;
  return e;
}

// e^{sA} B, the input-to-state response column.
inline Vec3 input_response(const DynamicsMatrices& dyn, double s) {
  const double tau = dyn.tau;
  const double one_minus = -std::expm1(-s / tau);
  return Vec3(s - tau * one_minus, one_minus, std::exp(-s / tau) / tau);
}

struct Gramian {
  double t = 0.0;
  Mat3 M = Mat3::Zero();
};

enum class GramianMethod { analytic, quadrature };

struct QuadratureSpec {
  GramianMethod method = GramianMethod::analytic;
  double tolerance = 1e-14;  // relative, adaptive Gauss-Kronrod only
  unsigned max_depth = 10;
};

namespace detail {

// Entrywise antiderivatives of g(s) g(s)^T, g(s) = e^{sA}B, over [0, t].
inline Mat3 gramian_analytic(double tau, double t) {
  const double x = t / tau;
  const double em1 = -std::expm1(-x);        // 1 - e^{-x}
  const double em2 = -std::expm1(-2.0 * x);  // 1 - e^{-2x}
  const double e1 = tau * em1;               // int e^{-s/tau}
  const double e2 = 0.5 * tau * em2;         // int e^{-2s/tau}
  const double s1 = tau * tau * (em1 - x * std::exp(-x));  // int s e^{-s/tau}

  Mat3 m;
  m(0, 0) = t * t * t / 3.0 - t * t * tau + t * tau * tau + 2.0 * tau * (s1 - tau * e1) +
            tau * tau * e2;
  m(0, 1) = 0.5 * t * t - tau * t + 2.0 * tau * e1 - s1 - tau * e2;
  m(0, 2) = (s1 - tau * e1 + tau * e2) / tau;
  m(1, 1) = t - 2.0 * e1 + e2;
  m(1, 2) = (e1 - e2) / tau;
  m(2, 2) = e2 / (tau * tau);
  m(1, 0) = m(0, 1);
  m(2, 0) = m(0, 2);
  m(2, 1) = m(1, 2);
  return m;
}

// Integrates e^{(t-s)A} B B^T e^{(t-s)A^T} entry by entry.
inline Mat3 gramian_quadrature(const DynamicsMatrices& dyn, double t,
                               const QuadratureSpec& spec) {
  using boost::math::quadrature::gauss_kronrod;
  Mat3 m = Mat3::Zero();
  if (t == 0.0) return m;
  for (int j = 0; j < 3; ++j) {
    for (int k = j; k < 3; ++k) {
      auto integrand = [&](double s) {
        const Vec3 h = expm_tA(dyn, t - s) * dyn.B;
        return h(j) * h(k);
      };
      double err = 0.0;
      m(j, k) = gauss_kronrod<double, 15>::integrate(integrand, 0.0, t, spec.max_depth,
                                                      spec.tolerance, &err);
      m(k, j) = m(j, k);
    }
  }
  return m;
}

}  // namespace detail

inline Gramian gramian(const DynamicsMatrices& dyn, double t, const QuadratureSpec& spec = {}) {
  if (!std::isfinite(t) || t < 0.0) {
    throw InvalidParameter("gramian: time must be finite and non-negative, got " +
                           std::to_string(t));
  }
  Gramian g;
  g.t = t;
  if (t == 0.0) return g;  // exactly zero
  g.M = spec.method == GramianMethod::analytic ? detail::gramian_analytic(dyn.tau, t)
                                               : detail::gramian_quadrature(dyn, t, spec);
  return g;
}

// Largest condition number accepted before a matrix is declared singular.
inline constexpr double kMaxCondition = 1e14;

// 1-norm condition estimate of a 3x3 matrix; +inf when not invertible.
inline double condition_estimate(const Mat3& m) {
  Eigen::FullPivLU<Mat3> lu(m);
  if (!lu.isInvertible()) return std::numeric_limits<double>::infinity();
  const Mat3 inv = lu.inverse();
  const double c = m.cwiseAbs().colwise().sum().maxCoeff() *
                   inv.cwiseAbs().colwise().sum().maxCoeff();
  return std::isfinite(c) ? c : std::numeric_limits<double>::infinity();
}

// Inverse with a condition check; throws SingularMatrix above kMaxCondition.
inline Mat3 checked_inverse(const Mat3& m, const char* what = "matrix") {
  const double cond = condition_estimate(m);
  if (!(cond <= kMaxCondition)) {
    throw SingularMatrix(std::string(what) + " is numerically singular (condition estimate " +
                             std::to_string(cond) + ")",
                         cond);
  }
  return Eigen::FullPivLU<Mat3>(m).inverse();
}

// (I + w Psi)^{-1}.
inline Mat3 invert_shifted_gramian(double w, const Gramian& psi) {
  if (!std::isfinite(w)) throw InvalidParameter("invert_shifted_gramian: weight must be finite");
  return checked_inverse(Mat3::Identity() + w * psi.M, "I + w Psi");
}

}  // namespace platoon
