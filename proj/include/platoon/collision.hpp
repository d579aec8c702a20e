#pragma once

// Estimated Nash strategy with a terminal collision-avoidance term.
//
// The risk function
//     f(y) = 1 / (mu |y + d_hat - r_hat|^2 + eps)^2
// is evaluated at the free drift e^{sA} y(0) instead of the unknown terminal
// state, which turns the terminal condition into a linear one:
//     z(t) = (I + (omega - mu f_t) Psi(t))^{-1} (e^{tA} y(0) - mu f_t Psi(t) (r_hat - d_hat))
// with f_t = f(e^{tA} y(0)). The terminal variant uses y_hat(T) = z(T) for the
// whole horizon; the time-varying variants re-estimate z(t) at every t.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "platoon/errors.hpp"
#include "platoon/linear.hpp"
#include "platoon/nash.hpp"

namespace platoon {

enum class CaVariant {
  terminal,                 // y_hat(T) = z(T) for all t
  time_varying,             // z(t); f(e^{TA} y0) on the (r_hat - d_hat) term of the control
  time_varying_consistent,  // z(t); f(e^{tA} y0) everywhere
};

struct CaParams {
  double epsilon = 0.1;
  CaVariant variant = CaVariant::time_varying;
};

inline void validate(const CaParams& ca) {
  if (!std::isfinite(ca.epsilon) || ca.epsilon <= 0.0) {
    throw InvalidParameter("epsilon must be > 0");
  }
}

struct EstimatedTerminal {
  std::size_t i = 0;
  double t = 0.0;
  StateVec3 z = StateVec3::Zero();
};

// Collision risk of relative state y; maximal (1/eps^2) at y = r_hat - d_hat.
inline double risk_f(const StateVec3& y, const FollowerParams& params, double epsilon) {
  const StateVec3 gap = y + position_offset(params.d - params.r);
  const double denom = params.mu * gap.squaredNorm() + epsilon;
  return 1.0 / (denom * denom);
}

class CaFollower {
 public:
  CaFollower(std::size_t i, const StateVec3& y0, const FollowerParams& params, const CaParams& ca,
             const DynamicsMatrices& dyn, double T)
      : i_(i), y0_(y0), params_(params), ca_(ca), dyn_(dyn), T_(T) {
    check_horizon(T);
    validate(ca);
    target_ = position_offset(params.r - params.d);
    f_T_ = risk(T);
    y_T_ = estimate(T).z;
    terminal_pull_ = (params.omega - params.mu * f_T_) * y_T_ + params.mu * f_T_ * target_;
  }

  std::size_t index() const { return i_; }
  double horizon() const { return T_; }
  const StateVec3& initial() const { return y0_; }
  const FollowerParams& params() const { return params_; }
  const CaParams& ca() const { return ca_; }
  const DynamicsMatrices& dynamics() const { return dyn_; }

  // y_hat(T) = z(T).
  const StateVec3& terminal() const { return y_T_; }

  // f(e^{tA} y(0)).
  double risk(double t) const {
    return risk_f(expm_tA(dyn_, t) * y0_, params_, ca_.epsilon);
  }

  EstimatedTerminal estimate(double t) const {
    check_time(t, T_);
    const double f = risk(t);
    const Gramian psi = gramian(dyn_, t);
    const StateVec3 rhs = expm_tA(dyn_, t) * y0_ - params_.mu * f * (psi.M * target_);
    const Mat3 shifted = Mat3::Identity() + (params_.omega - params_.mu * f) * psi.M;
    const double cond = condition_estimate(shifted);
    if (!(cond <= kMaxCondition)) {
      throw SingularMatrix("follower " + std::to_string(i_) + ": I + (omega - mu f) Psi(t) at t = " +
                               std::to_string(t) + " is numerically singular",
                           cond, i_, t);
    }
    return {i_, t, Eigen::FullPivLU<Mat3>(shifted).solve(rhs)};
  }

  double xi_terminal(double t) const {
    check_time(t, T_);
    return -input_response(dyn_, T_ - t).dot(terminal_pull_);
  }

  StateVec3 y_terminal(double t, TrajectoryForm form = TrajectoryForm::exact) const {
    check_time(t, T_);
    StateVec3 pull = terminal_pull_;
    if (form == TrajectoryForm::exact) pull = expm_tA(dyn_, T_ - t).transpose() * pull;
    return expm_tA(dyn_, t) * y0_ - gramian(dyn_, t).M * pull;
  }

  // Time-varying control; `consistent` evaluates both risk factors at e^{tA} y0.
  double xi_timevarying(double t, bool consistent) const {
    const EstimatedTerminal est = estimate(t);
    const double f_t = risk(t);
    const double f_target = consistent ? f_t : f_T_;
    const StateVec3 pull =
        (params_.omega - params_.mu * f_t) * est.z + params_.mu * f_target * target_;
    return -input_response(dyn_, T_ - t).dot(pull);
  }

  // Time-varying trajectory, all risk factors at e^{tA} y0.
  StateVec3 y_timevarying(double t) const {
    const EstimatedTerminal est = estimate(t);
    const double f_t = risk(t);
    const StateVec3 pull = (params_.omega - params_.mu * f_t) * est.z + params_.mu * f_t * target_;
    return expm_tA(dyn_, t) * y0_ - gramian(dyn_, t).M * pull;
  }

  // Dispatch on the configured variant.
  double xi(double t) const {
    switch (ca_.variant) {
      case CaVariant::terminal:
        return xi_terminal(t);
      case CaVariant::time_varying:
        return xi_timevarying(t, false);
      case CaVariant::time_varying_consistent:
        return xi_timevarying(t, true);
    }
    return 0.0;
  }

  // `form` only affects the terminal variant; the time-varying trajectory has
  // a single closed form.
  StateVec3 y(double t, TrajectoryForm form = TrajectoryForm::exact) const {
    if (ca_.variant == CaVariant::terminal) return y_terminal(t, form);
    return y_timevarying(t);
  }

 private:
  std::size_t i_;
  StateVec3 y0_;
  FollowerParams params_;
  CaParams ca_;
  DynamicsMatrices dyn_;
  double T_;
  StateVec3 target_;  // r_hat - d_hat
  double f_T_ = 0.0;
  StateVec3 y_T_;
  StateVec3 terminal_pull_;
};

inline EstimatedTerminal z_estimate(const RelativeState& y0, const FollowerParams& params,
                                    const CaParams& ca, const DynamicsMatrices& dyn, double T,
                                    double t) {
  check_time(t, T);
  return CaFollower(y0.i, y0.y, params, ca, dyn, T).estimate(t);
}

inline double xi_ca_terminal(const RelativeState& y0, const FollowerParams& params,
                             const CaParams& ca, const DynamicsMatrices& dyn, double T, double t) {
  return CaFollower(y0.i, y0.y, params, ca, dyn, T).xi_terminal(t);
}

inline StateVec3 y_ca_terminal(const RelativeState& y0, const FollowerParams& params,
                               const CaParams& ca, const DynamicsMatrices& dyn, double T, double t,
                               TrajectoryForm form = TrajectoryForm::exact) {
  return CaFollower(y0.i, y0.y, params, ca, dyn, T).y_terminal(t, form);
}

// Uses ca.variant to pick the risk argument of the (r_hat - d_hat) term;
// the terminal variant is treated as the as-printed time-varying law.
inline double xi_ca_timevarying(const RelativeState& y0, const FollowerParams& params,
                                const CaParams& ca, const DynamicsMatrices& dyn, double T,
                                double t) {
  return CaFollower(y0.i, y0.y, params, ca, dyn, T)
      .xi_timevarying(t, ca.variant == CaVariant::time_varying_consistent);
}

inline StateVec3 y_ca_timevarying(const RelativeState& y0, const FollowerParams& params,
                                  const CaParams& ca, const DynamicsMatrices& dyn, double T,
                                  double t) {
  return CaFollower(y0.i, y0.y, params, ca, dyn, T).y_timevarying(t);
}

class CaPlatoon : public FollowerChain<CaFollower> {
 public:
  CaPlatoon(const LeaderMotion& leader, std::span<const FollowerInit> followers,
            const CaParams& ca, const DynamicsMatrices& dyn, double T)
      : FollowerChain(leader, followers, T,
                      [&](const RelativeState& y0, const FollowerParams& p) {
                        return CaFollower(y0.i, y0.y, p, ca, dyn, T);
                      }) {}
};

// u_hat_i(t) = -sum_{j<=i} xi_hat_j(t) for the variant in `ca`.
inline double u_ca(std::size_t i, const LeaderMotion& leader,
                   std::span<const FollowerInit> followers, const CaParams& ca,
                   const DynamicsMatrices& dyn, double T, double t) {
  return CaPlatoon(leader, followers, ca, dyn, T).u(i, t);
}

}  // namespace platoon
