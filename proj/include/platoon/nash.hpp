#pragma once

// Open-loop Nash equilibrium of the predecessor-following platoon game.
//
// Each follower i works on its spacing error y_i = x_{i-1} - x_i - d_hat_i,
// whose dynamics are y' = A y + B xi with xi_i = u_{i-1} - u_i. Player i
// minimises omega_i |y_i(T)|^2 + int xi_i^2, which gives
//
//     y_i(T)  = (I + omega_i Psi(T))^{-1} e^{TA} y_i(0)
//     xi_i(t) = -omega_i B^T e^{(T-t)A^T} y_i(T)
//     u_i(t)  = -sum_{j<=i} xi_j(t)

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "platoon/errors.hpp"
#include "platoon/linear.hpp"

namespace platoon {

struct FollowerParams {
  double omega = 1.0;  // terminal displacement weight
  double d = 1.0;      // desired spacing to predecessor (m)
  double r = 1.0;      // safety radius (m), 0 < r <= d
  double mu = 1.0;     // collision weight, collision-avoidance strategies only
};

// Throws InvalidParameter naming the first violated bound.
inline void validate(const FollowerParams& p, std::size_t i = 0) {
  const std::string who = i == 0 ? "follower" : "follower " + std::to_string(i);
  auto require = [&](bool ok, const char* msg) {
    if (!ok) throw InvalidParameter(who + ": " + msg);
  };
  require(std::isfinite(p.omega) && p.omega > 0.0, "omega must be > 0");
  require(std::isfinite(p.mu) && p.mu > 0.0, "mu must be > 0");
  require(std::isfinite(p.d) && p.d > 0.0, "d must be > 0");
  require(std::isfinite(p.r) && p.r > 0.0 && p.r <= p.d, "r must satisfy 0 < r <= d");
}

// Leader moving at constant velocity with zero acceleration and zero control.
struct LeaderMotion {
  double p0 = 0.0;
  double v0 = 0.0;

  StateVec3 state(double t) const { return make_state(p0 + v0 * t, v0, 0.0); }
};

struct FollowerInit {
  StateVec3 x0 = StateVec3::Zero();
  FollowerParams params;
};

struct RelativeState {
  std::size_t i = 0;  // follower index, 1-based
  StateVec3 y = StateVec3::Zero();
};

// How the closed-form spacing-error trajectory is evaluated.
//
// `exact` is the state reached by applying xi_i(t) to y' = Ay + B xi:
//     y(t) = e^{tA} y(0) - Psi(t) e^{(T-t)A^T} c
// `printed` drops the e^{(T-t)A^T} factor:
//     y(t) = e^{tA} y(0) - Psi(t) c
// Both agree at t = 0 and t = T.
enum class TrajectoryForm { exact, printed };

inline void check_horizon(double T) {
  if (!std::isfinite(T) || T <= 0.0) {
    throw InvalidParameter("horizon T must be positive and finite");
  }
}

inline void check_time(double t, double T) {
  if (!(t >= 0.0 && t <= T)) {
    throw DomainError("time " + std::to_string(t) + " outside [0, " + std::to_string(T) + "]");
  }
}

inline std::vector<RelativeState> relative_initial_states(const LeaderMotion& leader,
                                                          std::span<const FollowerInit> followers) {
  if (followers.empty()) throw InvalidScenario("platoon needs at least one follower");
  std::vector<RelativeState> out;
  out.reserve(followers.size());
  StateVec3 prev = leader.state(0.0);
  for (std::size_t k = 0; k < followers.size(); ++k) {
    const StateVec3& x = followers[k].x0;
    if (!all_finite(x)) {
      throw InvalidScenario("follower " + std::to_string(k + 1) + " has a non-finite initial state");
    }
    if (!(prev(0) > x(0))) {
      throw InvalidScenario("initial positions must strictly decrease front to back: vehicle " +
                            std::to_string(k) + " at " + std::to_string(prev(0)) + ", vehicle " +
                            std::to_string(k + 1) + " at " + std::to_string(x(0)));
    }
    out.push_back({k + 1, prev - x - position_offset(followers[k].params.d)});
    prev = x;
  }
  return out;
}

// Per-follower equilibrium with the t-independent factors cached.
class NashFollower {
 public:
  NashFollower(std::size_t i, const StateVec3& y0, double omega, const DynamicsMatrices& dyn,
               double T)
      : i_(i), y0_(y0), omega_(omega), dyn_(dyn), T_(T) {
    check_horizon(T);
    psi_T_ = gramian(dyn, T);
    exp_TA_ = expm_tA(dyn, T);
    try {
      shifted_inverse_ = invert_shifted_gramian(omega, psi_T_);
    } catch (const SingularMatrix& e) {
      throw SingularMatrix(e.what(), e.condition(), i, T);
    }
    y_T_ = shifted_inverse_ * exp_TA_ * y0;
  }

  std::size_t index() const { return i_; }
  double horizon() const { return T_; }
  const StateVec3& initial() const { return y0_; }
  const DynamicsMatrices& dynamics() const { return dyn_; }

  // y_i(T) = (I + omega Psi(T))^{-1} e^{TA} y_i(0).
  const StateVec3& terminal() const { return y_T_; }

  double xi(double t) const {
    check_time(t, T_);
    return -omega_ * input_response(dyn_, T_ - t).dot(y_T_);
  }

  StateVec3 y(double t, TrajectoryForm form = TrajectoryForm::exact) const {
    check_time(t, T_);
    const Gramian psi = gramian(dyn_, t);
    StateVec3 pull = omega_ * y_T_;
    if (form == TrajectoryForm::exact) pull = expm_tA(dyn_, T_ - t).transpose() * pull;
    return expm_tA(dyn_, t) * y0_ - psi.M * pull;
  }

 private:
  std::size_t i_;
  StateVec3 y0_;
  double omega_;
  DynamicsMatrices dyn_;
  double T_;
  Gramian psi_T_;
  Mat3 exp_TA_;
  Mat3 shifted_inverse_;
  StateVec3 y_T_;
};

inline double xi_nash(const RelativeState& y0, const FollowerParams& params,
                      const DynamicsMatrices& dyn, double T, double t) {
  return NashFollower(y0.i, y0.y, params.omega, dyn, T).xi(t);
}

inline StateVec3 y_traj_nash(const RelativeState& y0, const FollowerParams& params,
                             const DynamicsMatrices& dyn, double T, double t,
                             TrajectoryForm form = TrajectoryForm::exact) {
  return NashFollower(y0.i, y0.y, params.omega, dyn, T).y(t, form);
}

// Chain of followers sharing one leader. `Follower` provides xi(t) and
// y(t, form); states telescope as x_i = x_0 - sum_{j<=i} (y_j + d_hat_j).
template <class Follower>
class FollowerChain {
 public:
  template <class Factory>
  FollowerChain(const LeaderMotion& leader, std::span<const FollowerInit> followers, double T,
                Factory&& make_follower)
      : leader_(leader), T_(T) {
    check_horizon(T);
    const auto y0 = relative_initial_states(leader, followers);
    followers_.reserve(y0.size());
    offsets_.reserve(y0.size());
    for (std::size_t k = 0; k < y0.size(); ++k) {
      followers_.push_back(make_follower(y0[k], followers[k].params));
      offsets_.push_back(followers[k].params.d);
    }
  }

  std::size_t size() const { return followers_.size(); }
  double horizon() const { return T_; }
  const LeaderMotion& leader() const { return leader_; }
  const Follower& follower(std::size_t i) const { return followers_.at(i - 1); }

  // xi_1..xi_N at time t.
  std::vector<double> xis(double t) const {
    std::vector<double> out(followers_.size());
    for (std::size_t k = 0; k < followers_.size(); ++k) out[k] = followers_[k].xi(t);
    return out;
  }

  // u_1..u_N at time t.
  std::vector<double> controls(double t) const {
    std::vector<double> u = xis(t);
    double acc = 0.0;
    for (double& v : u) {
      acc -= v;
      v = acc;
    }
    return u;
  }

  // u_i(t) for i in 1..N; u_0 = 0.
  double u(std::size_t i, double t) const {
    check_time(t, T_);
    if (i > followers_.size()) throw InvalidParameter("follower index out of range");
    double acc = 0.0;
    for (std::size_t j = 1; j <= i; ++j) acc -= followers_[j - 1].xi(t);
    return acc;
  }

  // Leader state followed by x_1..x_N.
  std::vector<StateVec3> states(double t, TrajectoryForm form = TrajectoryForm::exact) const {
    check_time(t, T_);
    std::vector<StateVec3> out;
    out.reserve(followers_.size() + 1);
    StateVec3 x = leader_.state(t);
    out.push_back(x);
    for (std::size_t k = 0; k < followers_.size(); ++k) {
      x -= followers_[k].y(t, form) + position_offset(offsets_[k]);
      out.push_back(x);
    }
    return out;
  }

 private:
  LeaderMotion leader_;
  double T_;
  std::vector<Follower> followers_;
  std::vector<double> offsets_;
};

class NashPlatoon : public FollowerChain<NashFollower> {
 public:
  NashPlatoon(const LeaderMotion& leader, std::span<const FollowerInit> followers,
              const DynamicsMatrices& dyn, double T)
      : FollowerChain(leader, followers, T,
                      [&](const RelativeState& y0, const FollowerParams& p) {
                        return NashFollower(y0.i, y0.y, p.omega, dyn, T);
                      }) {}
};

inline double u_nash(std::size_t i, const LeaderMotion& leader,
                     std::span<const FollowerInit> followers, const DynamicsMatrices& dyn, double T,
                     double t) {
  return NashPlatoon(leader, followers, dyn, T).u(i, t);
}

inline std::vector<StateVec3> x_traj_nash(const LeaderMotion& leader,
                                          std::span<const FollowerInit> followers,
                                          const DynamicsMatrices& dyn, double T, double t,
                                          TrajectoryForm form = TrajectoryForm::exact) {
  return NashPlatoon(leader, followers, dyn, T).states(t, form);
}

}  // namespace platoon
