#pragma once

// Independent verification engine: fixed-step RK4 of the true vehicle
// dynamics under an arbitrary control law, cost evaluation, best-response
// certification and run metrics. Nothing here uses the closed-form
// trajectory formulas.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "platoon/errors.hpp"
#include "platoon/linear.hpp"
#include "platoon/nash.hpp"
#include "platoon/scenario.hpp"

namespace platoon {

enum class LawProvenance { nash, ca_terminal, ca_timevarying, external };

inline std::string_view to_string(LawProvenance p) {
  switch (p) {
    case LawProvenance::nash: return "nash";
    case LawProvenance::ca_terminal: return "ca-terminal";
    case LawProvenance::ca_timevarying: return "ca-timevarying";
    case LawProvenance::external: return "external";
  }
  return "?";
}

// u_1..u_N as a function of time.
struct ControlLaw {
  LawProvenance provenance = LawProvenance::external;
  std::function<std::vector<double>(double)> controls;

  double operator()(std::size_t i, double t) const {
    if (i == 0) return 0.0;
    return controls(t).at(i - 1);
  }
};

inline ControlLaw control_law(std::shared_ptr<const StrategyEvaluator> eval) {
  ControlLaw law;
  switch (eval->config().strategy) {
    case Strategy::nash: law.provenance = LawProvenance::nash; break;
    case Strategy::ca_terminal: law.provenance = LawProvenance::ca_terminal; break;
    default: law.provenance = LawProvenance::ca_timevarying; break;
  }
  law.controls = [eval](double t) { return eval->controls(t); };
  return law;
}

// Composite Simpson rule on a possibly non-uniform grid; an odd number of
// intervals gets the standard end correction.
inline double simpson(std::span<const double> t, std::span<const double> f) {
  const std::size_t n = t.size();
  if (n != f.size()) throw InvalidParameter("simpson: size mismatch");
  if (n < 2) return 0.0;
  if (n == 2) return 0.5 * (t[1] - t[0]) * (f[0] + f[1]);
  const std::size_t intervals = n - 1;
  double sum = 0.0;
  std::size_t k = 0;
  for (; k + 2 <= intervals; k += 2) {
    const double h0 = t[k + 1] - t[k];
    const double h1 = t[k + 2] - t[k + 1];
    sum += (h0 + h1) / 6.0 *
           ((2.0 - h1 / h0) * f[k] + (h0 + h1) * (h0 + h1) / (h0 * h1) * f[k + 1] +
            (2.0 - h0 / h1) * f[k + 2]);
  }
  if (intervals % 2 == 1) {
    const double h0 = t[n - 2] - t[n - 3];
    const double h1 = t[n - 1] - t[n - 2];
    const double alpha = (2.0 * h1 * h1 + 3.0 * h1 * h0) / (6.0 * (h0 + h1));
    const double beta = (h1 * h1 + 3.0 * h1 * h0) / (6.0 * h0);
    const double eta = h1 * h1 * h1 / (6.0 * h0 * (h0 + h1));
    sum += alpha * f[n - 1] + beta * f[n - 2] - eta * f[n - 3];
  }
  return sum;
}

// Integration step sequence on [0, T]: uniform dt, last step shortened to hit T.
inline std::vector<double> step_times(double T, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidParameter("step must be positive");
  if (T / dt > 1e7) throw InvalidParameter("too many integration steps (T / dt > 1e7)");
  std::vector<double> ts;
  const auto n = static_cast<std::size_t>(std::floor(T / dt * (1.0 + 1e-12)));
  ts.reserve(n + 2);
  for (std::size_t k = 0; k <= n; ++k) ts.push_back(std::min(static_cast<double>(k) * dt, T));
  if (T - ts.back() > 1e-12 * T) {
    ts.push_back(T);
  } else {
    ts.back() = T;
  }
  return ts;
}

namespace detail {

template <class Deriv>
void rk4_step(std::vector<StateVec3>& x, double t, double h, Deriv&& deriv) {
  const std::size_t n = x.size();
  std::vector<StateVec3> k1(n), k2(n), k3(n), k4(n), tmp(n);
  deriv(t, x, k1);
  for (std::size_t j = 0; j < n; ++j) tmp[j] = x[j] + 0.5 * h * k1[j];
  deriv(t + 0.5 * h, tmp, k2);
  for (std::size_t j = 0; j < n; ++j) tmp[j] = x[j] + 0.5 * h * k2[j];
  deriv(t + 0.5 * h, tmp, k3);
  for (std::size_t j = 0; j < n; ++j) tmp[j] = x[j] + h * k3[j];
  deriv(t + h, tmp, k4);
  for (std::size_t j = 0; j < n; ++j) x[j] += h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
}

}  // namespace detail

// RK4 of x_i' = A x_i + B u_i for all followers; the leader is propagated
// analytically. One sample per step plus t = T.
inline std::vector<TrajectorySample> integrate(const ControlLaw& law, const PlatoonConfig& scenario,
                                               double dt) {
  const DynamicsMatrices dyn = make_dynamics(scenario.tau);
  const std::size_t n = scenario.size();
  const auto y0 = relative_initial_states(scenario.leader, scenario.followers);
  const std::vector<double> ts = step_times(scenario.T, dt);

  std::vector<StateVec3> x(n);
  for (std::size_t k = 0; k < n; ++k) x[k] = scenario.followers[k].x0;

  auto deriv = [&](double t, const std::vector<StateVec3>& state, std::vector<StateVec3>& out) {
    const std::vector<double> u = law.controls(t);
    for (std::size_t k = 0; k < n; ++k) out[k] = dyn.A * state[k] + dyn.B * u[k];
  };

  auto make_sample = [&](double t) {
    TrajectorySample s;
    s.t = t;
    s.states.reserve(n + 1);
    s.states.push_back(scenario.leader.state(t));
    for (const auto& xi : x) s.states.push_back(xi);
    s.controls = law.controls(t);
    s.spacings.resize(n);
    s.risks.resize(n);
    const Mat3 e = expm_tA(dyn, t);
    for (std::size_t k = 0; k < n; ++k) {
      s.spacings[k] = s.states[k](0) - s.states[k + 1](0);
      s.risks[k] = risk_f(e * y0[k].y, scenario.followers[k].params, scenario.epsilon);
    }
    return s;
  };

  std::vector<TrajectorySample> out;
  out.reserve(ts.size());
  out.push_back(make_sample(0.0));
  for (std::size_t step = 1; step < ts.size(); ++step) {
    const double t0 = ts[step - 1];
    detail::rk4_step(x, t0, ts[step] - t0, deriv);
    for (std::size_t k = 0; k < n; ++k) {
      if (!all_finite(x[k])) {
        throw DivergenceError("non-finite state for vehicle " + std::to_string(k + 1) +
                                  " at t = " + std::to_string(ts[step]),
                              k + 1, ts[step]);
      }
    }
    out.push_back(make_sample(ts[step]));
  }
  return out;
}

inline double terminal_cost_term(const TrajectorySample& last, std::size_t i,
                                 const FollowerParams& p) {
  const StateVec3 err = last.states[i - 1] - last.states[i] - position_offset(p.d);
  return p.omega * err.squaredNorm();
}

inline double collision_cost_term(const TrajectorySample& last, std::size_t i,
                                  const FollowerParams& p, double epsilon) {
  const StateVec3 gap = last.states[i - 1] - last.states[i] - position_offset(p.r);
  return 1.0 / (p.mu * gap.squaredNorm() + epsilon);
}

// Control energy of follower i over the sampled trajectory.
inline double control_energy(std::span<const TrajectorySample> samples, std::size_t i) {
  std::vector<double> t(samples.size()), f(samples.size());
  for (std::size_t k = 0; k < samples.size(); ++k) {
    t[k] = samples[k].t;
    f[k] = samples[k].controls[i - 1] * samples[k].controls[i - 1];
  }
  return simpson(t, f);
}

// J_i, or J_hat_i when `with_collision_term` is set.
inline double eval_cost(std::size_t i, const ControlLaw& law, const PlatoonConfig& scenario,
                        bool with_collision_term, double dt) {
  if (i == 0 || i > scenario.size()) throw InvalidParameter("follower index out of range");
  const auto samples = integrate(law, scenario, dt);
  const FollowerParams& p = scenario.followers[i - 1].params;
  double j = terminal_cost_term(samples.back(), i, p) + control_energy(samples, i);
  if (with_collision_term) j += collision_cost_term(samples.back(), i, p, scenario.epsilon);
  return j;
}

// ---------------------------------------------------------------------------
// Reduced single-player problem: y' = A y + B xi, cost omega |y(T)|^2 + int xi^2.

struct ReducedTrajectory {
  std::vector<double> t;
  std::vector<StateVec3> y;
  std::vector<double> xi;
};

inline ReducedTrajectory integrate_reduced(const StateVec3& y0, const std::function<double(double)>& xi,
                                           const DynamicsMatrices& dyn, double T, double dt) {
  ReducedTrajectory out;
  out.t = step_times(T, dt);
  out.y.reserve(out.t.size());
  out.xi.reserve(out.t.size());
  std::vector<StateVec3> state{y0};
  auto deriv = [&](double t, const std::vector<StateVec3>& s, std::vector<StateVec3>& d) {
    d[0] = dyn.A * s[0] + dyn.B * xi(t);
  };
  out.y.push_back(y0);
  out.xi.push_back(xi(0.0));
  for (std::size_t k = 1; k < out.t.size(); ++k) {
    detail::rk4_step(state, out.t[k - 1], out.t[k] - out.t[k - 1], deriv);
    if (!all_finite(state[0])) throw DivergenceError("non-finite reduced state", 0, out.t[k]);
    out.y.push_back(state[0]);
    out.xi.push_back(xi(out.t[k]));
  }
  return out;
}

inline double reduced_cost(const ReducedTrajectory& traj, double omega) {
  std::vector<double> sq(traj.xi.size());
  for (std::size_t k = 0; k < sq.size(); ++k) sq[k] = traj.xi[k] * traj.xi[k];
  return omega * traj.y.back().squaredNorm() + simpson(traj.t, sq);
}

// K raised-cosine bumps centred on a uniform grid over [0, T]; they sum to 1.
struct BumpBasis {
  std::size_t count = 8;
  double T = 1.0;

  double operator()(std::size_t k, double t) const {
    if (count < 2) return 1.0;
    const double h = T / static_cast<double>(count - 1);
    const double c = h * static_cast<double>(k);
    const double s = (t - c) / h;
    if (std::abs(s) >= 1.0) return 0.0;
    return 0.5 * (1.0 + std::cos(std::numbers::pi * s));
  }
};

struct PerturbationMargin {
  std::size_t basis_index = 0;
  int sign = 1;
  double cost = 0.0;
  double margin = 0.0;  // cost - baseline
};

struct BestResponseReport {
  std::size_t follower = 0;
  double baseline_cost = 0.0;
  double magnitude = 0.0;
  double tolerance = 0.0;
  std::vector<PerturbationMargin> margins;

  double worst_margin() const {
    double w = std::numeric_limits<double>::infinity();
    for (const auto& m : margins) w = std::min(w, m.margin);
    return w;
  }
  bool passed() const { return worst_margin() >= -tolerance; }
};

struct BestResponseOptions {
  std::size_t basis_size = 8;
  double magnitude = 1e-2;
  double dt = 1e-3;
  double tolerance = 1e-9;
};

// Checks that no bump perturbation of xi lowers the reduced cost.
inline BestResponseReport best_response_check(std::size_t i, const StateVec3& y0, double omega,
                                              const std::function<double(double)>& xi,
                                              const DynamicsMatrices& dyn, double T,
                                              const BestResponseOptions& opt = {}) {
  BestResponseReport report;
  report.follower = i;
  report.magnitude = opt.magnitude;
  report.tolerance = opt.tolerance;
  report.baseline_cost = reduced_cost(integrate_reduced(y0, xi, dyn, T, opt.dt), omega);
  const BumpBasis basis{opt.basis_size, T};
  for (std::size_t k = 0; k < opt.basis_size; ++k) {
    for (int sign : {1, -1}) {
      const double scale = sign * opt.magnitude;
      auto perturbed = [&](double t) { return xi(t) + scale * basis(k, t); };
      const double cost = reduced_cost(integrate_reduced(y0, perturbed, dyn, T, opt.dt), omega);
      report.margins.push_back({k, sign, cost, cost - report.baseline_cost});
    }
  }
  return report;
}

// Same check with xi_i = u_{i-1} - u_i taken from a platoon control law.
inline BestResponseReport best_response_check(std::size_t i, const ControlLaw& law,
                                              const PlatoonConfig& scenario,
                                              const BestResponseOptions& opt = {}) {
  if (i == 0 || i > scenario.size()) throw InvalidParameter("follower index out of range");
  const auto y0 = relative_initial_states(scenario.leader, scenario.followers);
  auto xi = [&](double t) {
    const std::vector<double> u = law.controls(t);
    return (i >= 2 ? u[i - 2] : 0.0) - u[i - 1];
  };
  return best_response_check(i, y0[i - 1].y, scenario.followers[i - 1].params.omega, xi,
                             make_dynamics(scenario.tau), scenario.T, opt);
}

// ---------------------------------------------------------------------------
// Run metrics.

// Position-error threshold used to call the platoon formed.
inline constexpr double kPlatoonThreshold = 0.1;

struct TimedValue {
  double value = 0.0;
  double time = 0.0;
};

struct CollisionEvent {
  std::size_t follower = 0;
  double entry = 0.0;
  std::optional<double> exit;  // empty when still inside at the last sample
};

struct RunReport {
  std::vector<double> terminal_spacing_errors;   // |x_{i-1}(T) - x_i(T) - d_hat_i|
  std::vector<double> terminal_position_errors;  // position component only
  std::vector<TimedValue> min_spacing;
  std::vector<CollisionEvent> collision_events;
  std::vector<TimedValue> peak_risk;             // argmax_t f(e^{tA} y_i(0))
  std::vector<std::optional<double>> platoon_formed_time;
  TimedValue min_velocity_margin;                // min over i, t of v_i - v_0
  std::vector<double> costs;                     // J_i
  std::vector<double> costs_with_collision;      // J_hat_i
};

inline RunReport analyze(std::span<const TrajectorySample> samples, const PlatoonConfig& scenario) {
  if (samples.empty()) throw InvalidParameter("analyze: no samples");
  const std::size_t n = scenario.size();
  RunReport rep;
  const TrajectorySample& last = samples.back();

  rep.min_spacing.assign(n, {std::numeric_limits<double>::infinity(), 0.0});
  rep.peak_risk.assign(n, {-std::numeric_limits<double>::infinity(), 0.0});
  rep.platoon_formed_time.assign(n, std::nullopt);
  rep.min_velocity_margin = {std::numeric_limits<double>::infinity(), 0.0};

  for (std::size_t k = 0; k < n; ++k) {
    const FollowerParams& p = scenario.followers[k].params;
    const StateVec3 err = last.states[k] - last.states[k + 1] - position_offset(p.d);
    rep.terminal_spacing_errors.push_back(err.norm());
    rep.terminal_position_errors.push_back(std::abs(err(0)));

    std::optional<double> entry;
    std::optional<double> formed;
    for (const auto& s : samples) {
      const double gap = s.spacings[k];
      if (gap < rep.min_spacing[k].value) rep.min_spacing[k] = {gap, s.t};
      if (s.risks[k] > rep.peak_risk[k].value) rep.peak_risk[k] = {s.risks[k], s.t};
      const double dv = s.states[k + 1](1) - s.states[0](1);
      if (dv < rep.min_velocity_margin.value) rep.min_velocity_margin = {dv, s.t};

      if (gap < p.r) {
        if (!entry) entry = s.t;
      } else if (entry) {
        rep.collision_events.push_back({k + 1, *entry, s.t});
        entry.reset();
      }

      if (std::abs(gap - p.d) <= kPlatoonThreshold) {
        if (!formed) formed = s.t;
      } else {
        formed.reset();
      }
    }
    if (entry) rep.collision_events.push_back({k + 1, *entry, std::nullopt});
    rep.platoon_formed_time[k] = formed;

    const double energy = control_energy(samples, k + 1);
    rep.costs.push_back(terminal_cost_term(last, k + 1, p) + energy);
    rep.costs_with_collision.push_back(rep.costs.back() +
                                       collision_cost_term(last, k + 1, p, scenario.epsilon));
  }
  return rep;
}

// Largest |closed form - integrated| over every state component, follower
// and integration sample.
struct OracleDeviation {
  double max_deviation = 0.0;
  double time = 0.0;
  std::size_t follower = 0;
};

inline OracleDeviation oracle_deviation(std::shared_ptr<const StrategyEvaluator> eval, double dt) {
  const auto samples = integrate(control_law(eval), eval->config(), dt);
  OracleDeviation dev;
  for (const auto& s : samples) {
    const auto closed = eval->states(s.t);
    for (std::size_t k = 1; k < closed.size(); ++k) {
      const double d = (closed[k] - s.states[k]).cwiseAbs().maxCoeff();
      if (!(d <= dev.max_deviation)) dev = {d, s.t, k};
    }
  }
  return dev;
}

}  // namespace platoon
