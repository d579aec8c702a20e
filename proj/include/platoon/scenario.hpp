#pragma once

// Scenario description and the strategy evaluator that turns it into sampled
// closed-form trajectories.

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "platoon/collision.hpp"
#include "platoon/errors.hpp"
#include "platoon/linear.hpp"
#include "platoon/nash.hpp"

namespace platoon {

enum class Strategy { nash, ca_terminal, ca_timevarying, ca_timevarying_consistent };

inline std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::nash: return "nash";
    case Strategy::ca_terminal: return "ca-terminal";
    case Strategy::ca_timevarying: return "ca-timevarying";
    case Strategy::ca_timevarying_consistent: return "ca-timevarying-consistent";
  }
  return "?";
}

inline std::optional<Strategy> parse_strategy(std::string_view s) {
  for (Strategy v : {Strategy::nash, Strategy::ca_terminal, Strategy::ca_timevarying,
                     Strategy::ca_timevarying_consistent}) {
    if (to_string(v) == s) return v;
  }
  return std::nullopt;
}

inline std::string_view to_string(CaVariant v) {
  switch (v) {
    case CaVariant::terminal: return "terminal";
    case CaVariant::time_varying: return "time-varying";
    case CaVariant::time_varying_consistent: return "time-varying-consistent";
  }
  return "?";
}

inline std::optional<CaVariant> parse_variant(std::string_view s) {
  for (CaVariant v :
       {CaVariant::terminal, CaVariant::time_varying, CaVariant::time_varying_consistent}) {
    if (to_string(v) == s) return v;
  }
  return std::nullopt;
}

inline std::string_view to_string(TrajectoryForm f) {
  return f == TrajectoryForm::exact ? "exact" : "printed";
}

inline std::optional<TrajectoryForm> parse_trajectory_form(std::string_view s) {
  if (s == "exact") return TrajectoryForm::exact;
  if (s == "printed") return TrajectoryForm::printed;
  return std::nullopt;
}

// Collision-avoidance variant implied by a strategy; nash has none.
inline std::optional<CaVariant> variant_of(Strategy s) {
  switch (s) {
    case Strategy::nash: return std::nullopt;
    case Strategy::ca_terminal: return CaVariant::terminal;
    case Strategy::ca_timevarying: return CaVariant::time_varying;
    case Strategy::ca_timevarying_consistent: return CaVariant::time_varying_consistent;
  }
  return std::nullopt;
}

inline constexpr std::size_t kMaxFollowers = 1000;

struct PlatoonConfig {
  double tau = 0.5;
  double T = 10.0;
  double dt_output = 0.01;
  double dt_oracle = 1e-3;
  double epsilon = 0.1;
  Strategy strategy = Strategy::nash;
  TrajectoryForm trajectory_form = TrajectoryForm::exact;
  LeaderMotion leader;
  std::vector<FollowerInit> followers;

  std::size_t size() const { return followers.size(); }

  CaParams ca() const {
    return {epsilon, variant_of(strategy).value_or(CaVariant::time_varying)};
  }
};

// Throws ConfigError naming the violated invariant.
inline void validate(const PlatoonConfig& c) {
  auto fail = [](const std::string& msg) { throw ConfigError(msg); };
  if (!std::isfinite(c.tau) || c.tau <= 0.0) fail("tau must be > 0");
  if (!std::isfinite(c.T) || c.T <= 0.0) fail("T must be > 0");
  if (!std::isfinite(c.epsilon) || c.epsilon <= 0.0) fail("epsilon must be > 0");
  if (!std::isfinite(c.dt_output) || c.dt_output <= 0.0 || c.dt_output > c.T) {
    fail("dt_output must satisfy 0 < dt_output <= T");
  }
  if (!std::isfinite(c.dt_oracle) || c.dt_oracle <= 0.0 || c.T / c.dt_oracle > 1e7) {
    fail("dt_oracle must satisfy dt_oracle > 0 and T / dt_oracle <= 1e7");
  }
  if (!std::isfinite(c.leader.p0) || !std::isfinite(c.leader.v0)) fail("leader must be finite");
  if (c.followers.empty() || c.followers.size() > kMaxFollowers) {
    fail("number of followers must be in [1, 1000]");
  }
  try {
    for (std::size_t k = 0; k < c.followers.size(); ++k) validate(c.followers[k].params, k + 1);
    relative_initial_states(c.leader, c.followers);
  } catch (const Error& e) {
    fail(e.what());
  }
}

// Scenario used in the simulation study: five vehicles, tau = 0.5, T = 10.
inline PlatoonConfig paper_sec5_config() {
  PlatoonConfig c;
  c.tau = 0.5;
  c.T = 10.0;
  c.epsilon = 0.1;
  c.leader = {23.0, 2.0};
  const double omega[] = {6.0, 3.0, 8.0, 5.0};
  const double mu[] = {12.0, 10.0, 1.0, 5.0};
  const StateVec3 x0[] = {make_state(18.0, 2.5, 1.0), make_state(11.0, 3.0, 1.5),
                          make_state(6.0, 1.5, 0.8), make_state(1.0, 2.0, 1.2)};
  for (int k = 0; k < 4; ++k) {
    c.followers.push_back({x0[k], FollowerParams{omega[k], 2.0, 1.0, mu[k]}});
  }
  return c;
}

// One output row: leader first in `states`, follower quantities indexed 0..N-1.
struct TrajectorySample {
  double t = 0.0;
  std::vector<StateVec3> states;
  std::vector<double> controls;
  std::vector<double> spacings;  // p_{i-1} - p_i
  std::vector<double> risks;     // f(e^{tA} y_i(0))
};

// Output grid: k * dt for k < floor(T / dt), then T exactly.
inline std::vector<double> time_grid(double T, double dt) {
  const auto n = static_cast<std::size_t>(std::floor(T / dt * (1.0 + 1e-12)));
  std::vector<double> ts(n + 1);
  for (std::size_t k = 0; k < n; ++k) ts[k] = static_cast<double>(k) * dt;
  ts[n] = T;
  return ts;
}

// Closed-form evaluator for the configured strategy.
class StrategyEvaluator {
 public:
  explicit StrategyEvaluator(const PlatoonConfig& config)
      : config_(config), dyn_(make_dynamics(config.tau)), impl_(build(config_, dyn_)) {
    initial_ = relative_initial_states(config_.leader, config_.followers);
  }

  const PlatoonConfig& config() const { return config_; }
  const DynamicsMatrices& dynamics() const { return dyn_; }
  std::size_t size() const { return config_.size(); }
  const std::vector<RelativeState>& initial_relative_states() const { return initial_; }

  std::vector<double> controls(double t) const {
    return std::visit([&](const auto& p) { return p.controls(t); }, impl_);
  }

  std::vector<double> xis(double t) const {
    return std::visit([&](const auto& p) { return p.xis(t); }, impl_);
  }

  std::vector<StateVec3> states(double t) const {
    return std::visit([&](const auto& p) { return p.states(t, config_.trajectory_form); }, impl_);
  }

  // f(e^{tA} y_i(0)) for every follower, with the scenario's epsilon.
  std::vector<double> risks(double t) const {
    const Mat3 e = expm_tA(dyn_, t);
    std::vector<double> out(initial_.size());
    for (std::size_t k = 0; k < initial_.size(); ++k) {
      out[k] = risk_f(e * initial_[k].y, config_.followers[k].params, config_.epsilon);
    }
    return out;
  }

  TrajectorySample sample(double t) const {
    TrajectorySample s;
    s.t = t;
    s.states = states(t);
    s.controls = controls(t);
    s.risks = risks(t);
    s.spacings.resize(size());
    for (std::size_t k = 0; k < size(); ++k) s.spacings[k] = s.states[k](0) - s.states[k + 1](0);
    return s;
  }

  std::vector<TrajectorySample> sample_grid(double dt) const {
    std::vector<TrajectorySample> out;
    for (double t : time_grid(config_.T, dt)) out.push_back(sample(t));
    return out;
  }

 private:
  using Impl = std::variant<NashPlatoon, CaPlatoon>;

  static Impl build(const PlatoonConfig& c, const DynamicsMatrices& dyn) {
    if (c.strategy == Strategy::nash) return NashPlatoon(c.leader, c.followers, dyn, c.T);
    return CaPlatoon(c.leader, c.followers, c.ca(), dyn, c.T);
  }

  PlatoonConfig config_;
  DynamicsMatrices dyn_;
  Impl impl_;
  std::vector<RelativeState> initial_;
};

}  // namespace platoon
