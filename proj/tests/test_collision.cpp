#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "platoon/collision.hpp"
#include "platoon/oracle.hpp"
#include "platoon/scenario.hpp"
#include "support/oracles.hpp"
#include "support/scenarios.hpp"

using namespace platoon;

namespace {

const PlatoonConfig kStudy = paper_sec5_config();

double inf_norm(const Vec3& v) { return v.cwiseAbs().maxCoeff(); }

RelativeState study_y(std::size_t i) {
  return relative_initial_states(kStudy.leader, kStudy.followers).at(i - 1);
}

FollowerParams study_params(std::size_t i) { return kStudy.followers.at(i - 1).params; }

FollowerParams without_collision_term(FollowerParams p) {
  p.mu = 0.0;
  return p;
}

const CaVariant kVariants[] = {CaVariant::terminal, CaVariant::time_varying,
                               CaVariant::time_varying_consistent};

}  // namespace

TEST(RiskF, PeakAtSafetyOffset) {
  const FollowerParams p{6.0, 2.0, 1.0, 12.0};
  for (double eps : {0.1, 0.5, 2.0}) {
    EXPECT_DOUBLE_EQ(risk_f(position_offset(p.r - p.d), p, eps), 1.0 / (eps * eps));
  }
}

TEST(RiskF, StudyPresetFirstFollower) {
  const FollowerParams p = study_params(1);
  const Vec3 y = study_y(1).y;
  const Vec3 gap = y + position_offset(p.d - p.r);
  EXPECT_DOUBLE_EQ(gap.squaredNorm(), 17.25);
  EXPECT_DOUBLE_EQ(risk_f(y, p, 0.1), 1.0 / (207.1 * 207.1));
  // 2.3315e-5, quoted truncated to four digits.
  EXPECT_NEAR(risk_f(y, p, 0.1), 2.331e-5, 1e-8);
}

TEST(RiskF, PositiveBoundedAndDecreasingInWeight) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 3.0);
  for (int k = 0; k < 200; ++k) {
    const Vec3 y(n(rng), n(rng), n(rng));
    FollowerParams p{1.0, 2.0, 1.0, 1.0};
    const double f = risk_f(y, p, 0.1);
    EXPECT_GT(f, 0.0);
    EXPECT_LE(f, 100.0);
    p.mu = 1e6;
    EXPECT_LE(risk_f(y, p, 0.1), f);
  }
  FollowerParams heavy{1.0, 2.0, 1.0, 1e12};
  EXPECT_LT(risk_f(Vec3(1.0, 0.0, 0.0), heavy, 0.1), 1e-20);
}

TEST(ZEstimate, InitialTimeReturnsInitialState) {
  const auto dyn = make_dynamics(kStudy.tau);
  for (std::size_t i = 1; i <= 4; ++i) {
    EXPECT_EQ(z_estimate(study_y(i), study_params(i), {}, dyn, kStudy.T, 0.0).z, study_y(i).y);
  }
}

TEST(ZEstimate, NoCollisionWeightGivesNashTerminal) {
  const auto dyn = make_dynamics(kStudy.tau);
  for (std::size_t i = 1; i <= 4; ++i) {
    const auto p = without_collision_term(study_params(i));
    const NashFollower nash(i, study_y(i).y, p.omega, dyn, kStudy.T);
    const Vec3 z = z_estimate(study_y(i), p, {}, dyn, kStudy.T, kStudy.T).z;
    EXPECT_LE(inf_norm(z - nash.terminal()), 1e-12);
  }
}

TEST(ZEstimate, TerminalEstimateIsFixedPointOfTrajectory) {
  const auto dyn = make_dynamics(kStudy.tau);
  for (std::size_t i = 1; i <= 4; ++i) {
    const CaFollower f(i, study_y(i).y, study_params(i), {0.1, CaVariant::terminal}, dyn, kStudy.T);
    for (auto form : {TrajectoryForm::exact, TrajectoryForm::printed}) {
      EXPECT_LE(inf_norm(f.y_terminal(kStudy.T, form) - f.terminal()), 1e-10) << "follower " << i;
    }
  }
}

TEST(ZEstimate, SingularShiftIsReported) {
  // y0 parked on the safety offset: the drift is constant and f = 1/eps^2, so
  // mu can be chosen to make I + (omega - mu f) Psi(T) rank deficient.
  const auto dyn = make_dynamics(0.5);
  const double T = 10.0, eps = 0.1, omega = 1.0;
  const double lmax = reference::sym_eigenvalues(gramian(dyn, T).M).maxCoeff();
  FollowerParams p{omega, 2.0, 1.0, (omega + 1.0 / lmax) * eps * eps};
  const RelativeState y0{3, position_offset(p.r - p.d)};
  try {
    z_estimate(y0, p, {eps, CaVariant::terminal}, dyn, T, T);
    FAIL() << "expected SingularMatrix";
  } catch (const SingularMatrix& e) {
    EXPECT_EQ(e.follower(), 3u);
    EXPECT_EQ(e.time(), T);
    EXPECT_GT(e.condition(), kMaxCondition);
  }
}

TEST(ZEstimate, RejectsTimeOutsideHorizon) {
  const auto dyn = make_dynamics(kStudy.tau);
  EXPECT_THROW(z_estimate(study_y(1), study_params(1), {}, dyn, kStudy.T, -0.5), DomainError);
  EXPECT_THROW(xi_ca_terminal(study_y(1), study_params(1), {}, dyn, kStudy.T, 10.5), DomainError);
}

TEST(XiCaTerminal, NoCollisionWeightIsNash) {
  const auto dyn = make_dynamics(kStudy.tau);
  const CaParams ca{0.1, CaVariant::terminal};
  for (std::size_t i = 1; i <= 4; ++i) {
    const auto p = without_collision_term(study_params(i));
    for (double t = 0.0; t <= kStudy.T; t += 0.5) {
      const double nash = xi_nash(study_y(i), p, dyn, kStudy.T, t);
      EXPECT_NEAR(xi_ca_terminal(study_y(i), p, ca, dyn, kStudy.T, t), nash,
                  1e-12 * (1.0 + std::abs(nash)));
      for (auto form : {TrajectoryForm::exact, TrajectoryForm::printed}) {
        const Vec3 yn = y_traj_nash(study_y(i), p, dyn, kStudy.T, t, form);
        EXPECT_LE(inf_norm(y_ca_terminal(study_y(i), p, ca, dyn, kStudy.T, t, form) - yn),
                  1e-12 * (1.0 + inf_norm(yn)));
      }
    }
  }
}

TEST(XiCaTerminal, ZeroSpacingErrorStillPushesBack) {
  const auto dyn = make_dynamics(0.5);
  const FollowerParams p{6.0, 2.0, 1.0, 12.0};
  const CaFollower f(1, Vec3::Zero(), p, {0.1, CaVariant::terminal}, dyn, 10.0);
  EXPECT_NE(f.xi_terminal(0.0), 0.0);
  // The follower drops back: relative position to the predecessor grows.
  EXPECT_GT(f.terminal()(0), 0.0);
}

TEST(XiCaTerminal, MatchesCostateOracle) {
  const auto dyn = make_dynamics(kStudy.tau);
  const double eps = 0.1;
  for (std::size_t i = 1; i <= 4; ++i) {
    const auto p = study_params(i);
    const Vec3 y0 = study_y(i).y;
    const double f_T = risk_f(expm_tA(dyn, kStudy.T) * y0, p, eps);
    const Vec3 target = position_offset(p.r - p.d);
    const double oracle =
        reference::costate_ca_terminal_xi0(dyn, y0, p.omega, p.mu, f_T, target, kStudy.T);
    const double closed = xi_ca_terminal(study_y(i), p, {eps, CaVariant::terminal}, dyn, kStudy.T, 0.0);
    EXPECT_NEAR(closed, oracle, 1e-10 * std::abs(oracle)) << "follower " << i;
  }
}

TEST(YCaTerminal, InitialStateRecovered) {
  const auto dyn = make_dynamics(kStudy.tau);
  for (std::size_t i = 1; i <= 4; ++i) {
    EXPECT_EQ(y_ca_terminal(study_y(i), study_params(i), {}, dyn, kStudy.T, 0.0), study_y(i).y);
    EXPECT_EQ(y_ca_timevarying(study_y(i), study_params(i), {}, dyn, kStudy.T, 0.0), study_y(i).y);
  }
}

TEST(YCaTerminal, SatisfiesDynamicsUnderControl) {
  const auto dyn = make_dynamics(kStudy.tau);
  for (std::size_t i = 1; i <= 4; ++i) {
    const CaFollower f(i, study_y(i).y, study_params(i), {0.1, CaVariant::terminal}, dyn, kStudy.T);
    const auto traj =
        integrate_reduced(study_y(i).y, [&](double t) { return f.xi(t); }, dyn, kStudy.T, 1e-3);
    double worst = 0.0;
    for (std::size_t k = 0; k < traj.t.size(); ++k) {
      worst = std::max(worst, inf_norm(traj.y[k] - f.y(traj.t[k])));
    }
    EXPECT_LE(worst, 1e-6) << "follower " << i;
  }
}

TEST(XiCaTimeVarying, VariantsCoincideAtHorizon) {
  const auto dyn = make_dynamics(kStudy.tau);
  for (std::size_t i = 1; i <= 4; ++i) {
    const double a = xi_ca_timevarying(study_y(i), study_params(i), {0.1, CaVariant::time_varying},
                                       dyn, kStudy.T, kStudy.T);
    const double b = xi_ca_timevarying(study_y(i), study_params(i),
                                       {0.1, CaVariant::time_varying_consistent}, dyn, kStudy.T,
                                       kStudy.T);
    EXPECT_NEAR(a, b, 1e-12 * (1.0 + std::abs(a)));
    // At t = T the re-estimated law also agrees with the terminal one.
    const double c = xi_ca_terminal(study_y(i), study_params(i), {}, dyn, kStudy.T, kStudy.T);
    EXPECT_NEAR(a, c, 1e-12 * (1.0 + std::abs(a)));
  }
}

TEST(XiCaTimeVarying, VariantsDifferBeforeHorizon) {
  const auto dyn = make_dynamics(kStudy.tau);
  const CaFollower a(4, study_y(4).y, study_params(4), {0.1, CaVariant::time_varying}, dyn, kStudy.T);
  EXPECT_NE(a.xi_timevarying(2.0, false), a.xi_timevarying(2.0, true));
}

// Without a collision weight the re-estimated law only meets the Nash law at
// t = T: z(t) is the terminal state of a horizon-t problem, not of the
// horizon-T one.
TEST(XiCaTimeVarying, NoCollisionWeightMeetsNashOnlyAtHorizon) {
  const auto dyn = make_dynamics(kStudy.tau);
  for (auto variant : {CaVariant::time_varying, CaVariant::time_varying_consistent}) {
    for (std::size_t i = 1; i <= 4; ++i) {
      const auto p = without_collision_term(study_params(i));
      const CaParams ca{0.1, variant};
      const double at_T = xi_nash(study_y(i), p, dyn, kStudy.T, kStudy.T);
      EXPECT_NEAR(xi_ca_timevarying(study_y(i), p, ca, dyn, kStudy.T, kStudy.T), at_T,
                  1e-12 * (1.0 + std::abs(at_T)));
      const Vec3 yT = y_traj_nash(study_y(i), p, dyn, kStudy.T, kStudy.T);
      EXPECT_LE(inf_norm(y_ca_timevarying(study_y(i), p, ca, dyn, kStudy.T, kStudy.T) - yT), 1e-12);

      const double mid = xi_nash(study_y(i), p, dyn, kStudy.T, 5.0);
      EXPECT_GT(std::abs(xi_ca_timevarying(study_y(i), p, ca, dyn, kStudy.T, 5.0) - mid), 1e-3);
    }
  }
}

TEST(XiCaTimeVarying, FirstFollowerStaysOutsideSafetyRadius) {
  const auto dyn = make_dynamics(kStudy.tau);
  const CaFollower f(1, study_y(1).y, study_params(1), {0.1, CaVariant::time_varying}, dyn, kStudy.T);
  const double d = study_params(1).d, r = study_params(1).r;
  for (double t : time_grid(kStudy.T, 0.01)) {
    EXPECT_GT(f.y(t)(0) + d, r) << "t = " << t;
  }
}

TEST(UCa, FiniteOverHorizonForAllVariants) {
  const auto dyn = make_dynamics(kStudy.tau);
  for (auto variant : kVariants) {
    const CaPlatoon p(kStudy.leader, kStudy.followers, {0.1, variant}, dyn, kStudy.T);
    for (double t : time_grid(kStudy.T, 0.05)) {
      for (double u : p.controls(t)) {
        EXPECT_TRUE(std::isfinite(u));
        EXPECT_LT(std::abs(u), 1e3);
      }
    }
  }
}

TEST(UCa, TelescopingIdentityOnRandomScenarios) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 30; ++trial) {
    const auto c = reference::random_config(rng);
    const auto dyn = make_dynamics(c.tau);
    const CaParams ca{0.5, kVariants[trial % 3]};
    try {
      const CaPlatoon p(c.leader, c.followers, ca, dyn, c.T);
      const double t = 0.37 * c.T;
      const auto u = p.controls(t);
      for (std::size_t i = 1; i <= p.size(); ++i) {
        const double prev = i == 1 ? 0.0 : u[i - 2];
        EXPECT_NEAR(prev - u[i - 1], p.follower(i).xi(t), 1e-12 * (1.0 + std::abs(u[i - 1])));
        EXPECT_EQ(u_ca(i, c.leader, c.followers, ca, dyn, c.T, t), u[i - 1]);
      }
    } catch (const SingularMatrix&) {
      // A strong collision weight can legitimately make the shift singular.
    }
  }
}
