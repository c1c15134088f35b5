/*
 Copyright 2026 The ngtc authors

 Licensed under the Apache License, Version 2.0 (the "License");
 you may not use this file except in compliance with the License.
 You may obtain a copy of the License at

      https://www.apache.org/licenses/LICENSE-2.0

 Unless required by applicable law or agreed to in writing, software
 distributed under the License is distributed on an "AS IS" BASIS,
 WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 See the License for the specific language governing permissions and
 limitations under the License.
*/

#include "ngtc/controller.hpp"

#include <cmath>

#include "gtest/gtest.h"
#include "ngtc/dynamics.hpp"
#include "ngtc/trajectory.hpp"

namespace ngtc {
namespace {

TEST(Controller, PdAccelerationTracksReferenceExactly) {
  Gains g;
  ReferenceState ref;
  ref.x = Eigen::Vector3d(1.0, 2.0, 3.0);
  ref.v = Eigen::Vector3d(0.5, -0.5, 0.0);
  ref.a = Eigen::Vector3d(0.1, 0.2, 0.3);
  Vec3<double> a = pd_acceleration(g, Vec3<double>(ref.x), Vec3<double>(ref.v), ref);
  EXPECT_NEAR(a.x(), 0.1, 1e-15);
  EXPECT_NEAR(a.y(), 0.2, 1e-15);
  EXPECT_NEAR(a.z(), 0.3, 1e-15);

  // 1 m position error along x commands kx * 1 on top of the feed-forward.
  Vec3<double> off = pd_acceleration(g, Vec3<double>(ref.x - Eigen::Vector3d(1, 0, 0)),
                                     Vec3<double>(ref.v), ref);
  EXPECT_NEAR(off.x(), 0.1 + 18.0, 1e-12);
}

TEST(Controller, LevelThrustBalancesGravity) {
  QuadParams p;
  ControllerMemory<double> mem;
  ThrustAttitude<double> ta =
      thrust_and_attitude(p, Vec3<double>(0.0, 0.0, 0.0), 0.0, mem);
  EXPECT_NEAR(ta.thrust, p.mass * p.g, 1e-12);
  EXPECT_NEAR(ta.thrust, 7.0632, 1e-12);
  EXPECT_NEAR(ta.q.w, 1.0, 1e-12);
  EXPECT_NEAR((ta.R - Mat3<double>::Identity()).norm(), 0.0, 1e-12);
  EXPECT_EQ(ta.flags, 0u);
}

TEST(Controller, ForwardAccelerationPitchesBy45Degrees) {
  QuadParams p;
  ControllerMemory<double> mem;
  ThrustAttitude<double> ta =
      thrust_and_attitude(p, Vec3<double>(p.g, 0.0, 0.0), 0.0, mem);
  EXPECT_NEAR(ta.thrust, p.mass * p.g * std::sqrt(2.0), 1e-12);
  // Pitch of +45 degrees about body y.
  EXPECT_NEAR(ta.q.w, std::cos(kPi / 8.0), 1e-12);
  EXPECT_NEAR(ta.q.y, std::sin(kPi / 8.0), 1e-12);
  EXPECT_NEAR(ta.q.x, 0.0, 1e-12);
  EXPECT_NEAR(ta.q.z, 0.0, 1e-12);
  // Thrust axis along the specific-force direction.
  const double s = 1.0 / std::sqrt(2.0);
  EXPECT_NEAR(ta.R(0, 2), s, 1e-12);
  EXPECT_NEAR(ta.R(2, 2), s, 1e-12);
}

TEST(Controller, AttitudeRespectsHeading) {
  QuadParams p;
  ControllerMemory<double> mem;
  const double psi = 1.1;
  ThrustAttitude<double> ta =
      thrust_and_attitude(p, Vec3<double>(0.0, 0.0, 0.0), psi, mem);
  // Level flight at heading psi: body x points at (cos psi, sin psi, 0).
  EXPECT_NEAR(ta.R(0, 0), std::cos(psi), 1e-12);
  EXPECT_NEAR(ta.R(1, 0), std::sin(psi), 1e-12);
  EXPECT_NEAR(ta.R(2, 0), 0.0, 1e-12);
}

TEST(Controller, AttitudeColumnsStayOrthonormal) {
  QuadParams p;
  Rng rng(seed_stream(20260105, 0));
  ControllerMemory<double> mem;
  for (int k = 0; k < 50; ++k) {
    Vec3<double> a(rng.uniform(-20.0, 20.0), rng.uniform(-20.0, 20.0),
                   rng.uniform(-15.0, 25.0));
    double psi = rng.uniform(-kPi, kPi);
    ThrustAttitude<double> ta = thrust_and_attitude(p, a, psi, mem);
    EXPECT_NEAR((ta.R.transpose() * ta.R - Mat3<double>::Identity()).norm(), 0.0, 1e-9);
    EXPECT_NEAR((rotation_matrix(ta.q) - ta.R).norm(), 0.0, 1e-9);
    // Thrust magnitude always matches the specific force demand.
    Vec3<double> f = a;
    f.z() += p.g;
    EXPECT_NEAR(ta.thrust, p.mass * f.norm(), 1e-9);
  }
}

TEST(Controller, SingularBranchesRaiseFlagsAndHoldAxes) {
  QuadParams p;
  ControllerMemory<double> mem;
  thrust_and_attitude(p, Vec3<double>(1.0, 0.0, 0.0), 0.0, mem);  // prime memory

  // Free-fall demand: specific force vanishes.
  ThrustAttitude<double> ta =
      thrust_and_attitude(p, Vec3<double>(0.0, 0.0, -p.g), 0.0, mem);
  EXPECT_TRUE(ta.flags & kFlagThrustSingular);
  EXPECT_NEAR((ta.R.transpose() * ta.R - Mat3<double>::Identity()).norm(), 0.0, 1e-9);

  // Thrust axis parallel to the heading vector y_C = (0, 1, 0) at psi = 0.
  ControllerMemory<double> mem2;
  ThrustAttitude<double> tb =
      thrust_and_attitude(p, Vec3<double>(0.0, 5.0, -p.g), 0.0, mem2);
  EXPECT_TRUE(tb.flags & kFlagYawGimbal);
  EXPECT_NEAR((tb.R.transpose() * tb.R - Mat3<double>::Identity()).norm(), 0.0, 1e-9);
  EXPECT_NEAR(tb.R(1, 2), 1.0, 1e-12);  // z_B still along the demanded force
}

TEST(Controller, RateFeedForwardFromJerk) {
  QuadParams p;
  Mat3<double> r = Mat3<double>::Identity();
  const double hover = p.mass * p.g;

  // Level hover with unit x jerk: pitch rate 1/g, no roll, no yaw.
  RateFeedForward<double> ff =
      angular_velocity_reference(p.mass, r, hover, Eigen::Vector3d(1.0, 0.0, 0.0), 0.0);
  EXPECT_NEAR(ff.omega.x(), 0.0, 1e-15);
  EXPECT_NEAR(ff.omega.y(), 1.0 / p.g, 1e-12);
  EXPECT_NEAR(ff.omega.z(), 0.0, 1e-15);
  EXPECT_NEAR(ff.thrust_rate, 0.0, 1e-15);

  // Vertical jerk only changes the collective thrust rate.
  RateFeedForward<double> fz =
      angular_velocity_reference(p.mass, r, hover, Eigen::Vector3d(0.0, 0.0, 2.0), 0.0);
  EXPECT_NEAR(fz.omega.norm(), 0.0, 1e-15);
  EXPECT_NEAR(fz.thrust_rate, 2.0 * p.mass, 1e-12);

  // Heading rate passes through scaled by the tilt (identity here).
  RateFeedForward<double> fy =
      angular_velocity_reference(p.mass, r, hover, Eigen::Vector3d::Zero(), 0.7);
  EXPECT_NEAR(fy.omega.z(), 0.7, 1e-15);

  // Tiny thrust switches the feed-forward off.
  RateFeedForward<double> off =
      angular_velocity_reference(p.mass, r, 0.01, Eigen::Vector3d(1.0, 0.0, 0.0), 0.0);
  EXPECT_TRUE(off.flags & kFlagFeedforwardOff);
  EXPECT_NEAR(off.omega.norm(), 0.0, 1e-15);
}

TEST(Controller, AttitudeErrorPureRoll) {
  Quat<double> q;  // identity
  const double phi = 0.2;
  Quat<double> q_des(std::cos(0.5 * phi), std::sin(0.5 * phi), 0.0, 0.0);
  Vec3<double> e = tilt_prioritized_error(q, q_des);
  EXPECT_NEAR(e.x(), 2.0 * std::sin(0.5 * phi), 1e-12);
  EXPECT_NEAR(e.x(), 0.19966683329365068, 1e-12);
  EXPECT_NEAR(e.y(), 0.0, 1e-12);
  EXPECT_NEAR(e.z(), 0.0, 1e-12);
}

TEST(Controller, AttitudeErrorPureYaw) {
  Quat<double> q;
  Quat<double> q_des = quat_from_yaw(0.1);
  Vec3<double> e = tilt_prioritized_error(q, q_des);
  EXPECT_NEAR(e.x(), 0.0, 1e-12);
  EXPECT_NEAR(e.y(), 0.0, 1e-12);
  EXPECT_NEAR(e.z(), 2.0 * std::sin(0.05), 1e-12);
}

TEST(Controller, YawErrorTakesShortWay) {
  Quat<double> q;
  // 350 degrees of yaw is -10 degrees the short way round.
  Quat<double> q_des = quat_from_yaw(2.0 * kPi - 0.1);
  Vec3<double> e = tilt_prioritized_error(q, q_des);
  EXPECT_NEAR(e.z(), -2.0 * std::sin(0.05), 1e-12);
}

TEST(Controller, MixedErrorSplitsTiltFromYaw) {
  // Desired attitude = yaw then tilt; the split must report the same yaw
  // component as a pure-yaw error would.
  Quat<double> q;
  const double psi = 0.8, phi = 0.3;
  Quat<double> tilt(std::cos(0.5 * phi), std::sin(0.5 * phi), 0.0, 0.0);
  Quat<double> q_des = quat_mul(quat_from_yaw(psi), tilt).normalized();
  Vec3<double> e = tilt_prioritized_error(q, q_des);
  EXPECT_NEAR(e.z(), 2.0 * std::sin(0.5 * psi), 1e-9);
  EXPECT_GT(std::hypot(e.x(), e.y()), 0.1);
}

TEST(Controller, TiltAmbiguousBranchStillReportsTilt) {
  Quat<double> q;
  Quat<double> q_des(0.0, 1.0, 0.0, 0.0);  // 180 degrees about x
  uint32_t flags = 0;
  Vec3<double> e = tilt_prioritized_error(q, q_des, &flags);
  EXPECT_TRUE(flags & kFlagTiltAmbiguous);
  EXPECT_NEAR(std::fabs(e.x()), 2.0, 1e-9);
  EXPECT_NEAR(e.z(), 0.0, 1e-12);
}

TEST(Controller, TorqueLawGyroscopicTerm) {
  QuadParams p;
  Gains g;
  Vec3<double> w(1.0, 2.0, 3.0);
  Vec3<double> zero(0.0, 0.0, 0.0);
  // No attitude error and omega_ref == omega leaves only the gyroscopic
  // compensation w x (J w).
  Vec3<double> mu = attitude_torque(p, g, zero, w, w);
  Vec3<double> jw(p.inertia.x() * w.x(), p.inertia.y() * w.y(), p.inertia.z() * w.z());
  Vec3<double> expect = w.cross(jw);
  EXPECT_NEAR((mu - expect).norm(), 0.0, 1e-15);
  EXPECT_NEAR(expect.x(), 13.2e-3, 1e-12);
  EXPECT_NEAR(expect.y(), -5.4e-3, 1e-12);
  EXPECT_NEAR(expect.z(), -0.8e-3, 1e-12);

  // From rest, a rate reference maps through J * K_omega...
  Vec3<double> mu2 = attitude_torque(p, g, zero, Vec3<double>(1.0, 0.0, 0.0), zero);
  EXPECT_NEAR(mu2.x(), p.inertia.x() * g.komega.x(), 1e-15);

  // ...and an attitude error through J * K_q, split per axis.
  Vec3<double> e(0.1, 0.0, 0.2);
  Vec3<double> mu3 = attitude_torque(p, g, e, zero, zero);
  EXPECT_NEAR(mu3.x(), p.inertia.x() * g.kq_xy * 0.1, 1e-15);
  EXPECT_NEAR(mu3.z(), p.inertia.z() * g.kq_z * 0.2, 1e-15);
}

TEST(BoxQp, InteriorSolutionMatchesPlainInverse) {
  QuadParams p;
  Gains g;
  Eigen::Matrix4d B = allocation_matrix(p);
  Eigen::Vector4d demand(p.hover_thrust_total(), 0.05, -0.03, 0.01);
  BoxQpResult r = solve_box_wls(B, g.wc, demand, p.u_min, p.u_max);
  Eigen::Vector4d exact = B.inverse() * demand;
  EXPECT_NEAR((r.u - exact).norm(), 0.0, 1e-10);
  EXPECT_FALSE(r.any_active);
  EXPECT_FALSE(r.degraded);
  EXPECT_LE(r.kkt_residual, 1e-9);
}

TEST(BoxQp, SatisfiesKktOnRandomDemands) {
  QuadParams p;
  Gains g;
  const Eigen::Matrix4d B = allocation_matrix(p);
  const Eigen::Matrix4d H =
      B.transpose() * g.wc.asDiagonal() * B;  // quadratic form of the WLS cost

  Rng rng(seed_stream(20260106, 0));
  int active_cases = 0;
  double worst = 0.0;
  for (int k = 0; k < 10000; ++k) {
    Eigen::Vector4d d(rng.uniform(-5.0, 45.0), rng.uniform(-1.0, 1.0),
                      rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
    BoxQpResult r = solve_box_wls(B, g.wc, d, p.u_min, p.u_max);
    ASSERT_FALSE(r.degraded);
    if (r.any_active) ++active_cases;

    // Independent KKT audit: gradient must vanish on free coordinates and
    // push outward on active bounds.
    Eigen::Vector4d grad = H * r.u - B.transpose() * (g.wc.asDiagonal() * d);
    for (int i = 0; i < 4; ++i) {
      ASSERT_GE(r.u[i], p.u_min - 1e-10);
      ASSERT_LE(r.u[i], p.u_max + 1e-10);
      double viol;
      if (r.u[i] <= p.u_min + 1e-9)
        viol = std::max(0.0, -grad[i]);  // wants to decrease below the floor
      else if (r.u[i] >= p.u_max - 1e-9)
        viol = std::max(0.0, grad[i]);  // wants to increase past the ceiling
      else
        viol = std::fabs(grad[i]);
      worst = std::max(worst, viol);
    }
  }
  EXPECT_LE(worst, 1e-8) << "worst KKT violation " << worst;
  EXPECT_GT(active_cases, 1000);  // the draw range genuinely exercises bounds
}

TEST(BoxQp, WeightsPrioritizeTorqueOverThrust) {
  QuadParams p;
  Gains g;
  Eigen::Matrix4d B = allocation_matrix(p);
  // Unreachable collective thrust combined with a roll-torque demand: the
  // weighted trade-off sacrifices thrust (weight 1e-3) and keeps the torque
  // channels (weight 10) within a couple of percent.
  Eigen::Vector4d demand(40.0, 0.5, 0.0, 0.0);
  BoxQpResult r = solve_box_wls(B, g.wc, demand, p.u_min, p.u_max);
  Eigen::Vector4d achieved = B * r.u;
  const double torque_err = (achieved.tail<3>() - demand.tail<3>()).norm();
  const double thrust_err = std::fabs(achieved[0] - demand[0]);
  EXPECT_LT(torque_err, 0.02);
  EXPECT_GT(thrust_err, 5.0);  // gave up several newtons of thrust
  EXPECT_GT(thrust_err / torque_err, 100.0);
  EXPECT_TRUE(r.any_active);
}

TEST(BoxQp, SmoothAllocationMatchesExactInInterior) {
  QuadParams p;
  Gains g;
  Eigen::Matrix4d B = allocation_matrix(p);
  Eigen::Matrix4d B_inv = B.inverse();
  // The softclamp bias decays as exp(-k d)/k with the distance d to the
  // nearest bound, so agreement at 1e-6 needs every rotor to sit at least
  // ~1.2 N inside the box.
  Rng rng(seed_stream(20260107, 0));
  int checked = 0;
  for (int k = 0; k < 200; ++k) {
    Eigen::Vector4d d(p.hover_thrust_total() + rng.uniform(-1.0, 1.0),
                      rng.uniform(-0.1, 0.1), rng.uniform(-0.1, 0.1),
                      rng.uniform(-0.02, 0.02));
    BoxQpResult exact = solve_box_wls(B, g.wc, d, p.u_min, p.u_max);
    if (exact.u.minCoeff() < p.u_min + 1.2 || exact.u.maxCoeff() > p.u_max - 1.2)
      continue;
    ++checked;
    Vec4<double> smooth = smooth_box_wls(B_inv, Vec4<double>(d), p.u_min, p.u_max);
    EXPECT_LE((smooth - exact.u).norm(), 1e-6);
  }
  EXPECT_GT(checked, 100);
}

TEST(BoxQp, SoftClampIsMonotoneAndBounded) {
  for (double x = -5.0; x <= 15.0; x += 0.1) {
    double y = softclamp(x, 0.0, 8.5, kSmoothAllocSharpness);
    EXPECT_GT(y, 0.0 - 0.08);
    EXPECT_LT(y, 8.5 + 0.08);
    double y2 = softclamp(x + 0.1, 0.0, 8.5, kSmoothAllocSharpness);
    EXPECT_GE(y2, y - 1e-12);  // monotone up to saturation round-off
  }
  // Deep interior: essentially the identity.
  EXPECT_NEAR(softclamp(4.0, 0.0, 8.5, kSmoothAllocSharpness), 4.0, 1e-9);
}

TEST(Controller, HoverStepIsEquilibrium) {
  QuadParams p;
  Gains g;
  QuadState<double> s;
  s.thrusts.setConstant(p.hover_thrust_per_rotor());
  ReferenceState ref;  // zero position, zero heading hover
  ControllerMemory<double> mem;
  ControlCommand<double> cmd =
      dfbc_step(p, g, s, ref, Vec3<double>(0.0, 0.0, 0.0), mem);
  EXPECT_EQ(cmd.flags, 0u);
  EXPECT_NEAR(cmd.total_thrust, p.hover_thrust_total(), 1e-12);
  EXPECT_NEAR(cmd.torque.norm(), 0.0, 1e-12);
  for (int i = 0; i < 4; ++i)
    EXPECT_NEAR(cmd.thrusts(i), p.hover_thrust_per_rotor(), 1e-9);
}

TEST(Controller, RegulatesOneMeterOffsetWithinThreeSeconds) {
  QuadParams p;
  Gains g;
  TrajectorySpec hover = make_hover();
  ReferenceStream stream(hover);
  Disturbance none;

  QuadState<double> s;
  s.x = Vec3<double>(1.0, 0.0, 0.0);
  s.thrusts.setConstant(p.hover_thrust_per_rotor());
  ControllerMemory<double> mem;

  const double dt = 0.01;
  for (int k = 0; k < 300; ++k) {
    ReferenceState ref = stream.sample(k * dt);
    ControlCommand<double> cmd = dfbc_step(p, g, s, ref, Vec3<double>(0.0, 0.0, 0.0), mem);
    s = rk4_step(p, s, cmd.thrusts, none, dt, true);
  }
  EXPECT_LT(s.x.norm(), 0.01) << "residual offset " << s.x.norm();
  EXPECT_LT(s.v.norm(), 0.05);
}

}  // namespace
}  // namespace ngtc
