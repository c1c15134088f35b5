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

#include "ngtc/training.hpp"

#include <gtest/gtest.h>

namespace ngtc {
namespace {

RenConfig tiny_ren() {
  RenConfig cfg;
  cfg.n = 4;
  cfg.m = kRenInputSize;
  cfg.q = 8;
  cfg.p = 3;
  return cfg;
}

TEST(Training, StageLossIsZeroOnTheReferenceAndQuadraticOffIt) {
  QuadParams p;
  LossWeights lw;
  const double uh = p.hover_thrust_per_rotor();

  ReferenceState ref;  // hover at the origin
  ControllerMemory<double> mem;
  const FlatReference flat = flat_attitude_reference(p, ref, mem);

  QuadState<double> s;
  s.thrusts.setConstant(uh);
  Vec4<double> u;
  u.setConstant(uh);
  EXPECT_EQ(stage_loss(lw, uh, s, ref, flat, u), 0.0);

  QuadState<double> sx = s;
  sx.x[0] += 0.1;
  EXPECT_NEAR(stage_loss(lw, uh, sx, ref, flat, u), lw.qx[0] * 0.01, 1e-12);

  QuadState<double> sv = s;
  sv.v[1] -= 0.2;
  EXPECT_NEAR(stage_loss(lw, uh, sv, ref, flat, u), lw.qv[1] * 0.04, 1e-12);

  QuadState<double> sw = s;
  sw.omega[2] = 0.3;
  EXPECT_NEAR(stage_loss(lw, uh, sw, ref, flat, u), lw.qomega[2] * 0.09, 1e-12);

  QuadState<double> sq = s;
  sq.q = quat_from_yaw(0.1);
  EXPECT_NEAR(stage_loss(lw, uh, sq, ref, flat, u), lw.qq[2] * 0.01, 1e-12);

  Vec4<double> u2 = u;
  u2[3] += 0.5;
  EXPECT_NEAR(stage_loss(lw, uh, s, ref, flat, u2), lw.qu[3] * 0.25, 1e-12);
}

TEST(Training, InitialStateSitsOnTheReference) {
  QuadParams p;
  const TrajectorySpec traj = make_horizontal_loop(4.0, 6.0);
  ReferenceStream stream(traj);
  const ReferenceState ref = stream.sample(0.0);
  const QuadState<double> s = initial_state_on_reference(p, ref);

  EXPECT_EQ(s.x, ref.x);
  EXPECT_EQ(s.v, ref.v);

  // Rotor thrusts reproduce the flatness-consistent collective thrust and the
  // gyroscopic torque of the reference body rate.
  ControllerMemory<double> mem;
  const FlatReference flat = flat_attitude_reference(p, ref, mem);
  const Eigen::Vector4d wrench =
      allocation_matrix(p) * Eigen::Vector4d(s.thrusts[0], s.thrusts[1], s.thrusts[2],
                                             s.thrusts[3]);
  const Eigen::Vector3d jw(p.inertia[0] * s.omega[0], p.inertia[1] * s.omega[1],
                           p.inertia[2] * s.omega[2]);
  const Eigen::Vector3d mu = s.omega.cross(jw);
  EXPECT_NEAR(wrench[0], flat.thrust, 1e-9);
  EXPECT_NEAR(wrench[1], mu[0], 1e-12);
  EXPECT_NEAR(wrench[2], mu[1], 1e-12);
  EXPECT_NEAR(wrench[3], mu[2], 1e-12);

  // Attitude comes straight from the flatness map.
  EXPECT_EQ(s.q.w, flat.q.w);
  EXPECT_EQ(s.omega, flat.omega);
}

TEST(Training, UndisturbedHoverRolloutHasNegligibleLoss) {
  QuadParams p;
  Gains g;
  LossWeights lw;
  TrainConfig cfg;
  cfg.augment = false;
  cfg.episode_s = 2.0;
  const RolloutOutcome<double> out = run_training_rollout<double>(
      p, g, lw, make_hover(), EpisodeDisturbance{}, cfg, nullptr, nullptr);
  EXPECT_FALSE(out.unstable);
  EXPECT_EQ(out.steps_run, 200);
  EXPECT_LT(out.loss, 1e-6);
  EXPECT_LT(out.rmse, 1e-6);
}

TEST(Training, RolloutFlagsInstabilityAndPenalizesIt) {
  QuadParams p;
  Gains g;
  LossWeights lw;
  TrainConfig cfg;
  cfg.augment = false;
  cfg.episode_s = 2.0;
  EpisodeDisturbance d;
  // A huge torque makes the gyroscopic term w x (J w) blow up super-linearly
  // until values overflow; the rollout must flag that and charge the penalty
  // for the unflown remainder instead of throwing.
  d.torque = Eigen::Vector3d(0.0, 1e9, 0.0);
  d.noise_frac = 0.0;
  const RolloutOutcome<double> out =
      run_training_rollout<double>(p, g, lw, make_hover(), d, cfg, nullptr, nullptr);
  EXPECT_TRUE(out.unstable);
  EXPECT_LT(out.steps_run, 200);
  EXPECT_GT(out.loss, cfg.instability_penalty * 0.25);
}

TEST(Training, RolloutLossMatchesBetweenPlainAndTapedScalars) {
  QuadParams p;
  Gains g;
  LossWeights lw;
  TrainConfig cfg;
  cfg.episode_s = 0.25;
  const RenConfig rcfg = tiny_ren();
  const Eigen::VectorXd theta = random_theta(rcfg, 11);
  const RenWeights W = materialize(rcfg, theta);
  const EpisodeDisturbance dist = draw_disturbance(7, cfg.force_max, cfg.torque_max, 0.2);
  const TrajectorySpec traj = make_horizontal_loop(3.0, 3.0);

  const RolloutOutcome<double> plain =
      run_training_rollout<double>(p, g, lw, traj, dist, cfg, &W, nullptr);

  ad::Tape tape;
  ad::Tape::Scope scope(tape);
  RenGrads grads;
  grads.resize_zero(rcfg);
  const RolloutOutcome<ad::Var> taped =
      run_training_rollout<ad::Var>(p, g, lw, traj, dist, cfg, &W, &grads);

  // The two scalar types drive different Eigen kernels whose summation
  // orders differ in the last bits, so agreement is to rounding level.
  EXPECT_FALSE(plain.unstable);
  EXPECT_NEAR(value_of(taped.loss), plain.loss, 1e-6 * plain.loss);
  EXPECT_NEAR(taped.rmse, plain.rmse, 1e-6 * std::max(1.0, plain.rmse));
}

TEST(Training, BackpropThroughTimeMatchesFiniteDifferences) {
  QuadParams p;
  Gains g;
  LossWeights lw;
  TrainConfig cfg;
  cfg.episode_s = 0.06;  // six closed-loop steps
  const RenConfig rcfg = tiny_ren();
  const Eigen::VectorXd theta = random_theta(rcfg, 3);

  std::vector<BatchItem> batch(1);
  batch[0].traj = make_horizontal_loop(3.0, 3.0);
  batch[0].disturbance_seed = 21;

  const GradientResult gr = gradient(rcfg, cfg, p, g, lw, theta, batch);
  ASSERT_EQ(gr.unstable_rollouts, 0);

  auto loss_at = [&](const Eigen::VectorXd& th) {
    const RenWeights W = materialize(rcfg, th);
    const EpisodeDisturbance dist =
        draw_disturbance(batch[0].disturbance_seed, cfg.force_max, cfg.torque_max,
                         cfg.noise_frac);
    return run_training_rollout<double>(p, g, lw, batch[0].traj, dist, cfg, &W, nullptr)
        .loss;
  };
  EXPECT_NEAR(gr.loss, loss_at(theta), 1e-12);

  // Probe a fixed spread of parameter coordinates covering every block.  The
  // step keeps the subtractive-cancellation noise (machine eps times the loss
  // over h) well under the comparison floor.
  Rng pick(12345);
  const double h = 1e-5;
  double worst = 0.0;
  for (int probe = 0; probe < 20; ++probe) {
    const int k = static_cast<int>(pick.uniform() * static_cast<double>(theta.size()));
    Eigen::VectorXd tp = theta, tm = theta;
    tp[k] += h;
    tm[k] -= h;
    const double fd = (loss_at(tp) - loss_at(tm)) / (2.0 * h);
    const double rel = std::fabs(fd - gr.grad[k]) / std::max(1e-3, std::fabs(fd));
    worst = std::max(worst, rel);
  }
  EXPECT_LT(worst, 1e-5);
}

TEST(Training, AdamFirstStepMatchesHandComputation) {
  Adam opt(1, 0.1, 0.9, 0.999, 1e-8);
  Eigen::VectorXd theta(1), grad(1);
  theta[0] = 1.0;
  grad[0] = 2.0;
  opt.step(theta, grad);
  // m=0.2, v=0.004, mhat=2, vhat=4: update = 0.1 * 2 / (2 + 1e-8).
  EXPECT_NEAR(theta[0], 1.0 - 0.1 * 2.0 / (2.0 + 1e-8), 1e-16);
}

TEST(Training, TrainingIsDeterministicInTheMasterSeed) {
  QuadParams p;
  Gains g;
  LossWeights lw;
  const RenConfig rcfg = tiny_ren();
  TrainConfig cfg;
  cfg.iters = 3;
  cfg.batch = 2;
  cfg.episode_s = 0.2;

  Dataset data;
  DatasetItem a;
  a.shape.amp = Eigen::Vector3d(2.0, 1.0, 0.3);
  a.shape.omega = Eigen::Vector3d(1.0, 0.8, 0.5);
  a.shape.phase = Eigen::Vector3d(0.0, 1.0, 2.0);
  a.shape.duration = 4.0;
  DatasetItem b;
  b.shape.amp = Eigen::Vector3d(1.0, 2.0, 0.2);
  b.shape.omega = Eigen::Vector3d(0.6, 1.2, 0.9);
  b.shape.phase = Eigen::Vector3d(1.5, 0.0, 0.7);
  b.shape.duration = 4.0;
  data.items = {a, b};

  const TrainResult r1 = train(rcfg, cfg, p, g, lw, data, 42);
  const TrainResult r2 = train(rcfg, cfg, p, g, lw, data, 42);
  ASSERT_EQ(r1.theta.size(), r2.theta.size());
  for (int i = 0; i < r1.theta.size(); ++i) EXPECT_EQ(r1.theta[i], r2.theta[i]);
  ASSERT_EQ(r1.records.size(), r2.records.size());
  for (size_t i = 0; i < r1.records.size(); ++i) {
    EXPECT_EQ(r1.records[i].loss, r2.records[i].loss);
    EXPECT_EQ(r1.records[i].grad_norm, r2.records[i].grad_norm);
  }

  const TrainResult r3 = train(rcfg, cfg, p, g, lw, data, 43);
  bool differs = false;
  for (int i = 0; i < r1.theta.size() && !differs; ++i)
    differs = r1.theta[i] != r3.theta[i];
  EXPECT_TRUE(differs);
}

TEST(Training, TrainRejectsBadArguments) {
  QuadParams p;
  Gains g;
  LossWeights lw;
  const RenConfig rcfg = tiny_ren();
  TrainConfig cfg;
  Dataset empty;
  EXPECT_THROW((void)train(rcfg, cfg, p, g, lw, empty, 1), std::invalid_argument);

  Dataset one;
  one.items.resize(1);
  TrainConfig off = cfg;
  off.augment = false;
  EXPECT_THROW((void)train(rcfg, off, p, g, lw, one, 1), std::invalid_argument);
}

}  // namespace
}  // namespace ngtc
