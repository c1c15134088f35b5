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

#include "ngtc/trajectory.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "gtest/gtest.h"
#include "ngtc/dataset.hpp"

namespace ngtc {
namespace {

TEST(Trajectory, DerivativesMatchFiniteDifferences) {
  LissajousSpec shape;
  shape.amp = Eigen::Vector3d(5.0, 2.5, 1.0);
  shape.omega = Eigen::Vector3d(3.0, 2.0, 1.5);
  shape.phase = Eigen::Vector3d(0.3, 1.1, 2.7);
  shape.duration = 4.0;
  TrajectorySpec spec = make_lissajous(shape, Eigen::Vector3d(1.0, -2.0, 3.0));

  const double h = 1e-5;
  for (double t : {0.5, 1.0, 1.7, 2.9, 3.5}) {
    ReferenceState m = flat_outputs(spec, t);
    ReferenceState lo = flat_outputs(spec, t - h);
    ReferenceState hi = flat_outputs(spec, t + h);
    for (int i = 0; i < 3; ++i) {
      const double v_fd = (hi.x[i] - lo.x[i]) / (2.0 * h);
      const double a_fd = (hi.v[i] - lo.v[i]) / (2.0 * h);
      const double j_fd = (hi.a[i] - lo.a[i]) / (2.0 * h);
      const double s_fd = (hi.j[i] - lo.j[i]) / (2.0 * h);
      EXPECT_NEAR(m.v[i], v_fd, 1e-5 * (1.0 + std::fabs(v_fd)));
      EXPECT_NEAR(m.a[i], a_fd, 1e-5 * (1.0 + std::fabs(a_fd)));
      EXPECT_NEAR(m.j[i], j_fd, 1e-4 * (1.0 + std::fabs(j_fd)));
      EXPECT_NEAR(m.s[i], s_fd, 1e-4 * (1.0 + std::fabs(s_fd)));
    }
  }
}

TEST(Trajectory, SamplingClampsToDuration) {
  TrajectorySpec spec = make_horizontal_loop(5.0, 8.0, 4.0);
  ReferenceState end = flat_outputs(spec, 4.0);
  ReferenceState past = flat_outputs(spec, 100.0);
  EXPECT_EQ(end.x, past.x);
  EXPECT_EQ(end.v, past.v);
  ReferenceState before = flat_outputs(spec, -1.0);
  ReferenceState start = flat_outputs(spec, 0.0);
  EXPECT_EQ(before.x, start.x);
}

TEST(Trajectory, HoverReferenceIsStationary) {
  TrajectorySpec spec = make_hover(Eigen::Vector3d(1.0, 2.0, 3.0));
  ReferenceStream stream(spec);
  for (double t : {0.0, 0.5, 3.0, 7.9}) {
    ReferenceState r = stream.sample(t);
    EXPECT_EQ(r.x, Eigen::Vector3d(1.0, 2.0, 3.0));
    EXPECT_EQ(r.v, Eigen::Vector3d::Zero());
    EXPECT_EQ(r.a, Eigen::Vector3d::Zero());
    EXPECT_DOUBLE_EQ(r.psi, 0.0);
    EXPECT_DOUBLE_EQ(r.dpsi, 0.0);
  }
}

TEST(Trajectory, HeadingFollowsVelocityOnLoop) {
  TrajectorySpec spec = make_horizontal_loop(5.0, 8.0);
  ReferenceStream stream(spec);
  for (double t : {0.0, 0.5, 1.0, 2.0, 3.125}) {
    ReferenceState r = stream.sample(t);
    ReferenceState flat = flat_outputs(spec, t);
    EXPECT_NEAR(r.psi, std::atan2(flat.v.y(), flat.v.x()), 1e-12);
    // Constant-speed circle: heading rate equals the angular rate v/R.
    EXPECT_NEAR(r.dpsi, 8.0 / 5.0, 1e-9);
  }
}

TEST(Trajectory, HeadingHoldsThroughSlowCrossing) {
  LissajousSpec shape;
  shape.amp = Eigen::Vector3d(2.0, 0.0, 0.0);
  shape.omega = Eigen::Vector3d(1.0, 0.0, 0.0);
  shape.duration = 4.0;
  TrajectorySpec spec = make_lissajous(shape);

  ReferenceStream stream(spec);
  // v_x = 2 cos t: fast forward at t=1.4, nearly stopped at t=1.6 (heading
  // held), fast backward at t=1.8.
  EXPECT_NEAR(stream.sample(1.4).psi, 0.0, 1e-12);
  ReferenceState held = stream.sample(1.6);
  EXPECT_NEAR(held.psi, 0.0, 1e-12);
  EXPECT_DOUBLE_EQ(held.dpsi, 0.0);
  EXPECT_NEAR(std::fabs(stream.sample(1.8).psi), kPi, 1e-12);
}

TEST(Trajectory, StreamReinitializesOnTimeRegression) {
  TrajectorySpec spec = make_horizontal_loop(5.0, 8.0);
  ReferenceStream a(spec);
  a.sample(3.0);
  ReferenceState replay = a.sample(1.25);  // going backwards restarts the walk
  ReferenceStream b(spec);
  ReferenceState fresh = b.sample(1.25);
  EXPECT_EQ(replay.x, fresh.x);
  EXPECT_DOUBLE_EQ(replay.psi, fresh.psi);
}

TEST(Trajectory, WindowMatchesFreshStream) {
  TrajectorySpec spec = make_horizontal_loop(5.0, 8.0);
  const double dt = 0.01;
  ReferenceStream stream(spec);
  ReferenceWindow w1 = build_window(stream, 0.0, dt);
  ReferenceWindow w2 = build_window(stream, dt, dt);

  ReferenceStream fresh(spec);
  EXPECT_EQ(w1.now.x, flat_outputs(spec, 0.0).x);
  for (int k = 0; k < kLookaheadSteps; ++k) {
    ReferenceState expect = ReferenceStream(spec).sample((k + 1) * dt);
    EXPECT_EQ(w1.future[k].x, expect.x);
    EXPECT_DOUBLE_EQ(w1.future[k].psi, expect.psi);
  }
  // The second window continues the same history: its `now` equals the first
  // window's first preview sample.
  EXPECT_EQ(w2.now.x, w1.future[0].x);
  EXPECT_DOUBLE_EQ(w2.now.psi, w1.future[0].psi);
}

TEST(Trajectory, NamedShapesHaveExpectedGeometry) {
  // Horizontal loop: starts on the +x axis, constant speed v, centripetal
  // acceleration v^2/R pointing at the center.
  TrajectorySpec hl = make_horizontal_loop(5.0, 8.0);
  ReferenceState r0 = flat_outputs(hl, 0.0);
  EXPECT_NEAR(r0.x.x(), 5.0, 1e-12);
  EXPECT_NEAR(r0.x.y(), 0.0, 1e-12);
  for (double t : {0.0, 0.7, 1.9}) {
    ReferenceState r = flat_outputs(hl, t);
    EXPECT_NEAR(r.v.norm(), 8.0, 1e-9);
    EXPECT_NEAR(r.a.norm(), 8.0 * 8.0 / 5.0, 1e-9);
    EXPECT_NEAR(r.v.dot(r.a), 0.0, 1e-9);
  }

  // Vertical loop: starts at the bottom of a circle in the y-z plane and is
  // flown as a roll loop with the heading pinned forward.
  TrajectorySpec vl = make_vertical_loop(3.0, 6.5);
  ReferenceState v0 = flat_outputs(vl, 0.0);
  EXPECT_NEAR(v0.x.z(), -3.0, 1e-12);
  EXPECT_NEAR(v0.x.x(), 0.0, 1e-12);
  EXPECT_NEAR(v0.x.y(), 0.0, 1e-12);
  EXPECT_NEAR(flat_outputs(vl, 1.3).v.norm(), 6.5, 1e-9);
  EXPECT_EQ(vl.heading, HeadingMode::kFixed);
  ReferenceStream vstream(vl);
  for (double t : {0.0, 0.7, 1.45, 2.2}) {
    const ReferenceState r = vstream.sample(t);
    EXPECT_EQ(r.psi, 0.0);
    EXPECT_EQ(r.dpsi, 0.0);
  }

  // Figure-eight: requested peak speed occurs at the center crossing (t=0).
  TrajectorySpec lem = make_lemniscate(5.0, 9.0);
  EXPECT_NEAR(flat_outputs(lem, 0.0).v.norm(), 9.0, 1e-9);

  // Speed/acceleration-parameterized circle: R = v^2/a.
  TrajectorySpec circ = make_circle(15.0, 45.0);
  EXPECT_NEAR(circ.shape.amp.x(), 5.0, 1e-12);
  for (double t : {0.3, 1.1}) {
    ReferenceState r = flat_outputs(circ, t);
    EXPECT_NEAR(r.v.norm(), 15.0, 1e-9);
    EXPECT_NEAR(r.a.norm(), 45.0, 1e-9);
  }
}

TEST(Dataset, HoverIsComfortablyFeasible) {
  QuadParams p;
  ClassifyResult c = feasibility_classify(p, make_hover());
  EXPECT_TRUE(c.feasible);
  // Hover demands exactly the gravity-balancing rotor thrust.
  EXPECT_NEAR(c.peak_ratio, p.hover_thrust_per_rotor() / p.u_max, 1e-9);
  EXPECT_EQ(c.flags, 0u);
}

TEST(Dataset, GentleLoopFeasibleExtremeLissajousNot) {
  QuadParams p;
  EXPECT_TRUE(feasibility_classify(p, make_horizontal_loop(5.0, 8.0)).feasible);
  // The pitch-loop geometry keeps the vertical loop feasible even though it
  // passes through inverted flight; the thrust demand peaks at the bottom at
  // m(v^2/R + g).
  const ClassifyResult vc = feasibility_classify(p, make_vertical_loop(3.0, 6.5));
  EXPECT_TRUE(vc.feasible);
  const double bottom = p.mass * (6.5 * 6.5 / 3.0 + p.g) / 4.0;
  EXPECT_NEAR(vc.peak_ratio, bottom / p.u_max, 0.05);

  LissajousSpec wild;
  wild.amp = Eigen::Vector3d(20.0, 20.0, 3.0);
  wild.omega = Eigen::Vector3d(5.0, 5.0, 5.0);
  wild.duration = 4.0;
  ClassifyResult c = feasibility_classify(p, make_lissajous(wild));
  EXPECT_FALSE(c.feasible);
  EXPECT_GT(c.peak_ratio, 2.0);
}

TEST(Dataset, FreeFallCrossingIsInfeasibleDespiteInBoxRotorDemands) {
  QuadParams p;
  // Pure vertical oscillation whose peak downward acceleration slightly
  // exceeds g: the specific force a + g e3 sweeps through zero, so the
  // thrust-axis direction is momentarily undefined.  Rotor demands stay well
  // inside the box (m(g + A w^2)/4 ~ 3.6 N), so infeasibility must come from
  // the singularity flag, not the actuator limits.
  LissajousSpec dive;
  dive.amp = Eigen::Vector3d(0.0, 0.0, 3.0);
  dive.omega = Eigen::Vector3d(0.0, 0.0, 1.83);
  dive.duration = 4.0;
  ClassifyResult c = feasibility_classify(p, make_lissajous(dive));
  EXPECT_FALSE(c.feasible);
  EXPECT_TRUE(c.flags & kFlagThrustSingular);
  EXPECT_LT(c.peak_ratio, 1.0);
}

TEST(Dataset, PeakRatioGrowsWithAmplitude) {
  QuadParams p;
  LissajousSpec small;
  small.amp = Eigen::Vector3d(1.0, 1.0, 0.2);
  small.omega = Eigen::Vector3d(1.0, 1.0, 1.0);
  small.duration = 4.0;
  LissajousSpec big = small;
  big.amp *= 2.0;
  const double r_small = feasibility_classify(p, make_lissajous(small)).peak_ratio;
  const double r_big = feasibility_classify(p, make_lissajous(big)).peak_ratio;
  EXPECT_GT(r_big, r_small);
}

TEST(Dataset, SamplingIsDeterministicInMasterSeed) {
  QuadParams p;
  SampleRanges ranges;
  Dataset a = sample_dataset(p, ranges, 4, 42);
  Dataset b = sample_dataset(p, ranges, 4, 42);
  ASSERT_EQ(a.items.size(), 4u);
  ASSERT_EQ(b.items.size(), 4u);
  EXPECT_EQ(a.drawn, b.drawn);
  for (size_t i = 0; i < a.items.size(); ++i) {
    EXPECT_EQ(a.items[i].seed, b.items[i].seed);
    EXPECT_EQ(a.items[i].shape.amp, b.items[i].shape.amp);
    EXPECT_EQ(a.items[i].shape.omega, b.items[i].shape.omega);
    EXPECT_EQ(a.items[i].shape.phase, b.items[i].shape.phase);
  }
  Dataset c = sample_dataset(p, ranges, 4, 43);
  EXPECT_NE(a.items[0].seed, c.items[0].seed);
}

TEST(Dataset, EveryAcceptedItemIsFeasible) {
  QuadParams p;
  SampleRanges ranges;
  Dataset ds = sample_dataset(p, ranges, 6, 7);
  for (const DatasetItem& it : ds.items) {
    ClassifyResult c = feasibility_classify(p, make_lissajous(it.shape), ds.margin);
    EXPECT_TRUE(c.feasible);
    EXPECT_DOUBLE_EQ(c.peak_ratio, it.peak_ratio);
  }
}

TEST(Dataset, ManifestRoundTripIsExact) {
  QuadParams p;
  SampleRanges ranges;
  Dataset ds = sample_dataset(p, ranges, 4, 42);

  std::stringstream ss;
  write_manifest(ss, ds);
  Dataset back = read_manifest(ss);

  EXPECT_EQ(back.master_seed, ds.master_seed);
  EXPECT_EQ(back.drawn, ds.drawn);
  EXPECT_DOUBLE_EQ(back.margin, ds.margin);
  ASSERT_EQ(back.items.size(), ds.items.size());
  for (size_t i = 0; i < ds.items.size(); ++i) {
    EXPECT_EQ(back.items[i].seed, ds.items[i].seed);
    // %.17g printing makes the text round trip bit-exact.
    EXPECT_EQ(back.items[i].shape.amp, ds.items[i].shape.amp);
    EXPECT_EQ(back.items[i].shape.omega, ds.items[i].shape.omega);
    EXPECT_EQ(back.items[i].shape.phase, ds.items[i].shape.phase);
    EXPECT_EQ(back.items[i].shape.duration, ds.items[i].shape.duration);
    EXPECT_EQ(back.items[i].peak_ratio, ds.items[i].peak_ratio);
  }
}

TEST(Dataset, ManifestRejectsCorruptInput) {
  std::stringstream bad_header("# wrong\ncount 0\n");
  EXPECT_THROW(read_manifest(bad_header), std::runtime_error);

  std::stringstream bad_count("# ngtc-dataset v1\ncount 2\n");
  EXPECT_THROW(read_manifest(bad_count), std::runtime_error);

  std::stringstream bad_field(
      "# ngtc-dataset v1\ncount 1\nitem seed=1 bogus=3\n");
  EXPECT_THROW(read_manifest(bad_field), std::runtime_error);
}

}  // namespace
}  // namespace ngtc
