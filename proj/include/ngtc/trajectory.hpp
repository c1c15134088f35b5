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

#ifndef NGTC_TRAJECTORY_HPP
#define NGTC_TRAJECTORY_HPP

#include "ngtc/common.hpp"

namespace ngtc {

// Per-axis sinusoid: x_i(t) = center_i + amp_i * sin(omega_i t + phase_i).
// All named benchmark shapes (loops, figure-eight) are phase-locked special
// cases, so one analytic evaluator serves every trajectory kind.
struct LissajousSpec {
  Eigen::Vector3d amp = Eigen::Vector3d::Zero();
  Eigen::Vector3d omega = Eigen::Vector3d::Zero();
  Eigen::Vector3d phase = Eigen::Vector3d::Zero();
  double duration = 4.0;  // s
};

enum class TrajectoryKind {
  kHover,
  kLissajous,
  kHorizontalLoop,
  kVerticalLoop,
  kLemniscate,
  kCircle,
};

// How the heading reference is produced: following the horizontal velocity
// direction (with a hold below the speed threshold), or pinned to a constant.
// Maneuvers whose horizontal velocity reverses (e.g. a vertical loop) use a
// fixed heading; a velocity-following heading would demand 180-degree yaw
// flips mid-flight.
enum class HeadingMode { kVelocity, kFixed };

struct TrajectorySpec {
  TrajectoryKind kind = TrajectoryKind::kHover;
  LissajousSpec shape;
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  std::string name = "hover";
  HeadingMode heading = HeadingMode::kVelocity;
  double fixed_psi = 0.0;
};

// Flat reference: position derivatives through snap plus heading and heading
// rate.  Everything downstream of the differential-flatness map consumes
// exactly these fields.
struct ReferenceState {
  Eigen::Vector3d x = Eigen::Vector3d::Zero();
  Eigen::Vector3d v = Eigen::Vector3d::Zero();
  Eigen::Vector3d a = Eigen::Vector3d::Zero();
  Eigen::Vector3d j = Eigen::Vector3d::Zero();
  Eigen::Vector3d s = Eigen::Vector3d::Zero();
  double psi = 0.0;
  double dpsi = 0.0;
};

// Analytic flat outputs (no heading).  Sampling beyond the end of the
// trajectory clamps to the final sample.
inline ReferenceState flat_outputs(const TrajectorySpec& spec, double t) {
  if (t > spec.shape.duration) t = spec.shape.duration;
  if (t < 0.0) t = 0.0;
  ReferenceState r;
  for (int i = 0; i < 3; ++i) {
    const double A = spec.shape.amp[i];
    const double w = spec.shape.omega[i];
    const double ph = w * t + spec.shape.phase[i];
    const double sn = std::sin(ph), cn = std::cos(ph);
    r.x[i] = spec.center[i] + A * sn;
    r.v[i] = A * w * cn;
    r.a[i] = -A * w * w * sn;
    r.j[i] = -A * w * w * w * cn;
    r.s[i] = A * w * w * w * w * sn;
  }
  return r;
}

// Heading follows the horizontal velocity direction while the horizontal
// speed exceeds a threshold; below it the previous heading is held with zero
// heading rate (hover keeps whatever heading it had).
inline constexpr double kHeadingSpeedThreshold = 0.3;  // m/s

inline void heading_policy(const Eigen::Vector3d& v, const Eigen::Vector3d& a,
                           double prev_psi, double& psi, double& dpsi) {
  const double s2 = v.x() * v.x() + v.y() * v.y();
  if (s2 > kHeadingSpeedThreshold * kHeadingSpeedThreshold) {
    psi = std::atan2(v.y(), v.x());
    dpsi = (v.x() * a.y() - v.y() * a.x()) / s2;
  } else {
    psi = prev_psi;
    dpsi = 0.0;
  }
}

// Sequential reference sampler.  The held-heading fallback makes the heading
// a function of history, so it is anchored to a fixed 1 ms grid: the heading
// at time t is obtained by iterating the policy over all grid points up to t.
// Streams advance monotonically and are cheap to copy, which is how
// lookahead windows are built without rescanning from zero.
class ReferenceStream {
 public:
  static constexpr double kGridDt = 1e-3;

  explicit ReferenceStream(const TrajectorySpec& spec) : spec_(&spec) {
    ReferenceState r0 = flat_outputs(spec, 0.0);
    double psi, dpsi;
    heading_policy(r0.v, r0.a, 0.0, psi, dpsi);
    psi_ = psi;
    grid_ = 0;
  }

  ReferenceState sample(double t) {
    if (spec_->heading == HeadingMode::kFixed) {
      ReferenceState r = flat_outputs(*spec_, t);
      r.psi = spec_->fixed_psi;
      r.dpsi = 0.0;
      return r;
    }
    const int64_t g = static_cast<int64_t>(std::floor(t / kGridDt + 1e-9));
    if (g < grid_) {
      // Restart: callers that need out-of-order access copy the stream instead,
      // but keep this correct for ad-hoc use.
      *this = ReferenceStream(*spec_);
    }
    while (grid_ < g) {
      ++grid_;
      ReferenceState r = flat_outputs(*spec_, static_cast<double>(grid_) * kGridDt);
      double psi, dpsi;
      heading_policy(r.v, r.a, psi_, psi, dpsi);
      psi_ = psi;
    }
    ReferenceState r = flat_outputs(*spec_, t);
    heading_policy(r.v, r.a, psi_, r.psi, r.dpsi);
    return r;
  }

 private:
  const TrajectorySpec* spec_;
  int64_t grid_ = 0;
  double psi_ = 0.0;
};

// Number of future reference samples fed to the learned compensator and the
// current reference they are expressed against.
inline constexpr int kLookaheadSteps = 12;

struct ReferenceWindow {
  ReferenceState now;
  std::array<ReferenceState, kLookaheadSteps> future;
};

inline ReferenceWindow build_window(ReferenceStream& stream, double t, double dt) {
  ReferenceWindow w;
  w.now = stream.sample(t);  // advances the caller's stream to t
  ReferenceStream look = stream;  // cheap copy walks ahead for the preview
  for (int k = 0; k < kLookaheadSteps; ++k)
    w.future[k] = look.sample(t + (k + 1) * dt);
  return w;
}

// ---------------------------------------------------------------------------
// Named trajectory constructors.
// ---------------------------------------------------------------------------

inline TrajectorySpec make_hover(const Eigen::Vector3d& at = Eigen::Vector3d::Zero(),
                                 double duration = 8.0) {
  TrajectorySpec s;
  s.kind = TrajectoryKind::kHover;
  s.center = at;
  s.shape.duration = duration;
  s.name = "hover";
  return s;
}

inline TrajectorySpec make_lissajous(const LissajousSpec& shape,
                                     const Eigen::Vector3d& center = Eigen::Vector3d::Zero()) {
  TrajectorySpec s;
  s.kind = TrajectoryKind::kLissajous;
  s.shape = shape;
  s.center = center;
  s.name = "lissajous";
  return s;
}

// Planar circle of radius R at constant speed v, counter-clockwise, starting
// at angle zero on the +x axis.
inline TrajectorySpec make_horizontal_loop(double radius, double speed,
                                           double duration = 8.0) {
  TrajectorySpec s;
  s.kind = TrajectoryKind::kHorizontalLoop;
  const double w = speed / radius;
  s.shape.amp = Eigen::Vector3d(radius, radius, 0.0);
  s.shape.omega = Eigen::Vector3d(w, w, 0.0);
  s.shape.phase = Eigen::Vector3d(kPi / 2.0, 0.0, 0.0);  // (R cos, R sin, 0)
  s.shape.duration = duration;
  s.name = "hloop";
  return s;
}

// Circle in the x-z plane (through inverted flight at the top), starting at
// the bottom, flown as a pitch loop with the heading pinned forward.  The
// attitude construction degenerates only when the thrust axis aligns with
// the body-y heading vector; a thrust axis confined to the x-z plane stays
// clear of that for the whole lap, whereas a velocity-following heading
// would demand 180-degree yaw flips each time the forward speed reverses.
inline TrajectorySpec make_vertical_loop(double radius, double speed,
                                         double duration = 8.0) {
  TrajectorySpec s;
  s.kind = TrajectoryKind::kVerticalLoop;
  const double w = speed / radius;
  s.shape.amp = Eigen::Vector3d(radius, 0.0, radius);
  s.shape.omega = Eigen::Vector3d(w, 0.0, w);
  s.shape.phase = Eigen::Vector3d(0.0, 0.0, -kPi / 2.0);  // (R sin, 0, -R cos)
  s.shape.duration = duration;
  s.name = "vloop";
  s.heading = HeadingMode::kFixed;
  s.fixed_psi = 0.0;
  return s;
}

// Figure-eight (x = a sin wt, y = (a/2) sin 2wt); peak speed ~ sqrt(2) a w at
// the crossing, so w is chosen from the requested peak speed.
inline TrajectorySpec make_lemniscate(double scale, double peak_speed,
                                      double duration = 8.0) {
  TrajectorySpec s;
  s.kind = TrajectoryKind::kLemniscate;
  const double w = peak_speed / (std::sqrt(2.0) * scale);
  s.shape.amp = Eigen::Vector3d(scale, scale / 2.0, 0.0);
  s.shape.omega = Eigen::Vector3d(w, 2.0 * w, 0.0);
  s.shape.phase = Eigen::Vector3d::Zero();
  s.shape.duration = duration;
  s.name = "lemniscate";
  return s;
}

// Circle parameterised by peak speed and centripetal acceleration:
// R = v^2/a, angular rate a/v.
inline TrajectorySpec make_circle(double v_max, double a_max, double duration = 8.0) {
  const double radius = v_max * v_max / a_max;
  TrajectorySpec s = make_horizontal_loop(radius, v_max, duration);
  s.kind = TrajectoryKind::kCircle;
  s.name = "circle";
  return s;
}

}  // namespace ngtc

#endif  // NGTC_TRAJECTORY_HPP
