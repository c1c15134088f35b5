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

#ifndef NGTC_CONTROLLER_HPP
#define NGTC_CONTROLLER_HPP

#include "ngtc/boxqp.hpp"
#include "ngtc/common.hpp"
#include "ngtc/dynamics.hpp"
#include "ngtc/params.hpp"
#include "ngtc/quaternion.hpp"
#include "ngtc/trajectory.hpp"

namespace ngtc {

// Diagnostic flags raised by the controller when a guarded degenerate branch
// is taken.  They never abort a run; they mark samples for analysis.
enum ControlFlag : uint32_t {
  kFlagThrustSingular = 1u << 0,   // |a_cmd + g e3| too small: held thrust axis
  kFlagYawGimbal = 1u << 1,        // thrust axis parallel to yaw reference
  kFlagTiltAmbiguous = 1u << 2,    // 180 deg attitude error: yaw split undefined
  kFlagFeedforwardOff = 1u << 3,   // thrust too small for rate feed-forward
  kFlagAllocDegraded = 1u << 4,    // allocation QP hit its iteration cap
};

// Last valid thrust direction / body-x direction, held across steps so the
// singular branches have something sane to fall back on.
template <typename T>
struct ControllerMemory {
  Vec3<T> z_des{T(0.0), T(0.0), T(1.0)};
  Vec3<T> x_b{T(1.0), T(0.0), T(0.0)};
};

template <typename T>
struct ThrustAttitude {
  T thrust{0.0};        // desired collective thrust (N)
  Quat<T> q;            // desired attitude (body-to-world)
  Mat3<T> R;            // same attitude as a matrix, columns x_B y_B z_B
  uint32_t flags = 0;
};

// Desired acceleration from the flatness reference plus proportional position
// and velocity feedback.
template <typename T>
inline Vec3<T> pd_acceleration(const Gains& gains, const Vec3<T>& x, const Vec3<T>& v,
                               const ReferenceState& ref) {
  Vec3<T> a;
  for (int i = 0; i < 3; ++i)
    a[i] = ref.a[i] + gains.kx[i] * (ref.x[i] - x[i]) + gains.kv[i] * (ref.v[i] - v[i]);
  return a;
}

// Map a commanded acceleration and heading to collective thrust and desired
// attitude.  The desired body z axis is the direction of the required
// specific force f = a_cmd + g e3; body x is built from the heading vector
// y_C = (-sin psi, cos psi, 0).  Near-singular configurations hold the last
// valid axes and raise a flag.
template <typename T>
inline ThrustAttitude<T> thrust_and_attitude(const QuadParams& p, const Vec3<T>& a_cmd,
                                             double psi, ControllerMemory<T>& mem) {
  using std::sqrt;
  ThrustAttitude<T> out;

  Vec3<T> f = a_cmd;
  f[2] = f[2] + p.g;
  const T f_norm = f.norm();
  out.thrust = p.mass * f_norm;

  Vec3<T> z_des;
  if (value_of(f_norm) < 0.1) {
    z_des = mem.z_des;  // free-fall-like demand: direction ill-defined
    out.flags |= kFlagThrustSingular;
  } else {
    z_des = f / f_norm;
    mem.z_des = z_des;
  }

  const double sp = std::sin(psi), cp = std::cos(psi);
  const Vec3<T> y_c{T(-sp), T(cp), T(0.0)};
  Vec3<T> x_b = y_c.cross(z_des);
  const T xb_norm = x_b.norm();
  if (value_of(xb_norm) < 1e-6) {
    // Thrust axis (anti-)parallel to the heading vector; keep the previous
    // body x projected back onto the plane normal to z_des.
    out.flags |= kFlagYawGimbal;
    x_b = mem.x_b - z_des * z_des.dot(mem.x_b);
    T n = x_b.norm();
    if (value_of(n) < 1e-6) {
      // Previous body x also degenerate; derive one from a fixed world axis.
      Vec3<T> seed{T(1.0), T(0.0), T(0.0)};
      if (std::abs(value_of(z_des[0])) > 0.9) seed = Vec3<T>{T(0.0), T(1.0), T(0.0)};
      x_b = seed - z_des * z_des.dot(seed);
      n = x_b.norm();
    }
    x_b = x_b / n;
  } else {
    x_b = x_b / xb_norm;
  }
  mem.x_b = x_b;

  const Vec3<T> y_b = z_des.cross(x_b);
  out.R.col(0) = x_b;
  out.R.col(1) = y_b;
  out.R.col(2) = z_des;
  out.q = quat_from_rotation_matrix(out.R);
  return out;
}

template <typename T>
struct RateFeedForward {
  Vec3<T> omega{T(0.0), T(0.0), T(0.0)};
  T thrust_rate{0.0};  // dT/dt implied by the jerk reference (logged only)
  uint32_t flags = 0;
};

// Differentially flat body-rate feed-forward: with f = T z_B / m constant in
// direction over an instant, m R^T j = (T w_y, -T w_x, dT), and the yaw rate
// contributes about the world z axis projected on body z.
template <typename T>
inline RateFeedForward<T> angular_velocity_reference(double mass, const Mat3<T>& R_des,
                                                     const T& thrust,
                                                     const Eigen::Vector3d& jerk,
                                                     double dpsi) {
  RateFeedForward<T> out;
  if (value_of(thrust) < 0.1) {
    out.flags |= kFlagFeedforwardOff;
    return out;
  }
  Vec3<T> h;
  for (int r = 0; r < 3; ++r)
    h[r] = mass * (R_des(0, r) * jerk[0] + R_des(1, r) * jerk[1] + R_des(2, r) * jerk[2]);
  out.omega[0] = -h[1] / thrust;
  out.omega[1] = h[0] / thrust;
  out.omega[2] = dpsi * R_des(2, 2);
  out.thrust_rate = h[2];
  return out;
}

// Tilt-prioritized attitude error.  The error quaternion is split into a
// reduced (tilt) rotation and a yaw rotation; the returned vector stacks
// twice the sign-canonicalized vector parts (radians for small errors, so
// x/y measure tilt and z measures yaw, each along body axes).
template <typename T>
inline Vec3<T> tilt_prioritized_error(const Quat<T>& q, const Quat<T>& q_des,
                                      uint32_t* flags = nullptr) {
  using std::sqrt;
  const Quat<T> qe = quat_mul(conjugate(q), q_des);
  const T den2 = qe.w * qe.w + qe.z * qe.z;
  Vec3<T> e{T(0.0), T(0.0), T(0.0)};
  if (value_of(den2) < 1e-12) {
    // 180 degree tilt: the yaw decomposition is undefined.  Report a pure
    // full-scale tilt about the (sign-canonicalized) error axis.
    if (flags) *flags |= kFlagTiltAmbiguous;
    T ax = qe.x, ay = qe.y;
    if (value_of(ax) < 0.0 || (value_of(ax) == 0.0 && value_of(ay) < 0.0)) {
      ax = -ax;
      ay = -ay;
    }
    const T n = sqrt(ax * ax + ay * ay);
    e[0] = 2.0 * ax / n;
    e[1] = 2.0 * ay / n;
    return e;
  }
  const T inv = 1.0 / sqrt(den2);
  const Quat<T> q_yaw{qe.w * inv, T(0.0), T(0.0), qe.z * inv};
  const Quat<T> q_red = quat_mul(qe, conjugate(q_yaw));
  const double s_red = value_of(q_red.w) >= 0.0 ? 1.0 : -1.0;
  const double s_yaw = value_of(qe.w) >= 0.0 ? 1.0 : -1.0;
  e[0] = 2.0 * s_red * q_red.x;
  e[1] = 2.0 * s_red * q_red.y;
  e[2] = 2.0 * s_yaw * q_yaw.z;
  return e;
}

// Attitude PD with gyroscopic compensation.  The attitude error commands an
// angular acceleration (per-axis k_q e + k_w (w_ref - w)), which keeps the
// attitude loop a well-damped second-order system under the rate gains:
// mu = J (K_q e + K_w (w_ref - w)) + w x (J w).
template <typename T>
inline Vec3<T> attitude_torque(const QuadParams& p, const Gains& gains,
                               const Vec3<T>& e_att, const Vec3<T>& omega_ref,
                               const Vec3<T>& omega) {
  const double kq[3] = {gains.kq_xy, gains.kq_xy, gains.kq_z};
  Vec3<T> jw{p.inertia[0] * omega[0], p.inertia[1] * omega[1], p.inertia[2] * omega[2]};
  Vec3<T> mu = omega.cross(jw);
  for (int i = 0; i < 3; ++i)
    mu[i] = mu[i] + p.inertia[i] * (kq[i] * e_att[i] +
                                    gains.komega[i] * (omega_ref[i] - omega[i]));
  return mu;
}

enum class AllocMode { kExactQp, kSmooth };

template <typename T>
struct ControlCommand {
  Vec4<T> thrusts{T(0.0), T(0.0), T(0.0), T(0.0)};  // per-rotor commands (N)
  T total_thrust{0.0};                              // collective demand (N)
  Vec3<T> torque{T(0.0), T(0.0), T(0.0)};           // body torque demand (N m)
  Vec3<T> omega_cmd{T(0.0), T(0.0), T(0.0)};
  Quat<T> q_des;
  T thrust_rate{0.0};
  uint32_t flags = 0;
  double kkt_residual = 0.0;  // populated by the exact allocator only
};

// One full control step of the geometric tracking controller.  `a_aug` is an
// additive acceleration command (zero for the baseline controller).  The
// exact allocator is only available for plain double states; differentiable
// rollouts always use the smooth allocation.
template <typename T>
inline ControlCommand<T> dfbc_step(const QuadParams& p, const Gains& gains,
                                   const QuadState<T>& state, const ReferenceState& ref,
                                   const Vec3<T>& a_aug, ControllerMemory<T>& mem,
                                   AllocMode mode = AllocMode::kExactQp) {
  ControlCommand<T> cmd;

  Vec3<T> a_cmd = pd_acceleration(gains, state.x, state.v, ref);
  for (int i = 0; i < 3; ++i) a_cmd[i] = a_cmd[i] + a_aug[i];

  ThrustAttitude<T> ta = thrust_and_attitude(p, a_cmd, ref.psi, mem);
  cmd.flags |= ta.flags;
  cmd.total_thrust = ta.thrust;
  cmd.q_des = ta.q;

  RateFeedForward<T> ff = angular_velocity_reference(p.mass, ta.R, ta.thrust, ref.j, ref.dpsi);
  cmd.flags |= ff.flags;
  cmd.thrust_rate = ff.thrust_rate;

  cmd.omega_cmd = ff.omega;

  const Vec3<T> e_att = tilt_prioritized_error(state.q, ta.q, &cmd.flags);
  cmd.torque = attitude_torque(p, gains, e_att, cmd.omega_cmd, state.omega);

  const Eigen::Matrix4d B = allocation_matrix(p);
  Vec4<T> demand{cmd.total_thrust, cmd.torque[0], cmd.torque[1], cmd.torque[2]};

  if constexpr (std::is_same_v<T, double>) {
    if (mode == AllocMode::kExactQp) {
      Eigen::Vector4d d{demand[0], demand[1], demand[2], demand[3]};
      const BoxQpResult qp = solve_box_wls(B, gains.wc, d, p.u_min, p.u_max);
      cmd.thrusts = qp.u;
      cmd.kkt_residual = qp.kkt_residual;
      if (qp.degraded) cmd.flags |= kFlagAllocDegraded;
      return cmd;
    }
  }
  const Eigen::Matrix4d B_inv = B.inverse();
  cmd.thrusts = smooth_box_wls(B_inv, demand, p.u_min, p.u_max);
  return cmd;
}

}  // namespace ngtc

#endif  // NGTC_CONTROLLER_HPP
