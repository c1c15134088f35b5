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

#ifndef NGTC_DYNAMICS_HPP
#define NGTC_DYNAMICS_HPP

#include "ngtc/params.hpp"
#include "ngtc/quaternion.hpp"

namespace ngtc {

// Rigid-body state with first-order motor states.  Templated on the scalar
// so the same model integrates in plain double for evaluation and on the
// autodiff tape for training.
template <typename T>
struct QuadState {
  Vec3<T> x = Vec3<T>::Zero();        // position, world (m)
  Vec3<T> v = Vec3<T>::Zero();        // velocity, world (m/s)
  Quat<T> q;                          // body-to-world attitude
  Vec3<T> omega = Vec3<T>::Zero();    // body rates (rad/s)
  Vec4<T> thrusts = Vec4<T>::Zero();  // per-rotor thrust states (N)
};

template <typename T>
struct StateDerivative {
  Vec3<T> dx, dv;
  Quat<T> dq;
  Vec3<T> domega;
  Vec4<T> dthrusts;
};

// Constant external wrench plus per-step additive noise, world-frame force
// and body-frame torque.  Kept in plain double: disturbances are inputs,
// never differentiated.
struct Disturbance {
  Eigen::Vector3d force = Eigen::Vector3d::Zero();   // N, world
  Eigen::Vector3d torque = Eigen::Vector3d::Zero();  // N m, body
};

// Collective thrust and body torque generated by the rotor set.
template <typename T>
void wrench_from_thrusts(const QuadParams& p, const Vec4<T>& u, T& thrust,
                         Vec3<T>& torque) {
  const double b = p.arm_angle_deg * kPi / 180.0;
  const double ls = p.arm_length * std::sin(b);
  const double lc = p.arm_length * std::cos(b);
  thrust = u(0) + u(1) + u(2) + u(3);
  torque(0) = ls * (-u(0) - u(1) + u(2) + u(3));
  torque(1) = lc * (-u(0) + u(1) + u(2) - u(3));
  torque(2) = p.kappa * (-u(0) + u(1) - u(2) + u(3));
}

// Linear body drag: f = -R D R^T v with D = diag(drag).  Equivalent to
// damping the body-frame velocity component-wise and rotating back.
template <typename T>
Vec3<T> drag_force(const QuadParams& p, const Quat<T>& q, const Vec3<T>& v) {
  Vec3<T> v_body = rotate_inverse(q, v);
  Vec3<T> f_body(-p.drag.x() * v_body.x(), -p.drag.y() * v_body.y(),
                 -p.drag.z() * v_body.z());
  return rotate(q, f_body);
}

namespace detail {
template <typename T>
void validate_state(const QuadState<T>& s, const Vec4<T>& cmd) {
  double qn = std::sqrt(value_of(s.q.squared_norm()));
  if (std::fabs(qn - 1.0) > 1e-3)
    throw std::invalid_argument("quad state: quaternion norm " + std::to_string(qn) +
                                " deviates from 1 by more than 1e-3");
  bool finite = finite_value(s.x.x()) && finite_value(s.x.y()) && finite_value(s.x.z()) &&
                finite_value(s.v.x()) && finite_value(s.v.y()) && finite_value(s.v.z()) &&
                finite_value(s.q.w) && finite_value(s.q.x) && finite_value(s.q.y) &&
                finite_value(s.q.z) && finite_value(s.omega.x()) &&
                finite_value(s.omega.y()) && finite_value(s.omega.z());
  for (int i = 0; i < 4; ++i)
    finite = finite && finite_value(s.thrusts(i)) && finite_value(cmd(i));
  if (!finite) throw std::invalid_argument("quad state: non-finite state or command");
}
}  // namespace detail

namespace detail {
// Derivative evaluation without input validation; used for the interior
// Runge-Kutta stages, whose states drift slightly off the unit-quaternion
// manifold by construction.
template <typename T>
StateDerivative<T> derivative_impl(const QuadParams& p, const QuadState<T>& s,
                                   const Vec4<T>& cmd, const Disturbance& dist,
                                   bool with_drag) {
  T thrust;
  Vec3<T> torque;
  wrench_from_thrusts(p, s.thrusts, thrust, torque);

  StateDerivative<T> d;
  d.dx = s.v;

  Vec3<T> z_body = rotate(s.q, Vec3<T>(T(0.0), T(0.0), T(1.0)));
  Vec3<T> f = thrust * z_body;
  if (with_drag) f += drag_force(p, s.q, s.v);
  f += dist.force.template cast<T>();
  d.dv = f / p.mass;
  d.dv.z() -= p.g;

  d.dq = quat_derivative(s.q, s.omega);

  Vec3<T> j_omega(p.inertia.x() * s.omega.x(), p.inertia.y() * s.omega.y(),
                  p.inertia.z() * s.omega.z());
  Vec3<T> m = torque + dist.torque.template cast<T>() - s.omega.cross(j_omega);
  d.domega = Vec3<T>(m.x() / p.inertia.x(), m.y() / p.inertia.y(), m.z() / p.inertia.z());

  d.dthrusts = (cmd - s.thrusts) / p.tau_mot;
  return d;
}
}  // namespace detail

// Continuous-time derivative of the full state.
//
//   xdot     = v
//   vdot     = (T z_B + f_drag + f_ext) / m - g z_W
//   qdot     = 0.5 q (x) (0, omega)
//   omegadot = J^-1 (mu + tau_ext - omega x J omega)
//   udot_i   = (cmd_i - u_i) / tau_mot
template <typename T>
StateDerivative<T> continuous_derivative(const QuadParams& p, const QuadState<T>& s,
                                         const Vec4<T>& cmd, const Disturbance& dist,
                                         bool with_drag) {
  detail::validate_state(s, cmd);
  return detail::derivative_impl(p, s, cmd, dist, with_drag);
}

namespace detail {
template <typename T>
QuadState<T> axpy(const QuadState<T>& s, double h, const StateDerivative<T>& d) {
  QuadState<T> r;
  r.x = s.x + h * d.dx;
  r.v = s.v + h * d.dv;
  r.q = Quat<T>(s.q.w + h * d.dq.w, s.q.x + h * d.dq.x, s.q.y + h * d.dq.y,
                s.q.z + h * d.dq.z);
  r.omega = s.omega + h * d.domega;
  r.thrusts = s.thrusts + h * d.dthrusts;
  return r;
}
}  // namespace detail

// One classical Runge-Kutta 4 step.  The quaternion is renormalised and the
// motor states are clamped to their physical box after the update.  Only the
// entry state is validated; interior stage states live slightly off the unit
// sphere during fast rotations, which is expected and harmless.
template <typename T>
QuadState<T> rk4_step(const QuadParams& p, const QuadState<T>& s, const Vec4<T>& cmd,
                      const Disturbance& dist, double dt, bool with_drag) {
  detail::validate_state(s, cmd);
  const StateDerivative<T> k1 = detail::derivative_impl(p, s, cmd, dist, with_drag);
  const StateDerivative<T> k2 =
      detail::derivative_impl(p, detail::axpy(s, 0.5 * dt, k1), cmd, dist, with_drag);
  const StateDerivative<T> k3 =
      detail::derivative_impl(p, detail::axpy(s, 0.5 * dt, k2), cmd, dist, with_drag);
  const StateDerivative<T> k4 =
      detail::derivative_impl(p, detail::axpy(s, dt, k3), cmd, dist, with_drag);

  QuadState<T> r;
  const double h = dt / 6.0;
  r.x = s.x + h * (k1.dx + 2.0 * k2.dx + 2.0 * k3.dx + k4.dx);
  r.v = s.v + h * (k1.dv + 2.0 * k2.dv + 2.0 * k3.dv + k4.dv);
  r.q = Quat<T>(s.q.w + h * (k1.dq.w + 2.0 * k2.dq.w + 2.0 * k3.dq.w + k4.dq.w),
                s.q.x + h * (k1.dq.x + 2.0 * k2.dq.x + 2.0 * k3.dq.x + k4.dq.x),
                s.q.y + h * (k1.dq.y + 2.0 * k2.dq.y + 2.0 * k3.dq.y + k4.dq.y),
                s.q.z + h * (k1.dq.z + 2.0 * k2.dq.z + 2.0 * k3.dq.z + k4.dq.z));
  r.q = r.q.normalized();
  r.omega = s.omega + h * (k1.domega + 2.0 * k2.domega + 2.0 * k3.domega + k4.domega);
  r.thrusts = s.thrusts + h * (k1.dthrusts + 2.0 * k2.dthrusts + 2.0 * k3.dthrusts +
                               k4.dthrusts);
  for (int i = 0; i < 4; ++i) {
    if (value_of(r.thrusts(i)) < p.u_min)
      r.thrusts(i) = T(p.u_min);
    else if (value_of(r.thrusts(i)) > p.u_max)
      r.thrusts(i) = T(p.u_max);
  }
  return r;
}

}  // namespace ngtc

#endif  // NGTC_DYNAMICS_HPP
