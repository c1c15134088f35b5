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

#ifndef NGTC_QUATERNION_HPP
#define NGTC_QUATERNION_HPP

#include "ngtc/common.hpp"

namespace ngtc {

// Unit quaternion (w, x, y, z), Hamilton convention, scalar first.
// q maps body-frame vectors into the world frame: v_W = R(q) v_B.
template <typename T>
struct Quat {
  T w{1.0}, x{0.0}, y{0.0}, z{0.0};

  Quat() = default;
  Quat(T w_, T x_, T y_, T z_) : w(w_), x(x_), y(y_), z(z_) {}

  static Quat identity() { return Quat(); }

  T squared_norm() const { return w * w + x * x + y * y + z * z; }

  Quat conjugate() const { return Quat(w, -x, -y, -z); }

  Quat normalized() const {
    using std::sqrt;
    T n = sqrt(squared_norm());
    return Quat(w / n, x / n, y / n, z / n);
  }

  Vec3<T> vec() const { return Vec3<T>(x, y, z); }
};

template <typename T>
Quat<T> conjugate(const Quat<T>& q) {
  return q.conjugate();
}

template <typename T>
Quat<T> quat_mul(const Quat<T>& a, const Quat<T>& b) {
  // Each vector row groups (scalar*vector pair) before (cross-term pair) so
  // that when a == conjugate(b) both pairs cancel exactly in evaluation
  // order, making the vector part of conj(q) (x) q identically zero.
  return Quat<T>(a.w * b.w - a.x * b.x - a.y * b.y - a.z * b.z,
                 a.w * b.x + a.x * b.w + a.y * b.z - a.z * b.y,
                 a.w * b.y + a.y * b.w + a.z * b.x - a.x * b.z,
                 a.w * b.z + a.z * b.w + a.x * b.y - a.y * b.x);
}

template <typename T>
Mat3<T> rotation_matrix(const Quat<T>& q) {
  const T ww = q.w * q.w, xx = q.x * q.x, yy = q.y * q.y, zz = q.z * q.z;
  const T wx = q.w * q.x, wy = q.w * q.y, wz = q.w * q.z;
  const T xy = q.x * q.y, xz = q.x * q.z, yz = q.y * q.z;
  Mat3<T> r;
  r(0, 0) = ww + xx - yy - zz;
  r(0, 1) = 2.0 * (xy - wz);
  r(0, 2) = 2.0 * (xz + wy);
  r(1, 0) = 2.0 * (xy + wz);
  r(1, 1) = ww - xx + yy - zz;
  r(1, 2) = 2.0 * (yz - wx);
  r(2, 0) = 2.0 * (xz - wy);
  r(2, 1) = 2.0 * (yz + wx);
  r(2, 2) = ww - xx - yy + zz;
  return r;
}

template <typename T>
Vec3<T> rotate(const Quat<T>& q, const Vec3<T>& v) {
  // v' = v + 2 w (u x v) + 2 u x (u x v), u = vector part.
  Vec3<T> u = q.vec();
  Vec3<T> uv = u.cross(v);
  return v + 2.0 * (q.w * uv + u.cross(uv));
}

template <typename T>
Vec3<T> rotate_inverse(const Quat<T>& q, const Vec3<T>& v) {
  return rotate(q.conjugate(), v);
}

// Quaternion from a (special orthogonal) rotation matrix, scalar part >= 0.
// Shepperd's method: branch on the largest diagonal combination for
// numerical stability; each branch stays differentiable.
template <typename T>
Quat<T> quat_from_rotation_matrix(const Mat3<T>& r) {
  using std::sqrt;
  const double t = value_of(r(0, 0)) + value_of(r(1, 1)) + value_of(r(2, 2));
  Quat<T> q;
  if (t > value_of(r(0, 0)) && t > value_of(r(1, 1)) && t > value_of(r(2, 2))) {
    T s = sqrt(1.0 + r(0, 0) + r(1, 1) + r(2, 2)) * 2.0;
    q = Quat<T>(0.25 * s, (r(2, 1) - r(1, 2)) / s, (r(0, 2) - r(2, 0)) / s,
                (r(1, 0) - r(0, 1)) / s);
  } else if (value_of(r(0, 0)) >= value_of(r(1, 1)) &&
             value_of(r(0, 0)) >= value_of(r(2, 2))) {
    T s = sqrt(1.0 + r(0, 0) - r(1, 1) - r(2, 2)) * 2.0;
    q = Quat<T>((r(2, 1) - r(1, 2)) / s, 0.25 * s, (r(0, 1) + r(1, 0)) / s,
                (r(0, 2) + r(2, 0)) / s);
  } else if (value_of(r(1, 1)) >= value_of(r(2, 2))) {
    T s = sqrt(1.0 - r(0, 0) + r(1, 1) - r(2, 2)) * 2.0;
    q = Quat<T>((r(0, 2) - r(2, 0)) / s, (r(0, 1) + r(1, 0)) / s, 0.25 * s,
                (r(1, 2) + r(2, 1)) / s);
  } else {
    T s = sqrt(1.0 - r(0, 0) - r(1, 1) + r(2, 2)) * 2.0;
    q = Quat<T>((r(1, 0) - r(0, 1)) / s, (r(0, 2) + r(2, 0)) / s,
                (r(1, 2) + r(2, 1)) / s, 0.25 * s);
  }
  if (value_of(q.w) < 0.0) q = Quat<T>(-q.w, -q.x, -q.y, -q.z);
  return q;
}

// Rotation vector (axis times angle, radians) of a unit quaternion, using the
// short arc (angle <= pi).  Stable for small angles via the atan2 form.
template <typename T>
Vec3<T> rotation_vector(const Quat<T>& q_in) {
  using std::atan2;
  using std::sqrt;
  Quat<T> q = q_in;
  if (value_of(q.w) < 0.0) q = Quat<T>(-q.w, -q.x, -q.y, -q.z);
  T s2 = q.x * q.x + q.y * q.y + q.z * q.z;
  if (value_of(s2) < 1e-16) {
    // angle/sin(angle/2) -> 2/w as the vector part vanishes.
    return Vec3<T>(2.0 * q.x / q.w, 2.0 * q.y / q.w, 2.0 * q.z / q.w);
  }
  T s = sqrt(s2);
  T angle = 2.0 * atan2(s, q.w);
  T k = angle / s;
  return Vec3<T>(k * q.x, k * q.y, k * q.z);
}

// Body-rate kinematics: qdot = 0.5 * q (x) (0, omega_B).
template <typename T>
Quat<T> quat_derivative(const Quat<T>& q, const Vec3<T>& omega) {
  Quat<T> w(T(0.0), omega.x(), omega.y(), omega.z());
  Quat<T> d = quat_mul(q, w);
  return Quat<T>(0.5 * d.w, 0.5 * d.x, 0.5 * d.y, 0.5 * d.z);
}

template <typename T>
Quat<T> quat_from_yaw(T psi) {
  using std::cos;
  using std::sin;
  return Quat<T>(cos(psi * 0.5), T(0.0), T(0.0), sin(psi * 0.5));
}

}  // namespace ngtc

#endif  // NGTC_QUATERNION_HPP
