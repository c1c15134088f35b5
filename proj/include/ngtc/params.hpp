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

#ifndef NGTC_PARAMS_HPP
#define NGTC_PARAMS_HPP

#include "ngtc/common.hpp"

namespace ngtc {

// Physical parameters of the simulated quadrotor.  Defaults describe a
// 0.72 kg racing-class airframe in an X configuration.
struct QuadParams {
  double mass = 0.72;                                        // kg
  Eigen::Vector3d inertia{2.5e-3, 2.1e-3, 4.3e-3};           // kg m^2, diagonal
  double arm_length = 0.14;                                  // m
  double arm_angle_deg = 56.0;                               // X half-angle
  double u_min = 0.0;                                        // N per rotor
  double u_max = 8.5;                                        // N per rotor
  double tau_mot = 0.03;                                     // s, first-order lag
  double kappa = 0.016;                                      // m, drag-torque ratio
  Eigen::Vector3d drag{0.30, 0.30, 0.15};                    // N s/m, body diag
  double g = 9.81;                                           // m/s^2

  double hover_thrust_total() const { return mass * g; }
  double hover_thrust_per_rotor() const { return mass * g / 4.0; }
};

// Controller gains.  The attitude loop splits the tilt gain (x/y) from the
// yaw gain (z); the allocation weights prioritise torque channels over the
// collective-thrust channel.
struct Gains {
  Eigen::Vector3d kx{18.0, 18.0, 18.0};     // position P
  Eigen::Vector3d kv{8.0, 8.0, 8.0};        // velocity D
  double kq_xy = 150.0;                     // tilt
  double kq_z = 3.0;                        // yaw
  Eigen::Vector3d komega{20.0, 20.0, 8.0};  // body-rate P
  Eigen::Vector4d wc{1e-3, 10.0, 10.0, 0.1};  // allocation weights (T, mx, my, mz)
};

// Thrust-to-wrench map for rotor order (front-left, back-left, back-right,
// front-right).  Row 0 is collective thrust; rows 1..3 are body torques.
inline Eigen::Matrix4d allocation_matrix(const QuadParams& p) {
  const double b = p.arm_angle_deg * kPi / 180.0;
  const double ls = p.arm_length * std::sin(b);
  const double lc = p.arm_length * std::cos(b);
  Eigen::Matrix4d B;
  B << 1.0, 1.0, 1.0, 1.0,         // T
      -ls, -ls, ls, ls,            // mu_x
      -lc, lc, lc, -lc,            // mu_y
      -p.kappa, p.kappa, -p.kappa, p.kappa;  // mu_z (alternating spin)
  return B;
}

}  // namespace ngtc

#endif  // NGTC_PARAMS_HPP
