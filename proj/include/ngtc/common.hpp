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

#ifndef NGTC_COMMON_HPP
#define NGTC_COMMON_HPP

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace ngtc {

template <typename T>
using Vec3 = Eigen::Matrix<T, 3, 1>;
template <typename T>
using Vec4 = Eigen::Matrix<T, 4, 1>;
template <typename T>
using Mat3 = Eigen::Matrix<T, 3, 3>;
template <typename T>
using Mat4 = Eigen::Matrix<T, 4, 4>;

inline constexpr double kPi = 3.14159265358979323846;

// Scalar value extraction. Generic code branches on value_of(x) so the same
// template works for plain doubles and for taped autodiff scalars (which add
// their own overload in their namespace, found by ADL).
inline double value_of(double x) { return x; }

inline bool finite_value(double x) { return std::isfinite(x); }

// Wrap an angle to (-pi, pi].
inline double wrap_angle(double a) {
  a = std::fmod(a + kPi, 2.0 * kPi);
  if (a <= 0.0) a += 2.0 * kPi;
  return a - kPi;
}

// ---------------------------------------------------------------------------
// Deterministic random numbers.
//
// All stochastic pieces of the workbench (dataset sampling, disturbance
// draws, weight initialisation, probe rollouts) run off this generator so a
// seed fully determines every result, independent of the standard library's
// distribution implementations.
// ---------------------------------------------------------------------------

inline uint64_t splitmix64(uint64_t& state) {
  state += 0x9e3779b97f4a7c15ull;
  uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

// Stateless mix of a master seed with a stream index; used to derive
// independent per-item seeds (per spec draw, per episode, per iteration).
inline uint64_t seed_stream(uint64_t master, uint64_t stream) {
  uint64_t s = master ^ (0x9e3779b97f4a7c15ull * (stream + 1));
  uint64_t a = splitmix64(s);
  uint64_t b = splitmix64(s);
  return a ^ (b << 1);
}

class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {
    // Burn a few outputs so small seeds decorrelate.
    for (int i = 0; i < 4; ++i) (void)splitmix64(state_);
  }

  uint64_t next_u64() { return splitmix64(state_); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller (pair cached).
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 2.0 * kPi * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  Eigen::Vector3d normal3() { return Eigen::Vector3d(normal(), normal(), normal()); }

  // Uniform direction on the unit sphere.
  Eigen::Vector3d unit_vector() {
    while (true) {
      Eigen::Vector3d v = normal3();
      double n = v.norm();
      if (n > 1e-12) return v / n;
    }
  }

 private:
  uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// ---------------------------------------------------------------------------
// Content hashing (FNV-1a, 64 bit) for checkpoint and manifest integrity.
// ---------------------------------------------------------------------------

class Fnv1a {
 public:
  void update(const void* data, size_t n) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
      hash_ ^= p[i];
      hash_ *= 0x100000001b3ull;
    }
  }
  void update_u64(uint64_t v) { update(&v, sizeof(v)); }
  void update_f64(double v) { update(&v, sizeof(v)); }
  uint64_t digest() const { return hash_; }

 private:
  uint64_t hash_ = 0xcbf29ce484222325ull;
};

// Round-trip exact formatting for doubles in text artifacts (manifests,
// tables): 17 significant digits reproduce the bit pattern on parse.
inline std::string format_exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

}  // namespace ngtc

#endif  // NGTC_COMMON_HPP
