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

#ifndef NGTC_BOXQP_HPP
#define NGTC_BOXQP_HPP

#include "ngtc/common.hpp"

namespace ngtc {

// Exact solver for  min_u (B u - d)^T W (B u - d)  s.t.  lo <= u_i <= hi,
// with B 4x4 invertible and W = diag(w) > 0.  Primal active-set method: start
// from the clamped unconstrained solution, alternately solve the free-set
// equality problem and release bound constraints whose multiplier has the
// wrong sign.  The problem is strictly convex, so this terminates; a 50
// iteration cap guards against numerical cycling, falling back to the clamped
// unconstrained solution with `degraded` set.
struct BoxQpResult {
  Eigen::Vector4d u = Eigen::Vector4d::Zero();
  double kkt_residual = 0.0;  // max KKT violation (gradient / multiplier sign)
  int iterations = 0;
  bool degraded = false;
  bool any_active = false;  // some component ended on a bound
};

inline BoxQpResult solve_box_wls(const Eigen::Matrix4d& B, const Eigen::Vector4d& w_diag,
                                 const Eigen::Vector4d& demand, double lo, double hi) {
  const Eigen::Matrix4d H = B.transpose() * w_diag.asDiagonal() * B;
  const Eigen::Vector4d c = B.transpose() * (w_diag.asDiagonal() * demand);

  BoxQpResult out;
  Eigen::Vector4d u = B.partialPivLu().solve(demand);
  // -1: at lower bound, +1: at upper bound, 0: free.
  std::array<int, 4> at{0, 0, 0, 0};
  for (int i = 0; i < 4; ++i) {
    if (u[i] <= lo) { u[i] = lo; at[i] = -1; }
    else if (u[i] >= hi) { u[i] = hi; at[i] = +1; }
  }

  const double scale = std::max({1.0, c.cwiseAbs().maxCoeff(), H.cwiseAbs().maxCoeff()});
  const double tol = 1e-12 * scale;
  constexpr int kMaxIter = 50;

  for (out.iterations = 0; out.iterations < kMaxIter; ++out.iterations) {
    // Solve the equality-constrained subproblem on the free set.
    int nf = 0;
    std::array<int, 4> free_idx{};
    for (int i = 0; i < 4; ++i)
      if (at[i] == 0) free_idx[nf++] = i;

    Eigen::Vector4d target = u;
    if (nf > 0) {
      Eigen::MatrixXd Hff(nf, nf);
      Eigen::VectorXd rhs(nf);
      for (int r = 0; r < nf; ++r) {
        rhs[r] = c[free_idx[r]];
        for (int i = 0; i < 4; ++i)
          if (at[i] != 0) rhs[r] -= H(free_idx[r], i) * u[i];
        for (int col = 0; col < nf; ++col) Hff(r, col) = H(free_idx[r], free_idx[col]);
      }
      Eigen::VectorXd uf = Hff.llt().solve(rhs);
      for (int r = 0; r < nf; ++r) target[free_idx[r]] = uf[r];
    }

    const Eigen::Vector4d step = target - u;
    if (step.cwiseAbs().maxCoeff() > tol) {
      // Move toward the subproblem optimum, stopping at the first bound hit.
      double alpha = 1.0;
      int blocking = -1, block_side = 0;
      for (int r = 0; r < nf; ++r) {
        const int i = free_idx[r];
        if (step[i] > 0 && u[i] + step[i] > hi) {
          const double a = (hi - u[i]) / step[i];
          if (a < alpha) { alpha = a; blocking = i; block_side = +1; }
        } else if (step[i] < 0 && u[i] + step[i] < lo) {
          const double a = (lo - u[i]) / step[i];
          if (a < alpha) { alpha = a; blocking = i; block_side = -1; }
        }
      }
      u += alpha * step;
      if (blocking >= 0) {
        u[blocking] = (block_side > 0) ? hi : lo;
        at[blocking] = block_side;
      }
      continue;
    }

    // Free set is optimal; check multiplier signs on the active set.
    const Eigen::Vector4d grad = H * u - c;
    int release = -1;
    double worst = tol;
    for (int i = 0; i < 4; ++i) {
      // At the lower bound the gradient must be >= 0, at the upper <= 0.
      const double viol = (at[i] == -1) ? -grad[i] : (at[i] == +1) ? grad[i] : 0.0;
      if (viol > worst) { worst = viol; release = i; }
    }
    if (release < 0) {
      double kkt = 0.0;
      for (int i = 0; i < 4; ++i) {
        if (at[i] == 0) kkt = std::max(kkt, std::abs(grad[i]));
        else if (at[i] == -1) kkt = std::max(kkt, std::max(0.0, -grad[i]));
        else kkt = std::max(kkt, std::max(0.0, grad[i]));
        out.any_active = out.any_active || at[i] != 0;
      }
      out.u = u;
      out.kkt_residual = kkt;
      return out;
    }
    at[release] = 0;
  }

  // Cycled: fall back to the clamped unconstrained solution.
  out.degraded = true;
  Eigen::Vector4d fb = B.partialPivLu().solve(demand);
  for (int i = 0; i < 4; ++i) fb[i] = std::clamp(fb[i], lo, hi);
  out.u = fb;
  const Eigen::Vector4d grad = H * fb - c;
  out.kkt_residual = grad.cwiseAbs().maxCoeff();
  out.any_active = true;
  return out;
}

// ---------------------------------------------------------------------------
// Smooth surrogate used when the allocation must be differentiable.
// ---------------------------------------------------------------------------

// Numerically stable softplus with sharpness k: (1/k) log(1 + exp(k t)).
template <typename T>
inline T softplus(const T& t, double k) {
  using std::abs;
  using std::exp;
  using std::log1p;
  using std::max;
  const T kt = k * t;
  return max(kt, T(0.0)) / k + log1p(exp(-abs(kt))) / k;
}

// Smooth two-sided clamp onto [lo, hi]; exact up to exp(-k * distance) tails
// and strictly increasing everywhere, so gradients never vanish identically.
template <typename T>
inline T softclamp(const T& x, double lo, double hi, double k) {
  return lo + softplus(x - lo, k) - softplus(x - hi, k);
}

// Default sharpness of the smooth allocation (1/N): steep enough that at the
// hover operating point the deviation from a hard clamp is ~1e-9 N.
inline constexpr double kSmoothAllocSharpness = 10.0;

// Differentiable allocation: unconstrained weighted solution (exact since B
// is square and invertible) followed by a per-rotor softclamp.  Interior
// demands reproduce the exact QP up to exponentially small tails.
template <typename T>
inline Vec4<T> smooth_box_wls(const Eigen::Matrix4d& B_inv, const Vec4<T>& demand,
                              double lo, double hi,
                              double k = kSmoothAllocSharpness) {
  Vec4<T> u = B_inv * demand;
  for (int i = 0; i < 4; ++i) u[i] = softclamp(u[i], lo, hi, k);
  return u;
}

}  // namespace ngtc

#endif  // NGTC_BOXQP_HPP
