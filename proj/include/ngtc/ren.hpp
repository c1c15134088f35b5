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

#ifndef NGTC_REN_HPP
#define NGTC_REN_HPP

#include <cstring>
#include <fstream>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "ngtc/autodiff.hpp"
#include "ngtc/common.hpp"

// Recurrent equilibrium network with a built-in contraction guarantee.
//
// Explicit form (one step, state x, input u, output y):
//   v = C1 x + D11 w + D12 u + b_v,   w = tanh(v)   (D11 strictly lower
//                                                    triangular: solvable in
//                                                    one forward pass)
//   x+ = A x + B1 w + B2 u + b_x
//   y  = C2 x + D21 w + D22 u + b_y
//
// Contraction with rate alpha is certified by the linear matrix inequality
//
//   G = [ alpha^2 P   -C1i^T          F^T        ]
//       [ -C1i        2L - D11i-D11i^T  B1i^T    ]  >= eps I,   P > 0,
//       [ F           B1i             E + E^T - P ]             L diag > 0,
//
// where F = E A, B1i = E B1, C1i = L C1, D11i = L D11 are the implicit-form
// matrices and E + E^T - P <= E P^-1 E^T closes the standard Schur argument
// for the incremental tanh sector bound (slope in [0,1]).
//
// Rather than projecting onto that set, the trainable vector theta maps onto
// it surjectively ("direct parameterization"): H = X^T X + eps I is carved
// into the blocks of G, which makes G = H >= eps I hold for every theta by
// construction.  Input/output maps and biases do not enter the certificate
// and are trained directly.

namespace ngtc {

struct RenConfig {
  int n = 32;   // state size
  int m = 96;   // input size
  int q = 256;  // hidden (equilibrium) layer size
  int p = 3;    // output size
  double alpha = 0.95;  // certified contraction rate
  double eps = 1e-4;    // LMI margin
  double gamma = 0.0;   // >0: additionally certify an output Lipschitz bound

  int implicit_size() const { return 2 * n + q; }
};

// Offsets of the trainable blocks inside the flat parameter vector.
struct RenLayout {
  int s = 0;
  int x = 0, y1 = 0, b2 = 0, d12 = 0, c2 = 0, d21 = 0, d22 = 0, bx = 0, bv = 0, by = 0;
  int total = 0;
};

inline RenLayout ren_layout(const RenConfig& c) {
  RenLayout l;
  l.s = c.implicit_size();
  int o = 0;
  l.x = o; o += l.s * l.s;
  l.y1 = o; o += c.n * c.n;
  l.b2 = o; o += c.n * c.m;
  l.d12 = o; o += c.q * c.m;
  l.c2 = o; o += c.p * c.n;
  l.d21 = o; o += c.p * c.q;
  l.d22 = o; o += c.p * c.m;
  l.bx = o; o += c.n;
  l.bv = o; o += c.q;
  l.by = o; o += c.p;
  l.total = o;
  return l;
}

struct RenWeights {
  Eigen::MatrixXd A, B1, B2, C1, D11, D12, C2, D21, D22;
  Eigen::VectorXd bx, bv, by;
  // Certificate data produced alongside the explicit weights.
  Eigen::MatrixXd P, E;
  Eigen::VectorXd lambda;
  double alpha = 0.95, eps = 1e-4, gamma = 0.0;
  double output_scale = 1.0;  // bounded-gain variant: factor folded into C2/D21/D22
  double gain_bound = 0.0;    // certified input-output gain (0 when gamma == 0)
};

namespace detail {

inline double spectral_norm(const Eigen::MatrixXd& M) {
  // sigma_max via the eigenvalues of the smaller Gram matrix.
  const Eigen::MatrixXd G = (M.rows() <= M.cols()) ? Eigen::MatrixXd(M * M.transpose())
                                                   : Eigen::MatrixXd(M.transpose() * M);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G, Eigen::EigenvaluesOnly);
  return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

// Certified incremental-gain bound from input to output, obtained from the
// contraction storage function: with Psi the (state, hidden) dissipation
// block, m = lambda_min(Psi) > 0, and the input coupling terms T2u / Tuu,
//   sum ||(dx, dw)||^2 <= (2c/m) sum ||du||^2,  c = ||Tuu|| + 2 ||T2u||^2 / m,
// so gain <= ||[C2 D21]|| sqrt(2c/m) + sigma_max(D22).
inline double certified_gain_bound(const RenWeights& W) {
  const int n = static_cast<int>(W.A.rows());
  const int q = static_cast<int>(W.C1.rows());
  const Eigen::MatrixXd PA = W.P * W.A;
  const Eigen::MatrixXd PB1 = W.P * W.B1;
  const Eigen::MatrixXd LC1 = W.lambda.asDiagonal() * W.C1;
  const Eigen::MatrixXd LD11 = W.lambda.asDiagonal() * W.D11;

  Eigen::MatrixXd Psi(n + q, n + q);
  Psi.topLeftCorner(n, n) = W.alpha * W.alpha * W.P - W.A.transpose() * PA;
  Psi.topRightCorner(n, q) = -W.A.transpose() * PB1 - LC1.transpose();
  Psi.bottomLeftCorner(q, n) = Psi.topRightCorner(n, q).transpose();
  Psi.bottomRightCorner(q, q) = 2.0 * Eigen::MatrixXd(W.lambda.asDiagonal()) - LD11 -
                                LD11.transpose() - W.B1.transpose() * PB1;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Psi, Eigen::EigenvaluesOnly);
  const double margin = std::max(es.eigenvalues().minCoeff(), 1e-12);

  Eigen::MatrixXd T2u(n + q, W.B2.cols());
  T2u.topRows(n) = W.A.transpose() * (W.P * W.B2);
  T2u.bottomRows(q) = W.B1.transpose() * (W.P * W.B2) + W.lambda.asDiagonal() * W.D12;
  const double tuu = spectral_norm(W.B2.transpose() * (W.P * W.B2));
  const double t2u = spectral_norm(T2u);
  const double c = tuu + 2.0 * t2u * t2u / margin;

  Eigen::MatrixXd CD(W.C2.rows(), n + q);
  CD.leftCols(n) = W.C2;
  CD.rightCols(q) = W.D21;
  return spectral_norm(CD) * std::sqrt(2.0 * c / margin) + spectral_norm(W.D22);
}

}  // namespace detail

// Map the unconstrained parameter vector onto explicit weights whose
// contraction certificate holds by construction.
inline RenWeights materialize(const RenConfig& cfg, const Eigen::VectorXd& theta) {
  const RenLayout l = ren_layout(cfg);
  if (theta.size() != l.total)
    throw std::invalid_argument("materialize: theta size mismatch");
  const int n = cfg.n, m = cfg.m, q = cfg.q, p = cfg.p, s = l.s;

  using CMap = Eigen::Map<const Eigen::MatrixXd>;
  const CMap X(theta.data() + l.x, s, s);
  const CMap Y1(theta.data() + l.y1, n, n);

  Eigen::MatrixXd H = X.transpose() * X;
  H.diagonal().array() += cfg.eps;

  RenWeights W;
  W.alpha = cfg.alpha;
  W.eps = cfg.eps;
  W.gamma = cfg.gamma;

  W.P = H.topLeftCorner(n, n) / (cfg.alpha * cfg.alpha);
  const Eigen::MatrixXd C1i = -H.block(n, 0, q, n);
  const Eigen::MatrixXd F = H.block(n + q, 0, n, n);
  const Eigen::MatrixXd B1i = H.block(n + q, n, n, q);
  W.lambda = 0.5 * H.block(n, n, q, q).diagonal();
  Eigen::MatrixXd D11i = -H.block(n, n, q, q);
  D11i.triangularView<Eigen::Upper>().setZero();  // keep the strict lower part

  W.E = 0.5 * (H.bottomRightCorner(n, n) + W.P + Y1 - Y1.transpose());
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(W.E);
  W.A = lu.solve(F);
  W.B1 = lu.solve(B1i);
  W.C1 = W.lambda.cwiseInverse().asDiagonal() * C1i;
  W.D11 = W.lambda.cwiseInverse().asDiagonal() * D11i;

  W.B2 = CMap(theta.data() + l.b2, n, m);
  W.D12 = CMap(theta.data() + l.d12, q, m);
  W.C2 = CMap(theta.data() + l.c2, p, n);
  W.D21 = CMap(theta.data() + l.d21, p, q);
  W.D22 = CMap(theta.data() + l.d22, p, m);
  W.bx = theta.segment(l.bx, n);
  W.bv = theta.segment(l.bv, q);
  W.by = theta.segment(l.by, p);

  if (cfg.gamma > 0.0) {
    // Fold a smooth, always-feasible rescaling of the output maps so the
    // certified gain stays below gamma.
    const double g0 = detail::certified_gain_bound(W);
    const double scale = (g0 < 1e-12) ? 1.0 : cfg.gamma * std::tanh(g0 / cfg.gamma) / g0;
    W.C2 *= scale;
    W.D21 *= scale;
    W.D22 *= scale;
    W.output_scale = scale;
    W.gain_bound = scale * g0;
  }
  return W;
}

struct CertificateCheck {
  double lmi_min_eig = 0.0;   // lambda_min of the reassembled certificate matrix
  double required = 0.0;      // eps the materialization promised
  double p_min_eig = 0.0;
  double lambda_min = 0.0;
  bool d11_strictly_lower = false;
  bool pass = false;
};

// Re-assemble the certificate matrix from the *explicit* weights and verify
// it is positive definite with the promised margin.  This checks the actual
// deployed weights, not the parameterization that produced them.
inline CertificateCheck verify_certificate(const RenWeights& W, double slack = 1e-8) {
  const int n = static_cast<int>(W.A.rows());
  const int q = static_cast<int>(W.C1.rows());
  const int s = 2 * n + q;

  const Eigen::MatrixXd F = W.E * W.A;
  const Eigen::MatrixXd B1i = W.E * W.B1;
  const Eigen::MatrixXd C1i = W.lambda.asDiagonal() * W.C1;
  const Eigen::MatrixXd D11i = W.lambda.asDiagonal() * W.D11;

  Eigen::MatrixXd G(s, s);
  G.topLeftCorner(n, n) = W.alpha * W.alpha * W.P;
  G.block(0, n, n, q) = -C1i.transpose();
  G.block(0, n + q, n, n) = F.transpose();
  G.block(n, 0, q, n) = -C1i;
  G.block(n, n, q, q) =
      2.0 * Eigen::MatrixXd(W.lambda.asDiagonal()) - D11i - D11i.transpose();
  G.block(n, n + q, q, n) = B1i.transpose();
  G.block(n + q, 0, n, n) = F;
  G.block(n + q, n, n, q) = B1i;
  G.bottomRightCorner(n, n) = W.E + W.E.transpose() - W.P;

  CertificateCheck out;
  out.required = W.eps;
  {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G, Eigen::EigenvaluesOnly);
    out.lmi_min_eig = es.eigenvalues().minCoeff();
  }
  {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(W.P, Eigen::EigenvaluesOnly);
    out.p_min_eig = es.eigenvalues().minCoeff();
  }
  out.lambda_min = W.lambda.minCoeff();
  out.d11_strictly_lower = true;
  for (int i = 0; i < q && out.d11_strictly_lower; ++i)
    for (int j = i; j < q; ++j)
      if (W.D11(i, j) != 0.0) { out.d11_strictly_lower = false; break; }
  out.pass = out.lmi_min_eig >= W.eps - slack && out.p_min_eig > 0.0 &&
             out.lambda_min > 0.0 && out.d11_strictly_lower;
  return out;
}

// ---------------------------------------------------------------------------
// Forward evaluation.
// ---------------------------------------------------------------------------

struct RenWorkspace {
  Eigen::VectorXd v, w, x_next, y;
  void resize(const RenConfig& cfg) {
    v.resize(cfg.q);
    w.resize(cfg.q);
    x_next.resize(cfg.n);
    y.resize(cfg.p);
  }
};

// One network step on plain doubles; writes ws.w, ws.x_next, ws.y.
inline void ren_forward(const RenWeights& W, const Eigen::VectorXd& x,
                        const Eigen::VectorXd& u, RenWorkspace& ws) {
  const int q = static_cast<int>(W.C1.rows());
  ws.v.noalias() = W.C1 * x;
  ws.v.noalias() += W.D12 * u;
  ws.v += W.bv;
  for (int i = 0; i < q; ++i) {
    double vi = ws.v[i];
    if (i > 0) vi += W.D11.row(i).head(i).dot(ws.w.head(i));
    ws.v[i] = vi;
    ws.w[i] = std::tanh(vi);
  }
  ws.x_next.noalias() = W.A * x;
  ws.x_next.noalias() += W.B1 * ws.w;
  ws.x_next.noalias() += W.B2 * u;
  ws.x_next += W.bx;
  ws.y.noalias() = W.C2 * x;
  ws.y.noalias() += W.D21 * ws.w;
  ws.y.noalias() += W.D22 * u;
  ws.y += W.by;
}

// Gradient accumulators for the explicit weights, summed across every step
// and rollout between zeroing and the pullback onto theta.
struct RenGrads {
  Eigen::MatrixXd A, B1, B2, C1, D11, D12, C2, D21, D22;
  Eigen::VectorXd bx, bv, by;
  void resize_zero(const RenConfig& c) {
    A = Eigen::MatrixXd::Zero(c.n, c.n);
    B1 = Eigen::MatrixXd::Zero(c.n, c.q);
    B2 = Eigen::MatrixXd::Zero(c.n, c.m);
    C1 = Eigen::MatrixXd::Zero(c.q, c.n);
    D11 = Eigen::MatrixXd::Zero(c.q, c.q);
    D12 = Eigen::MatrixXd::Zero(c.q, c.m);
    C2 = Eigen::MatrixXd::Zero(c.p, c.n);
    D21 = Eigen::MatrixXd::Zero(c.p, c.q);
    D22 = Eigen::MatrixXd::Zero(c.p, c.m);
    bx = Eigen::VectorXd::Zero(c.n);
    bv = Eigen::VectorXd::Zero(c.q);
    by = Eigen::VectorXd::Zero(c.p);
  }
};

namespace detail {

// Everything the deferred backward pass of one taped network step needs.
struct RenStepRecord {
  Eigen::VectorXd x0, u0, w;
  std::vector<uint32_t> x_idx, u_idx;
  uint32_t out_begin = 0;
  const RenWeights* W = nullptr;
  RenGrads* G = nullptr;
};

inline void ren_step_backward(const RenStepRecord& r, ad::Tape& tape) {
  const RenWeights& W = *r.W;
  const int n = static_cast<int>(W.A.rows());
  const int q = static_cast<int>(W.C1.rows());
  const int p = static_cast<int>(W.C2.rows());

  Eigen::VectorXd xbar_next(n), ybar(p);
  for (int i = 0; i < n; ++i) xbar_next[i] = tape.adjoint(r.out_begin + i);
  for (int j = 0; j < p; ++j) ybar[j] = tape.adjoint(r.out_begin + n + j);
  if (xbar_next.isZero(0.0) && ybar.isZero(0.0)) return;

  Eigen::VectorXd wbar = W.D21.transpose() * ybar;
  wbar.noalias() += W.B1.transpose() * xbar_next;
  Eigen::VectorXd xbar = W.C2.transpose() * ybar;
  xbar.noalias() += W.A.transpose() * xbar_next;
  Eigen::VectorXd ubar = W.D22.transpose() * ybar;
  ubar.noalias() += W.B2.transpose() * xbar_next;

  // Pull back through the triangular equilibrium layer in reverse order.
  Eigen::VectorXd vbar(q);
  for (int i = q - 1; i >= 0; --i) {
    const double vb = wbar[i] * (1.0 - r.w[i] * r.w[i]);
    vbar[i] = vb;
    if (i > 0 && vb != 0.0) wbar.head(i) += vb * W.D11.row(i).head(i).transpose();
  }
  xbar.noalias() += W.C1.transpose() * vbar;
  ubar.noalias() += W.D12.transpose() * vbar;

  for (int i = 0; i < n; ++i) tape.add_adjoint(r.x_idx[i], xbar[i]);
  for (int j = 0; j < static_cast<int>(r.u_idx.size()); ++j)
    tape.add_adjoint(r.u_idx[j], ubar[j]);

  if (r.G) {
    RenGrads& g = *r.G;
    g.A.noalias() += xbar_next * r.x0.transpose();
    g.B1.noalias() += xbar_next * r.w.transpose();
    g.B2.noalias() += xbar_next * r.u0.transpose();
    g.C1.noalias() += vbar * r.x0.transpose();
    g.D12.noalias() += vbar * r.u0.transpose();
    g.C2.noalias() += ybar * r.x0.transpose();
    g.D21.noalias() += ybar * r.w.transpose();
    g.D22.noalias() += ybar * r.u0.transpose();
    g.bx += xbar_next;
    g.bv += vbar;
    g.by += ybar;
    for (int i = 1; i < q; ++i)
      if (vbar[i] != 0.0) g.D11.row(i).head(i) += vbar[i] * r.w.head(i).transpose();
  }
}

}  // namespace detail

// One network step on taped variables.  The whole step becomes a single
// composite node: outputs are fresh leaves and a hook performs the exact
// vectorized pullback (writing parameter gradients into `grads` when given).
// `x` is updated in place to the new state leaves; returns the output leaves.
inline std::vector<ad::Var> ren_step_var(const RenWeights& W, RenGrads* grads,
                                         std::vector<ad::Var>& x,
                                         const std::vector<ad::Var>& u, RenWorkspace& ws) {
  ad::Tape* tape = ad::Tape::active();
  if (!tape) throw std::logic_error("ren_step_var: no active tape");
  const int n = static_cast<int>(W.A.rows());
  const int p = static_cast<int>(W.C2.rows());
  const int m = static_cast<int>(W.B2.cols());

  auto rec = std::make_shared<detail::RenStepRecord>();
  rec->W = &W;
  rec->G = grads;
  rec->x0.resize(n);
  rec->u0.resize(m);
  rec->x_idx.resize(n);
  rec->u_idx.resize(m);
  for (int i = 0; i < n; ++i) {
    rec->x0[i] = x[i].v;
    rec->x_idx[i] = x[i].i;
  }
  for (int j = 0; j < m; ++j) {
    rec->u0[j] = u[j].v;
    rec->u_idx[j] = u[j].i;
  }

  ren_forward(W, rec->x0, rec->u0, ws);
  rec->w = ws.w;

  std::vector<ad::Var> y(p);
  for (int i = 0; i < n; ++i) x[i] = ad::Var::input(ws.x_next[i]);
  rec->out_begin = x[0].i;
  for (int j = 0; j < p; ++j) y[j] = ad::Var::input(ws.y[j]);

  tape->add_hook(rec->out_begin,
                 [rec](ad::Tape& t) { detail::ren_step_backward(*rec, t); });
  return y;
}

// Pull accumulated explicit-weight gradients back onto the flat parameter
// vector.  Call once per gradient evaluation, after all rollouts.
inline Eigen::VectorXd materialize_backward(const RenConfig& cfg, const Eigen::VectorXd& theta,
                                            const RenWeights& W, const RenGrads& G) {
  if (cfg.gamma > 0.0)
    throw std::logic_error("materialize_backward: bounded-gain variant is not trainable");
  const RenLayout l = ren_layout(cfg);
  const int n = cfg.n, q = cfg.q, s = l.s;

  using CMap = Eigen::Map<const Eigen::MatrixXd>;
  const CMap X(theta.data() + l.x, s, s);

  // A = E^-1 F, B1 = E^-1 B1i:  Mbar = E^-T Ybar,  Ebar -= Mbar Y^T.
  Eigen::PartialPivLU<Eigen::MatrixXd> luT(W.E.transpose());
  const Eigen::MatrixXd Fbar = luT.solve(G.A);
  const Eigen::MatrixXd B1ibar = luT.solve(G.B1);
  Eigen::MatrixXd Ebar = -Fbar * W.A.transpose();
  Ebar.noalias() -= B1ibar * W.B1.transpose();

  // C1 = L^-1 C1i, D11 = L^-1 D11i (row scalings).
  Eigen::MatrixXd C1ibar(q, n);
  Eigen::MatrixXd D11ibar = Eigen::MatrixXd::Zero(q, q);
  Eigen::VectorXd lbar = Eigen::VectorXd::Zero(q);
  for (int k = 0; k < q; ++k) {
    const double inv = 1.0 / W.lambda[k];
    C1ibar.row(k) = inv * G.C1.row(k);
    lbar[k] = -inv * G.C1.row(k).dot(W.C1.row(k));
    if (k > 0) {
      D11ibar.row(k).head(k) = inv * G.D11.row(k).head(k);
      lbar[k] -= inv * G.D11.row(k).head(k).dot(W.D11.row(k).head(k));
    }
  }

  // E = (H33 + P + Y1 - Y1^T)/2, P = H11 / alpha^2.
  const Eigen::MatrixXd H33bar = 0.5 * Ebar;
  const Eigen::MatrixXd Pbar = 0.5 * Ebar;
  const Eigen::MatrixXd Y1bar = 0.5 * (Ebar - Ebar.transpose());
  const Eigen::MatrixXd H11bar = Pbar / (cfg.alpha * cfg.alpha);

  Eigen::MatrixXd Hbar = Eigen::MatrixXd::Zero(s, s);
  Hbar.topLeftCorner(n, n) = H11bar;
  Hbar.block(n, 0, q, n) = -C1ibar;
  Hbar.block(n + q, 0, n, n) = Fbar;
  Hbar.block(n + q, n, n, q) = B1ibar;
  Hbar.bottomRightCorner(n, n) = H33bar;
  // H22 enters through lambda (diagonal) and -D11i (strict lower part).
  Hbar.block(n, n, q, q).diagonal() = 0.5 * lbar;
  for (int k = 1; k < q; ++k)
    Hbar.block(n, n, q, q).row(k).head(k) -= D11ibar.row(k).head(k);

  // H = X^T X + eps I:  Xbar = X (Hbar + Hbar^T).
  const Eigen::MatrixXd Xbar = X * (Hbar + Hbar.transpose());

  Eigen::VectorXd dtheta(l.total);
  using MMap = Eigen::Map<Eigen::MatrixXd>;
  MMap(dtheta.data() + l.x, s, s) = Xbar;
  MMap(dtheta.data() + l.y1, n, n) = Y1bar;
  MMap(dtheta.data() + l.b2, n, cfg.m) = G.B2;
  MMap(dtheta.data() + l.d12, q, cfg.m) = G.D12;
  MMap(dtheta.data() + l.c2, cfg.p, n) = G.C2;
  MMap(dtheta.data() + l.d21, cfg.p, q) = G.D21;
  MMap(dtheta.data() + l.d22, cfg.p, cfg.m) = G.D22;
  dtheta.segment(l.bx, n) = G.bx;
  dtheta.segment(l.bv, q) = G.bv;
  dtheta.segment(l.by, cfg.p) = G.by;
  return dtheta;
}

// ---------------------------------------------------------------------------
// Initialization and empirical probes.
// ---------------------------------------------------------------------------

// Random initialization: the implicit block gets unit-variance entries scaled
// for a well-conditioned H; output maps start two orders smaller so the
// untrained network barely perturbs whatever consumes it.
inline Eigen::VectorXd random_theta(const RenConfig& cfg, uint64_t seed) {
  const RenLayout l = ren_layout(cfg);
  Eigen::VectorXd theta(l.total);
  Rng rng(seed);
  const double sx = 1.0 / std::sqrt(static_cast<double>(l.s));
  const double s_in = 0.1 / std::sqrt(static_cast<double>(cfg.m));
  const double s_c2 = 0.01 / std::sqrt(static_cast<double>(cfg.n));
  const double s_d21 = 0.01 / std::sqrt(static_cast<double>(cfg.q));
  const double s_d22 = 0.01 / std::sqrt(static_cast<double>(cfg.m));
  for (int i = 0; i < l.s * l.s; ++i) theta[l.x + i] = sx * rng.normal();
  for (int i = 0; i < cfg.n * cfg.n; ++i) theta[l.y1 + i] = 0.05 * rng.normal();
  for (int i = 0; i < cfg.n * cfg.m; ++i) theta[l.b2 + i] = s_in * rng.normal();
  for (int i = 0; i < cfg.q * cfg.m; ++i) theta[l.d12 + i] = s_in * rng.normal();
  for (int i = 0; i < cfg.p * cfg.n; ++i) theta[l.c2 + i] = s_c2 * rng.normal();
  for (int i = 0; i < cfg.p * cfg.q; ++i) theta[l.d21 + i] = s_d21 * rng.normal();
  for (int i = 0; i < cfg.p * cfg.m; ++i) theta[l.d22 + i] = s_d22 * rng.normal();
  theta.segment(l.bx, cfg.n + cfg.q + cfg.p).setZero();
  return theta;
}

// Empirical contraction rate: pairs of random initial states driven by a
// shared input sequence; least-squares slope of log state distance vs step.
// Returns the largest fitted geometric rate across trials.
inline double contraction_estimate(const RenWeights& W, uint64_t seed, int trials = 16,
                                   int steps = 200) {
  const int n = static_cast<int>(W.A.rows());
  const int m = static_cast<int>(W.B2.cols());
  RenConfig c;
  c.n = n;
  c.m = m;
  c.q = static_cast<int>(W.C1.rows());
  c.p = static_cast<int>(W.C2.rows());
  RenWorkspace ws;
  ws.resize(c);

  double worst = 0.0;
  for (int trial = 0; trial < trials; ++trial) {
    Rng rng(seed_stream(seed, trial));
    Eigen::VectorXd xa(n), xb(n), u(m);
    for (int i = 0; i < n; ++i) xa[i] = rng.normal();
    for (int i = 0; i < n; ++i) xb[i] = rng.normal();
    if ((xa - xb).norm() == 0.0) continue;

    double sum_t = 0.0, sum_l = 0.0, sum_tt = 0.0, sum_tl = 0.0;
    int count = 0;
    for (int t = 0; t <= steps; ++t) {
      const double d = (xa - xb).norm();
      if (d < 1e-140 || !std::isfinite(d)) break;
      const double ld = std::log(d);
      sum_t += t;
      sum_l += ld;
      sum_tt += static_cast<double>(t) * t;
      sum_tl += t * ld;
      ++count;
      if (t == steps) break;
      for (int i = 0; i < m; ++i) u[i] = rng.normal();
      ren_forward(W, xa, u, ws);
      xa = ws.x_next;
      ren_forward(W, xb, u, ws);
      xb = ws.x_next;
    }
    if (count < 2) continue;
    const double denom = count * sum_tt - sum_t * sum_t;
    const double slope = (count * sum_tl - sum_t * sum_l) / denom;
    worst = std::max(worst, std::exp(slope));
  }
  return worst;
}

// Iterate the step map under a constant input; a contracting network settles
// to its unique driven fixed point.  Returns the final update norm.
inline double ren_fixed_point(const RenWeights& W, const Eigen::VectorXd& u,
                              Eigen::VectorXd& x, int max_iters = 10000,
                              double tol = 1e-13) {
  RenConfig c;
  c.n = static_cast<int>(W.A.rows());
  c.m = static_cast<int>(W.B2.cols());
  c.q = static_cast<int>(W.C1.rows());
  c.p = static_cast<int>(W.C2.rows());
  RenWorkspace ws;
  ws.resize(c);
  double res = std::numeric_limits<double>::infinity();
  for (int it = 0; it < max_iters; ++it) {
    ren_forward(W, x, u, ws);
    res = (ws.x_next - x).lpNorm<Eigen::Infinity>();
    x = ws.x_next;
    if (res < tol) break;
  }
  return res;
}

// Empirical lower bound on the input-output Lipschitz constant: rollouts from
// the same initial state under input pairs, gain measured in l2.
inline double lipschitz_probe(const RenWeights& W, uint64_t seed, int trials = 16,
                              int steps = 100) {
  const int n = static_cast<int>(W.A.rows());
  const int m = static_cast<int>(W.B2.cols());
  RenConfig c;
  c.n = n;
  c.m = m;
  c.q = static_cast<int>(W.C1.rows());
  c.p = static_cast<int>(W.C2.rows());
  RenWorkspace wsa, wsb;
  wsa.resize(c);
  wsb.resize(c);

  double best = 0.0;
  for (int trial = 0; trial < trials; ++trial) {
    Rng rng(seed_stream(seed, trial));
    Eigen::VectorXd xa = Eigen::VectorXd::Zero(n), xb = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd ua(m), ub(m);
    double num = 0.0, den = 0.0;
    for (int t = 0; t < steps; ++t) {
      for (int i = 0; i < m; ++i) ua[i] = rng.normal();
      for (int i = 0; i < m; ++i) ub[i] = rng.normal();
      ren_forward(W, xa, ua, wsa);
      ren_forward(W, xb, ub, wsb);
      xa = wsa.x_next;
      xb = wsb.x_next;
      num += (wsa.y - wsb.y).squaredNorm();
      den += (ua - ub).squaredNorm();
    }
    if (den > 0.0) best = std::max(best, std::sqrt(num / den));
  }
  return best;
}

// ---------------------------------------------------------------------------
// Checkpoints: dimensions + certificate constants + raw parameters, guarded
// by a 64-bit FNV-1a hash over everything that precedes it.
// ---------------------------------------------------------------------------

inline constexpr char kCheckpointMagic[8] = {'N', 'G', 'T', 'C', 'R', 'E', 'N', '1'};

namespace detail {
template <typename T>
inline void put_raw(std::string& buf, const T& v) {
  buf.append(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
inline T get_raw(const std::string& buf, size_t& off) {
  if (off + sizeof(T) > buf.size()) throw std::runtime_error("checkpoint: truncated");
  T v;
  std::memcpy(&v, buf.data() + off, sizeof(T));
  off += sizeof(T);
  return v;
}
}  // namespace detail

inline void save_checkpoint(const std::string& path, const RenConfig& cfg,
                            const Eigen::VectorXd& theta) {
  std::string buf;
  buf.reserve(64 + static_cast<size_t>(theta.size()) * 8);
  buf.append(kCheckpointMagic, 8);
  detail::put_raw(buf, static_cast<uint32_t>(cfg.n));
  detail::put_raw(buf, static_cast<uint32_t>(cfg.m));
  detail::put_raw(buf, static_cast<uint32_t>(cfg.q));
  detail::put_raw(buf, static_cast<uint32_t>(cfg.p));
  detail::put_raw(buf, cfg.alpha);
  detail::put_raw(buf, cfg.eps);
  detail::put_raw(buf, cfg.gamma);
  detail::put_raw(buf, static_cast<uint64_t>(theta.size()));
  buf.append(reinterpret_cast<const char*>(theta.data()),
             static_cast<size_t>(theta.size()) * sizeof(double));

  Fnv1a h;
  h.update(buf.data(), buf.size());
  detail::put_raw(buf, h.digest());

  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint for writing: " + path);
  f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!f) throw std::runtime_error("checkpoint write failed: " + path);
}

struct Checkpoint {
  RenConfig cfg;
  Eigen::VectorXd theta;
};

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint: " + path);
  std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  if (buf.size() < 8 + 16 + 24 + 8 + 8) throw std::runtime_error("checkpoint: truncated");

  Fnv1a h;
  h.update(buf.data(), buf.size() - 8);
  size_t tail = buf.size() - 8;
  const uint64_t want = detail::get_raw<uint64_t>(buf, tail);
  if (h.digest() != want) throw std::runtime_error("checkpoint: hash mismatch");

  size_t off = 0;
  if (std::memcmp(buf.data(), kCheckpointMagic, 8) != 0)
    throw std::runtime_error("checkpoint: bad magic");
  off = 8;
  Checkpoint ck;
  ck.cfg.n = static_cast<int>(detail::get_raw<uint32_t>(buf, off));
  ck.cfg.m = static_cast<int>(detail::get_raw<uint32_t>(buf, off));
  ck.cfg.q = static_cast<int>(detail::get_raw<uint32_t>(buf, off));
  ck.cfg.p = static_cast<int>(detail::get_raw<uint32_t>(buf, off));
  ck.cfg.alpha = detail::get_raw<double>(buf, off);
  ck.cfg.eps = detail::get_raw<double>(buf, off);
  ck.cfg.gamma = detail::get_raw<double>(buf, off);
  const uint64_t len = detail::get_raw<uint64_t>(buf, off);
  if (ck.cfg.n <= 0 || ck.cfg.m <= 0 || ck.cfg.q <= 0 || ck.cfg.p <= 0)
    throw std::runtime_error("checkpoint: bad dimensions");
  if (len != static_cast<uint64_t>(ren_layout(ck.cfg).total))
    throw std::runtime_error("checkpoint: parameter count mismatch");
  if (off + len * 8 + 8 != buf.size()) throw std::runtime_error("checkpoint: size mismatch");
  ck.theta.resize(static_cast<Eigen::Index>(len));
  std::memcpy(ck.theta.data(), buf.data() + off, len * 8);
  return ck;
}

// Load, rebuild the explicit weights, and re-verify the certificate; the only
// sanctioned way to bring stored parameters back into a controller.
inline RenWeights load_verified_weights(const std::string& path, RenConfig* cfg_out = nullptr) {
  const Checkpoint ck = load_checkpoint(path);
  RenWeights W = materialize(ck.cfg, ck.theta);
  const CertificateCheck cert = verify_certificate(W);
  if (!cert.pass) throw std::runtime_error("checkpoint: contraction certificate failed");
  if (cfg_out) *cfg_out = ck.cfg;
  return W;
}

}  // namespace ngtc

#endif  // NGTC_REN_HPP
