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

#ifndef NGTC_TRAINING_HPP
#define NGTC_TRAINING_HPP

#include <chrono>
#include <functional>
#include <limits>
#include <vector>

#include "ngtc/autodiff.hpp"
#include "ngtc/common.hpp"
#include "ngtc/dataset.hpp"
#include "ngtc/youla.hpp"

// Backpropagation through time: full closed-loop rollouts (controller,
// network, smooth allocation and plant integrator) are taped; the network
// step uses its composite pullback and the parameterization pullback maps the
// accumulated weight gradients onto the flat trainable vector.

namespace ngtc {

struct LossWeights {
  Eigen::Vector3d qx{200.0, 200.0, 500.0};
  Eigen::Vector3d qv{1.0, 1.0, 1.0};
  Eigen::Vector3d qq{5.0, 5.0, 200.0};
  Eigen::Vector3d qomega{1.0, 1.0, 1.0};
  Eigen::Vector4d qu{6.0, 6.0, 6.0, 6.0};
};

// Attitude and body-rate reference implied by the flatness map at one sample.
struct FlatReference {
  Quat<double> q;
  Eigen::Vector3d omega = Eigen::Vector3d::Zero();
  double thrust = 0.0;
  uint32_t flags = 0;
};

inline FlatReference flat_attitude_reference(const QuadParams& p, const ReferenceState& ref,
                                             ControllerMemory<double>& mem) {
  FlatReference out;
  const ThrustAttitude<double> ta = thrust_and_attitude(p, ref.a, ref.psi, mem);
  const RateFeedForward<double> ff =
      angular_velocity_reference(p.mass, ta.R, ta.thrust, ref.j, ref.dpsi);
  out.q = ta.q;
  out.omega = ff.omega;
  out.thrust = ta.thrust;
  out.flags = ta.flags | ff.flags;
  return out;
}

// Quadratic stage cost against the flatness-consistent reference; rotor
// commands are regularized toward the hover thrust.
template <typename T>
inline T stage_loss(const LossWeights& lw, double u_hover, const QuadState<T>& s,
                    const ReferenceState& ref, const FlatReference& flat,
                    const Vec4<T>& u_cmd) {
  auto square = [](const T& z) { return z * z; };
  T L(0.0);
  for (int i = 0; i < 3; ++i) {
    L += lw.qx[i] * square(s.x[i] - T(ref.x[i]));
    L += lw.qv[i] * square(s.v[i] - T(ref.v[i]));
    L += lw.qomega[i] * square(s.omega[i] - T(flat.omega[i]));
  }
  const Quat<T> q_ref{T(flat.q.w), T(flat.q.x), T(flat.q.y), T(flat.q.z)};
  const Vec3<T> eatt = rotation_vector(quat_mul(conjugate(q_ref), s.q));
  for (int i = 0; i < 3; ++i) L += lw.qq[i] * square(eatt[i]);
  for (int i = 0; i < 4; ++i) L += lw.qu[i] * square(u_cmd[i] - T(u_hover));
  return L;
}

// State on the reference at t = 0: flatness-consistent attitude and body
// rates, rotor thrusts solving the static allocation for that operating
// point (clamped to the box).
inline QuadState<double> initial_state_on_reference(const QuadParams& p,
                                                    const ReferenceState& ref) {
  ControllerMemory<double> mem;
  const FlatReference flat = flat_attitude_reference(p, ref, mem);
  QuadState<double> s;
  s.x = ref.x;
  s.v = ref.v;
  s.q = flat.q;
  s.omega = flat.omega;
  const Eigen::Vector3d jw(p.inertia[0] * s.omega[0], p.inertia[1] * s.omega[1],
                           p.inertia[2] * s.omega[2]);
  const Eigen::Vector3d mu = s.omega.cross(jw);
  Eigen::Vector4d u =
      allocation_matrix(p).partialPivLu().solve(Eigen::Vector4d(flat.thrust, mu[0], mu[1], mu[2]));
  for (int i = 0; i < 4; ++i) s.thrusts[i] = std::clamp(u[i], p.u_min, p.u_max);
  return s;
}

// Episode disturbance: a constant force (world frame) and torque (body
// frame), plus per-step noise proportional to the constant magnitudes.
struct EpisodeDisturbance {
  Eigen::Vector3d force = Eigen::Vector3d::Zero();
  Eigen::Vector3d torque = Eigen::Vector3d::Zero();
  uint64_t noise_seed = 0;
  double noise_frac = 0.2;
};

inline EpisodeDisturbance draw_disturbance(uint64_t seed, double force_max,
                                           double torque_max, double noise_frac) {
  Rng rng(seed);
  EpisodeDisturbance d;
  const double fmag = rng.uniform(0.0, force_max);
  d.force = fmag * rng.unit_vector();
  const double tmag = rng.uniform(0.0, torque_max);
  d.torque = tmag * rng.unit_vector();
  d.noise_seed = seed_stream(seed, 1);
  d.noise_frac = noise_frac;
  return d;
}

// Sequential per-step sampler for one episode.
class DisturbanceSequence {
 public:
  explicit DisturbanceSequence(const EpisodeDisturbance& d) : d_(d), rng_(d.noise_seed) {}
  Disturbance next() {
    Disturbance out;
    out.force = d_.force + d_.noise_frac * d_.force.norm() * rng_.normal3();
    out.torque = d_.torque + d_.noise_frac * d_.torque.norm() * rng_.normal3();
    return out;
  }

 private:
  EpisodeDisturbance d_;
  Rng rng_;
};

struct TrainConfig {
  double dt = 0.01;
  double episode_s = 4.0;
  int batch = 8;
  int iters = 600;
  double lr = 1e-3;
  double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  double grad_clip = 10.0;
  double aq_scale = 20.0;
  bool augment = true;
  double force_max = 20.0;   // N
  double torque_max = 0.1;   // N m
  double noise_frac = 0.2;
  double instability_penalty = 1e4;  // per remaining step after blow-up
  double rmse_transient_s = 0.5;     // excluded from the reported RMSE
  int divergence_patience = 50;
  double divergence_factor = 10.0;
  int checkpoint_every = 0;  // 0: only at the end
};

template <typename T>
struct RolloutOutcome {
  T loss{0.0};
  double rmse = 0.0;
  bool unstable = false;
  int steps_run = 0;
};

namespace detail {
template <typename T>
inline bool rollout_values_finite(const QuadState<T>& s, const ControlCommand<T>& cmd) {
  for (int i = 0; i < 3; ++i)
    if (!finite_value(s.x[i]) || !finite_value(s.v[i]) || !finite_value(s.omega[i]))
      return false;
  if (!finite_value(s.q.w) || !finite_value(s.q.x) || !finite_value(s.q.y) ||
      !finite_value(s.q.z))
    return false;
  for (int i = 0; i < 4; ++i)
    if (!finite_value(s.thrusts[i]) || !finite_value(cmd.thrusts[i])) return false;
  return true;
}
}  // namespace detail

// One disturbed closed-loop episode with the smooth allocation.  In taped
// mode the caller provides an active Tape scope; weight gradients accumulate
// into `grads` through the network hooks.
template <typename T>
RolloutOutcome<T> run_training_rollout(const QuadParams& p, const Gains& gains,
                                       const LossWeights& lw, const TrajectorySpec& traj,
                                       const EpisodeDisturbance& dist, const TrainConfig& cfg,
                                       const RenWeights* ren, RenGrads* grads) {
  const int n_steps = static_cast<int>(std::round(cfg.episode_s / cfg.dt));
  const double u_hover = p.hover_thrust_per_rotor();

  ReferenceStream stream(traj);
  typename TrackingController<T>::Options opt;
  opt.augment = cfg.augment;
  opt.aq_scale = cfg.aq_scale;
  opt.alloc = AllocMode::kSmooth;
  opt.dt = cfg.dt;
  TrackingController<T> controller(p, gains, opt, ren, grads);

  ControllerMemory<double> flat_mem;
  DisturbanceSequence dseq(dist);

  RolloutOutcome<T> out;
  ReferenceWindow win0 = build_window(stream, 0.0, cfg.dt);
  const QuadState<double> s0 = initial_state_on_reference(p, win0.now);
  QuadState<T> state;
  state.x = Vec3<T>{T(s0.x[0]), T(s0.x[1]), T(s0.x[2])};
  state.v = Vec3<T>{T(s0.v[0]), T(s0.v[1]), T(s0.v[2])};
  state.q = Quat<T>{T(s0.q.w), T(s0.q.x), T(s0.q.y), T(s0.q.z)};
  state.omega = Vec3<T>{T(s0.omega[0]), T(s0.omega[1]), T(s0.omega[2])};
  state.thrusts = Vec4<T>{T(s0.thrusts[0]), T(s0.thrusts[1]), T(s0.thrusts[2]),
                          T(s0.thrusts[3])};

  double err_sq_sum = 0.0;
  int err_count = 0;

  T loss_acc(0.0);
  for (int k = 0; k < n_steps; ++k) {
    const double t = k * cfg.dt;
    const ReferenceWindow win = (k == 0) ? win0 : build_window(stream, t, cfg.dt);
    const FlatReference flat = flat_attitude_reference(p, win.now, flat_mem);

    const ControlCommand<T> cmd = controller.step(state, win);
    if (!detail::rollout_values_finite(state, cmd)) {
      out.unstable = true;
      loss_acc += T(cfg.instability_penalty * static_cast<double>(n_steps - k));
      break;
    }
    loss_acc += stage_loss(lw, u_hover, state, win.now, flat, cmd.thrusts);

    if (t >= cfg.rmse_transient_s) {
      double e2 = 0.0;
      for (int i = 0; i < 3; ++i) {
        const double d = value_of(state.x[i]) - win.now.x[i];
        e2 += d * d;
      }
      err_sq_sum += e2;
      ++err_count;
    }

    const Disturbance d = dseq.next();
    state = rk4_step(p, state, cmd.thrusts, d, cfg.dt, /*with_drag=*/false);
    out.steps_run = k + 1;
  }
  out.loss = loss_acc / static_cast<double>(n_steps);
  out.rmse = err_count > 0 ? std::sqrt(err_sq_sum / err_count) : 0.0;
  return out;
}

struct BatchItem {
  TrajectorySpec traj;
  uint64_t disturbance_seed = 0;
};

struct GradientResult {
  double loss = 0.0;
  double rmse = 0.0;
  Eigen::VectorXd grad;
  int unstable_rollouts = 0;
};

// Mean loss and gradient over a batch of episodes.  Rollouts run
// sequentially on one reusable tape; explicit-weight gradients sum across the
// batch and are pulled back onto theta once.
inline GradientResult gradient(const RenConfig& rcfg, const TrainConfig& tcfg,
                               const QuadParams& p, const Gains& gains, const LossWeights& lw,
                               const Eigen::VectorXd& theta,
                               const std::vector<BatchItem>& batch) {
  const RenWeights W = materialize(rcfg, theta);
  RenGrads G;
  G.resize_zero(rcfg);

  GradientResult out;
  ad::Tape tape;
  for (const BatchItem& item : batch) {
    tape.clear();
    ad::Tape::Scope scope(tape);
    const EpisodeDisturbance dist = draw_disturbance(item.disturbance_seed, tcfg.force_max,
                                                     tcfg.torque_max, tcfg.noise_frac);
    RolloutOutcome<ad::Var> r =
        run_training_rollout<ad::Var>(p, gains, lw, item.traj, dist, tcfg, &W, &G);
    if (!r.loss.is_const()) tape.backward(r.loss.i);
    out.loss += value_of(r.loss);
    out.rmse += r.rmse;
    if (r.unstable) ++out.unstable_rollouts;
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  out.loss *= inv;
  out.rmse *= inv;
  out.grad = materialize_backward(rcfg, theta, W, G) * inv;
  return out;
}

class Adam {
 public:
  Adam(int size, double lr, double b1, double b2, double eps)
      : lr_(lr), b1_(b1), b2_(b2), eps_(eps), m_(Eigen::VectorXd::Zero(size)),
        v_(Eigen::VectorXd::Zero(size)) {}

  void step(Eigen::VectorXd& theta, const Eigen::VectorXd& g) {
    ++t_;
    m_ = b1_ * m_ + (1.0 - b1_) * g;
    v_ = b2_ * v_ + (1.0 - b2_) * g.cwiseProduct(g);
    const double mc = 1.0 - std::pow(b1_, t_);
    const double vc = 1.0 - std::pow(b2_, t_);
    theta -= (lr_ / mc) * (m_.array() / ((v_.array() / vc).sqrt() + eps_)).matrix();
  }

 private:
  double lr_, b1_, b2_, eps_;
  int t_ = 0;
  Eigen::VectorXd m_, v_;
};

struct TrainRecord {
  int iter = 0;
  double loss = 0.0;
  double rmse = 0.0;
  double grad_norm = 0.0;
  double wall_s = 0.0;  // excluded from determinism comparisons
};

struct TrainResult {
  Eigen::VectorXd theta;
  std::vector<TrainRecord> records;
  bool diverged = false;
  int unstable_rollouts = 0;
};

// Deterministic training loop: batch composition and every disturbance draw
// derive from the master seed by counters, never from global state.
inline TrainResult train(const RenConfig& rcfg, const TrainConfig& tcfg, const QuadParams& p,
                         const Gains& gains, const LossWeights& lw, const Dataset& data,
                         uint64_t seed,
                         const std::function<void(const TrainRecord&)>& on_record = nullptr,
                         const std::string& checkpoint_path = "") {
  if (data.items.empty()) throw std::invalid_argument("train: empty dataset");
  if (!tcfg.augment) throw std::invalid_argument("train: augmentation must be enabled");

  TrainResult out;
  out.theta = random_theta(rcfg, seed_stream(seed, 0));
  {
    // Zero the policy-output blocks so the augmented loop starts exactly at
    // the baseline controller; training then only ever moves away from a
    // known-good operating point, and the first-iteration loss anchors the
    // divergence guard at the baseline cost.
    const RenLayout l = ren_layout(rcfg);
    out.theta.segment(l.c2, static_cast<Eigen::Index>(rcfg.p) * rcfg.n).setZero();
    out.theta.segment(l.d21, static_cast<Eigen::Index>(rcfg.p) * rcfg.q).setZero();
    out.theta.segment(l.d22, static_cast<Eigen::Index>(rcfg.p) * rcfg.m).setZero();
    out.theta.segment(l.by, rcfg.p).setZero();
  }
  Adam opt(static_cast<int>(out.theta.size()), tcfg.lr, tcfg.beta1, tcfg.beta2, tcfg.adam_eps);

  double initial_loss = 0.0;
  int bad_streak = 0;
  const auto t0 = std::chrono::steady_clock::now();

  for (int iter = 0; iter < tcfg.iters; ++iter) {
    Rng pick(seed_stream(seed, 1000003ull + static_cast<uint64_t>(iter)));
    std::vector<BatchItem> batch(tcfg.batch);
    for (int j = 0; j < tcfg.batch; ++j) {
      const size_t idx = std::min(data.items.size() - 1,
                                  static_cast<size_t>(pick.uniform() * data.items.size()));
      batch[j].traj = make_lissajous(data.items[idx].shape);
      batch[j].disturbance_seed =
          seed_stream(seed, 2000003ull + static_cast<uint64_t>(iter) * 256ull +
                                static_cast<uint64_t>(j));
    }

    // Episode gradients are clipped individually before averaging: rollout
    // sensitivities vary by orders of magnitude across disturbance draws, and
    // bounding each episode's influence keeps one stiff rollout from wiping
    // out the rest of the batch's direction.
    GradientResult g;
    g.grad = Eigen::VectorXd::Zero(out.theta.size());
    int usable_items = 0;
    for (int j = 0; j < tcfg.batch; ++j) {
      GradientResult gi =
          gradient(rcfg, tcfg, p, gains, lw, out.theta, {batch[static_cast<size_t>(j)]});
      out.unstable_rollouts += gi.unstable_rollouts;
      const double gin = gi.grad.norm();
      if (!std::isfinite(gi.loss) || !std::isfinite(gin)) continue;
      if (gin > tcfg.grad_clip) gi.grad *= tcfg.grad_clip / gin;
      g.grad += gi.grad;
      g.loss += gi.loss;
      g.rmse += gi.rmse;
      ++usable_items;
    }
    if (usable_items > 0) {
      g.grad /= usable_items;
      g.loss /= usable_items;
      g.rmse /= usable_items;
    } else {
      g.loss = std::numeric_limits<double>::quiet_NaN();
    }

    double gn = g.grad.norm();
    const bool usable = usable_items > 0 && std::isfinite(gn);
    if (usable) {
      if (gn > tcfg.grad_clip) g.grad *= tcfg.grad_clip / gn;
      opt.step(out.theta, g.grad);
    }

    TrainRecord rec;
    rec.iter = iter;
    rec.loss = g.loss;
    rec.rmse = g.rmse;
    rec.grad_norm = gn;
    rec.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.records.push_back(rec);
    if (on_record) on_record(rec);

    if (iter == 0) initial_loss = g.loss;
    if (!usable || g.loss > tcfg.divergence_factor * initial_loss) ++bad_streak;
    else bad_streak = 0;
    if (bad_streak >= tcfg.divergence_patience) {
      out.diverged = true;
      break;
    }

    if (!checkpoint_path.empty() && tcfg.checkpoint_every > 0 &&
        (iter + 1) % tcfg.checkpoint_every == 0)
      save_checkpoint(checkpoint_path, rcfg, out.theta);
  }

  if (!checkpoint_path.empty()) save_checkpoint(checkpoint_path, rcfg, out.theta);
  return out;
}

}  // namespace ngtc

#endif  // NGTC_TRAINING_HPP
