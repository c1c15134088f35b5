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

#ifndef NGTC_YOULA_HPP
#define NGTC_YOULA_HPP

#include <vector>

#include "ngtc/controller.hpp"
#include "ngtc/dynamics.hpp"
#include "ngtc/ren.hpp"
#include "ngtc/trajectory.hpp"

// Learned augmentation in a Youla-style loop: a nominal one-step model is
// driven with the previous state and the previously issued rotor commands;
// the discrepancy between the observed state and that prediction is (up to
// the one-step approximation) a pure function of the disturbance, not of the
// feedback loop.  Feeding the network from this residual plus a preview of
// the reference keeps the baseline controller bitwise intact when the model
// is exact and the network output is zero.

namespace ngtc {

template <typename T>
struct Residual {
  Vec3<T> x{T(0.0), T(0.0), T(0.0)};
  Vec3<T> v{T(0.0), T(0.0), T(0.0)};
  Vec3<T> att{T(0.0), T(0.0), T(0.0)};  // rotation vector, predicted -> observed
  Vec3<T> omega{T(0.0), T(0.0), T(0.0)};
};

// One-step prediction under the nominal model: same integrator and time step
// as the plant, no aerodynamic drag, no exogenous disturbance.
template <typename T>
inline QuadState<T> nominal_predict(const QuadParams& p, const QuadState<T>& state,
                                    const Vec4<T>& cmd, double dt) {
  return rk4_step(p, state, cmd, Disturbance{}, dt, /*with_drag=*/false);
}

template <typename T>
inline Residual<T> compute_residual(const QuadState<T>& observed,
                                    const QuadState<T>& predicted) {
  Residual<T> r;
  for (int i = 0; i < 3; ++i) {
    r.x[i] = observed.x[i] - predicted.x[i];
    r.v[i] = observed.v[i] - predicted.v[i];
    r.omega[i] = observed.omega[i] - predicted.omega[i];
  }
  r.att = rotation_vector(quat_mul(conjugate(predicted.q), observed.q));
  return r;
}

// Network input layout: 12 residual entries followed by, for each preview
// sample, position relative to the current reference (3), absolute velocity
// (3) and wrapped relative heading (1).
inline constexpr int kResidualSize = 12;
inline constexpr int kPerPreviewSize = 7;
inline constexpr int kRenInputSize = kResidualSize + kPerPreviewSize * kLookaheadSteps;

// Fixed input normalization.  Residual components are one-step integrals of
// unmodeled effects (a full-scale force disturbance produces ~1e-3 m position
// and ~0.2 m/s velocity innovation per step) while preview velocities reach
// the vehicle's speed envelope; without rescaling the feature magnitudes span
// four decades and gradient descent spends its budget on the loudest, least
// informative block.  Gains chosen so each block sits at unit scale.
inline constexpr double kResXGain = 100.0;
inline constexpr double kResVGain = 10.0;
inline constexpr double kResAttGain = 10.0;
inline constexpr double kResOmegaGain = 1.0;
inline constexpr double kPrevXGain = 1.0;
inline constexpr double kPrevVGain = 0.1;
inline constexpr double kPrevPsiGain = 1.0;

template <typename T>
inline void assemble_input(const Residual<T>& res, const ReferenceWindow& win,
                           std::vector<T>& out) {
  out.resize(kRenInputSize);
  for (int i = 0; i < 3; ++i) {
    out[0 + i] = res.x[i] * T(kResXGain);
    out[3 + i] = res.v[i] * T(kResVGain);
    out[6 + i] = res.att[i] * T(kResAttGain);
    out[9 + i] = res.omega[i] * T(kResOmegaGain);
  }
  int o = kResidualSize;
  for (int k = 0; k < kLookaheadSteps; ++k) {
    const ReferenceState& f = win.future[k];
    for (int i = 0; i < 3; ++i) out[o + i] = T((f.x[i] - win.now.x[i]) * kPrevXGain);
    for (int i = 0; i < 3; ++i) out[o + 3 + i] = T(f.v[i] * kPrevVGain);
    out[o + 6] = T(wrap_angle(f.psi - win.now.psi) * kPrevPsiGain);
    o += kPerPreviewSize;
  }
}

// Full tracking controller: geometric baseline, optionally augmented with the
// learned acceleration correction  a_Q = scale * tanh(y).  Templated on the
// scalar so the same code path serves evaluation (double) and training
// rollouts (taped variables).
template <typename T>
class TrackingController {
 public:
  struct Options {
    bool augment = true;
    double aq_scale = 20.0;  // m/s^2 per output channel
    AllocMode alloc = AllocMode::kExactQp;
    double dt = 0.01;  // control period = nominal-model step
  };

  TrackingController(const QuadParams& params, const Gains& gains, const Options& opt,
                     const RenWeights* ren = nullptr, RenGrads* grads = nullptr)
      : params_(params), gains_(gains), opt_(opt), ren_(ren), grads_(grads) {
    if (opt_.augment) {
      if (!ren_) throw std::invalid_argument("TrackingController: augmentation needs weights");
      if (static_cast<int>(ren_->B2.cols()) != kRenInputSize)
        throw std::invalid_argument("TrackingController: network input size mismatch");
      if (static_cast<int>(ren_->C2.rows()) < 3)
        throw std::invalid_argument("TrackingController: network must output 3 channels");
      const int n = static_cast<int>(ren_->A.rows());
      ren_state_.assign(n, T(0.0));
      RenConfig c;
      c.n = n;
      c.m = kRenInputSize;
      c.q = static_cast<int>(ren_->C1.rows());
      c.p = static_cast<int>(ren_->C2.rows());
      ws_.resize(c);
      x_buf_.resize(n);
      u_buf_.resize(kRenInputSize);
      input_.resize(kRenInputSize);
    }
  }

  ControlCommand<T> step(const QuadState<T>& obs, const ReferenceWindow& win) {
    Vec3<T> aq{T(0.0), T(0.0), T(0.0)};
    if (opt_.augment) {
      Residual<T> res;
      if (has_prev_) {
        const QuadState<T> pred = nominal_predict(params_, prev_state_, prev_cmd_, opt_.dt);
        res = compute_residual(obs, pred);
      }
      assemble_input(res, win, input_);

      if constexpr (std::is_same_v<T, double>) {
        for (int i = 0; i < static_cast<int>(ren_state_.size()); ++i) x_buf_[i] = ren_state_[i];
        for (int j = 0; j < kRenInputSize; ++j) u_buf_[j] = input_[j];
        ren_forward(*ren_, x_buf_, u_buf_, ws_);
        for (int i = 0; i < static_cast<int>(ren_state_.size()); ++i)
          ren_state_[i] = ws_.x_next[i];
        for (int i = 0; i < 3; ++i) aq[i] = opt_.aq_scale * std::tanh(ws_.y[i]);
      } else {
        const std::vector<T> y = ren_step_var(*ren_, grads_, ren_state_, input_, ws_);
        using std::tanh;
        for (int i = 0; i < 3; ++i) aq[i] = opt_.aq_scale * tanh(y[i]);
      }
      last_residual_ = res;
      last_aq_ = aq;
    }

    ControlCommand<T> cmd = dfbc_step(params_, gains_, obs, win.now, aq, mem_, opt_.alloc);
    prev_state_ = obs;
    prev_cmd_ = cmd.thrusts;
    has_prev_ = true;
    return cmd;
  }

  void reset() {
    has_prev_ = false;
    mem_ = ControllerMemory<T>{};
    std::fill(ren_state_.begin(), ren_state_.end(), T(0.0));
  }

  const Residual<T>& last_residual() const { return last_residual_; }
  const Vec3<T>& last_aq() const { return last_aq_; }
  const std::vector<T>& ren_state() const { return ren_state_; }

 private:
  QuadParams params_;
  Gains gains_;
  Options opt_;
  const RenWeights* ren_;
  RenGrads* grads_;

  ControllerMemory<T> mem_;
  bool has_prev_ = false;
  QuadState<T> prev_state_;
  Vec4<T> prev_cmd_{T(0.0), T(0.0), T(0.0), T(0.0)};

  std::vector<T> ren_state_;
  std::vector<T> input_;
  RenWorkspace ws_;
  Eigen::VectorXd x_buf_, u_buf_;

  Residual<T> last_residual_;
  Vec3<T> last_aq_{T(0.0), T(0.0), T(0.0)};
};

}  // namespace ngtc

#endif  // NGTC_YOULA_HPP
