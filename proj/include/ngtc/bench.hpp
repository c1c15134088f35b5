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

#ifndef NGTC_BENCH_HPP
#define NGTC_BENCH_HPP

#include <algorithm>
#include <chrono>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "ngtc/dataset.hpp"
#include "ngtc/training.hpp"
#include "ngtc/youla.hpp"

namespace ngtc {

enum class ControllerKind { kDfbc, kNgtc };

inline const char* controller_name(ControllerKind k) {
  return k == ControllerKind::kDfbc ? "dfbc" : "ngtc";
}

// One closed-loop evaluation run.  The plant integrates the *perturbed*
// parameters (controller always believes the nominal ones) with aerodynamic
// drag on by default; an external force can be gated to a time window.
struct ExperimentSpec {
  TrajectorySpec traj;
  ControllerKind kind = ControllerKind::kDfbc;
  double duration = 8.0;
  double dt = 0.01;
  double mass_factor = 1.0;
  double tau_factor = 1.0;
  double drag_factor = 1.0;
  bool plant_drag = true;
  Eigen::Vector3d f_ext = Eigen::Vector3d::Zero();  // world frame, N
  double f_on = 0.0;                                // force active for t in [f_on, f_off)
  double f_off = std::numeric_limits<double>::infinity();
  Eigen::Vector3d tau_ext = Eigen::Vector3d::Zero();  // body frame, N m
  double noise_frac = 0.0;                            // per-step noise vs |f_ext|, |tau_ext|
  uint64_t noise_seed = 0;
};

// A run is marked crashed once position error exceeds 5 m, but the
// simulation continues so error metrics stay comparable across controllers;
// only non-finite state aborts.
struct RunResult {
  double rmse = 0.0;  // position RMSE excluding the first transient window
  double peak_err = 0.0;
  bool crashed = false;
  bool nonfinite = false;
  double saturation_frac = 0.0;  // fraction of steps with a rotor pinned at a bound
  double median_us = 0.0, p99_us = 0.0, max_us = 0.0;  // controller step latency
  int steps = 0;
  uint32_t flags = 0;
};

inline constexpr double kCrashErrorM = 5.0;
inline constexpr double kRmseTransientS = 0.5;  // excluded from reported RMSE

// Versioned run trace, one row per control step, written as
// whitespace-separated columns with `#` comment headers.
class TraceWriter {
 public:
  explicit TraceWriter(const std::string& path) : f_(path) {
    if (!f_) throw std::runtime_error("cannot open trace for writing: " + path);
    f_ << "# ngtc-trace v1\n";
    f_ << "# t x y z xr yr zr vx vy vz qw qx qy qz wx wy wz u1 u2 u3 u4 "
          "aqx aqy aqz fx fy fz err flags\n";
  }

  void row(double t, const QuadState<double>& s, const ReferenceState& ref,
           const Eigen::Vector4d& u, const Eigen::Vector3d& aq, const Eigen::Vector3d& f,
           double err, uint32_t flags) {
    const double cols[28] = {t,       s.x[0],  s.x[1],  s.x[2],  ref.x[0], ref.x[1], ref.x[2],
                             s.v[0],  s.v[1],  s.v[2],  s.q.w,   s.q.x,    s.q.y,    s.q.z,
                             s.omega[0], s.omega[1], s.omega[2], u[0],  u[1],  u[2],  u[3],
                             aq[0],   aq[1],   aq[2],   f[0],    f[1],     f[2],     err};
    for (double c : cols) f_ << format_exact(c) << ' ';
    f_ << flags << '\n';
  }

 private:
  std::ofstream f_;
};

struct TraceRow {
  std::vector<double> cols;
  uint32_t flags = 0;
};

inline std::vector<TraceRow> read_trace(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open trace: " + path);
  std::string line;
  if (!std::getline(f, line) || line != "# ngtc-trace v1")
    throw std::runtime_error("trace: bad or missing header");
  std::vector<TraceRow> rows;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    TraceRow r;
    double v;
    while (ss >> v) r.cols.push_back(v);
    if (r.cols.empty()) continue;
    r.flags = static_cast<uint32_t>(r.cols.back());
    r.cols.pop_back();
    rows.push_back(std::move(r));
  }
  return rows;
}

inline RunResult run_experiment(const QuadParams& nominal, const Gains& gains,
                                const ExperimentSpec& ex, const RenWeights* ren = nullptr,
                                double aq_scale = 20.0, TraceWriter* trace = nullptr) {
  QuadParams plant = nominal;
  plant.mass *= ex.mass_factor;
  plant.tau_mot *= ex.tau_factor;
  plant.drag *= ex.drag_factor;

  typename TrackingController<double>::Options opt;
  opt.augment = (ex.kind == ControllerKind::kNgtc);
  opt.aq_scale = aq_scale;
  opt.alloc = AllocMode::kExactQp;
  opt.dt = ex.dt;
  TrackingController<double> controller(nominal, gains, opt, ren);

  ReferenceStream stream(ex.traj);
  ReferenceWindow win = build_window(stream, 0.0, ex.dt);
  QuadState<double> state = initial_state_on_reference(nominal, win.now);

  const int n_steps = static_cast<int>(std::round(ex.duration / ex.dt));
  const int skip = static_cast<int>(std::round(kRmseTransientS / ex.dt));
  Rng noise(ex.noise_seed);

  RunResult out;
  std::vector<double> lat_us;
  lat_us.reserve(n_steps);
  double err_sq = 0.0;
  int err_terms = 0;
  int sat_steps = 0;
  bool aborted = false;
  Eigen::Vector4d last_u = Eigen::Vector4d::Zero();

  for (int k = 0; k < n_steps; ++k) {
    const double t = k * ex.dt;
    if (k > 0) win = build_window(stream, t, ex.dt);

    const auto tic = std::chrono::steady_clock::now();
    const ControlCommand<double> cmd = controller.step(state, win);
    const auto toc = std::chrono::steady_clock::now();
    lat_us.push_back(std::chrono::duration<double, std::micro>(toc - tic).count());

    out.flags |= cmd.flags;
    const double err = (state.x - win.now.x).norm();
    if (k >= skip) {
      err_sq += err * err;
      ++err_terms;
    }
    out.peak_err = std::max(out.peak_err, err);
    if (err > kCrashErrorM) out.crashed = true;

    if (!detail::rollout_values_finite(state, cmd)) {
      out.crashed = true;
      out.nonfinite = true;
      out.steps = k;
      aborted = true;
      break;
    }

    bool saturated = false;
    for (int i = 0; i < 4; ++i)
      saturated = saturated || cmd.thrusts[i] <= nominal.u_min + 1e-9 ||
                  cmd.thrusts[i] >= nominal.u_max - 1e-9;
    if (saturated) ++sat_steps;

    Disturbance d;
    if (t >= ex.f_on && t < ex.f_off) d.force = ex.f_ext;
    d.torque = ex.tau_ext;
    if (ex.noise_frac > 0.0) {
      d.force += ex.noise_frac * ex.f_ext.norm() * noise.normal3();
      d.torque += ex.noise_frac * ex.tau_ext.norm() * noise.normal3();
    }

    if (trace) {
      Eigen::Vector3d aq(0.0, 0.0, 0.0);
      if (opt.augment)
        for (int i = 0; i < 3; ++i) aq[i] = controller.last_aq()[i];
      last_u = Eigen::Vector4d(cmd.thrusts[0], cmd.thrusts[1], cmd.thrusts[2], cmd.thrusts[3]);
      trace->row(t, state, win.now, last_u, aq, d.force, err, cmd.flags);
    }

    state = rk4_step(plant, state, cmd.thrusts, d, ex.dt, ex.plant_drag);
    out.steps = k + 1;
  }

  // Terminal sample: the state the final step produced, at t = duration.  It
  // closes the trace (duration/dt + 1 rows) and joins the error statistics so
  // an RMSE recomputed from the file matches the in-memory value exactly.
  if (!aborted && n_steps > 0) {
    win = build_window(stream, n_steps * ex.dt, ex.dt);
    const double err = (state.x - win.now.x).norm();
    if (n_steps >= skip) {
      err_sq += err * err;
      ++err_terms;
    }
    out.peak_err = std::max(out.peak_err, err);
    if (err > kCrashErrorM) out.crashed = true;
    if (trace)
      trace->row(n_steps * ex.dt, state, win.now, last_u, Eigen::Vector3d::Zero(),
                 Eigen::Vector3d::Zero(), err, 0);
  }

  out.rmse = std::sqrt(err_sq / std::max(err_terms, 1));
  out.saturation_frac = static_cast<double>(sat_steps) / std::max(out.steps, 1);

  if (!lat_us.empty()) {
    std::sort(lat_us.begin(), lat_us.end());
    out.median_us = lat_us[lat_us.size() / 2];
    out.p99_us = lat_us[static_cast<size_t>(0.99 * (lat_us.size() - 1))];
    out.max_us = lat_us.back();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Accuracy suite: the named trajectories, nominal plant with drag.
// ---------------------------------------------------------------------------

struct TrajectoryDefaults {
  double hloop_radius = 5.0, hloop_speed = 8.0;
  double vloop_radius = 3.0, vloop_speed = 6.5;
  double lem_scale = 5.0, lem_speed = 9.0;
  // Deliberately infeasible variants (same geometry, more speed).
  double hloop_fast_speed = 16.5;
  double vloop_fast_speed = 12.0;
  double lem_fast_speed = 16.0;
  double duration = 8.0;
};

inline std::vector<TrajectorySpec> accuracy_trajectories(const TrajectoryDefaults& g) {
  std::vector<TrajectorySpec> out;
  out.push_back(make_hover(Eigen::Vector3d::Zero(), g.duration));
  out.push_back(make_horizontal_loop(g.hloop_radius, g.hloop_speed, g.duration));
  out.push_back(make_vertical_loop(g.vloop_radius, g.vloop_speed, g.duration));
  out.push_back(make_lemniscate(g.lem_scale, g.lem_speed, g.duration));
  TrajectorySpec s = make_horizontal_loop(g.hloop_radius, g.hloop_fast_speed, g.duration);
  s.name = "hloop*";
  out.push_back(s);
  s = make_vertical_loop(g.vloop_radius, g.vloop_fast_speed, g.duration);
  s.name = "vloop*";
  out.push_back(s);
  s = make_lemniscate(g.lem_scale, g.lem_fast_speed, g.duration);
  s.name = "lemniscate*";
  out.push_back(s);
  return out;
}

struct AccuracyRow {
  std::string traj;
  bool feasible = false;
  double peak_ratio = 0.0;
  RunResult dfbc, ngtc;
};

inline std::vector<AccuracyRow> bench_accuracy(const QuadParams& p, const Gains& gains,
                                               const TrajectoryDefaults& geo,
                                               const RenWeights* ren, double aq_scale = 20.0) {
  std::vector<AccuracyRow> rows;
  for (const TrajectorySpec& traj : accuracy_trajectories(geo)) {
    AccuracyRow row;
    row.traj = traj.name;
    const ClassifyResult c = feasibility_classify(p, traj);
    row.feasible = c.feasible;
    row.peak_ratio = c.peak_ratio;

    ExperimentSpec ex;
    ex.traj = traj;
    ex.duration = geo.duration;
    ex.kind = ControllerKind::kDfbc;
    row.dfbc = run_experiment(p, gains, ex, nullptr, aq_scale);
    if (ren) {
      ex.kind = ControllerKind::kNgtc;
      row.ngtc = run_experiment(p, gains, ex, ren, aq_scale);
    }
    rows.push_back(row);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Robustness suite: parameter perturbations and external forces over
// randomized feasible trajectories, both controllers on identical conditions.
// ---------------------------------------------------------------------------

struct RobustnessCase {
  std::string name;
  double mass_factor = 1.0, tau_factor = 1.0, drag_factor = 1.0;
  double force_mag = 0.0;  // N, direction randomized per run
};

inline std::vector<RobustnessCase> robustness_cases() {
  return {
      {"drag+50%", 1.0, 1.0, 1.5, 0.0}, {"tau+30%", 1.0, 1.3, 1.0, 0.0},
      {"mass-30%", 0.7, 1.0, 1.0, 0.0}, {"mass+30%", 1.3, 1.0, 1.0, 0.0},
      {"force10N", 1.0, 1.0, 1.0, 10.0}, {"force15N", 1.0, 1.0, 1.0, 15.0},
  };
}

// Statistics for one (perturbation, controller) cell.  Mean/std are over the
// non-crashed runs only; an all-crash cell keeps NaN statistics and is
// reported through its crash count.
struct RobustnessCell {
  double rmse_mean = std::numeric_limits<double>::quiet_NaN();
  double rmse_std = std::numeric_limits<double>::quiet_NaN();
  double peak_mean = std::numeric_limits<double>::quiet_NaN();
  int crashes = 0;
  int runs = 0;
};

struct RobustnessRow {
  RobustnessCase c;
  RobustnessCell dfbc, ngtc;
};

inline void accumulate(RobustnessCell& cell, const std::vector<double>& rmses,
                       const std::vector<double>& peaks, int crashes, int runs) {
  cell.runs = runs;
  cell.crashes = crashes;
  if (rmses.empty()) return;
  double mean = 0.0;
  for (double r : rmses) mean += r;
  mean /= rmses.size();
  double var = 0.0;
  for (double r : rmses) var += (r - mean) * (r - mean);
  cell.rmse_mean = mean;
  cell.rmse_std = rmses.size() > 1 ? std::sqrt(var / (rmses.size() - 1)) : 0.0;
  double pk = 0.0;
  for (double x : peaks) pk += x;
  cell.peak_mean = pk / peaks.size();
}

inline std::vector<RobustnessRow> bench_robustness(const QuadParams& p, const Gains& gains,
                                                   const RenWeights* ren, double aq_scale,
                                                   int runs, uint64_t seed,
                                                   const SampleRanges& ranges = SampleRanges{}) {
  std::vector<RobustnessRow> rows;
  const std::vector<RobustnessCase> cases = robustness_cases();
  for (size_t ci = 0; ci < cases.size(); ++ci) {
    RobustnessRow row;
    row.c = cases[ci];
    std::vector<double> rmse_d, rmse_n, peak_d, peak_n;
    int crash_d = 0, crash_n = 0;
    for (int r = 0; r < runs; ++r) {
      const uint64_t run_seed = seed_stream(seed, ci * 4096 + static_cast<uint64_t>(r));
      // One feasible random trajectory and one force direction per run,
      // shared by both controllers.
      const Dataset one = sample_dataset(p, ranges, 1, run_seed);
      ExperimentSpec ex;
      ex.traj = make_lissajous(one.items[0].shape);
      ex.duration = one.items[0].shape.duration;
      ex.mass_factor = row.c.mass_factor;
      ex.tau_factor = row.c.tau_factor;
      ex.drag_factor = row.c.drag_factor;
      if (row.c.force_mag > 0.0) {
        Rng dir(seed_stream(run_seed, 7));
        ex.f_ext = row.c.force_mag * dir.unit_vector();
      }
      ex.kind = ControllerKind::kDfbc;
      const RunResult rd = run_experiment(p, gains, ex, nullptr, aq_scale);
      if (rd.crashed) {
        ++crash_d;
      } else {
        rmse_d.push_back(rd.rmse);
        peak_d.push_back(rd.peak_err);
      }
      if (ren) {
        ex.kind = ControllerKind::kNgtc;
        const RunResult rn = run_experiment(p, gains, ex, ren, aq_scale);
        if (rn.crashed) {
          ++crash_n;
        } else {
          rmse_n.push_back(rn.rmse);
          peak_n.push_back(rn.peak_err);
        }
      }
    }
    accumulate(row.dfbc, rmse_d, peak_d, crash_d, runs);
    accumulate(row.ngtc, rmse_n, peak_n, crash_n, ren ? runs : 0);
    rows.push_back(row);
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Timing suite: controller step latency over randomized states.
// ---------------------------------------------------------------------------

struct TimingReport {
  double dfbc_median_us = 0.0, dfbc_p99_us = 0.0, dfbc_max_us = 0.0;
  double ngtc_median_us = 0.0, ngtc_p99_us = 0.0, ngtc_max_us = 0.0;
  int iters = 0;
};

namespace detail {
inline QuadState<double> random_timing_state(Rng& rng, const QuadParams& p) {
  QuadState<double> s;
  s.x = rng.normal3();
  s.v = 2.0 * rng.normal3();
  const Eigen::Vector3d rv = 0.3 * rng.normal3();
  const double a = rv.norm();
  if (a > 1e-12) {
    const Eigen::Vector3d ax = rv / a;
    s.q = Quat<double>{std::cos(a / 2.0), std::sin(a / 2.0) * ax[0],
                       std::sin(a / 2.0) * ax[1], std::sin(a / 2.0) * ax[2]};
  }
  s.omega = rng.normal3();
  for (int i = 0; i < 4; ++i) s.thrusts[i] = rng.uniform(p.u_min, p.u_max);
  return s;
}

inline void latency_stats(std::vector<double>& us, double& med, double& p99, double& mx) {
  std::sort(us.begin(), us.end());
  med = us[us.size() / 2];
  p99 = us[static_cast<size_t>(0.99 * (us.size() - 1))];
  mx = us.back();
}
}  // namespace detail

inline TimingReport bench_timing(const QuadParams& p, const Gains& gains,
                                 const RenWeights* ren, double aq_scale, int iters,
                                 uint64_t seed) {
  TimingReport rep;
  rep.iters = iters;
  TrajectorySpec hover = make_hover(Eigen::Vector3d::Zero(), 1e9);
  ReferenceStream stream(hover);
  const ReferenceWindow win = build_window(stream, 0.0, 0.01);

  // Identical state sequences for both controllers.
  std::vector<QuadState<double>> states(iters);
  {
    Rng rng(seed);
    for (int i = 0; i < iters; ++i) states[i] = detail::random_timing_state(rng, p);
  }

  {
    typename TrackingController<double>::Options opt;
    opt.augment = false;
    TrackingController<double> ctrl(p, gains, opt);
    std::vector<double> us(iters);
    for (int i = 0; i < iters; ++i) {
      const auto t0 = std::chrono::steady_clock::now();
      volatile double sink = value_of(ctrl.step(states[i], win).thrusts[0]);
      (void)sink;
      us[i] = std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - t0)
                  .count();
    }
    detail::latency_stats(us, rep.dfbc_median_us, rep.dfbc_p99_us, rep.dfbc_max_us);
  }
  if (ren) {
    typename TrackingController<double>::Options opt;
    opt.augment = true;
    opt.aq_scale = aq_scale;
    TrackingController<double> ctrl(p, gains, opt, ren);
    std::vector<double> us(iters);
    for (int i = 0; i < iters; ++i) {
      const auto t0 = std::chrono::steady_clock::now();
      volatile double sink = value_of(ctrl.step(states[i], win).thrusts[0]);
      (void)sink;
      us[i] = std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - t0)
                  .count();
    }
    detail::latency_stats(us, rep.ngtc_median_us, rep.ngtc_p99_us, rep.ngtc_max_us);
  }
  return rep;
}

}  // namespace ngtc

#endif  // NGTC_BENCH_HPP
