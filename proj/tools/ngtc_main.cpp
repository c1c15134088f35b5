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

// Command-line workbench: dataset generation, training, single simulations,
// and the accuracy / robustness / timing benchmark suites.
//
// Exit codes: 0 success; 2 configuration or argument error; 3 the requested
// run or suite was crash-dominated (or training diverged).

#include <cstdint>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "ngtc/bench.hpp"
#include "ngtc/config.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitCrashDominated = 3;

// Output sink: `--out path` or stdout.
class Sink {
 public:
  explicit Sink(const std::string& path) {
    if (!path.empty()) {
      file_ = std::make_unique<std::ofstream>(path);
      if (!*file_) throw ngtc::ConfigError("cannot open output file: " + path);
    }
  }
  std::ostream& os() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

std::string fx(double v) { return ngtc::format_exact(v); }

ngtc::WorkbenchConfig load_or_default(const std::string& path) {
  if (path.empty()) return ngtc::WorkbenchConfig{};
  return ngtc::load_config(path);
}

// Resolve a trajectory by name against the configured benchmark geometry.
ngtc::TrajectorySpec resolve_trajectory(const std::string& name,
                                        const ngtc::TrajectoryDefaults& geo, double duration,
                                        double circle_v, double circle_a) {
  using namespace ngtc;
  if (name == "hover") return make_hover(Eigen::Vector3d::Zero(), duration);
  if (name == "hloop") return make_horizontal_loop(geo.hloop_radius, geo.hloop_speed, duration);
  if (name == "vloop") return make_vertical_loop(geo.vloop_radius, geo.vloop_speed, duration);
  if (name == "lemniscate") return make_lemniscate(geo.lem_scale, geo.lem_speed, duration);
  if (name == "hloop*") {
    TrajectorySpec s = make_horizontal_loop(geo.hloop_radius, geo.hloop_fast_speed, duration);
    s.name = "hloop*";
    return s;
  }
  if (name == "vloop*") {
    TrajectorySpec s = make_vertical_loop(geo.vloop_radius, geo.vloop_fast_speed, duration);
    s.name = "vloop*";
    return s;
  }
  if (name == "lemniscate*") {
    TrajectorySpec s = make_lemniscate(geo.lem_scale, geo.lem_fast_speed, duration);
    s.name = "lemniscate*";
    return s;
  }
  if (name == "circle") return make_circle(circle_v, circle_a, duration);
  throw ngtc::ConfigError(
      "unknown trajectory '" + name +
      "' (expected hover, hloop, vloop, lemniscate, hloop*, vloop*, lemniscate*, circle)");
}

int cmd_gen_data(const std::string& config_path, const std::string& out_path, uint64_t seed,
                 int count, ngtc::SampleRanges ranges, double margin) {
  const ngtc::WorkbenchConfig cfg = load_or_default(config_path);
  const ngtc::Dataset ds = ngtc::sample_dataset(cfg.quad, ranges, count, seed, margin);
  Sink sink(out_path);
  ngtc::write_manifest(sink.os(), ds);
  std::cerr << "accepted " << ds.items.size() << " of " << ds.drawn << " draws (master seed "
            << seed << ")\n";
  return kExitOk;
}

int cmd_train(const std::string& config_path, const std::string& dataset_path,
              const std::string& checkpoint_path, const std::string& out_path, uint64_t seed,
              ngtc::TrainConfig tcfg) {
  const ngtc::WorkbenchConfig cfg = load_or_default(config_path);
  const ngtc::Dataset ds = ngtc::read_manifest(dataset_path);
  if (ds.items.empty()) throw ngtc::ConfigError("dataset is empty: " + dataset_path);

  tcfg.aq_scale = cfg.aq_scale;
  ngtc::RenConfig rcfg = cfg.ren;
  rcfg.m = ngtc::kRenInputSize;  // fixed by the controller interface
  rcfg.p = 3;

  Sink sink(out_path);
  sink.os() << "# ngtc-train v1\n# iter loss rmse grad_norm wall_s\n";
  const auto on_record = [&](const ngtc::TrainRecord& r) {
    sink.os() << r.iter << ' ' << fx(r.loss) << ' ' << fx(r.rmse) << ' ' << fx(r.grad_norm)
              << ' ' << fx(r.wall_s) << '\n';
    sink.os().flush();
    if (r.iter % 10 == 0 || r.iter == tcfg.iters - 1)
      std::cerr << "iter " << r.iter << "  loss " << r.loss << "  rmse " << r.rmse
                << "  |g| " << r.grad_norm << "\n";
  };

  const ngtc::TrainResult res = ngtc::train(rcfg, tcfg, cfg.quad, cfg.gains, cfg.loss, ds,
                                            seed, on_record, checkpoint_path);
  std::cerr << (res.diverged ? "training DIVERGED" : "training finished") << "; checkpoint: "
            << checkpoint_path << "; unstable rollouts: " << res.unstable_rollouts << "\n";
  return res.diverged ? kExitCrashDominated : kExitOk;
}

int cmd_simulate(const std::string& config_path, const std::string& checkpoint_path,
                 const std::string& out_path, const std::string& trace_path,
                 const std::string& traj_name, const std::string& controller, double duration,
                 double circle_v, double circle_a, ngtc::ExperimentSpec ex) {
  using namespace ngtc;
  const WorkbenchConfig cfg = load_or_default(config_path);
  const double dur = duration > 0.0 ? duration : cfg.geo.duration;
  ex.traj = resolve_trajectory(traj_name, cfg.geo, dur, circle_v, circle_a);
  ex.duration = dur;

  std::optional<RenWeights> ren;
  if (controller == "ngtc") {
    if (checkpoint_path.empty())
      throw ConfigError("--controller ngtc requires --checkpoint");
    ren = load_verified_weights(checkpoint_path);
    ex.kind = ControllerKind::kNgtc;
  } else if (controller == "dfbc") {
    ex.kind = ControllerKind::kDfbc;
  } else {
    throw ConfigError("unknown controller '" + controller + "' (expected dfbc or ngtc)");
  }

  RunResult r;
  if (!trace_path.empty()) {
    TraceWriter trace(trace_path);
    r = run_experiment(cfg.quad, cfg.gains, ex, ren ? &*ren : nullptr, cfg.aq_scale, &trace);
  } else {
    r = run_experiment(cfg.quad, cfg.gains, ex, ren ? &*ren : nullptr, cfg.aq_scale);
  }

  Sink sink(out_path);
  sink.os() << "# ngtc-run v1\n"
            << "# traj controller rmse peak_err crashed nonfinite saturation_frac steps flags "
               "median_us p99_us max_us\n"
            << ex.traj.name << ' ' << controller_name(ex.kind) << ' ' << fx(r.rmse) << ' '
            << fx(r.peak_err) << ' ' << (r.crashed ? 1 : 0) << ' ' << (r.nonfinite ? 1 : 0)
            << ' ' << fx(r.saturation_frac) << ' ' << r.steps << ' ' << r.flags << ' '
            << fx(r.median_us) << ' ' << fx(r.p99_us) << ' ' << fx(r.max_us) << '\n';
  return r.crashed ? kExitCrashDominated : kExitOk;
}

int cmd_bench_accuracy(const std::string& config_path, const std::string& checkpoint_path,
                       const std::string& out_path) {
  using namespace ngtc;
  const WorkbenchConfig cfg = load_or_default(config_path);
  std::optional<RenWeights> ren;
  if (!checkpoint_path.empty()) ren = load_verified_weights(checkpoint_path);

  const std::vector<AccuracyRow> rows =
      bench_accuracy(cfg.quad, cfg.gains, cfg.geo, ren ? &*ren : nullptr, cfg.aq_scale);

  Sink sink(out_path);
  sink.os() << "# ngtc-accuracy v1\n";
  if (!ren) sink.os() << "# warning: no checkpoint supplied; ngtc columns are nan\n";
  sink.os() << "# traj feasible peak_ratio dfbc_rmse dfbc_peak dfbc_crashed dfbc_sat "
               "ngtc_rmse ngtc_peak ngtc_crashed ngtc_sat\n";
  const double nan = std::numeric_limits<double>::quiet_NaN();
  int feasible_runs = 0, feasible_crashes = 0;
  for (const AccuracyRow& r : rows) {
    sink.os() << r.traj << ' ' << (r.feasible ? 1 : 0) << ' ' << fx(r.peak_ratio) << ' '
              << fx(r.dfbc.rmse) << ' ' << fx(r.dfbc.peak_err) << ' ' << (r.dfbc.crashed ? 1 : 0)
              << ' ' << fx(r.dfbc.saturation_frac);
    if (ren)
      sink.os() << ' ' << fx(r.ngtc.rmse) << ' ' << fx(r.ngtc.peak_err) << ' '
                << (r.ngtc.crashed ? 1 : 0) << ' ' << fx(r.ngtc.saturation_frac) << '\n';
    else
      sink.os() << ' ' << fx(nan) << ' ' << fx(nan) << " 0 " << fx(nan) << '\n';
    if (r.feasible) {
      ++feasible_runs;
      feasible_crashes += r.dfbc.crashed ? 1 : 0;
      if (ren) {
        ++feasible_runs;
        feasible_crashes += r.ngtc.crashed ? 1 : 0;
      }
    }
  }
  return 2 * feasible_crashes > feasible_runs ? kExitCrashDominated : kExitOk;
}

int cmd_bench_robustness(const std::string& config_path, const std::string& checkpoint_path,
                         const std::string& out_path, int runs, uint64_t seed) {
  using namespace ngtc;
  const WorkbenchConfig cfg = load_or_default(config_path);
  std::optional<RenWeights> ren;
  if (!checkpoint_path.empty()) ren = load_verified_weights(checkpoint_path);

  const std::vector<RobustnessRow> rows =
      bench_robustness(cfg.quad, cfg.gains, ren ? &*ren : nullptr, cfg.aq_scale, runs, seed);

  Sink sink(out_path);
  sink.os() << "# ngtc-robustness v1\n";
  if (!ren) sink.os() << "# warning: no checkpoint supplied; ngtc columns are nan\n";
  sink.os() << "# case runs dfbc_rmse_mean dfbc_rmse_std dfbc_peak_mean dfbc_crashes "
               "ngtc_rmse_mean ngtc_rmse_std ngtc_peak_mean ngtc_crashes\n";
  int total_runs = 0, total_crashes = 0;
  for (const RobustnessRow& r : rows) {
    sink.os() << r.c.name << ' ' << r.dfbc.runs << ' ' << fx(r.dfbc.rmse_mean) << ' '
              << fx(r.dfbc.rmse_std) << ' ' << fx(r.dfbc.peak_mean) << ' ' << r.dfbc.crashes
              << ' ' << fx(r.ngtc.rmse_mean) << ' ' << fx(r.ngtc.rmse_std) << ' '
              << fx(r.ngtc.peak_mean) << ' ' << r.ngtc.crashes << '\n';
    total_runs += r.dfbc.runs + r.ngtc.runs;
    total_crashes += r.dfbc.crashes + r.ngtc.crashes;
  }
  return 2 * total_crashes > total_runs ? kExitCrashDominated : kExitOk;
}

int cmd_bench_timing(const std::string& config_path, const std::string& checkpoint_path,
                     const std::string& out_path, int iters, uint64_t seed) {
  using namespace ngtc;
  const WorkbenchConfig cfg = load_or_default(config_path);
  std::optional<RenWeights> ren;
  if (!checkpoint_path.empty()) ren = load_verified_weights(checkpoint_path);

  const TimingReport rep =
      bench_timing(cfg.quad, cfg.gains, ren ? &*ren : nullptr, cfg.aq_scale, iters, seed);

  Sink sink(out_path);
  sink.os() << "# ngtc-timing v1\n# controller iters median_us p99_us max_us\n";
  sink.os() << "dfbc " << rep.iters << ' ' << fx(rep.dfbc_median_us) << ' '
            << fx(rep.dfbc_p99_us) << ' ' << fx(rep.dfbc_max_us) << '\n';
  if (ren)
    sink.os() << "ngtc " << rep.iters << ' ' << fx(rep.ngtc_median_us) << ' '
              << fx(rep.ngtc_p99_us) << ' ' << fx(rep.ngtc_max_us) << '\n';
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quadrotor trajectory-tracking workbench"};
  app.require_subcommand(1);

  std::string config_path, checkpoint_path, out_path, trace_path, dataset_path;
  uint64_t seed = 1;

  // gen-data ----------------------------------------------------------------
  CLI::App* gen = app.add_subcommand("gen-data", "Sample a feasible random trajectory dataset");
  int gen_count = 64;
  ngtc::SampleRanges ranges;
  double margin = 0.10;
  gen->add_option("--config", config_path, "flat key = value config file");
  gen->add_option("--seed", seed, "master RNG seed");
  gen->add_option("--out", out_path, "manifest output path (default: stdout)");
  gen->add_option("--count", gen_count, "number of feasible trajectories to accept");
  gen->add_option("--amp-xy", ranges.amp_xy, "max horizontal amplitude, m");
  gen->add_option("--amp-z", ranges.amp_z, "max vertical amplitude, m");
  gen->add_option("--omega-max", ranges.omega, "max angular frequency, rad/s");
  gen->add_option("--episode-s", ranges.duration, "trajectory duration, s");
  gen->add_option("--margin", margin, "feasibility margin on normalized rotor demand");

  // train ---------------------------------------------------------------
  CLI::App* tr = app.add_subcommand("train", "Train the augmentation network");
  ngtc::TrainConfig tcfg;
  tr->add_option("--config", config_path, "flat key = value config file");
  tr->add_option("--seed", seed, "master RNG seed");
  tr->add_option("--dataset", dataset_path, "dataset manifest from gen-data")->required();
  tr->add_option("--checkpoint", checkpoint_path, "checkpoint output path")->required();
  tr->add_option("--out", out_path, "training log path (default: stdout)");
  tr->add_option("--iters", tcfg.iters, "optimizer iterations");
  tr->add_option("--batch", tcfg.batch, "rollouts per iteration");
  tr->add_option("--episode-s", tcfg.episode_s, "rollout length, s");
  tr->add_option("--lr", tcfg.lr, "optimizer step size");
  tr->add_option("--force-max", tcfg.force_max, "constant-force cap, N");
  tr->add_option("--torque-max", tcfg.torque_max, "constant-torque cap, N m");
  tr->add_option("--noise-frac", tcfg.noise_frac, "per-step noise fraction of the draw");
  tr->add_option("--checkpoint-every", tcfg.checkpoint_every,
                 "also save every N iterations (0: only at the end)");

  // simulate ------------------------------------------------------------
  CLI::App* sim = app.add_subcommand("simulate", "Run one closed-loop experiment");
  std::string traj_name = "hover", controller = "dfbc";
  double duration = 0.0, circle_v = 15.0, circle_a = 45.0;
  ngtc::ExperimentSpec ex;
  sim->add_option("--config", config_path, "flat key = value config file");
  sim->add_option("--seed", seed, "noise RNG seed");
  sim->add_option("--checkpoint", checkpoint_path, "trained checkpoint (ngtc only)");
  sim->add_option("--out", out_path, "summary output path (default: stdout)");
  sim->add_option("--trace", trace_path, "per-step trace output path");
  sim->add_option("--traj", traj_name,
                  "hover|hloop|vloop|lemniscate|hloop*|vloop*|lemniscate*|circle");
  sim->add_option("--controller", controller, "dfbc | ngtc");
  sim->add_option("--duration", duration, "override run duration, s");
  sim->add_option("--circle-v", circle_v, "circle peak speed, m/s");
  sim->add_option("--circle-a", circle_a, "circle centripetal acceleration, m/s^2");
  sim->add_option("--mass-factor", ex.mass_factor, "plant mass scale");
  sim->add_option("--tau-factor", ex.tau_factor, "plant motor-lag scale");
  sim->add_option("--drag-factor", ex.drag_factor, "plant drag scale");
  double fx_n = 0.0, fy_n = 0.0, fz_n = 0.0;
  sim->add_option("--fx", fx_n, "external force x, N (world)");
  sim->add_option("--fy", fy_n, "external force y, N (world)");
  sim->add_option("--fz", fz_n, "external force z, N (world)");
  sim->add_option("--f-on", ex.f_on, "force window start, s");
  sim->add_option("--f-off", ex.f_off, "force window end, s");
  sim->add_option("--noise-frac", ex.noise_frac, "per-step noise fraction of the force");

  // bench suites ----------------------------------------------------------
  CLI::App* ba = app.add_subcommand("bench-accuracy", "Tracking-accuracy table");
  ba->add_option("--config", config_path, "flat key = value config file");
  ba->add_option("--checkpoint", checkpoint_path, "trained checkpoint");
  ba->add_option("--out", out_path, "table output path (default: stdout)");

  CLI::App* br = app.add_subcommand("bench-robustness", "Model-mismatch robustness table");
  int runs = 10;
  br->add_option("--config", config_path, "flat key = value config file");
  br->add_option("--checkpoint", checkpoint_path, "trained checkpoint");
  br->add_option("--out", out_path, "table output path (default: stdout)");
  br->add_option("--runs", runs, "random trajectories per perturbation case");
  br->add_option("--seed", seed, "master RNG seed");

  CLI::App* bt = app.add_subcommand("bench-timing", "Controller step latency");
  int iters = 10000;
  bt->add_option("--config", config_path, "flat key = value config file");
  bt->add_option("--checkpoint", checkpoint_path, "trained checkpoint");
  bt->add_option("--out", out_path, "table output path (default: stdout)");
  bt->add_option("--iters", iters, "measurement iterations");
  bt->add_option("--seed", seed, "state-sampling seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(config_path, out_path, seed, gen_count, ranges, margin);
    if (tr->parsed())
      return cmd_train(config_path, dataset_path, checkpoint_path, out_path, seed, tcfg);
    if (sim->parsed()) {
      ex.f_ext = Eigen::Vector3d(fx_n, fy_n, fz_n);
      ex.noise_seed = seed;
      if (!checkpoint_path.empty() && controller == "dfbc") controller = "ngtc";
      return cmd_simulate(config_path, checkpoint_path, out_path, trace_path, traj_name,
                          controller, duration, circle_v, circle_a, ex);
    }
    if (ba->parsed()) return cmd_bench_accuracy(config_path, checkpoint_path, out_path);
    if (br->parsed())
      return cmd_bench_robustness(config_path, checkpoint_path, out_path, runs, seed);
    if (bt->parsed()) return cmd_bench_timing(config_path, checkpoint_path, out_path, iters, seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
