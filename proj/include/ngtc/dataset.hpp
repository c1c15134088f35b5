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

#ifndef NGTC_DATASET_HPP
#define NGTC_DATASET_HPP

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ngtc/common.hpp"
#include "ngtc/controller.hpp"
#include "ngtc/trajectory.hpp"

namespace ngtc {

// Result of the kinodynamic feasibility check of a reference trajectory.
// `peak_ratio` is the worst normalized rotor demand over the trajectory:
// (u - u_min)/(u_max - u_min) inside the box (1.0 exactly on the upper
// bound), and 1 + (u_min - u)/(u_max - u_min) for demands below the box, so
// any value above 1.0 means a violated bound on either side.
struct ClassifyResult {
  bool feasible = false;
  double peak_ratio = 0.0;
  uint32_t flags = 0;  // ControlFlag bits raised along the reference
};

// Classify a reference by running the differential-flatness map on a 1 ms
// grid: thrust/attitude from the acceleration, body rates from the jerk,
// torques from numerically differentiated body rates, and per-rotor demands
// from the inverse allocation.  Feasible iff every demand stays within
// `margin` of the box and no singular branch fires.
inline ClassifyResult feasibility_classify(const QuadParams& p, const TrajectorySpec& spec,
                                           double margin = 0.10) {
  constexpr double h = 1e-3;
  const int n = static_cast<int>(std::round(spec.shape.duration / h)) + 1;

  std::vector<double> thrust(n);
  std::vector<Eigen::Vector3d> omega(n);
  ClassifyResult out;
  out.feasible = true;

  ReferenceStream stream(spec);
  ControllerMemory<double> mem;
  for (int k = 0; k < n; ++k) {
    const double t = k * h;
    const ReferenceState r = stream.sample(t);
    ThrustAttitude<double> ta = thrust_and_attitude(p, r.a, r.psi, mem);
    RateFeedForward<double> ff =
        angular_velocity_reference(p.mass, ta.R, ta.thrust, r.j, r.dpsi);
    out.flags |= ta.flags | ff.flags;
    thrust[k] = ta.thrust;
    omega[k] = ff.omega;
  }
  if (out.flags & (kFlagThrustSingular | kFlagFeedforwardOff)) out.feasible = false;

  const Eigen::Matrix4d B_inv = allocation_matrix(p).inverse();
  const double range = p.u_max - p.u_min;
  for (int k = 0; k < n; ++k) {
    Eigen::Vector3d dw;
    if (k == 0) dw = (omega[1] - omega[0]) / h;
    else if (k == n - 1) dw = (omega[n - 1] - omega[n - 2]) / h;
    else dw = (omega[k + 1] - omega[k - 1]) / (2.0 * h);

    const Eigen::Vector3d jw(p.inertia[0] * omega[k][0], p.inertia[1] * omega[k][1],
                             p.inertia[2] * omega[k][2]);
    const Eigen::Vector3d mu =
        Eigen::Vector3d(p.inertia[0] * dw[0], p.inertia[1] * dw[1], p.inertia[2] * dw[2]) +
        omega[k].cross(jw);
    const Eigen::Vector4d u = B_inv * Eigen::Vector4d(thrust[k], mu[0], mu[1], mu[2]);
    for (int i = 0; i < 4; ++i) {
      const double ratio = u[i] >= p.u_min ? (u[i] - p.u_min) / range
                                           : 1.0 + (p.u_min - u[i]) / range;
      out.peak_ratio = std::max(out.peak_ratio, ratio);
    }
  }
  if (out.peak_ratio > 1.0 + margin) out.feasible = false;
  return out;
}

// Sampling ranges for randomized training trajectories.
struct SampleRanges {
  double amp_xy = 20.0;   // m
  double amp_z = 3.0;     // m
  double omega = 5.0;     // rad/s
  double duration = 4.0;  // s
};

struct DatasetItem {
  LissajousSpec shape;
  uint64_t seed = 0;       // stream seed the item was drawn from
  double peak_ratio = 0.0;
};

struct Dataset {
  std::vector<DatasetItem> items;
  uint64_t master_seed = 0;
  double margin = 0.10;
  uint64_t drawn = 0;  // total candidates examined
};

inline LissajousSpec draw_lissajous(Rng& rng, const SampleRanges& ranges) {
  LissajousSpec s;
  s.amp = Eigen::Vector3d(rng.uniform(0.0, ranges.amp_xy), rng.uniform(0.0, ranges.amp_xy),
                          rng.uniform(0.0, ranges.amp_z));
  s.omega = Eigen::Vector3d(rng.uniform(0.0, ranges.omega), rng.uniform(0.0, ranges.omega),
                            rng.uniform(0.0, ranges.omega));
  s.phase = Eigen::Vector3d(rng.uniform(0.0, 2.0 * kPi), rng.uniform(0.0, 2.0 * kPi),
                            rng.uniform(0.0, 2.0 * kPi));
  s.duration = ranges.duration;
  return s;
}

// Rejection-sample `count` feasible random trajectories.  Every candidate is
// drawn from its own counter-derived stream, so the accepted set depends only
// on the master seed, not on iteration order or rejected draws.
inline Dataset sample_dataset(const QuadParams& p, const SampleRanges& ranges, int count,
                              uint64_t master_seed, double margin = 0.10) {
  Dataset ds;
  ds.master_seed = master_seed;
  ds.margin = margin;
  constexpr uint64_t kMinDraws = 100000;
  for (uint64_t k = 0; static_cast<int>(ds.items.size()) < count; ++k) {
    if (k >= kMinDraws && static_cast<double>(ds.items.size()) < 0.01 * static_cast<double>(k))
      throw std::runtime_error("sample_dataset: acceptance rate below 1%, check ranges");
    const uint64_t seed = seed_stream(master_seed, k);
    Rng rng(seed);
    const LissajousSpec shape = draw_lissajous(rng, ranges);
    const ClassifyResult c = feasibility_classify(p, make_lissajous(shape), margin);
    ++ds.drawn;
    if (c.feasible) ds.items.push_back(DatasetItem{shape, seed, c.peak_ratio});
  }
  return ds;
}

// ---------------------------------------------------------------------------
// Manifest serialization: line-oriented text, doubles printed exactly.
// ---------------------------------------------------------------------------

inline void write_manifest(std::ostream& os, const Dataset& ds) {
  os << "# ngtc-dataset v1\n";
  os << "master_seed " << ds.master_seed << "\n";
  os << "margin " << format_exact(ds.margin) << "\n";
  os << "drawn " << ds.drawn << "\n";
  os << "count " << ds.items.size() << "\n";
  for (const DatasetItem& it : ds.items) {
    os << "item seed=" << it.seed;
    const char* keys[9] = {"ax", "ay", "az", "wx", "wy", "wz", "px", "py", "pz"};
    const double vals[9] = {it.shape.amp[0],   it.shape.amp[1],   it.shape.amp[2],
                            it.shape.omega[0], it.shape.omega[1], it.shape.omega[2],
                            it.shape.phase[0], it.shape.phase[1], it.shape.phase[2]};
    for (int i = 0; i < 9; ++i) os << " " << keys[i] << "=" << format_exact(vals[i]);
    os << " dur=" << format_exact(it.shape.duration);
    os << " ratio=" << format_exact(it.peak_ratio) << "\n";
  }
}

inline void write_manifest(const std::string& path, const Dataset& ds) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open manifest for writing: " + path);
  write_manifest(f, ds);
}

inline Dataset read_manifest(std::istream& is) {
  Dataset ds;
  std::string line;
  if (!std::getline(is, line) || line != "# ngtc-dataset v1")
    throw std::runtime_error("manifest: bad or missing header");
  size_t expected = 0;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag == "master_seed") ss >> ds.master_seed;
    else if (tag == "margin") ss >> ds.margin;
    else if (tag == "drawn") ss >> ds.drawn;
    else if (tag == "count") ss >> expected;
    else if (tag == "item") {
      DatasetItem it;
      std::string kv;
      while (ss >> kv) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
          throw std::runtime_error("manifest: malformed item field: " + kv);
        const std::string key = kv.substr(0, eq);
        const std::string val = kv.substr(eq + 1);
        if (key == "seed") it.seed = std::stoull(val);
        else if (key == "ax") it.shape.amp[0] = std::stod(val);
        else if (key == "ay") it.shape.amp[1] = std::stod(val);
        else if (key == "az") it.shape.amp[2] = std::stod(val);
        else if (key == "wx") it.shape.omega[0] = std::stod(val);
        else if (key == "wy") it.shape.omega[1] = std::stod(val);
        else if (key == "wz") it.shape.omega[2] = std::stod(val);
        else if (key == "px") it.shape.phase[0] = std::stod(val);
        else if (key == "py") it.shape.phase[1] = std::stod(val);
        else if (key == "pz") it.shape.phase[2] = std::stod(val);
        else if (key == "dur") it.shape.duration = std::stod(val);
        else if (key == "ratio") it.peak_ratio = std::stod(val);
        else throw std::runtime_error("manifest: unknown item field: " + key);
      }
      ds.items.push_back(it);
    } else {
      throw std::runtime_error("manifest: unknown line tag: " + tag);
    }
  }
  if (expected != ds.items.size())
    throw std::runtime_error("manifest: item count mismatch");
  return ds;
}

inline Dataset read_manifest(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open manifest: " + path);
  return read_manifest(f);
}

}  // namespace ngtc

#endif  // NGTC_DATASET_HPP
