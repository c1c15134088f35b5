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

#ifndef NGTC_CONFIG_HPP
#define NGTC_CONFIG_HPP

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "ngtc/bench.hpp"
#include "ngtc/params.hpp"
#include "ngtc/ren.hpp"
#include "ngtc/training.hpp"

namespace ngtc {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Everything the workbench can be tuned with, initialized to the documented
// defaults.  A config file is flat `key = value` text; `#` starts a comment;
// vector-valued keys accept one value (broadcast) or one per component.
struct WorkbenchConfig {
  QuadParams quad;
  Gains gains;
  RenConfig ren;           // note: input/output sizes are fixed by the interface
  LossWeights loss;
  TrajectoryDefaults geo;
  double aq_scale = 20.0;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

inline std::vector<double> parse_numbers(const std::string& text, const std::string& key) {
  std::string cleaned = text;
  for (char& c : cleaned)
    if (c == ',') c = ' ';
  std::istringstream ss(cleaned);
  std::vector<double> out;
  std::string tok;
  while (ss >> tok) {
    if (tok == "on" || tok == "true" || tok == "yes") { out.push_back(1.0); continue; }
    if (tok == "off" || tok == "false" || tok == "no") { out.push_back(0.0); continue; }
    size_t used = 0;
    double v;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      throw ConfigError("config: bad numeric value for '" + key + "': " + tok);
    }
    if (used != tok.size())
      throw ConfigError("config: bad numeric value for '" + key + "': " + tok);
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("config: missing value for '" + key + "'");
  return out;
}

inline void broadcast3(Eigen::Vector3d& dst, const std::vector<double>& v,
                       const std::string& key) {
  if (v.size() == 1) dst.setConstant(v[0]);
  else if (v.size() == 3) dst = Eigen::Vector3d(v[0], v[1], v[2]);
  else throw ConfigError("config: '" + key + "' wants 1 or 3 values");
}

inline void broadcast4(Eigen::Vector4d& dst, const std::vector<double>& v,
                       const std::string& key) {
  if (v.size() == 1) dst.setConstant(v[0]);
  else if (v.size() == 4) dst = Eigen::Vector4d(v[0], v[1], v[2], v[3]);
  else throw ConfigError("config: '" + key + "' wants 1 or 4 values");
}

inline double single(const std::vector<double>& v, const std::string& key) {
  if (v.size() != 1) throw ConfigError("config: '" + key + "' wants exactly 1 value");
  return v[0];
}

}  // namespace detail

inline void apply_config_entry(WorkbenchConfig& c, const std::string& key,
                               const std::vector<double>& v) {
  using detail::broadcast3;
  using detail::broadcast4;
  using detail::single;
  // Vehicle.
  if (key == "mass") c.quad.mass = single(v, key);
  else if (key == "inertia_xx") c.quad.inertia[0] = single(v, key);
  else if (key == "inertia_yy") c.quad.inertia[1] = single(v, key);
  else if (key == "inertia_zz") c.quad.inertia[2] = single(v, key);
  else if (key == "arm_length") c.quad.arm_length = single(v, key);
  else if (key == "arm_angle_deg") c.quad.arm_angle_deg = single(v, key);
  else if (key == "u_min") c.quad.u_min = single(v, key);
  else if (key == "u_max") c.quad.u_max = single(v, key);
  else if (key == "tau_mot") c.quad.tau_mot = single(v, key);
  else if (key == "kappa") c.quad.kappa = single(v, key);
  else if (key == "drag_x") c.quad.drag[0] = single(v, key);
  else if (key == "drag_y") c.quad.drag[1] = single(v, key);
  else if (key == "drag_z") c.quad.drag[2] = single(v, key);
  else if (key == "g") c.quad.g = single(v, key);
  // Controller gains.
  else if (key == "kx") broadcast3(c.gains.kx, v, key);
  else if (key == "kv") broadcast3(c.gains.kv, v, key);
  else if (key == "kq_xy") c.gains.kq_xy = single(v, key);
  else if (key == "kq_z") c.gains.kq_z = single(v, key);
  else if (key == "komega") broadcast3(c.gains.komega, v, key);
  else if (key == "wc_t") c.gains.wc[0] = single(v, key);
  else if (key == "wc_mx") c.gains.wc[1] = single(v, key);
  else if (key == "wc_my") c.gains.wc[2] = single(v, key);
  else if (key == "wc_mz") c.gains.wc[3] = single(v, key);
  // Learned augmentation.
  else if (key == "ren_state_size") c.ren.n = static_cast<int>(single(v, key));
  else if (key == "ren_hidden_size") c.ren.q = static_cast<int>(single(v, key));
  else if (key == "ren_alpha") c.ren.alpha = single(v, key);
  else if (key == "ren_eps") c.ren.eps = single(v, key);
  else if (key == "ren_gamma") c.ren.gamma = single(v, key);
  else if (key == "aq_scale") c.aq_scale = single(v, key);
  // Training loss weights.
  else if (key == "loss_qx") broadcast3(c.loss.qx, v, key);
  else if (key == "loss_qv") broadcast3(c.loss.qv, v, key);
  else if (key == "loss_qq") broadcast3(c.loss.qq, v, key);
  else if (key == "loss_qomega") broadcast3(c.loss.qomega, v, key);
  else if (key == "loss_qu") broadcast4(c.loss.qu, v, key);
  // Benchmark geometry.
  else if (key == "hloop_radius") c.geo.hloop_radius = single(v, key);
  else if (key == "hloop_speed") c.geo.hloop_speed = single(v, key);
  else if (key == "vloop_radius") c.geo.vloop_radius = single(v, key);
  else if (key == "vloop_speed") c.geo.vloop_speed = single(v, key);
  else if (key == "lem_scale") c.geo.lem_scale = single(v, key);
  else if (key == "lem_speed") c.geo.lem_speed = single(v, key);
  else if (key == "hloop_fast_speed") c.geo.hloop_fast_speed = single(v, key);
  else if (key == "vloop_fast_speed") c.geo.vloop_fast_speed = single(v, key);
  else if (key == "lem_fast_speed") c.geo.lem_fast_speed = single(v, key);
  else if (key == "bench_duration") c.geo.duration = single(v, key);
  else throw ConfigError("config: unknown key '" + key + "'");
}

inline WorkbenchConfig parse_config(std::istream& is) {
  WorkbenchConfig c;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: line " + std::to_string(lineno) + " has no '='");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string val = detail::trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigError("config: line " + std::to_string(lineno) + " has empty key");
    apply_config_entry(c, key, detail::parse_numbers(val, key));
  }
  return c;
}

inline WorkbenchConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file: " + path);
  return parse_config(f);
}

}  // namespace ngtc

#endif  // NGTC_CONFIG_HPP
