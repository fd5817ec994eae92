// SPDX-License-Identifier: Apache-2.0
//
// omnisteer: joint user scheduling and omni-directional beamforming for air-ground ISAC
// Copyright (C) 2026 The omnisteer authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

// JSON form of SystemConfig.
//
// Canonical keys hold linear units and radians, so a parse/serialize round
// trip is exact. A few convenience keys are accepted on input only and are
// converted here, at the boundary:
//
//   P_T_dbm             -> P_T (watts)
//   snr_db              -> sigma_C2 = sigma_S2 = P_T / 10^(snr_db/10)
//   target_angle_deg    -> target_angle
//   cluster_sector_deg  -> cluster_sector
//   angular_spread_deg  -> angular_spread
//
// Setting carrier_freq without d or D re-derives d = lambda/2, D = lambda.

#pragma once

#include "omnisteer/config.hpp"
#include "omnisteer/types.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>
#include <string>

namespace omnisteer {

using json = nlohmann::ordered_json;

namespace detail {

template <class F> void visit_config_fields(SystemConfig &c, F &&f) {
  f("M", c.M);
  f("N_T", c.N_T);
  f("N_R", c.N_R);
  f("K", c.K);
  f("N_S", c.N_S);
  f("N_cl", c.N_cl);
  f("N_ray", c.N_ray);
  f("P_T", c.P_T);
  f("sigma_C2", c.sigma_C2);
  f("sigma_S2", c.sigma_S2);
  f("kappa", c.kappa);
  f("rho", c.rho);
  f("epsilon", c.epsilon);
  f("carrier_freq", c.carrier_freq);
  f("d", c.d);
  f("D", c.D);
  f("sigma_xi2", c.sigma_xi2);
  f("delta_reg", c.delta_reg);
  f("i_max", c.i_max);
  f("p_max", c.p_max);
  f("q_max", c.q_max);
  f("N_rand", c.N_rand);
  f("seed", c.seed);
  f("target_angle", c.target_angle);
  f("cluster_sector", c.cluster_sector);
  f("angular_spread", c.angular_spread);
  f("nmse_trials", c.nmse_trials);
  f("sdp_restarts", c.sdp_restarts);
}

inline const std::set<std::string> &config_input_aliases() {
  static const std::set<std::string> s = {"P_T_dbm", "snr_db", "target_angle_deg", "cluster_sector_deg",
                                          "angular_spread_deg"};
  return s;
}

template <class T> void read_field(const json &j, const std::string &key, T &out) {
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception &e) {
    throw ConfigError("config field '" + key + "': " + e.what());
  }
}

} // namespace detail

inline json to_json(const SystemConfig &cfg) {
  json j = json::object();
  SystemConfig c = cfg;
  detail::visit_config_fields(c, [&](const char *key, auto &value) { j[key] = value; });
  return j;
}

/// Applies the keys present in j on top of base. Unknown keys are an error.
inline SystemConfig config_from_json(const json &j, SystemConfig base = {}) {
  if (!j.is_object())
    throw ConfigError("system config must be a JSON object");
  std::set<std::string> known;
  detail::visit_config_fields(base, [&](const char *key, auto &) { known.insert(key); });
  for (const auto &[key, _] : j.items())
    if (!known.count(key) && !detail::config_input_aliases().count(key))
      throw ConfigError("unknown config field '" + key + "'");

  detail::visit_config_fields(base, [&](const char *key, auto &value) {
    if (j.contains(key))
      detail::read_field(j, key, value);
  });
  if (j.contains("P_T_dbm")) {
    double dbm = 0.0;
    detail::read_field(j, "P_T_dbm", dbm);
    base.P_T = dbm_to_watts(dbm);
  }
  if (j.contains("carrier_freq") && !j.contains("d") && !j.contains("D"))
    base.derive_geometry();
  auto angle = [&](const char *key, double &dst) {
    if (j.contains(key)) {
      double deg = 0.0;
      detail::read_field(j, key, deg);
      dst = deg_to_rad(deg);
    }
  };
  angle("target_angle_deg", base.target_angle);
  angle("cluster_sector_deg", base.cluster_sector);
  angle("angular_spread_deg", base.angular_spread);
  if (j.contains("snr_db")) {
    double snr = 0.0;
    detail::read_field(j, "snr_db", snr);
    base.set_snr_db(snr);
  }
  return base;
}

inline json read_json_file(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const nlohmann::json::exception &e) {
    throw ConfigError("'" + path + "': " + e.what());
  }
}

} // namespace omnisteer
