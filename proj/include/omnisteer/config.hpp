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

#pragma once

#include "omnisteer/types.hpp"

#include <cstdint>
#include <string>

namespace omnisteer {

inline constexpr double kDefaultCarrier = 3e9;
inline constexpr double kDefaultWavelength = kSpeedOfLight / kDefaultCarrier;

/// Scenario parameters. Every power and noise value is linear (watts); dB
/// conversions are the caller's business.
struct SystemConfig {
  int M = 16;    // plate elements
  int N_T = 16;  // transmit antennas
  int N_R = 16;  // receive antennas
  int K = 8;     // users
  int N_S = 5;   // max scheduled users
  int N_cl = 4;  // scattering clusters
  int N_ray = 10;

  double P_T = 10.0; // 40 dBm
  double sigma_C2 = 1.0;
  double sigma_S2 = 1.0;
  double kappa = 0.5;
  double rho = 0.1;
  double epsilon = 0.01;

  double carrier_freq = kDefaultCarrier;
  double d = kDefaultWavelength / 2.0; // element spacing (m)
  double D = kDefaultWavelength;       // array-to-plate distance (m)

  double sigma_xi2 = 1.0;  // target reflection power
  double delta_reg = 1e-3; // diagonal loading of R_H

  int i_max = 20;
  int p_max = 30;
  int q_max = 200;
  int N_rand = 100;
  std::uint64_t seed = 1;

  // Scenario geometry.
  double target_angle = 60.0 * kPi / 180.0; // radians from plate broadside
  double cluster_sector = kPi / 3.0;        // cluster centers on [-sector, sector]
  double angular_spread = 7.5 * kPi / 180.0;

  int nmse_trials = 10000;
  int sdp_restarts = 5;

  double wavelength() const { return kSpeedOfLight / carrier_freq; }

  /// Resets d and D to lambda/2 and lambda for the current carrier.
  void derive_geometry() {
    d = wavelength() / 2.0;
    D = wavelength();
  }

  /// Sets sigma_C2 = sigma_S2 = P_T / 10^(snr/10).
  void set_snr_db(double snr_db) {
    sigma_C2 = P_T / db_to_linear(snr_db);
    sigma_S2 = sigma_C2;
  }

  bool operator==(const SystemConfig &) const = default;
};

/// Throws ConfigError naming the first violated constraint.
inline void validate(const SystemConfig &cfg) {
  auto require = [](bool ok, const std::string &what) {
    if (!ok)
      throw ConfigError("invalid config: " + what);
  };
  require(cfg.M >= 1 && cfg.N_T >= 1 && cfg.N_R >= 1, "array sizes must be >= 1");
  require(cfg.N_S >= 1, "N_S must be >= 1");
  require(cfg.K >= cfg.N_S, "K must be >= N_S");
  require(cfg.N_cl >= 1 && cfg.N_ray >= 1, "N_cl and N_ray must be >= 1");
  require(cfg.P_T > 0.0, "P_T must be > 0");
  require(cfg.sigma_C2 > 0.0 && cfg.sigma_S2 > 0.0, "noise powers must be > 0");
  require(cfg.sigma_xi2 > 0.0, "sigma_xi2 must be > 0");
  require(cfg.kappa >= 0.0 && cfg.kappa <= 1.0, "kappa must lie in [0,1]");
  require(cfg.rho > 0.0, "rho must be > 0");
  require(cfg.epsilon > 0.0, "epsilon must be > 0");
  require(cfg.carrier_freq > 0.0 && cfg.d > 0.0 && cfg.D > 0.0,
          "carrier_freq, d and D must be > 0");
  require(cfg.delta_reg >= 0.0, "delta_reg must be >= 0");
  require(cfg.i_max >= 1 && cfg.p_max >= 1 && cfg.q_max >= 1, "iteration caps must be >= 1");
  require(cfg.N_rand >= 1, "N_rand must be >= 1");
  require(cfg.nmse_trials >= 1, "nmse_trials must be >= 1");
  require(cfg.sdp_restarts >= 1, "sdp_restarts must be >= 1");
}

} // namespace omnisteer
