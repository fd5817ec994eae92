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

// Physical model: array-to-plate channel, user channels, target response.

#pragma once

#include "omnisteer/config.hpp"
#include "omnisteer/types.hpp"

#include <array>
#include <cmath>
#include <vector>

namespace omnisteer {

/// Which lobe illuminates the target. Backward goes through the plate
/// (diag(theta) * G); Forward radiates straight from the active array and
/// leaves the plate out of the sensing path.
enum class SensingPath { Backward, Forward };

/// One channel realization.
struct ChannelSet {
  cmat G;   // M x N_T array-to-plate
  cmat H;   // N_T x K, column k is h_{C,k}
  cmat R_H; // M x M target covariance
  cvec b_T; // M, plate-side transmit steering
  cvec b_R; // N_R, receive steering
  double psi_target = 0.0;
  cvec s;   // K unit-modulus symbols
  SensingPath path = SensingPath::Backward;

  Eigen::Index users() const { return H.cols(); }
};

/// [G]_{m,n} = lambda / (4 pi r) * exp(-i 2 pi r / lambda), r^2 = D^2 + ((m-n) d)^2.
inline cmat build_array_to_plate_channel(const SystemConfig &cfg) {
  const double lambda = cfg.wavelength();
  cmat G(cfg.M, cfg.N_T);
  for (int m = 0; m < cfg.M; ++m) {
    for (int n = 0; n < cfg.N_T; ++n) {
      const double off = static_cast<double>(m - n) * cfg.d;
      const double r = std::sqrt(cfg.D * cfg.D + off * off);
      G(m, n) = (lambda / (4.0 * kPi * r)) * std::exp(-kI * (2.0 * kPi * r / lambda));
    }
  }
  return G;
}

/// Half-wavelength ULA response, exp(i pi n sin psi) / sqrt(N).
inline cvec steering_vector(double psi, int n) {
  if (n < 1)
    throw ConfigError("steering_vector: N must be >= 1");
  cvec a(n);
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  const double phase = kPi * std::sin(psi);
  for (int i = 0; i < n; ++i)
    a(i) = scale * std::polar(1.0, phase * static_cast<double>(i));
  return a;
}

/// Laplacian sample with the given standard deviation.
inline double laplacian(double stddev, Rng &rng) {
  const double b = stddev / std::sqrt(2.0);
  const double u = uniform01(rng) - 0.5;
  const double sgn = u < 0.0 ? -1.0 : 1.0;
  return -b * sgn * std::log1p(-2.0 * std::abs(u));
}

/// Clustered multipath user channel. Returns h with
/// h^H = sqrt(N_T/(N_cl N_ray)) sum xi_{c,l} a_T^H(psi_{c,l}).
inline cvec sample_comm_channel(const SystemConfig &cfg, Rng &rng) {
  if (cfg.N_cl < 1 || cfg.N_ray < 1)
    throw ConfigError("sample_comm_channel: N_cl and N_ray must be >= 1");
  const double scale =
      std::sqrt(static_cast<double>(cfg.N_T) / static_cast<double>(cfg.N_cl * cfg.N_ray));
  cvec h = cvec::Zero(cfg.N_T);
  for (int c = 0; c < cfg.N_cl; ++c) {
    const double center = cfg.cluster_sector * (2.0 * uniform01(rng) - 1.0);
    for (int l = 0; l < cfg.N_ray; ++l) {
      const double psi = center + laplacian(cfg.angular_spread, rng);
      const cd xi = complex_normal(rng);
      // conj of (xi a^H) is conj(xi) a
      h += std::conj(xi) * steering_vector(psi, cfg.N_T);
    }
  }
  return scale * h;
}

/// R_H = sigma_xi2 b_T b_T^H + delta_reg I.
inline cmat build_target_covariance(double psi, const SystemConfig &cfg) {
  const cvec b = steering_vector(psi, cfg.M);
  cmat R = cfg.sigma_xi2 * (b * b.adjoint());
  R.diagonal().array() += cfg.delta_reg;
  return R;
}

/// H_S = xi b_R(psi) b_T(psi)^H with the reflection coefficient supplied.
inline cmat target_response(double psi, cd xi, const SystemConfig &cfg) {
  return xi * (steering_vector(psi, cfg.N_R) * steering_vector(psi, cfg.M).adjoint());
}

/// H_S with xi ~ CN(0, sigma_xi2).
inline cmat sample_target_response(double psi, const SystemConfig &cfg, Rng &rng) {
  const cd xi = std::sqrt(cfg.sigma_xi2) * complex_normal(rng);
  return target_response(psi, xi, cfg);
}

/// Unit-modulus QPSK snapshot.
inline cvec sample_qpsk(Eigen::Index k, Rng &rng) {
  static const std::array<cd, 4> alphabet = {
      cd{1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0)}, cd{-1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0)},
      cd{-1.0 / std::sqrt(2.0), -1.0 / std::sqrt(2.0)}, cd{1.0 / std::sqrt(2.0), -1.0 / std::sqrt(2.0)}};
  std::uniform_int_distribution<int> pick(0, 3);
  cvec s(k);
  for (Eigen::Index i = 0; i < k; ++i)
    s(i) = alphabet[static_cast<std::size_t>(pick(rng))];
  return s;
}

/// Full realization for a target at psi in the backward half-space.
inline ChannelSet generate_channels(const SystemConfig &cfg, double psi, Rng &rng) {
  validate(cfg);
  ChannelSet ch;
  ch.G = build_array_to_plate_channel(cfg);
  ch.H.resize(cfg.N_T, cfg.K);
  for (int k = 0; k < cfg.K; ++k)
    ch.H.col(k) = sample_comm_channel(cfg, rng);
  ch.psi_target = psi;
  ch.R_H = build_target_covariance(psi, cfg);
  ch.b_T = steering_vector(psi, cfg.M);
  ch.b_R = steering_vector(psi, cfg.N_R);
  ch.s = sample_qpsk(cfg.K, rng);
  ch.path = SensingPath::Backward;
  return ch;
}

inline ChannelSet generate_channels(const SystemConfig &cfg, Rng &rng) {
  return generate_channels(cfg, cfg.target_angle, rng);
}

/// Same realization, but the target sits in front of the array: the sensing
/// cascade becomes the identity and the plate drops out of the sensing path.
/// Requires M == N_T.
inline ChannelSet with_forward_target(ChannelSet ch, const SystemConfig &cfg, double psi) {
  if (cfg.M != cfg.N_T)
    throw ConfigError("forward sensing path requires M == N_T");
  ch.G = cmat::Identity(cfg.N_T, cfg.N_T);
  ch.psi_target = psi;
  ch.R_H = build_target_covariance(psi, cfg);
  ch.b_T = steering_vector(psi, cfg.M);
  ch.b_R = steering_vector(psi, cfg.N_R);
  ch.path = SensingPath::Forward;
  return ch;
}

/// Single-path line-of-sight users at the given angles: h_k = sqrt(N_T) a_T(psi_k).
inline cmat los_user_channels(const std::vector<double> &angles, int n_t) {
  cmat H(n_t, static_cast<Eigen::Index>(angles.size()));
  for (std::size_t k = 0; k < angles.size(); ++k)
    H.col(static_cast<Eigen::Index>(k)) = std::sqrt(static_cast<double>(n_t)) * steering_vector(angles[k], n_t);
  return H;
}

} // namespace omnisteer
