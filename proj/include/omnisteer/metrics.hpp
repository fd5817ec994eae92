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

// Performance metrics: per-user and sensing mutual information, the weighted
// sum objective, Monte Carlo NMSE and transmit beampatterns.

#pragma once

#include "omnisteer/config.hpp"
#include "omnisteer/model.hpp"
#include "omnisteer/types.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace omnisteer {

/// Plate operating mode. Both modes use unit-modulus coefficients; the tag
/// only records which half-space the backward beam serves.
enum class PlateMode { Transmit, Reflect };

/// The optimization triple (alpha, W, theta).
struct DesignVariables {
  rvec alpha; // K, scheduling in [0,1]
  cmat W;     // N_T x K, column k is w_k
  cvec theta; // M, unit modulus
  PlateMode mode = PlateMode::Transmit;

  /// V_S = diag(theta) G W diag(alpha).
  cmat sensing_beamformer(const ChannelSet &ch) const {
    return theta.asDiagonal() * ch.G * W * alpha.asDiagonal();
  }

  /// V_S s, the aperture excitation seen by the target.
  cvec sensing_excitation(const ChannelSet &ch) const {
    const cvec weighted = alpha.cast<cd>().cwiseProduct(ch.s);
    return theta.cwiseProduct(ch.G * (W * weighted));
  }
};

/// Feasibility of (alpha, W, theta) against the power, cardinality, box and
/// unit-modulus constraints. Returns an empty string when feasible.
inline std::string feasibility_violation(const DesignVariables &v, const SystemConfig &cfg,
                                         double tol = 1e-9) {
  double power = 0.0;
  for (Eigen::Index k = 0; k < v.W.cols(); ++k)
    power += v.alpha(k) * v.W.col(k).squaredNorm();
  if (power > cfg.P_T * (1.0 + tol))
    return "total power " + std::to_string(power) + " exceeds P_T";
  if ((v.alpha.array() < -tol).any() || (v.alpha.array() > 1.0 + tol).any())
    return "alpha outside [0,1]";
  if (v.alpha.sum() > cfg.N_S + tol)
    return "more than N_S users scheduled";
  for (Eigen::Index m = 0; m < v.theta.size(); ++m)
    if (std::abs(std::abs(v.theta(m)) - 1.0) > tol)
      return "theta entry " + std::to_string(m) + " is not unit modulus";
  return {};
}

struct BeamSample {
  double angle = 0.0; // radians
  double power = 0.0;
};

enum class BeamSide { Forward, Backward };

struct Beampattern {
  std::vector<BeamSample> samples;
  bool normalized = false; // false when the pattern is identically zero
};

struct MetricsReport {
  rvec mi_per_user;
  double sensing_mi = 0.0;
  double sum_objective = 0.0;
  double sum_nmse = 0.0;
  double comm_nmse = 0.0;
  double sensing_nmse = 0.0;
  std::vector<BeamSample> beampattern;
};

/// Effective gains h_{C,k}^H w_j as a K x K matrix (row k = user, col j = stream).
inline cmat effective_gains(const DesignVariables &v, const ChannelSet &ch) {
  return ch.H.adjoint() * v.W;
}

/// I_{C,k} in bits. The 4 sigma_C^2 reflects the even forward/backward power split.
inline rvec comm_mi_per_user(const DesignVariables &v, const ChannelSet &ch, const SystemConfig &cfg) {
  const cmat g = effective_gains(v, ch);
  const auto K = g.rows();
  rvec mi(K);
  for (Eigen::Index k = 0; k < K; ++k) {
    const double desired = std::norm(v.alpha(k) * g(k, k));
    double interference = 4.0 * cfg.sigma_C2;
    for (Eigen::Index j = 0; j < K; ++j)
      if (j != k)
        interference += std::norm(v.alpha(j) * g(k, j));
    mi(k) = std::log2(1.0 + desired / interference);
  }
  return mi;
}

/// Gamma = s^H V_S^H R_H V_S s / (4 N_R sigma_S^2).
inline double sensing_snr(const DesignVariables &v, const ChannelSet &ch, const SystemConfig &cfg) {
  const cvec x = v.sensing_excitation(ch);
  const double q = (x.adjoint() * ch.R_H * x)(0, 0).real();
  return std::max(q, 0.0) / (4.0 * cfg.N_R * cfg.sigma_S2);
}

/// Sensing MI in bits, scalar (determinant-lemma) form.
inline double sensing_mi(const DesignVariables &v, const ChannelSet &ch, const SystemConfig &cfg) {
  return std::log2(1.0 + sensing_snr(v, ch, cfg));
}

/// log2 |det(A)| through LU.
inline double log2_abs_det(const cmat &A) {
  const Eigen::PartialPivLU<cmat> lu(A);
  const cmat &f = lu.matrixLU();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < f.rows(); ++i)
    acc += std::log2(std::abs(f(i, i)));
  return acc;
}

/// Sensing MI in bits, log2 det(I_M + V_S s s^H V_S^H R_H / (4 N_R sigma_S^2)).
inline double sensing_mi_logdet(const DesignVariables &v, const ChannelSet &ch,
                                const SystemConfig &cfg) {
  const cvec x = v.sensing_excitation(ch);
  const double c = 1.0 / (4.0 * cfg.N_R * cfg.sigma_S2);
  const cmat A = cmat::Identity(x.size(), x.size()) + c * (x * x.adjoint()) * ch.R_H;
  return log2_abs_det(A);
}

/// kappa * sum_k I_{C,k} + (1 - kappa) * I_S.
inline double sum_objective(const DesignVariables &v, const ChannelSet &ch, const SystemConfig &cfg) {
  return cfg.kappa * comm_mi_per_user(v, ch, cfg).sum() + (1.0 - cfg.kappa) * sensing_mi(v, ch, cfg);
}

/// MMSE combiner of user k:
/// u = (1/2) alpha_k w_k^H h_k / (sum_j (1/4) |alpha_j h_k^H w_j|^2 + sigma_C^2).
inline cd mmse_comm_combiner(Eigen::Index k, const rvec &alpha, const cmat &W, const cmat &H,
                             double sigma_C2) {
  const cvec g = W.adjoint() * H.col(k); // g(j) = w_j^H h_k = conj(h_k^H w_j)
  double denom = sigma_C2;
  for (Eigen::Index j = 0; j < g.size(); ++j)
    denom += 0.25 * std::norm(alpha(j) * g(j));
  return 0.5 * alpha(k) * g(k) / denom;
}

/// MMSE sensing combiner u_S = 2 R_H x / (x^H R_H x + 4 N_R sigma_S^2), x = V_S s.
inline cvec mmse_sensing_combiner(const cvec &x, const cmat &R_H, int n_r, double sigma_S2) {
  const cvec Rx = R_H * x;
  const double q = x.dot(Rx).real();
  return (2.0 / (q + 4.0 * n_r * sigma_S2)) * Rx;
}

struct Combiners {
  cvec u_C;
  cvec u_S;
};

inline Combiners mmse_combiners(const DesignVariables &v, const ChannelSet &ch, const SystemConfig &cfg) {
  Combiners c;
  c.u_C.resize(ch.users());
  for (Eigen::Index k = 0; k < ch.users(); ++k)
    c.u_C(k) = mmse_comm_combiner(k, v.alpha, v.W, ch.H, cfg.sigma_C2);
  c.u_S = mmse_sensing_combiner(v.sensing_excitation(ch), ch.R_H, cfg.N_R, cfg.sigma_S2);
  return c;
}

struct NmseResult {
  double sum = 0.0;
  double comm = 0.0;
  double sensing = 0.0;
};

/// Monte Carlo NMSE.
///
/// Communication: fresh QPSK symbols and receiver noise per draw, estimate
/// s_hat_k = u_{C,k} y_{C,k}, averaged over scheduled users (alpha_k > 0.5).
/// With nobody scheduled the communication NMSE is 1.
///
/// Sensing: the probing snapshot ch.s is known at the receiver, so it stays
/// fixed while xi and the echo noise are redrawn. H_S^H is estimated as
/// u_S y_S^H.
inline NmseResult sum_nmse(const DesignVariables &v, const ChannelSet &ch, const SystemConfig &cfg,
                           const Combiners &comb, int trials, Rng &rng) {
  if (trials < 1)
    throw ConfigError("sum_nmse: trials must be >= 1");
  const auto K = ch.users();
  std::vector<Eigen::Index> scheduled;
  for (Eigen::Index k = 0; k < K; ++k)
    if (v.alpha(k) > 0.5)
      scheduled.push_back(k);

  const cmat g = effective_gains(v, ch); // (k, j) = h_k^H w_j
  const cvec x = v.sensing_excitation(ch);
  const cd echo_gain = 0.5 * ch.b_T.dot(x); // b_T^H V_S s / 2
  const double sc = std::sqrt(cfg.sigma_C2);
  const double ss = std::sqrt(cfg.sigma_S2);
  const double sx = std::sqrt(cfg.sigma_xi2);

  double comm_err = 0.0, comm_energy = 0.0;
  double sens_err = 0.0, sens_energy = 0.0;
  cvec z(cfg.N_R);
  for (int t = 0; t < trials; ++t) {
    if (!scheduled.empty()) {
      const cvec sym = sample_qpsk(K, rng);
      const cvec tx = v.alpha.cast<cd>().cwiseProduct(sym);
      for (Eigen::Index k : scheduled) {
        const cd y = 0.5 * (g.row(k) * tx).value() + sc * complex_normal(rng);
        comm_err += std::norm(comb.u_C(k) * y - sym(k));
        comm_energy += std::norm(sym(k));
      }
    }
    // y_S = (1/2) xi b_R b_T^H V_S s + z_S, and H_S^H = conj(xi) b_T b_R^H
    const cd xi = sx * complex_normal(rng);
    for (int n = 0; n < cfg.N_R; ++n)
      z(n) = ss * complex_normal(rng);
    const cvec y = xi * echo_gain * ch.b_R + z;
    const cmat H_hat = comb.u_S * y.adjoint();
    const cmat H_true = std::conj(xi) * (ch.b_T * ch.b_R.adjoint());
    sens_err += (H_hat - H_true).squaredNorm();
    sens_energy += H_true.squaredNorm();
  }
  NmseResult r;
  r.comm = scheduled.empty() ? 1.0 : comm_err / comm_energy;
  r.sensing = sens_energy > 0.0 ? sens_err / sens_energy : 1.0;
  r.sum = r.comm + r.sensing;
  return r;
}

/// NMSE with the MMSE combiners of the given design.
inline NmseResult sum_nmse(const DesignVariables &v, const ChannelSet &ch, const SystemConfig &cfg,
                           int trials, Rng &rng) {
  return sum_nmse(v, ch, cfg, mmse_combiners(v, ch, cfg), trials, rng);
}

/// Uniform grid of n points from lo to hi inclusive (radians).
inline std::vector<double> angle_grid(double lo, double hi, int n) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    out.push_back(n == 1 ? lo : lo + (hi - lo) * i / (n - 1));
  return out;
}

/// Transmit power pattern. Forward: sum_k alpha_k |a_T^H(psi) w_k|^2;
/// backward: sum_k alpha_k |b_T^H(psi) diag(theta) G w_k|^2. Normalized to a
/// unit peak unless the pattern is identically zero.
inline Beampattern beampattern(const DesignVariables &v, const ChannelSet &ch,
                               const std::vector<double> &angles, BeamSide side) {
  if (angles.empty())
    throw ConfigError("beampattern: empty angle grid");
  const cmat radiated = side == BeamSide::Forward ? cmat(v.W) : cmat(v.theta.asDiagonal() * ch.G * v.W);
  const int n = static_cast<int>(radiated.rows());
  Beampattern bp;
  bp.samples.reserve(angles.size());
  double peak = 0.0;
  for (double psi : angles) {
    const cvec a = steering_vector(psi, n);
    const cvec proj = radiated.adjoint() * a; // conj(a^H w_k)
    double p = 0.0;
    for (Eigen::Index k = 0; k < proj.size(); ++k)
      p += v.alpha(k) * std::norm(proj(k));
    bp.samples.push_back({psi, p});
    peak = std::max(peak, p);
  }
  if (peak > 0.0) {
    for (auto &s : bp.samples)
      s.power /= peak;
    bp.normalized = true;
  }
  return bp;
}

/// Evaluates everything except the beampattern.
inline MetricsReport evaluate_metrics(const DesignVariables &v, const ChannelSet &ch,
                                      const SystemConfig &cfg, int nmse_trials, Rng &rng) {
  MetricsReport r;
  r.mi_per_user = comm_mi_per_user(v, ch, cfg);
  r.sensing_mi = sensing_mi(v, ch, cfg);
  r.sum_objective = cfg.kappa * r.mi_per_user.sum() + (1.0 - cfg.kappa) * r.sensing_mi;
  const NmseResult n = sum_nmse(v, ch, cfg, nmse_trials, rng);
  r.sum_nmse = n.sum;
  r.comm_nmse = n.comm;
  r.sensing_nmse = n.sensing;
  return r;
}

} // namespace omnisteer
