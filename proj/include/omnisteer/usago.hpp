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

// Outer alternating loop (plate phases <-> scheduling and beamforming) and
// the reference schemes it is compared against.

#pragma once

#include "omnisteer/config.hpp"
#include "omnisteer/metrics.hpp"
#include "omnisteer/model.hpp"
#include "omnisteer/passive_opt.hpp"
#include "omnisteer/types.hpp"
#include "omnisteer/wmmse.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

namespace omnisteer {

enum class Variant { UsAgoR, UsAgoS, IF, IF_RP, MMSE, MMSE_RP };

inline constexpr std::array<Variant, 6> kAllVariants = {Variant::UsAgoR, Variant::UsAgoS, Variant::IF,
                                                        Variant::IF_RP,  Variant::MMSE,   Variant::MMSE_RP};

inline std::string to_string(Variant v) {
  switch (v) {
  case Variant::UsAgoR: return "US-AGO-R";
  case Variant::UsAgoS: return "US-AGO-S";
  case Variant::IF: return "IF";
  case Variant::IF_RP: return "IF-RP";
  case Variant::MMSE: return "MMSE";
  case Variant::MMSE_RP: return "MMSE-RP";
  }
  return "?";
}

inline Variant parse_variant(std::string_view name) {
  for (Variant v : kAllVariants)
    if (to_string(v) == name)
      return v;
  throw ConfigError("unknown variant '" + std::string(name) + "'");
}

struct RunResult {
  DesignVariables vars;
  std::vector<double> trace;                     // sum-MI per outer iteration
  std::vector<std::vector<double>> inner_traces; // surrogate per sweep, per outer iteration
  MetricsReport metrics;
  Variant variant = Variant::UsAgoR;
  double wall_time = 0.0;
  int outer_iterations = 0;
  std::vector<std::string> warnings;
};

namespace detail {

/// Rescales C to unit average diagonal so the manifold tolerances and the
/// unit initial step are meaningful regardless of the channel gain.
inline cmat normalized_quadratic(const cmat &C) {
  const double tr = C.trace().real() / static_cast<double>(C.rows());
  return tr > 0.0 ? cmat(C / tr) : C;
}

/// One plate update for the current (alpha, W). Returns theta_prev when the
/// solver does not improve on it, so the sensing term never decreases.
inline cvec update_plate(const DesignVariables &v, const ChannelSet &ch, const SystemConfig &cfg, bool use_sdr,
                         const cvec &theta_prev, Rng &rng) {
  if (ch.path == SensingPath::Forward)
    return theta_prev;
  const QuadraticForm qf = reduce_to_quadratic(ch, v);
  const cmat C = normalized_quadratic(qf.C);
  if (C.trace().real() <= 0.0)
    return theta_prev;
  const double before = quadratic_value(C, theta_prev);
  if (use_sdr) {
    const SdrResult r = sdr_optimize(C, cfg, rng);
    return r.achieved_value >= before ? r.theta : theta_prev;
  }
  const RgaResult r = rga_optimize(C, theta_prev, cfg);
  return quadratic_value(C, r.theta) >= before ? r.theta : theta_prev;
}

inline void fill_cheap_metrics(RunResult &r, const ChannelSet &ch, const SystemConfig &cfg) {
  r.metrics.mi_per_user = comm_mi_per_user(r.vars, ch, cfg);
  r.metrics.sensing_mi = sensing_mi(r.vars, ch, cfg);
  r.metrics.sum_objective = cfg.kappa * r.metrics.mi_per_user.sum() + (1.0 - cfg.kappa) * r.metrics.sensing_mi;
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

} // namespace detail

/// Alternating optimization: plate update (warm-started RGA, or SDR), then
/// the weighted-MMSE inner loop, until the sum-MI changes by less than
/// epsilon (relative) or i_max outer iterations ran. The schedule is rounded
/// at the end, W is refined for the frozen schedule and the plate gets one
/// last warm update.
inline RunResult us_ago(const ChannelSet &ch, const SystemConfig &cfg, Variant variant, Rng &rng) {
  if (variant != Variant::UsAgoR && variant != Variant::UsAgoS)
    throw ConfigError("us_ago: variant must be US-AGO-R or US-AGO-S");
  validate(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  const bool use_sdr = variant == Variant::UsAgoS;

  cvec theta = ch.path == SensingPath::Forward ? cvec(cvec::Ones(ch.G.rows())) : random_phases(ch.G.rows(), rng);
  SolverState st = initial_state(ch, cfg, theta);

  RunResult out;
  out.variant = variant;
  double prev = 0.0;
  for (int i = 1; i <= cfg.i_max; ++i) {
    st.theta = detail::update_plate(unit_gain_view(st), ch, cfg, use_sdr, st.theta, rng);
    st = inner_loop(st, ch, cfg);
    out.inner_traces.push_back(st.surrogate_per_iter);
    const double mi = sum_objective(unit_gain_view(st), ch, cfg);
    out.trace.push_back(mi);
    out.outer_iterations = i;
    if (i > 1 && std::abs(mi - prev) < cfg.epsilon * std::max(std::abs(prev), 1e-300))
      break;
    prev = mi;
  }

  st.alpha = round_schedule(st.alpha, cfg.N_S);
  if (st.alpha.sum() == 0.0)
    out.warnings.push_back("no user reached alpha >= 0.5; nothing scheduled");
  st = inner_loop_fixed_schedule(st, ch, cfg);
  st.theta = detail::update_plate(st.design(), ch, cfg, use_sdr, st.theta, rng);

  out.vars = st.design();
  detail::fill_cheap_metrics(out, ch, cfg);
  out.wall_time = detail::seconds_since(t0);
  return out;
}

/// N_S distinct users drawn uniformly, returned in increasing order.
inline std::vector<Eigen::Index> random_schedule(Eigen::Index K, int N_S, Rng &rng) {
  if (N_S > K)
    throw ConfigError("random_schedule: fewer users than N_S");
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(K));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(static_cast<std::size_t>(N_S));
  std::sort(idx.begin(), idx.end());
  return idx;
}

namespace detail {

enum class LinearPrecoder { ZeroForcing, Regularized };

/// Shared body of the two linear baselines. The schedule is drawn first and
/// the random phases second, so a scheme and its -RP twin see the same users.
inline RunResult linear_baseline(const ChannelSet &ch, const SystemConfig &cfg, LinearPrecoder kind,
                                 bool random_phase, Rng &rng) {
  validate(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  const auto K = ch.users();
  const auto N = ch.H.rows();
  RunResult out;
  out.variant = kind == LinearPrecoder::ZeroForcing ? (random_phase ? Variant::IF_RP : Variant::IF)
                                                    : (random_phase ? Variant::MMSE_RP : Variant::MMSE);

  const auto sched = random_schedule(K, cfg.N_S, rng);
  const cvec phases = random_phases(ch.G.rows(), rng);
  const auto S = static_cast<Eigen::Index>(sched.size());

  cmat Hs(N, S); // columns h_k of the scheduled users
  for (Eigen::Index i = 0; i < S; ++i)
    Hs.col(i) = ch.H.col(sched[static_cast<std::size_t>(i)]);
  cmat gram = Hs.adjoint() * Hs;
  if (kind == LinearPrecoder::Regularized) {
    gram.diagonal().array() += static_cast<double>(cfg.N_S) * 4.0 * cfg.sigma_C2 / cfg.P_T;
  } else {
    Eigen::SelfAdjointEigenSolver<cmat> es(gram, Eigen::EigenvaluesOnly);
    const double lmax = es.eigenvalues().maxCoeff();
    if (es.eigenvalues().minCoeff() <= 1e-12 * std::max(lmax, 1e-300)) {
      gram.diagonal().array() += 1e-9 * std::max(lmax, 1e-300);
      out.warnings.push_back("scheduled channel is rank deficient; zero forcing regularized");
    }
  }
  const cmat Ws = Hs * gram.ldlt().solve(cmat::Identity(S, S));

  out.vars.alpha = rvec::Zero(K);
  out.vars.W = cmat::Zero(N, K);
  const double per_user = std::sqrt(cfg.P_T / static_cast<double>(S));
  for (Eigen::Index i = 0; i < S; ++i) {
    const Eigen::Index k = sched[static_cast<std::size_t>(i)];
    out.vars.alpha(k) = 1.0;
    const double n = Ws.col(i).norm();
    if (n > 0.0)
      out.vars.W.col(k) = per_user * Ws.col(i) / n;
  }

  if (ch.path == SensingPath::Forward)
    out.vars.theta = cvec::Ones(ch.G.rows());
  else if (random_phase)
    out.vars.theta = phases;
  else {
    const DesignVariables start{out.vars.alpha, out.vars.W, phases, PlateMode::Transmit};
    const cmat C = normalized_quadratic(reduce_to_quadratic(ch, start).C);
    out.vars.theta = rga_optimize(C, phases, cfg).theta;
  }

  out.trace.push_back(sum_objective(out.vars, ch, cfg));
  out.outer_iterations = 1;
  fill_cheap_metrics(out, ch, cfg);
  out.wall_time = seconds_since(t0);
  return out;
}

} // namespace detail

/// Random schedule, zero-forcing beams with equal per-user power; plate
/// phases optimized (RGA) or uniformly random.
inline RunResult baseline_if(const ChannelSet &ch, const SystemConfig &cfg, bool random_phase, Rng &rng) {
  return detail::linear_baseline(ch, cfg, detail::LinearPrecoder::ZeroForcing, random_phase, rng);
}

/// Random schedule, regularized zero forcing
/// W = H (H^H H + (N_S 4 sigma_C^2 / P_T) I)^{-1} with equal per-user power.
inline RunResult baseline_mmse(const ChannelSet &ch, const SystemConfig &cfg, bool random_phase, Rng &rng) {
  return detail::linear_baseline(ch, cfg, detail::LinearPrecoder::Regularized, random_phase, rng);
}

inline RunResult run_variant(Variant v, const ChannelSet &ch, const SystemConfig &cfg, Rng &rng) {
  switch (v) {
  case Variant::UsAgoR:
  case Variant::UsAgoS: return us_ago(ch, cfg, v, rng);
  case Variant::IF: return baseline_if(ch, cfg, false, rng);
  case Variant::IF_RP: return baseline_if(ch, cfg, true, rng);
  case Variant::MMSE: return baseline_mmse(ch, cfg, false, rng);
  case Variant::MMSE_RP: return baseline_mmse(ch, cfg, true, rng);
  }
  throw ConfigError("run_variant: unknown variant");
}

/// Adds the Monte Carlo NMSE figures to a finished run.
inline void attach_nmse(RunResult &r, const ChannelSet &ch, const SystemConfig &cfg, int trials, Rng &rng) {
  const NmseResult n = sum_nmse(r.vars, ch, cfg, trials, rng);
  r.metrics.sum_nmse = n.sum;
  r.metrics.comm_nmse = n.comm;
  r.metrics.sensing_nmse = n.sensing;
}

} // namespace omnisteer
