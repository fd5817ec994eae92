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

#include "omnisteer/wmmse.hpp"
#include "oracles.hpp"

#include <catch_amalgamated.hpp>

using namespace omnisteer;
using Catch::Approx;

namespace {

/// State at (alpha, W, theta) with combiners and weights refreshed.
SolverState prepared_state(const ChannelSet &ch, const SystemConfig &cfg, const DesignVariables &v) {
  SolverState st = initial_state(ch, cfg, v.theta);
  st.alpha = v.alpha;
  st.W = v.W;
  st.u_C.resize(st.W.cols());
  for (Eigen::Index k = 0; k < st.W.cols(); ++k)
    st.u_C(k) = comm_combiner(k, st, ch, cfg);
  st.u_S = sensing_combiner(st, ch, cfg);
  std::tie(st.Lambda_C, st.Lambda_S) = update_weights(st, ch, cfg);
  return st;
}

/// 1 x 1 x 1 channel set with the given scalars.
ChannelSet scalar_channels(cd h, cd g, double r, cd s) {
  ChannelSet ch;
  ch.H = cmat::Constant(1, 1, h);
  ch.G = cmat::Constant(1, 1, g);
  ch.R_H = cmat::Constant(1, 1, cd{r, 0.0});
  ch.s = cvec::Constant(1, s);
  ch.b_T = cvec::Ones(1);
  ch.b_R = cvec::Ones(1);
  return ch;
}

SystemConfig scalar_config() {
  SystemConfig c;
  c.M = c.N_T = c.N_R = 1;
  c.K = c.N_S = 1;
  return c;
}

double sensing_trace(const cvec &u, const cvec &x, const ChannelSet &ch, const SystemConfig &cfg) {
  return mse_sensing_general(u, x, ch.R_H, cfg.N_R, cfg.sigma_S2).trace().real();
}

} // namespace

TEST_CASE("communication combiner examples", "[wmmse]") {
  const SystemConfig cfg = scalar_config();
  // h^H w = 2, sigma_C^2 = 1
  const ChannelSet ch = scalar_channels(1.0, 1.0, 1.0, 1.0);
  DesignVariables v{rvec::Ones(1), cmat::Constant(1, 1, cd{2.0, 0.0}), cvec::Ones(1), PlateMode::Transmit};
  const SolverState st = prepared_state(ch, cfg, v);
  CHECK(std::abs(st.u_C(0) - cd{0.5, 0.0}) < 1e-15);
  CHECK(std::abs(mmse_comm_combiner(0, rvec::Zero(1), v.W, ch.H, cfg.sigma_C2)) == 0.0);

  // SINR = 1 gives e = 0.5 and Lambda = 2
  CHECK(mse_comm(0, st, ch, cfg) == Approx(0.5).epsilon(1e-14));
  CHECK(st.Lambda_C(0) == Approx(2.0).epsilon(1e-14));
  CHECK(mse_comm_general(0, 0.0, rvec::Ones(1), v.W, ch.H, cfg.sigma_C2) == 1.0);
}

TEST_CASE("communication combiner minimizes the MSE", "[wmmse]") {
  const SystemConfig cfg = oracle::small_config();
  Rng rng(21);
  for (int t = 0; t < 30; ++t) {
    const ChannelSet ch = generate_channels(cfg, rng);
    const DesignVariables v = oracle::random_design(cfg, rng);
    for (Eigen::Index k = 0; k < ch.users(); ++k) {
      const cd u = mmse_comm_combiner(k, v.alpha, v.W, ch.H, cfg.sigma_C2);
      const double e0 = mse_comm_general(k, u, v.alpha, v.W, ch.H, cfg.sigma_C2);
      for (double d : {-0.1, -0.01, 0.01, 0.1}) {
        CHECK(e0 <= mse_comm_general(k, u * (1.0 + d), v.alpha, v.W, ch.H, cfg.sigma_C2));
        CHECK(e0 <= mse_comm_general(k, u * cd{1.0, d}, v.alpha, v.W, ch.H, cfg.sigma_C2));
      }
      // -log2 e^MMSE equals the per-user MI
      CHECK(std::abs(-std::log2(e0) - comm_mi_per_user(v, ch, cfg)(k)) < 1e-9);
    }
  }
}

TEST_CASE("sensing combiner examples", "[wmmse]") {
  SystemConfig cfg = scalar_config();
  cfg.N_R = 3;
  cfg.sigma_S2 = 0.7;
  const cd g{0.3, -0.2}, w{1.5, 0.5}, th = std::polar(1.0, 0.4), s = std::polar(1.0, kPi / 4.0);
  const double r = 2.0;
  const ChannelSet ch = scalar_channels(1.0, g, r, s);
  DesignVariables v{rvec::Ones(1), cmat::Constant(1, 1, w), cvec::Constant(1, th), PlateMode::Transmit};
  const SolverState st = prepared_state(ch, cfg, v);
  const cd vs = th * g * w;
  const cd expected = 2.0 * r * vs * s / (std::norm(vs) * r + 4.0 * cfg.N_R * cfg.sigma_S2);
  CHECK(std::abs(st.u_S(0) - expected) < 1e-14);

  v.W.setZero();
  CHECK(prepared_state(ch, cfg, v).u_S.norm() == 0.0);
}

TEST_CASE("sensing MSE at the MMSE combiner", "[wmmse]") {
  const SystemConfig cfg = oracle::small_config();
  Rng rng(22);
  for (int t = 0; t < 30; ++t) {
    const ChannelSet ch = generate_channels(cfg, rng);
    DesignVariables v = oracle::random_design(cfg, rng);
    v.W *= 20.0; // lift the excitation well above the noise
    const cvec x = v.sensing_excitation(ch);
    const cvec u = mmse_sensing_combiner(x, ch.R_H, cfg.N_R, cfg.sigma_S2);
    const cmat E = mse_sensing_general(u, x, ch.R_H, cfg.N_R, cfg.sigma_S2);

    const cmat I = cmat::Identity(cfg.M, cfg.M);
    const cmat closed =
        ch.R_H * (I + (x * x.adjoint()) * ch.R_H / (4.0 * cfg.N_R * cfg.sigma_S2)).inverse();
    CHECK((E - closed).norm() <= 1e-8 * std::max(1.0, closed.norm()));
    CHECK((E - mmse_sensing_error(x, ch.R_H, cfg.N_R, cfg.sigma_S2)).norm() <= 1e-12 * closed.norm());
    CHECK(E.trace().real() <= ch.R_H.trace().real());

    const double t0 = sensing_trace(u, x, ch, cfg);
    for (int m = 0; m < cfg.M; ++m)
      for (cd d : {cd{1e-3, 0.0}, cd{-1e-3, 0.0}, cd{0.0, 1e-3}, cd{0.1, 0.0}}) {
        cvec up = u;
        up(m) += d * std::max(1.0, u.norm());
        CHECK(t0 <= sensing_trace(up, x, ch, cfg));
      }

    CHECK((mse_sensing_general(cvec::Zero(cfg.M), x, ch.R_H, cfg.N_R, cfg.sigma_S2) - ch.R_H).norm() <
          1e-15);

    // log2 det R - log2 det E^MMSE is the sensing MI
    const double mi = log2_abs_det(ch.R_H) - log2_abs_det(E);
    CHECK(std::abs(mi - sensing_mi(v, ch, cfg)) < 1e-7);
  }
}

TEST_CASE("weights invert the MMSE errors", "[wmmse]") {
  const SystemConfig cfg = oracle::small_config();
  Rng rng(23);
  for (int t = 0; t < 20; ++t) {
    ChannelSet ch = generate_channels(cfg, rng);
    ch.H.col(1).setZero(); // zero-SINR user
    const DesignVariables v = oracle::random_design(cfg, rng);
    const SolverState st = prepared_state(ch, cfg, v);
    CHECK(st.Lambda_C(1) == Approx(1.0).epsilon(1e-14));
    for (Eigen::Index k = 0; k < ch.users(); ++k) {
      CHECK(st.Lambda_C(k) >= 1.0);
      CHECK(std::abs(st.Lambda_C(k) * mse_comm(k, st, ch, cfg) - 1.0) < 1e-8);
    }
    const cmat prod = st.Lambda_S * mse_sensing(st, ch, cfg);
    CHECK((prod - cmat::Identity(cfg.M, cfg.M)).norm() < 1e-8);
  }
}

TEST_CASE("singular sensing MSE is reported", "[wmmse]") {
  SystemConfig cfg = oracle::small_config();
  cfg.delta_reg = 0.0;
  Rng rng(24);
  const ChannelSet ch = generate_channels(cfg, rng);
  const DesignVariables v = oracle::random_design(cfg, rng);
  CHECK_THROWS_AS(prepared_state(ch, cfg, v), SolverError);
}

TEST_CASE("MI and MMSE bridge", "[wmmse]") {
  SystemConfig cfg = oracle::small_config();
  Rng rng(25);
  for (double kappa : {0.0, 0.3, 0.5, 1.0}) {
    cfg.kappa = kappa;
    for (int t = 0; t < 20; ++t) {
      const ChannelSet ch = generate_channels(cfg, rng);
      DesignVariables v = oracle::random_design(cfg, rng);
      v.W *= 1.0 + 10.0 * uniform01(rng);
      const Combiners c = mmse_combiners(v, ch, cfg);
      double lhs = 0.0;
      for (Eigen::Index k = 0; k < ch.users(); ++k)
        lhs -= kappa * std::log2(mse_comm_general(k, c.u_C(k), v.alpha, v.W, ch.H, cfg.sigma_C2));
      const cmat E = mmse_sensing_error(v.sensing_excitation(ch), ch.R_H, cfg.N_R, cfg.sigma_S2);
      lhs += (1.0 - kappa) * (log2_abs_det(ch.R_H) - log2_abs_det(E));
      CHECK(std::abs(lhs - sum_objective(v, ch, cfg)) < 1e-7);
    }
  }
}

TEST_CASE("entropy penalty", "[wmmse]") {
  CHECK(penalty(0.0, 0.1) == 0.0);
  CHECK(penalty(1.0, 0.1) == 0.0);
  CHECK(penalty(0.5, 0.1) == Approx(0.1 * std::log(0.5)).epsilon(1e-14));
  CHECK(penalty(0.5, 0.1) == Approx(-0.0693).margin(5e-5));
  for (int i = 1; i < 100; ++i)
    CHECK(penalty(i / 100.0, 0.3) < 0.0);

  CHECK(std::abs(penalty_derivative(0.5, 0.1)) < 1e-15);
  const double h = 1e-5;
  const double fd = (penalty(0.3 + h, 0.1) - penalty(0.3 - h, 0.1)) / (2.0 * h);
  CHECK(std::abs(fd - penalty_derivative(0.3, 0.1)) < 1e-6);

  // clamped anchor keeps the slope finite at the boundary
  CHECK(std::isfinite(penalty_derivative(0.0, 0.1)));
  CHECK(penalty_derivative(1.0, 0.1) == Approx(0.1 * std::log((1.0 - kAnchorClamp) / kAnchorClamp)));

  // tangent line: exact at the anchor, below the convex penalty elsewhere
  for (double a : {0.1, 0.4, 0.8})
    for (int i = 0; i <= 20; ++i) {
      const double x = i / 20.0;
      CHECK(penalty_linearized(x, a, 0.2) <= penalty(x, 0.2) + 1e-15);
    }
  CHECK(penalty_linearized(0.4, 0.4, 0.2) == Approx(penalty(0.4, 0.2)).epsilon(1e-15));
}

TEST_CASE("joint subproblem feasibility, KKT and descent", "[wmmse]") {
  Rng rng(26);
  int checked = 0;
  for (int t = 0; t < 100; ++t) {
    SystemConfig cfg = oracle::small_config();
    cfg.kappa = 0.2 + 0.6 * uniform01(rng);
    cfg.rho = 0.02 + 0.3 * uniform01(rng);
    cfg.set_snr_db(-5.0 + 20.0 * uniform01(rng));
    const ChannelSet ch = generate_channels(cfg, rng);
    DesignVariables v = oracle::random_design(cfg, rng);
    v.alpha = (v.alpha.array().max(0.01).min(0.99)).matrix();
    if (v.alpha.sum() > cfg.N_S)
      v.alpha *= cfg.N_S / v.alpha.sum();
    // keep the incoming point feasible for the per-user caps
    for (int k = 0; k < cfg.K; ++k)
      v.W.col(k) *= std::sqrt(v.alpha(k) * cfg.P_T / cfg.K) / std::max(v.W.col(k).norm(), 1e-300);
    const SolverState st = prepared_state(ch, cfg, v);
    const double before = surrogate(st, ch, cfg);

    const SubproblemResult r = solve_joint_subproblem(st, ch, cfg, st.alpha);
    CHECK(r.W.squaredNorm() <= cfg.P_T * (1.0 + 1e-12));
    CHECK(r.alpha.sum() <= cfg.N_S + 1e-9);
    for (int k = 0; k < cfg.K; ++k) {
      CHECK(r.alpha(k) >= 0.0);
      CHECK(r.alpha(k) <= 1.0);
      CHECK(r.W.col(k).squaredNorm() <= r.alpha(k) * cfg.P_T + 1e-9);
    }
    CHECK(r.kkt_residual <= 1e-6);

    SolverState after = st;
    after.alpha = r.alpha;
    after.W = r.W;
    CHECK(surrogate(after, ch, cfg) <= before + 1e-10 * std::abs(before));
    ++checked;
  }
  CHECK(checked == 100);
}

TEST_CASE("single user with kappa = 1 beams along its channel", "[wmmse]") {
  SystemConfig cfg;
  cfg.K = cfg.N_S = 1;
  cfg.kappa = 1.0;
  Rng rng(27);
  for (double snr : {-10.0, 0.0, 10.0, 30.0}) {
    cfg.set_snr_db(snr);
    const ChannelSet ch = generate_channels(cfg, rng);
    DesignVariables v;
    v.alpha = rvec::Ones(1);
    v.W = oracle::random_complex(cfg.N_T, 1, rng);
    v.W *= std::sqrt(0.5 * cfg.P_T) / v.W.norm();
    v.theta = random_phases(cfg.M, rng);
    const SolverState st = prepared_state(ch, cfg, v);
    const SubproblemResult r = solve_joint_subproblem(st, ch, cfg, rvec::Ones(1));
    CHECK(r.alpha(0) == 1.0);
    const cvec w = r.W.col(0), h = ch.H.col(0);
    CHECK(std::abs(h.dot(w)) / (w.norm() * h.norm()) >= 1.0 - 1e-8);
    CHECK(w.squaredNorm() <= cfg.P_T * (1.0 + 1e-12));
  }
}

TEST_CASE("W-only subproblem keeps inactive users silent", "[wmmse]") {
  const SystemConfig cfg = oracle::small_config();
  Rng rng(28);
  const ChannelSet ch = generate_channels(cfg, rng);
  const DesignVariables v = oracle::random_design(cfg, rng);
  const SolverState st = prepared_state(ch, cfg, v);
  const std::vector<bool> active{true, false, true, false};
  const SubproblemResult r = solve_w_subproblem(st, ch, cfg, active);
  CHECK(r.W.col(1).norm() == 0.0);
  CHECK(r.W.col(3).norm() == 0.0);
  CHECK(r.alpha == (rvec(4) << 1, 0, 1, 0).finished());
  CHECK(r.W.squaredNorm() <= cfg.P_T * (1.0 + 1e-12));
}

TEST_CASE("inner loop descent, termination and MI", "[wmmse]") {
  SystemConfig cfg;
  Rng rng(29);
  for (int t = 0; t < 10; ++t) {
    const ChannelSet ch = generate_channels(cfg, rng);
    const SolverState s0 = initial_state(ch, cfg, random_phases(cfg.M, rng));
    const SolverState st = inner_loop(s0, ch, cfg);

    const auto &blk = st.surrogate_per_block;
    for (std::size_t i = 1; i < blk.size(); ++i)
      CHECK(blk[i] <= blk[i - 1] + 1e-8 * std::abs(blk[i - 1]));
    const auto &it = st.surrogate_per_iter;
    for (std::size_t i = 1; i < it.size(); ++i)
      CHECK(it[i] <= it[i - 1] + 1e-8 * std::abs(it[i - 1]));

    CHECK(st.sweeps <= cfg.p_max);
    CHECK(st.sweeps < cfg.p_max); // stopped on the tolerance

    CHECK(sum_objective(unit_gain_view(st), ch, cfg) >= sum_objective(unit_gain_view(s0), ch, cfg) - 1e-6);
    CHECK(feasibility_violation(st.design(), cfg, 1e-9).empty());

    // restarting from the output stops after one sweep
    const SolverState again = inner_loop(st, ch, cfg);
    CHECK(again.sweeps == 1);
  }
}

TEST_CASE("inner loop rejects p_max < 1", "[wmmse]") {
  SystemConfig cfg = oracle::small_config();
  Rng rng(30);
  const ChannelSet ch = generate_channels(cfg, rng);
  const SolverState s0 = initial_state(ch, cfg, random_phases(cfg.M, rng));
  cfg.p_max = 0;
  CHECK_THROWS_AS(inner_loop(s0, ch, cfg), ConfigError);
}

TEST_CASE("fixed-schedule loop", "[wmmse]") {
  SystemConfig cfg;
  Rng rng(31);
  const ChannelSet ch = generate_channels(cfg, rng);
  SolverState s0 = initial_state(ch, cfg, random_phases(cfg.M, rng));
  s0.alpha = (rvec(8) << 1, 0, 1, 1, 0, 1, 0, 1).finished();
  const SolverState st = inner_loop_fixed_schedule(s0, ch, cfg);
  for (int k : {1, 4, 6})
    CHECK(st.W.col(k).norm() == 0.0);
  CHECK(st.alpha == s0.alpha);
  const auto &blk = st.surrogate_per_block;
  for (std::size_t i = 1; i < blk.size(); ++i)
    CHECK(blk[i] <= blk[i - 1] + 1e-8 * std::abs(blk[i - 1]));
  CHECK(feasibility_violation(st.design(), cfg, 1e-9).empty());
}

TEST_CASE("schedule rounding", "[wmmse]") {
  CHECK(round_schedule((rvec(4) << 0.99, 0.97, 0.02, 0.01).finished(), 2) ==
        (rvec(4) << 1, 1, 0, 0).finished());
  CHECK(round_schedule((rvec(3) << 0.4, 0.49, 0.1).finished(), 2) == rvec::Zero(3));
  CHECK(round_schedule((rvec(4) << 0.9, 0.5, 0.5, 0.5).finished(), 2) ==
        (rvec(4) << 1, 1, 0, 0).finished());
  CHECK(round_schedule((rvec(4) << 0.2, 0.5, 0.7, 0.5).finished(), 2) ==
        (rvec(4) << 0, 1, 1, 0).finished());
  CHECK(round_schedule((rvec(3) << 1, 1, 1).finished(), 2).sum() == 2.0);
}

TEST_CASE("surrogate and MI gradients coincide at the MMSE weights", "[wmmse]") {
  SystemConfig cfg = oracle::small_config();
  Rng rng(32);
  for (int t = 0; t < 20; ++t) {
    const ChannelSet ch = generate_channels(cfg, rng);
    DesignVariables v = oracle::random_design(cfg, rng);
    v.W *= 0.5; // interior point, power and caps inactive
    v.W.col(0) *= 20.0 / (1.0 + v.W.col(0).norm());
    const Combiners c = mmse_combiners(v, ch, cfg);
    rvec lc(cfg.K);
    for (int k = 0; k < cfg.K; ++k)
      lc(k) = 1.0 / mse_comm_general(k, c.u_C(k), v.alpha, v.W, ch.H, cfg.sigma_C2);
    const cmat ls =
        mmse_sensing_error(v.sensing_excitation(ch), ch.R_H, cfg.N_R, cfg.sigma_S2).inverse();

    auto weighted = [&](const cmat &W) {
      DesignVariables d = v;
      d.W = W;
      double acc = 0.0;
      for (int k = 0; k < cfg.K; ++k)
        acc += cfg.kappa * lc(k) * mse_comm_general(k, c.u_C(k), v.alpha, W, ch.H, cfg.sigma_C2);
      const cmat E = mse_sensing_general(c.u_S, d.sensing_excitation(ch), ch.R_H, cfg.N_R, cfg.sigma_S2);
      return acc + (1.0 - cfg.kappa) * (ls * E).trace().real();
    };
    auto neg_mi = [&](const cmat &W) {
      DesignVariables d = v;
      d.W = W;
      return -oracle::sum_mi_nats(d, ch, cfg);
    };

    const cmat D = oracle::random_complex(cfg.N_T, cfg.K, rng);
    const double h = 1e-6;
    const double g1 = (weighted(v.W + h * D) - weighted(v.W - h * D)) / (2.0 * h);
    const double g2 = (neg_mi(v.W + h * D) - neg_mi(v.W - h * D)) / (2.0 * h);
    CHECK(std::abs(g1 - g2) <= 1e-4 * std::max(std::abs(g1), std::abs(g2)));
  }
}
