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

// Weighted-MMSE machinery for the joint scheduling / active beamforming block.
//
// Inside the alternating loop the scheduling variables enter only through
// the per-user power caps ||w_k||^2 <= alpha_k P_T and the entropy penalty;
// the MSE terms see the beamformers W directly (a user with alpha_k = 0 is
// switched off because its cap forces w_k = 0). Every state-based function
// below works in that model. Once alpha is binary and unscheduled columns
// are zero the model coincides with the one in metrics.hpp.
//
// The general-gain helpers (mse_comm_general and friends) evaluate the same
// quantities with explicit per-user gains and are what the MI/MMSE identity
// checks use.

#pragma once

#include "omnisteer/config.hpp"
#include "omnisteer/metrics.hpp"
#include "omnisteer/model.hpp"
#include "omnisteer/types.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <utility>
#include <vector>

namespace omnisteer {

struct SolverState {
  cvec u_C;      // K
  cvec u_S;      // M
  rvec Lambda_C; // K, each >= 1
  cmat Lambda_S; // M x M, Hermitian PD
  rvec alpha;    // K
  cmat W;        // N_T x K
  cvec theta;    // M
  std::vector<double> surrogate_per_iter;  // one value per completed sweep
  std::vector<double> surrogate_per_block; // after every block update
  int sweeps = 0;
  double kkt_residual = 0.0; // of the last subproblem solve

  DesignVariables design(PlateMode mode = PlateMode::Transmit) const {
    return {alpha, W, theta, mode};
  }
};

/// Scheduling-independent view: every column of W transmits with unit gain.
inline DesignVariables unit_gain_view(const SolverState &st) {
  return {rvec::Ones(st.W.cols()), st.W, st.theta, PlateMode::Transmit};
}

// ---- general-gain helpers -------------------------------------------------

/// e_{C,k}(u) = |u g_k alpha_k / 2 - 1|^2 + sum_{j != k} |u g_j alpha_j / 2|^2 + sigma_C^2 |u|^2
/// with g_j = h_k^H w_j.
inline double mse_comm_general(Eigen::Index k, cd u, const rvec &gains, const cmat &W, const cmat &H,
                               double sigma_C2) {
  const cvec g = W.transpose() * H.col(k).conjugate(); // g(j) = h_k^H w_j
  double e = sigma_C2 * std::norm(u);
  for (Eigen::Index j = 0; j < g.size(); ++j) {
    const cd a = 0.5 * u * gains(j) * g(j);
    e += j == k ? std::norm(a - 1.0) : std::norm(a);
  }
  return e;
}

/// E_S(u) = (1/4) q u u^H - (1/2) u x^H R - (1/2) R x u^H + N_R sigma_S^2 u u^H + R,
/// q = x^H R x, x = V_S s.
inline cmat mse_sensing_general(const cvec &u, const cvec &x, const cmat &R_H, int n_r, double sigma_S2) {
  const cvec Rx = R_H * x;
  const double q = x.dot(Rx).real();
  cmat E = (0.25 * q + n_r * sigma_S2) * (u * u.adjoint());
  E -= 0.5 * (u * Rx.adjoint());
  E -= 0.5 * (Rx * u.adjoint());
  E += R_H;
  return 0.5 * (E + E.adjoint());
}

/// E_S at the MMSE combiner, R - (Rx)(Rx)^H / (q + 4 N_R sigma_S^2).
inline cmat mmse_sensing_error(const cvec &x, const cmat &R_H, int n_r, double sigma_S2) {
  const cvec Rx = R_H * x;
  const double q = x.dot(Rx).real();
  cmat E = R_H - (Rx * Rx.adjoint()) / (q + 4.0 * n_r * sigma_S2);
  return 0.5 * (E + E.adjoint());
}

/// log det of a Hermitian positive definite matrix (natural log). Throws
/// SolverError when the matrix is not numerically positive definite.
inline double logdet_hpd(const cmat &A, const char *what) {
  Eigen::LLT<cmat> llt(A);
  if (llt.info() != Eigen::Success)
    throw SolverError(std::string(what) + " is not positive definite");
  const cmat &L = llt.matrixLLT();
  double acc = 0.0;
  for (Eigen::Index i = 0; i < L.rows(); ++i)
    acc += std::log(L(i, i).real());
  return 2.0 * acc;
}

// ---- state-based operations ----------------------------------------------

inline cvec unit_excitation(const SolverState &st, const ChannelSet &ch) {
  return st.theta.cwiseProduct(ch.G * (st.W * ch.s));
}

/// u_{C,k} = (1/2) w_k^H h_k / (sum_j (1/4)|h_k^H w_j|^2 + sigma_C^2).
inline cd comm_combiner(Eigen::Index k, const SolverState &st, const ChannelSet &ch, const SystemConfig &cfg) {
  return mmse_comm_combiner(k, rvec::Ones(st.W.cols()), st.W, ch.H, cfg.sigma_C2);
}

/// u_S = 2 R_H x / (x^H R_H x + 4 N_R sigma_S^2).
inline cvec sensing_combiner(const SolverState &st, const ChannelSet &ch, const SystemConfig &cfg) {
  return mmse_sensing_combiner(unit_excitation(st, ch), ch.R_H, cfg.N_R, cfg.sigma_S2);
}

inline double mse_comm(Eigen::Index k, const SolverState &st, const ChannelSet &ch, const SystemConfig &cfg) {
  return mse_comm_general(k, st.u_C(k), rvec::Ones(st.W.cols()), st.W, ch.H, cfg.sigma_C2);
}

inline cmat mse_sensing(const SolverState &st, const ChannelSet &ch, const SystemConfig &cfg) {
  return mse_sensing_general(st.u_S, unit_excitation(st, ch), ch.R_H, cfg.N_R, cfg.sigma_S2);
}

/// Lambda_{C,k} = 1 / e_{C,k}, Lambda_S = E_S^{-1}, both at the current combiners.
inline std::pair<rvec, cmat> update_weights(const SolverState &st, const ChannelSet &ch,
                                            const SystemConfig &cfg) {
  const auto K = st.W.cols();
  rvec lc(K);
  for (Eigen::Index k = 0; k < K; ++k)
    lc(k) = 1.0 / mse_comm(k, st, ch, cfg);
  const cmat E = mse_sensing(st, ch, cfg);
  Eigen::LLT<cmat> llt(E);
  if (llt.info() != Eigen::Success) {
    std::ostringstream os;
    os << "sensing MSE matrix is singular (delta_reg = " << cfg.delta_reg << ")";
    throw SolverError(os.str());
  }
  cmat ls = llt.solve(cmat::Identity(E.rows(), E.cols()));
  ls = 0.5 * (ls + ls.adjoint()).eval();
  return {lc, ls};
}

// ---- entropy penalty --------------------------------------------------------

inline constexpr double kAnchorClamp = 1e-6;

/// f_rho(a) = rho [a ln a + (1 - a) ln(1 - a)], 0 ln 0 = 0.
inline double penalty(double a, double rho) {
  auto xlogx = [](double x) { return x > 0.0 ? x * std::log(x) : 0.0; };
  return rho * (xlogx(a) + xlogx(1.0 - a));
}

/// f_rho'(a) = rho ln(a / (1 - a)) with a clamped away from {0, 1}.
inline double penalty_derivative(double a, double rho) {
  const double c = std::clamp(a, kAnchorClamp, 1.0 - kAnchorClamp);
  return rho * std::log(c / (1.0 - c));
}

/// First-order expansion of f_rho around the (clamped) anchor.
inline double penalty_linearized(double a, double anchor, double rho) {
  const double c = std::clamp(anchor, kAnchorClamp, 1.0 - kAnchorClamp);
  return penalty(c, rho) + (a - c) * penalty_derivative(c, rho);
}

/// Weighted-MSE surrogate with natural logs:
/// kappa sum_k (Lambda_k e_k - ln Lambda_k) + (1 - kappa)(tr(Lambda_S E_S) - ln det Lambda_S)
/// - sum_k f_rho(alpha_k).
inline double surrogate(const SolverState &st, const ChannelSet &ch, const SystemConfig &cfg) {
  double comm = 0.0;
  for (Eigen::Index k = 0; k < st.W.cols(); ++k)
    comm += st.Lambda_C(k) * mse_comm(k, st, ch, cfg) - std::log(st.Lambda_C(k));
  const cmat E = mse_sensing(st, ch, cfg);
  const double sens = (st.Lambda_S * E).trace().real() - logdet_hpd(st.Lambda_S, "Lambda_S");
  double pen = 0.0;
  for (Eigen::Index k = 0; k < st.alpha.size(); ++k)
    pen += penalty(st.alpha(k), cfg.rho);
  return cfg.kappa * comm + (1.0 - cfg.kappa) * sens - pen;
}

// ---- convex (alpha, W) block ------------------------------------------------

namespace detail {

/// The W-dependent part of the weighted MSE with combiners and weights fixed,
///   sum_k w_k^H A_C w_k + beta (W s)^H B (W s) - 2 Re sum_k f_k^H w_k,
/// solved for per-user ridges r_k via one eigendecomposition of A_C and a
/// Woodbury step for the rank-structured sensing coupling.
class WeightedMseQuadratic {
public:
  WeightedMseQuadratic(const SolverState &st, const ChannelSet &ch, const SystemConfig &cfg) {
    const auto K = st.W.cols();
    const auto N = st.W.rows();
    const cmat M = st.theta.asDiagonal() * ch.G;
    cmat A_C = cmat::Zero(N, N);
    for (Eigen::Index k = 0; k < K; ++k)
      A_C += (0.25 * cfg.kappa * st.Lambda_C(k) * std::norm(st.u_C(k))) * (ch.H.col(k) * ch.H.col(k).adjoint());
    A_C = 0.5 * (A_C + A_C.adjoint()).eval();
    const double beta = 0.25 * (1.0 - cfg.kappa) * st.u_S.dot(st.Lambda_S * st.u_S).real();
    const cvec y = M.adjoint() * (ch.R_H * (st.Lambda_S * st.u_S));
    F_.resize(N, K);
    for (Eigen::Index k = 0; k < K; ++k)
      F_.col(k) = (0.5 * cfg.kappa * st.Lambda_C(k) * std::conj(st.u_C(k))) * ch.H.col(k) +
                  (0.5 * (1.0 - cfg.kappa) * std::conj(ch.s(k))) * y;
    s_ = ch.s;
    A_C_ = A_C;
    Bb_ = beta * (M.adjoint() * ch.R_H * M);
    Bb_ = 0.5 * (Bb_ + Bb_.adjoint()).eval();

    Eigen::SelfAdjointEigenSolver<cmat> es(A_C);
    V_ = es.eigenvectors();
    lam_ = es.eigenvalues().cwiseMax(0.0);
    G_ = V_.adjoint() * F_;
    Bt_ = V_.adjoint() * Bb_ * V_;
    scale_ = std::max({lam_.maxCoeff(), Bb_.cwiseAbs().maxCoeff(), 1e-300});
  }

  /// Minimizer of the quadratic plus sum_k ridge_k ||w_k||^2 over the
  /// active columns; inactive columns are pinned to zero.
  cmat solve(const rvec &ridge, const std::vector<bool> &active) const {
    const auto N = V_.rows();
    const auto K = F_.cols();
    rvec t = rvec::Zero(N);
    cvec rhs = cvec::Zero(N);
    for (Eigen::Index k = 0; k < K; ++k) {
      if (!active[static_cast<std::size_t>(k)])
        continue;
      const rvec inv = (lam_.array() + ridge(k)).inverse().matrix();
      t += std::norm(s_(k)) * inv;
      rhs += s_(k) * inv.cast<cd>().cwiseProduct(G_.col(k));
    }
    cmat sys = t.cast<cd>().asDiagonal() * Bt_;
    sys.diagonal().array() += 1.0;
    const cvec z = sys.partialPivLu().solve(rhs); // V^H (W s)
    const cvec bz = Bt_ * z;
    cmat W = cmat::Zero(N, K);
    for (Eigen::Index k = 0; k < K; ++k) {
      if (!active[static_cast<std::size_t>(k)])
        continue;
      const rvec inv = (lam_.array() + ridge(k)).inverse().matrix();
      W.col(k) = V_ * inv.cast<cd>().cwiseProduct(G_.col(k) - std::conj(s_(k)) * bz);
    }
    return W;
  }

  double value(const cmat &W) const {
    const cvec x = W * s_;
    return real_inner(W, A_C_ * W) + x.dot(Bb_ * x).real() - 2.0 * real_inner(F_, W);
  }

  double scale() const { return scale_; }
  double f_norm() const { return F_.norm(); }

private:
  cmat F_, V_, G_, Bt_, Bb_, A_C_;
  rvec lam_;
  cvec s_;
  double scale_ = 1.0;
};

inline double column_power(const cmat &W) { return W.squaredNorm(); }

struct PowerSolve {
  cmat W;
  double mu = 0.0;
  bool power_active = false;
};

/// Smallest total-power multiplier mu >= mu_min with sum ||w_k||^2 <= P_T.
/// Root-finds 1/sqrt(P(mu)) - 1/sqrt(P_T), which is close to linear in mu,
/// with the Illinois variant of regula falsi. Always returns the feasible end
/// of the bracket.
inline PowerSolve solve_total_power(const WeightedMseQuadratic &q, const rvec &price,
                                    const std::vector<bool> &active, double P_T) {
  const double mu_min = 1e-10 * q.scale();
  auto eval = [&](double mu) {
    const rvec ridge = (price.array() + mu).matrix();
    return q.solve(ridge, active);
  };
  PowerSolve out;
  cmat W_lo = eval(mu_min);
  if (column_power(W_lo) <= P_T) {
    out.W = std::move(W_lo);
    out.mu = mu_min;
    return out;
  }
  out.power_active = true;
  const double target = 1.0 / std::sqrt(P_T);
  auto phi = [&](const cmat &W) { return 1.0 / std::sqrt(std::max(column_power(W), 1e-300)) - target; };

  double lo = mu_min, hi = std::max(q.f_norm() / std::sqrt(P_T), 2.0 * mu_min);
  cmat W_hi = eval(hi);
  while (column_power(W_hi) > P_T) { // guard; the bound above should already hold
    lo = hi;
    hi *= 2.0;
    W_hi = eval(hi);
  }
  double f_lo = phi(W_lo), f_hi = phi(W_hi);
  int side = 0;
  for (int it = 0; it < 200; ++it) {
    if (hi - lo <= 1e-15 * hi || std::abs(column_power(W_hi) - P_T) <= 1e-13 * P_T)
      break;
    double mid = hi - f_hi * (hi - lo) / (f_hi - f_lo);
    if (!(mid > lo && mid < hi))
      mid = 0.5 * (lo + hi);
    cmat W_mid = eval(mid);
    const double f_mid = phi(W_mid);
    if (f_mid >= 0.0) {
      hi = mid;
      W_hi = std::move(W_mid);
      f_hi = f_mid;
      if (side == 1)
        f_lo *= 0.5;
      side = 1;
    } else {
      lo = mid;
      f_lo = f_mid;
      if (side == -1)
        f_hi *= 0.5;
      side = -1;
    }
  }
  out.W = std::move(W_hi);
  out.mu = hi;
  return out;
}

} // namespace detail

struct SubproblemResult {
  rvec alpha;
  cmat W;
  double kkt_residual = 0.0;
  double mu = 0.0; // total-power multiplier
  double nu = 0.0; // cardinality multiplier
};

/// Majorized (alpha, W) objective: the quadratic W part plus the linearized
/// penalty, up to constants.
inline double majorized_objective(const detail::WeightedMseQuadratic &q, const rvec &alpha, const cmat &W,
                                  const rvec &anchor, double rho) {
  double pen = 0.0;
  for (Eigen::Index k = 0; k < alpha.size(); ++k)
    pen += penalty_linearized(alpha(k), anchor(k), rho);
  return q.value(W) - pen;
}

/// Raises alpha on the tied users by `budget` in total, each share
/// proportional to the user's current alpha (equal shares when all are
/// zero), capped at 1. Keeps the choice free of any index ordering.
inline void fill_tied_users(rvec &alpha, const std::vector<Eigen::Index> &tied, double budget) {
  rvec weight(static_cast<Eigen::Index>(tied.size()));
  for (std::size_t i = 0; i < tied.size(); ++i)
    weight(static_cast<Eigen::Index>(i)) = alpha(tied[i]);
  if (weight.sum() <= 0.0)
    weight.setOnes();
  auto added = [&](double t) {
    double s = 0.0;
    for (std::size_t i = 0; i < tied.size(); ++i)
      s += std::min(1.0 - alpha(tied[i]), t * weight(static_cast<Eigen::Index>(i)));
    return s;
  };
  double lo = 0.0, hi = 1.0;
  while (added(hi) < budget && hi < 1e300) {
    bool saturated = true;
    for (std::size_t i = 0; i < tied.size(); ++i)
      if (weight(static_cast<Eigen::Index>(i)) > 0.0 && hi * weight(static_cast<Eigen::Index>(i)) < 1.0 - alpha(tied[i]))
        saturated = false;
    if (saturated)
      break;
    hi *= 2.0;
  }
  for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
    const double mid = 0.5 * (lo + hi);
    (added(mid) < budget ? lo : hi) = mid;
  }
  const double t = added(hi) <= budget ? hi : lo;
  for (std::size_t i = 0; i < tied.size(); ++i)
    alpha(tied[i]) += std::min(1.0 - alpha(tied[i]), t * weight(static_cast<Eigen::Index>(i)));
}

/// Exact minimizer of the convex (alpha, W) block with the penalty
/// linearized at alpha_anchor, subject to
///   sum ||w_k||^2 <= P_T,  ||w_k||^2 <= alpha_k P_T,  sum alpha <= N_S,  0 <= alpha <= 1.
///
/// For a fixed W the best alpha_k is 1 when c_k = f_rho'(anchor_k) exceeds
/// the cardinality multiplier nu, and ||w_k||^2 / P_T otherwise; the latter
/// turns into a ridge (nu - c_k)/P_T on w_k. nu is found by bisection on
/// sum alpha(nu) <= N_S. At a breakpoint (nu = c_k) the tied users are
/// filled (see fill_tied_users) until the budget N_S is used up.
inline SubproblemResult solve_joint_subproblem(const SolverState &st, const ChannelSet &ch,
                                               const SystemConfig &cfg, const rvec &alpha_anchor) {
  if (!(cfg.P_T > 0.0))
    throw ConfigError("solve_joint_subproblem: P_T must be > 0");
  const auto K = st.W.cols();
  const detail::WeightedMseQuadratic q(st, ch, cfg);
  rvec c(K);
  for (Eigen::Index k = 0; k < K; ++k)
    c(k) = penalty_derivative(alpha_anchor(k), cfg.rho);
  const std::vector<bool> all(static_cast<std::size_t>(K), true);

  struct Eval {
    detail::PowerSolve ps;
    rvec alpha;
    double total = 0.0;
  };
  auto evaluate = [&](double nu) {
    rvec price(K);
    for (Eigen::Index k = 0; k < K; ++k)
      price(k) = std::max(0.0, nu - c(k)) / cfg.P_T;
    Eval e{detail::solve_total_power(q, price, all, cfg.P_T), rvec(K), 0.0};
    for (Eigen::Index k = 0; k < K; ++k)
      e.alpha(k) = c(k) > nu ? 1.0 : std::min(1.0, e.ps.W.col(k).squaredNorm() / cfg.P_T);
    e.total = e.alpha.sum();
    return e;
  };

  const double ns = static_cast<double>(cfg.N_S);
  double nu_lo = 0.0, nu_hi = 0.0;
  Eval best = evaluate(0.0);
  if (best.total > ns) {
    nu_hi = std::max(c.maxCoeff(), 0.0) + 1.0;
    Eval hi = evaluate(nu_hi);
    for (int it = 0; it < 200 && nu_hi - nu_lo > 1e-13 * std::max(1.0, nu_hi); ++it) {
      const double mid = 0.5 * (nu_lo + nu_hi);
      Eval e = evaluate(mid);
      if (e.total > ns) {
        nu_lo = mid;
      } else {
        nu_hi = mid;
        hi = std::move(e);
      }
      if (std::abs(hi.total - ns) <= 1e-12 * ns)
        break;
    }
    best = std::move(hi);
    // Users whose breakpoint sits inside the final bracket are indifferent
    // at nu*; spend the leftover budget on them.
    std::vector<Eigen::Index> tied;
    for (Eigen::Index k = 0; k < K; ++k)
      if (c(k) > nu_lo && c(k) <= nu_hi)
        tied.push_back(k);
    const double budget = ns - best.total;
    if (!tied.empty() && budget > 0.0) {
      fill_tied_users(best.alpha, tied, budget);
      best.total = best.alpha.sum();
    }
  }

  SubproblemResult r;
  r.alpha = best.alpha;
  r.W = best.ps.W;
  r.mu = best.ps.mu;
  r.nu = nu_hi;
  const double power = r.W.squaredNorm();
  double res = 0.0;
  if (best.ps.power_active)
    res = std::max(res, std::abs(cfg.P_T - power) / cfg.P_T);
  if (nu_hi > 0.0)
    res = std::max(res, std::abs(ns - best.total) / ns);
  res = std::max(res, std::max(0.0, power - cfg.P_T) / cfg.P_T);
  for (Eigen::Index k = 0; k < K; ++k)
    res = std::max(res, std::max(0.0, r.W.col(k).squaredNorm() - r.alpha(k) * cfg.P_T) / cfg.P_T);
  r.kkt_residual = res;

  // Never hand back something worse than the incoming point.
  const double before = majorized_objective(q, st.alpha, st.W, alpha_anchor, cfg.rho);
  const double after = majorized_objective(q, r.alpha, r.W, alpha_anchor, cfg.rho);
  if (after > before + 1e-12 * std::max(1.0, std::abs(before))) {
    r.alpha = st.alpha;
    r.W = st.W;
  }
  return r;
}

/// W-only block with a fixed binary schedule: inactive columns are zero,
/// active ones share the total power budget.
inline SubproblemResult solve_w_subproblem(const SolverState &st, const ChannelSet &ch, const SystemConfig &cfg,
                                           const std::vector<bool> &active) {
  const auto K = st.W.cols();
  const detail::WeightedMseQuadratic q(st, ch, cfg);
  const auto ps = detail::solve_total_power(q, rvec::Zero(K), active, cfg.P_T);
  SubproblemResult r;
  r.alpha.resize(K);
  for (Eigen::Index k = 0; k < K; ++k)
    r.alpha(k) = active[static_cast<std::size_t>(k)] ? 1.0 : 0.0;
  r.W = ps.W;
  r.mu = ps.mu;
  r.kkt_residual = ps.power_active ? std::abs(cfg.P_T - r.W.squaredNorm()) / cfg.P_T : 0.0;
  if (q.value(r.W) > q.value(st.W) + 1e-12 * std::max(1.0, std::abs(q.value(st.W)))) {
    bool incoming_ok = true;
    for (Eigen::Index k = 0; k < K; ++k)
      if (!active[static_cast<std::size_t>(k)] && st.W.col(k).squaredNorm() > 0.0)
        incoming_ok = false;
    if (incoming_ok)
      r.W = st.W;
  }
  return r;
}

/// Initial point: alpha = N_S / K, matched-filter columns with P_T / K each.
inline SolverState initial_state(const ChannelSet &ch, const SystemConfig &cfg, const cvec &theta) {
  const auto K = ch.users();
  SolverState st;
  st.alpha = rvec::Constant(K, static_cast<double>(cfg.N_S) / static_cast<double>(K));
  st.W.resize(ch.H.rows(), K);
  const double amp = std::sqrt(cfg.P_T / static_cast<double>(K));
  for (Eigen::Index k = 0; k < K; ++k) {
    const double n = ch.H.col(k).norm();
    st.W.col(k) = n > 0.0 ? cvec(amp * ch.H.col(k) / n) : cvec::Zero(ch.H.rows());
  }
  st.theta = theta;
  return st;
}

namespace detail {

inline void refresh_auxiliaries(SolverState &st, const ChannelSet &ch, const SystemConfig &cfg) {
  st.u_C.resize(st.W.cols());
  for (Eigen::Index k = 0; k < st.W.cols(); ++k)
    st.u_C(k) = comm_combiner(k, st, ch, cfg);
  st.u_S = sensing_combiner(st, ch, cfg);
}

/// Shared sweep driver. `block` updates (alpha, W) in place.
template <class Block>
SolverState run_sweeps(SolverState st, const ChannelSet &ch, const SystemConfig &cfg, Block block) {
  if (cfg.p_max < 1)
    throw ConfigError("inner loop: p_max must be >= 1");
  st.surrogate_per_iter.clear();
  st.surrogate_per_block.clear();
  st.sweeps = 0;
  // Weights need a valid Lambda for the first surrogate evaluation.
  st.Lambda_C = rvec::Ones(st.W.cols());
  st.Lambda_S = cmat::Identity(ch.R_H.rows(), ch.R_H.cols());
  double reference = std::numeric_limits<double>::quiet_NaN();
  for (int p = 1; p <= cfg.p_max; ++p) {
    refresh_auxiliaries(st, ch, cfg);
    if (p > 1)
      st.surrogate_per_block.push_back(surrogate(st, ch, cfg));
    std::tie(st.Lambda_C, st.Lambda_S) = update_weights(st, ch, cfg);
    const double after_weights = surrogate(st, ch, cfg);
    st.surrogate_per_block.push_back(after_weights);
    if (p == 1)
      reference = after_weights;
    block(st);
    const double value = surrogate(st, ch, cfg);
    st.surrogate_per_block.push_back(value);
    st.surrogate_per_iter.push_back(value);
    st.sweeps = p;
    if (std::abs(value - reference) < cfg.epsilon * std::max(std::abs(reference), 1e-300))
      break;
    reference = value;
  }
  return st;
}

} // namespace detail

/// Alternates combiners, weights and the convex (alpha, W) block until the
/// surrogate changes by less than epsilon (relative) or p_max sweeps ran.
inline SolverState inner_loop(const SolverState &state0, const ChannelSet &ch, const SystemConfig &cfg) {
  return detail::run_sweeps(state0, ch, cfg, [&](SolverState &st) {
    const rvec anchor = st.alpha;
    auto r = solve_joint_subproblem(st, ch, cfg, anchor);
    st.alpha = std::move(r.alpha);
    st.W = std::move(r.W);
    st.kkt_residual = r.kkt_residual;
  });
}

/// Same loop with the schedule frozen (binary alpha); only W moves.
inline SolverState inner_loop_fixed_schedule(const SolverState &state0, const ChannelSet &ch,
                                             const SystemConfig &cfg) {
  std::vector<bool> active(static_cast<std::size_t>(state0.alpha.size()));
  for (Eigen::Index k = 0; k < state0.alpha.size(); ++k)
    active[static_cast<std::size_t>(k)] = state0.alpha(k) > 0.5;
  SolverState init = state0;
  for (Eigen::Index k = 0; k < init.W.cols(); ++k)
    if (!active[static_cast<std::size_t>(k)])
      init.W.col(k).setZero();
  return detail::run_sweeps(std::move(init), ch, cfg, [&](SolverState &st) {
    auto r = solve_w_subproblem(st, ch, cfg, active);
    st.alpha = std::move(r.alpha);
    st.W = std::move(r.W);
    st.kkt_residual = r.kkt_residual;
  });
}

/// Binary schedule: the N_S largest entries that are >= 0.5, ties to the
/// lower index.
inline rvec round_schedule(const rvec &alpha, int N_S) {
  std::vector<Eigen::Index> order(static_cast<std::size_t>(alpha.size()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return alpha(a) > alpha(b); });
  rvec out = rvec::Zero(alpha.size());
  int picked = 0;
  for (Eigen::Index k : order) {
    if (picked >= N_S || alpha(k) < 0.5)
      break;
    out(k) = 1.0;
    ++picked;
  }
  return out;
}

} // namespace omnisteer
