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

// Backward passive coefficient design.
//
// With alpha and W fixed, maximizing the sensing MI over the plate phases is
// the unit-modulus quadratic program
//
//     max theta^H C theta   s.t. |theta_m| = 1,
//     C = diag(b)^H R_H diag(b),   b = G W diag(alpha) s.
//
// Two solvers are provided: Polak-Ribiere conjugate gradient ascent on the
// complex circle manifold, and a semidefinite relaxation rounded with
// Gaussian randomization. The relaxation itself is solved in factored form
// Q = Y Y^H, Y with unit-norm rows, which is the same manifold machinery
// applied to the oblique manifold (rows of Y in C^r).

#pragma once

#include "omnisteer/config.hpp"
#include "omnisteer/metrics.hpp"
#include "omnisteer/model.hpp"
#include "omnisteer/types.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

namespace omnisteer {

struct QuadraticForm {
  cmat C; // Hermitian PSD
  cvec b;
};

/// b = G W diag(alpha) s, C = diag(b)^H R_H diag(b).
inline QuadraticForm reduce_to_quadratic(const ChannelSet &ch, const DesignVariables &v) {
  QuadraticForm q;
  const cvec weighted = v.alpha.cast<cd>().cwiseProduct(ch.s);
  q.b = ch.G * (v.W * weighted);
  q.C = q.b.conjugate().asDiagonal() * ch.R_H * q.b.asDiagonal();
  q.C = 0.5 * (q.C + q.C.adjoint()).eval();
  return q;
}

/// Re{theta^H C theta}.
inline double quadratic_value(const cmat &C, const cvec &theta) {
  return theta.dot(C * theta).real();
}

namespace detail {

/// Row-wise tangent projection for the oblique manifold (rows unit norm):
/// Z - diag(Re{rowdot(Z, Y)}) Y. For a single column this is
/// z - Re{z . conj(theta)} . theta.
inline cmat project_rows(const cmat &Y, const cmat &Z) {
  const rvec coef = (Z.array() * Y.array().conjugate()).rowwise().sum().real();
  return Z - coef.asDiagonal() * Y;
}

/// Row normalization; zero rows fall back to the reference point.
inline cmat normalize_rows(const cmat &Z, const cmat &fallback) {
  cmat out = Z;
  for (Eigen::Index m = 0; m < Z.rows(); ++m) {
    const double n = Z.row(m).norm();
    if (n > 0.0 && std::isfinite(n))
      out.row(m) = Z.row(m) / n;
    else
      out.row(m) = fallback.row(m);
  }
  return out;
}

inline double factored_value(const cmat &C, const cmat &Y) {
  return real_inner(Y, C * Y);
}

} // namespace detail

/// P_T(z) = z - Re{z . conj(theta)} . theta.
inline cvec project_tangent(const cvec &theta, const cvec &z) {
  return detail::project_rows(theta, z);
}

/// Riemannian gradient of theta^H C theta: the Euclidean gradient 2 C theta
/// projected onto the tangent space at theta.
inline cvec riemannian_gradient(const cvec &theta, const cmat &C) {
  return project_tangent(theta, 2.0 * (C * theta));
}

/// Carries a tangent direction into the tangent space at theta_next.
inline cvec transport(const cvec &direction, const cvec &theta_next) {
  return project_tangent(theta_next, direction);
}

/// Entrywise z_m / |z_m|.
inline cvec retract(const cvec &z) {
  cvec out(z.size());
  for (Eigen::Index m = 0; m < z.size(); ++m)
    out(m) = std::abs(z(m)) > 0.0 ? z(m) / std::abs(z(m)) : cd{1.0, 0.0};
  return out;
}

inline double max_modulus_error(const cvec &theta) {
  double e = 0.0;
  for (Eigen::Index m = 0; m < theta.size(); ++m)
    e = std::max(e, std::abs(std::abs(theta(m)) - 1.0));
  return e;
}

struct RgaOptions {
  int q_max = 200;
  double epsilon = 0.01;
  double initial_step = 1.0;
  double contraction = 0.5;
  double armijo_slope = 1e-4;
  int max_backtracks = 30;

  static RgaOptions from(const SystemConfig &cfg) {
    RgaOptions o;
    o.q_max = cfg.q_max;
    o.epsilon = cfg.epsilon;
    return o;
  }
};

struct RgaTrace {
  std::vector<double> objective_per_iter;
  std::vector<double> grad_norm_per_iter;
  int iterations = 0;
  bool converged = false;
};

namespace detail {

struct ObliqueResult {
  cmat Y;
  RgaTrace trace;
};

/// Polak-Ribiere conjugate gradient ascent of tr(Y^H C Y) over matrices with
/// unit-norm rows, Armijo backtracking along each direction.
///
/// gamma_q = <g_q, g_q - T(eta_{q-1})> / <g_{q-1}, g_{q-1}>, clipped at zero
/// (restart to steepest ascent) when negative.
inline ObliqueResult oblique_ascent(const cmat &C, const cmat &Y0, const RgaOptions &opt) {
  ObliqueResult res;
  cmat Y = Y0;
  double f = factored_value(C, Y);
  cmat grad = project_rows(Y, 2.0 * (C * Y));
  double grad_sq = real_inner(grad, grad);
  cmat eta = grad;
  int q = 1;
  res.trace.objective_per_iter.push_back(f);
  res.trace.grad_norm_per_iter.push_back(std::sqrt(grad_sq));

  while (std::sqrt(grad_sq) > opt.epsilon && q < opt.q_max) {
    double slope = real_inner(grad, eta);
    if (!(slope > 0.0)) {
      eta = grad;
      slope = grad_sq;
    }
    // first trial: maximizer of the second-order model along the curve
    const cmat CY = C * Y;
    const double curv = real_inner(eta, C * eta) -
                        (eta.rowwise().squaredNorm().array() *
                         (Y.conjugate().array() * CY.array()).rowwise().sum().real())
                            .sum();
    double step = curv < 0.0 ? slope / (-2.0 * curv) : opt.initial_step;
    bool accepted = false;
    cmat Y_next;
    double f_next = f;
    for (int j = 0; j <= opt.max_backtracks; ++j) {
      Y_next = normalize_rows(Y + step * eta, Y);
      f_next = factored_value(C, Y_next);
      if (f_next >= f + opt.armijo_slope * step * slope) {
        accepted = true;
        break;
      }
      step *= opt.contraction;
    }
    if (!accepted)
      break; // no ascent left at machine precision

    const cmat grad_next = project_rows(Y_next, 2.0 * (C * Y_next));
    const cmat eta_moved = project_rows(Y_next, eta);
    double gamma = real_inner(grad_next, grad_next - eta_moved) / grad_sq;
    if (!(gamma > 0.0))
      gamma = 0.0;
    eta = grad_next + gamma * eta_moved;

    Y = std::move(Y_next);
    f = f_next;
    grad = grad_next;
    grad_sq = real_inner(grad, grad);
    ++q;
    res.trace.objective_per_iter.push_back(f);
    res.trace.grad_norm_per_iter.push_back(std::sqrt(grad_sq));
  }
  res.trace.iterations = q;
  res.trace.converged = std::sqrt(grad_sq) <= opt.epsilon;
  res.Y = std::move(Y);
  return res;
}

} // namespace detail

struct RgaResult {
  cvec theta;
  RgaTrace trace;
};

/// Riemannian conjugate gradient ascent of theta^H C theta on the complex
/// circle manifold. Stops when the Riemannian gradient norm drops to
/// opt.epsilon or after opt.q_max iterations.
inline RgaResult rga_optimize(const cmat &C, const cvec &theta0, const RgaOptions &opt) {
  if (C.rows() != C.cols() || C.rows() != theta0.size())
    throw ConfigError("rga_optimize: dimension mismatch");
  if (max_modulus_error(theta0) > 1e-9)
    throw ConfigError("rga_optimize: initial point is not unit modulus");
  auto r = detail::oblique_ascent(C, cmat(theta0), opt);
  return {r.Y.col(0), std::move(r.trace)};
}

inline RgaResult rga_optimize(const cmat &C, const cvec &theta0, const SystemConfig &cfg) {
  return rga_optimize(C, theta0, RgaOptions::from(cfg));
}

/// Phases of the principal eigenvector of C. A cold start for rga_optimize.
inline cvec principal_phase_start(const cmat &C) {
  Eigen::SelfAdjointEigenSolver<cmat> es(C);
  return retract(es.eigenvectors().col(C.rows() - 1));
}

struct SdrResult {
  cvec theta;
  double achieved_value = 0.0;   // Re tr(C theta theta^H) of the best candidate
  double relaxation_value = 0.0; // tr(C Q) at the relaxed optimum
  double dual_bound = 0.0;       // certified upper bound on the relaxation
  cmat Q;
};

struct SdpSolution {
  cmat Q;
  double value = 0.0;
  double dual_bound = 0.0;
  double min_dual_eig = 0.0;
};

/// Relaxed problem max tr(C Q) s.t. diag(Q) = 1, Q >= 0, solved as
/// Q = Y Y^H with Y in C^{M x r}, r = ceil(sqrt(2M)), best of `restarts`
/// random starts. The dual point y_m = Re (C Q)_{mm} gives the certificate
/// sum(y) + M max(0, -lambda_min(diag(y) - C)) >= optimum.
inline SdpSolution solve_diag_sdp(const cmat &C, int restarts, Rng &rng, double rel_tol = 1e-6) {
  const auto M = C.rows();
  const auto r = static_cast<Eigen::Index>(std::ceil(std::sqrt(2.0 * static_cast<double>(M))));
  const double scale = std::max(C.cwiseAbs().maxCoeff(), 1e-300);
  RgaOptions opt;
  opt.q_max = 100; // per round; the certificate is checked between rounds
  opt.epsilon = 1e-9 * scale * static_cast<double>(M);
  opt.initial_step = 1.0 / scale;
  const int max_rounds = 50;

  auto certify = [&](const cmat &Y) {
    SdpSolution s;
    s.Q = Y * Y.adjoint();
    s.value = detail::factored_value(C, Y);
    const cmat CQ = C * s.Q;
    const rvec y = CQ.diagonal().real();
    cmat S = -C;
    S.diagonal() += y.cast<cd>();
    Eigen::SelfAdjointEigenSolver<cmat> es(S, Eigen::EigenvaluesOnly);
    s.min_dual_eig = es.eigenvalues().minCoeff();
    s.dual_bound = y.sum() + static_cast<double>(M) * std::max(0.0, -s.min_dual_eig);
    return s;
  };
  auto tolerance = [&](double v) { return rel_tol * std::max(1.0, std::abs(v)) * static_cast<double>(M); };

  SdpSolution best;
  best.value = -std::numeric_limits<double>::infinity();
  for (int t = 0; t < restarts; ++t) {
    cmat Y(M, r);
    for (Eigen::Index i = 0; i < M; ++i)
      for (Eigen::Index j = 0; j < r; ++j)
        Y(i, j) = complex_normal(rng);
    Y = detail::normalize_rows(Y, cmat::Constant(M, r, cd{1.0 / std::sqrt(double(r)), 0.0}));
    SdpSolution cur;
    for (int round = 0; round < max_rounds; ++round) {
      const auto res = detail::oblique_ascent(C, Y, opt);
      Y = res.Y;
      cur = certify(Y);
      if (cur.dual_bound - cur.value <= tolerance(cur.value) || res.trace.iterations < opt.q_max)
        break;
    }
    if (cur.value > best.value)
      best = std::move(cur);
  }
  const double gap = best.dual_bound - best.value;
  if (gap > tolerance(best.value)) {
    std::ostringstream os;
    os << "diag-constrained SDP did not converge: primal " << best.value << ", dual bound "
       << best.dual_bound << ", min dual eigenvalue " << best.min_dual_eig;
    throw SolverError(os.str());
  }
  return best;
}

/// Dense ADMM on the same relaxation (projection onto the PSD cone each
/// step). Cubic per iteration, only meant as an independent cross-check at
/// small M.
inline double solve_diag_sdp_dense(const cmat &C, int iterations = 20000, double penalty = 1.0) {
  const auto M = C.rows();
  cmat Z = cmat::Identity(M, M);
  cmat U = cmat::Zero(M, M);
  cmat Q = Z;
  for (int it = 0; it < iterations; ++it) {
    cmat A = Z - U + C / penalty;
    A = 0.5 * (A + A.adjoint()).eval();
    Eigen::SelfAdjointEigenSolver<cmat> es(A);
    const rvec ev = es.eigenvalues().cwiseMax(0.0);
    Q = es.eigenvectors() * ev.cast<cd>().asDiagonal() * es.eigenvectors().adjoint();
    Z = Q + U;
    Z.diagonal().setOnes();
    U += Q - Z;
    if ((Q - Z).norm() < 1e-12 && it > 100)
      break;
  }
  return (C * Z).trace().real();
}

/// Semidefinite relaxation followed by Gaussian randomization:
/// candidates exp(i angle(Omega Sigma^{1/2} x)), x ~ CN(0, I), from the
/// eigendecomposition Q = Omega Sigma Omega^H; the best of N_rand wins.
inline SdrResult sdr_optimize(const cmat &C, const SystemConfig &cfg, Rng &rng) {
  if (C.rows() != C.cols())
    throw ConfigError("sdr_optimize: C must be square");
  if (cfg.N_rand < 1)
    throw ConfigError("sdr_optimize: N_rand must be >= 1");
  const auto M = C.rows();
  SdpSolution sdp = solve_diag_sdp(C, cfg.sdp_restarts, rng);

  Eigen::SelfAdjointEigenSolver<cmat> es(sdp.Q);
  const rvec sqrt_ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const cmat L = es.eigenvectors() * sqrt_ev.cast<cd>().asDiagonal();

  SdrResult out;
  out.achieved_value = -std::numeric_limits<double>::infinity();
  for (int q = 0; q < cfg.N_rand; ++q) {
    const cvec cand = retract(L * complex_normal_vector(M, rng));
    const double val = quadratic_value(C, cand);
    if (val > out.achieved_value) {
      out.achieved_value = val;
      out.theta = cand;
    }
  }
  out.relaxation_value = sdp.value;
  out.dual_bound = sdp.dual_bound;
  out.Q = std::move(sdp.Q);
  return out;
}

} // namespace omnisteer
