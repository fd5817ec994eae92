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

#include "omnisteer/usago.hpp"
#include "oracles.hpp"

#include <catch_amalgamated.hpp>

using namespace omnisteer;
using Catch::Approx;

namespace {

std::vector<Eigen::Index> scheduled(const DesignVariables &v) {
  std::vector<Eigen::Index> out;
  for (Eigen::Index k = 0; k < v.alpha.size(); ++k)
    if (v.alpha(k) > 0.5)
      out.push_back(k);
  return out;
}

/// |<a, b>| / (|a||b|), 1 when collinear.
double alignment(const cvec &a, const cvec &b) { return std::abs(a.dot(b)) / (a.norm() * b.norm()); }

} // namespace

TEST_CASE("variant names round-trip", "[usago]") {
  for (Variant v : kAllVariants)
    CHECK(parse_variant(to_string(v)) == v);
  CHECK_THROWS_AS(parse_variant("US-AGO"), ConfigError);
  SystemConfig cfg;
  Rng rng(1);
  const ChannelSet ch = generate_channels(cfg, rng);
  CHECK_THROWS_AS(us_ago(ch, cfg, Variant::IF, rng), ConfigError);
}

TEST_CASE("single candidate user is always scheduled", "[usago]") {
  SystemConfig cfg;
  cfg.K = cfg.N_S = 1;
  Rng rng(2);
  for (Variant v : {Variant::UsAgoR, Variant::UsAgoS})
    for (int t = 0; t < 5; ++t) {
      const ChannelSet ch = generate_channels(cfg, rng);
      const RunResult r = us_ago(ch, cfg, v, rng);
      CHECK(r.vars.alpha(0) == 1.0);
      CHECK(r.vars.W.squaredNorm() > 0.0);
    }
}

TEST_CASE("outer loop trace and convergence on the default config", "[usago]") {
  SystemConfig cfg;
  for (Variant v : {Variant::UsAgoR, Variant::UsAgoS})
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      Rng crng(derive_seed(seed, 0)), srng(derive_seed(seed, 1));
      const ChannelSet ch = generate_channels(cfg, crng);
      const RunResult r = us_ago(ch, cfg, v, srng);
      REQUIRE(!r.trace.empty());
      CHECK(static_cast<int>(r.trace.size()) <= cfg.i_max);
      CHECK(r.outer_iterations <= 8);
      for (std::size_t i = 1; i < r.trace.size(); ++i)
        CHECK(r.trace[i] >= r.trace[i - 1] - 1e-3 * std::abs(r.trace[i - 1]));
      if (r.trace.size() >= 2) {
        const double a = r.trace[r.trace.size() - 2], b = r.trace.back();
        CHECK(std::abs(b - a) < cfg.epsilon * std::abs(a));
      }
      CHECK(feasibility_violation(r.vars, cfg, 1e-9).empty());
      CHECK(static_cast<int>(scheduled(r.vars).size()) <= cfg.N_S);
      CHECK(r.inner_traces.size() == r.trace.size());
    }
}

TEST_CASE("RGA and SDR variants reach comparable sum-MI", "[usago]") {
  SystemConfig cfg;
  double sum_r = 0.0, sum_s = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng crng(derive_seed(seed, 0));
    const ChannelSet ch = generate_channels(cfg, crng);
    Rng a(derive_seed(seed, 1)), b(derive_seed(seed, 1));
    sum_r += us_ago(ch, cfg, Variant::UsAgoR, a).metrics.sum_objective;
    sum_s += us_ago(ch, cfg, Variant::UsAgoS, b).metrics.sum_objective;
  }
  CHECK(std::abs(sum_r - sum_s) <= 0.05 * std::max(sum_r, sum_s));
}

TEST_CASE("plate update never lowers the sensing term", "[usago]") {
  const SystemConfig cfg = oracle::small_config();
  Rng rng(3);
  for (int t = 0; t < 30; ++t) {
    const ChannelSet ch = generate_channels(cfg, rng);
    const DesignVariables v = oracle::random_design(cfg, rng);
    for (bool sdr : {false, true}) {
      DesignVariables next = v;
      next.theta = detail::update_plate(v, ch, cfg, sdr, v.theta, rng);
      CHECK(sensing_mi(next, ch, cfg) >= sensing_mi(v, ch, cfg) - 1e-9);
      CHECK(max_modulus_error(next.theta) <= 1e-12);
    }
  }
}

TEST_CASE("forward path keeps the plate untouched", "[usago]") {
  SystemConfig cfg;
  Rng rng(4);
  const ChannelSet ch = with_forward_target(generate_channels(cfg, rng), cfg, 0.3);
  const RunResult r = us_ago(ch, cfg, Variant::UsAgoR, rng);
  CHECK(r.vars.theta == cvec::Ones(cfg.M));
}

TEST_CASE("all variants are feasible and reproducible", "[usago]") {
  SystemConfig cfg;
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    Rng crng(seed);
    const ChannelSet ch = generate_channels(cfg, crng);
    for (Variant v : kAllVariants) {
      Rng a(seed + 100), b(seed + 100);
      const RunResult r1 = run_variant(v, ch, cfg, a);
      const RunResult r2 = run_variant(v, ch, cfg, b);
      INFO(to_string(v));
      CHECK(r1.variant == v);
      CHECK(feasibility_violation(r1.vars, cfg, 1e-9).empty());
      CHECK(r1.vars.alpha == r2.vars.alpha);
      CHECK(r1.vars.W == r2.vars.W);
      CHECK(r1.vars.theta == r2.vars.theta);
      CHECK(r1.trace == r2.trace);
      CHECK(r1.metrics.sum_objective == r2.metrics.sum_objective);
      for (Eigen::Index k = 0; k < cfg.K; ++k)
        CHECK((r1.vars.alpha(k) == 0.0 || r1.vars.alpha(k) == 1.0));
    }
  }
}

TEST_CASE("zero-forcing baseline", "[usago]") {
  SystemConfig cfg;
  Rng rng(5);
  for (int t = 0; t < 20; ++t) {
    const ChannelSet ch = generate_channels(cfg, rng);
    const RunResult r = baseline_if(ch, cfg, t % 2 == 0, rng);
    const auto s = scheduled(r.vars);
    REQUIRE(static_cast<int>(s.size()) == cfg.N_S);
    CHECK(r.vars.W.squaredNorm() == Approx(cfg.P_T).epsilon(1e-12));
    for (Eigen::Index k : s) {
      CHECK(r.vars.W.col(k).squaredNorm() == Approx(cfg.P_T / cfg.N_S).epsilon(1e-12));
      for (Eigen::Index j : s)
        if (j != k) {
          const double leak = std::abs(ch.H.col(j).dot(r.vars.W.col(k)));
          CHECK(leak <= 1e-9 * ch.H.col(j).norm() * r.vars.W.col(k).norm());
        }
    }
    CHECK(r.warnings.empty());
  }
}

TEST_CASE("zero forcing on orthogonal channels is the matched filter", "[usago]") {
  SystemConfig cfg;
  cfg.K = 4;
  cfg.N_S = 4;
  Rng rng(6);
  ChannelSet ch = generate_channels(cfg, rng);
  ch.H = cmat::Zero(cfg.N_T, cfg.K);
  for (int k = 0; k < cfg.K; ++k)
    ch.H(3 * k, k) = complex_normal(rng);
  ch.H.col(2) += 0.5 * ch.H.col(2).norm() * cvec::Unit(cfg.N_T, 1); // still orthogonal to the others
  const RunResult r = baseline_if(ch, cfg, true, rng);
  for (int k = 0; k < cfg.K; ++k)
    CHECK(alignment(r.vars.W.col(k), ch.H.col(k)) >= 1.0 - 1e-12);
}

TEST_CASE("rank-deficient schedule warns", "[usago]") {
  SystemConfig cfg;
  cfg.K = cfg.N_S = 2;
  Rng rng(7);
  ChannelSet ch = generate_channels(cfg, rng);
  ch.H.col(1) = 2.0 * ch.H.col(0);
  const RunResult r = baseline_if(ch, cfg, true, rng);
  CHECK(!r.warnings.empty());
  CHECK(r.vars.W.allFinite());
  CHECK(feasibility_violation(r.vars, cfg, 1e-9).empty());
}

TEST_CASE("random phases are uniform on the circle", "[usago]") {
  SystemConfig cfg;
  Rng rng(8);
  const ChannelSet ch = generate_channels(cfg, rng);
  cd mean{0.0, 0.0};
  int n = 0;
  for (int t = 0; t < 200; ++t) {
    const RunResult r = baseline_mmse(ch, cfg, true, rng);
    CHECK(max_modulus_error(r.vars.theta) <= 1e-12);
    mean += r.vars.theta.sum();
    n += cfg.M;
  }
  // 3200 draws: the sample mean of e^{i phi} has standard deviation ~0.0125
  CHECK(std::abs(mean / static_cast<double>(n)) < 0.06);
}

TEST_CASE("a scheme and its random-phase twin share the schedule", "[usago]") {
  SystemConfig cfg;
  Rng crng(9);
  const ChannelSet ch = generate_channels(cfg, crng);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng a(seed), b(seed), c(seed), d(seed);
    const auto s_if = scheduled(baseline_if(ch, cfg, false, a).vars);
    const auto s_ifrp = scheduled(baseline_if(ch, cfg, true, b).vars);
    const RunResult mm = baseline_mmse(ch, cfg, false, c);
    const RunResult mmrp = baseline_mmse(ch, cfg, true, d);
    CHECK(s_if == s_ifrp);
    CHECK(scheduled(mm.vars) == scheduled(mmrp.vars));
    CHECK(mm.vars.W == mmrp.vars.W);
    CHECK(sensing_mi(mm.vars, ch, cfg) >= sensing_mi(mmrp.vars, ch, cfg) - 1e-9);
  }
}

TEST_CASE("regularized zero forcing", "[usago]") {
  SystemConfig cfg;
  Rng rng(10);
  for (int t = 0; t < 10; ++t) {
    const ChannelSet ch = generate_channels(cfg, rng);
    const RunResult r = baseline_mmse(ch, cfg, true, rng);
    CHECK(std::abs(r.vars.W.squaredNorm() - cfg.P_T) <= 1e-9);
  }

  // vanishing noise: same directions as zero forcing
  SystemConfig quiet = cfg;
  quiet.sigma_C2 = quiet.sigma_S2 = 1e-14;
  for (int t = 0; t < 10; ++t) {
    const ChannelSet ch = generate_channels(quiet, rng);
    Rng a(t), b(t);
    const RunResult zf = baseline_if(ch, quiet, true, a);
    const RunResult mm = baseline_mmse(ch, quiet, true, b);
    for (Eigen::Index k : scheduled(zf.vars)) {
      const double c = std::min(1.0, alignment(zf.vars.W.col(k), mm.vars.W.col(k)));
      CHECK(std::acos(c) < 1e-4);
    }
  }
}

TEST_CASE("regularization pays off at low SNR", "[usago]") {
  SystemConfig cfg;
  cfg.set_snr_db(0.0);
  double mmse = 0.0, zf = 0.0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    Rng crng(derive_seed(seed, 0));
    const ChannelSet ch = generate_channels(cfg, crng);
    Rng a(derive_seed(seed, 1)), b(derive_seed(seed, 1));
    zf += baseline_if(ch, cfg, true, a).metrics.sum_objective;
    mmse += baseline_mmse(ch, cfg, true, b).metrics.sum_objective;
  }
  CHECK(mmse >= zf);
}

TEST_CASE("NMSE is attached on request", "[usago]") {
  SystemConfig cfg = oracle::small_config();
  Rng rng(12);
  const ChannelSet ch = generate_channels(cfg, rng);
  RunResult r = run_variant(Variant::MMSE_RP, ch, cfg, rng);
  attach_nmse(r, ch, cfg, 200, rng);
  CHECK(r.metrics.sum_nmse > 0.0);
  CHECK(r.metrics.sum_nmse == Approx(r.metrics.comm_nmse + r.metrics.sensing_nmse));
}
