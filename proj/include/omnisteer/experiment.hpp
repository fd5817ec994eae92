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

// Seeded experiment drivers producing CSV tables.
//
// Seeding: trial t of an experiment uses child = derive_seed(seed, t).
// Channels are drawn from derive_seed(child, 0), every variant's solver
// from derive_seed(child, 1) and the NMSE Monte Carlo from
// derive_seed(child, 2). Variants therefore see the same channels, and a
// scheme and its random-phase twin the same random schedule.

#pragma once

#include "omnisteer/config.hpp"
#include "omnisteer/config_io.hpp"
#include "omnisteer/metrics.hpp"
#include "omnisteer/model.hpp"
#include "omnisteer/types.hpp"
#include "omnisteer/usago.hpp"

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <thread>
#include <vector>

namespace omnisteer {

enum class ExperimentKind { Converge, SnrSweep, Beampattern, AngleBins, SingleRun };

inline std::string to_string(ExperimentKind k) {
  switch (k) {
  case ExperimentKind::Converge: return "converge";
  case ExperimentKind::SnrSweep: return "snr-sweep";
  case ExperimentKind::Beampattern: return "beampattern";
  case ExperimentKind::AngleBins: return "angle-bins";
  case ExperimentKind::SingleRun: return "single-run";
  }
  return "?";
}

inline ExperimentKind parse_kind(const std::string &s) {
  for (auto k : {ExperimentKind::Converge, ExperimentKind::SnrSweep, ExperimentKind::Beampattern,
                 ExperimentKind::AngleBins, ExperimentKind::SingleRun})
    if (to_string(k) == s)
      return k;
  throw ConfigError("unknown experiment kind '" + s + "'");
}

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::SingleRun;
  SystemConfig config;
  std::vector<Variant> variants = {Variant::UsAgoR, Variant::UsAgoS};
  std::vector<double> snr_grid = {0.0, 5.0, 10.0}; // dB
  int trials = 1;
  int bins = 12;
  std::string out_dir = ".";
  std::uint64_t seed = 1;
  bool trace_inner = false;
  std::vector<int> array_sizes = {16, 64}; // beampattern
  int threads = 1;
};

inline void validate(const ExperimentSpec &s) {
  validate(s.config);
  if (s.trials < 1)
    throw ConfigError("trials must be >= 1");
  if (s.variants.empty())
    throw ConfigError("at least one variant is required");
  if (s.kind == ExperimentKind::SnrSweep && s.snr_grid.empty())
    throw ConfigError("snr grid must not be empty");
  if (s.kind == ExperimentKind::AngleBins && s.bins < 4)
    throw ConfigError("angle-bins needs bins >= 4");
  if (s.kind == ExperimentKind::Beampattern && s.array_sizes.empty())
    throw ConfigError("beampattern needs at least one array size");
  if (s.threads < 1)
    throw ConfigError("threads must be >= 1");
}

inline json to_json(const ExperimentSpec &s) {
  json j = json::object();
  j["kind"] = to_string(s.kind);
  j["seed"] = s.seed;
  j["trials"] = s.trials;
  json v = json::array();
  for (Variant x : s.variants)
    v.push_back(to_string(x));
  j["variants"] = v;
  j["snr_db"] = s.snr_grid;
  j["bins"] = s.bins;
  j["array_sizes"] = s.array_sizes;
  j["out_dir"] = s.out_dir;
  j["trace_inner"] = s.trace_inner;
  j["threads"] = s.threads;
  j["system"] = to_json(s.config);
  return j;
}

inline ExperimentSpec spec_from_json(const json &j, ExperimentSpec base = {}) {
  if (!j.is_object())
    throw ConfigError("experiment file must hold a JSON object");
  static const std::set<std::string> known = {"kind", "seed", "trials", "variants", "snr_db", "bins",
                                              "array_sizes", "out_dir", "trace_inner", "threads", "system"};
  for (const auto &[key, _] : j.items())
    if (!known.count(key))
      throw ConfigError("unknown experiment field '" + key + "'");
  try {
    if (j.contains("kind"))
      base.kind = parse_kind(j.at("kind").get<std::string>());
    if (j.contains("seed"))
      base.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("trials"))
      base.trials = j.at("trials").get<int>();
    if (j.contains("variants")) {
      base.variants.clear();
      for (const auto &v : j.at("variants"))
        base.variants.push_back(parse_variant(v.get<std::string>()));
    }
    if (j.contains("snr_db"))
      base.snr_grid = j.at("snr_db").get<std::vector<double>>();
    if (j.contains("bins"))
      base.bins = j.at("bins").get<int>();
    if (j.contains("array_sizes"))
      base.array_sizes = j.at("array_sizes").get<std::vector<int>>();
    if (j.contains("out_dir"))
      base.out_dir = j.at("out_dir").get<std::string>();
    if (j.contains("trace_inner"))
      base.trace_inner = j.at("trace_inner").get<bool>();
    if (j.contains("threads"))
      base.threads = j.at("threads").get<int>();
  } catch (const nlohmann::json::exception &e) {
    throw ConfigError(std::string("experiment spec: ") + e.what());
  }
  if (j.contains("system"))
    base.config = config_from_json(j.at("system"), base.config);
  return base;
}

// ---- tables -------------------------------------------------------------------

/// Fixed, locale-independent number formatting so reruns are byte-identical.
inline std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}
inline std::string fmt(int x) { return std::to_string(x); }
inline std::string fmt(std::uint64_t x) { return std::to_string(x); }

struct CsvTable {
  std::string name; // file name without directory
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::string str() const {
    std::string out;
    auto line = [&](const std::vector<std::string> &cells) {
      for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i)
          out += ',';
        out += cells[i];
      }
      out += '\n';
    };
    line(header);
    for (const auto &r : rows)
      line(r);
    return out;
  }
};

inline std::filesystem::path write_table(const CsvTable &t, const std::string &dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec)
    throw std::runtime_error("cannot create output directory '" + dir + "': " + ec.message());
  const fs::path path = fs::path(dir) / t.name;
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << t.str();
  out.close();
  if (!out)
    throw std::runtime_error("write to '" + path.string() + "' failed");
  return path;
}

// ---- helpers ------------------------------------------------------------------

/// Runs body(i) for i in [0, n) on up to `threads` workers. Results must be
/// written to slot i by the body, which keeps the output order fixed.
inline void parallel_for(int n, int threads, const std::function<void(int)> &body) {
  if (threads <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i)
      body(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
  for (int w = 0; w < threads; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (int i = w; i < n; i += threads)
          body(i);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  }
  for (auto &t : pool)
    t.join();
  for (auto &e : errors)
    if (e)
      std::rethrow_exception(e);
}

struct Stats {
  double mean = 0.0;
  double std = 0.0; // sample standard deviation, 0 for a single value
};

inline Stats stats(const std::vector<double> &x) {
  Stats s;
  if (x.empty())
    return s;
  for (double v : x)
    s.mean += v;
  s.mean /= static_cast<double>(x.size());
  if (x.size() > 1) {
    double acc = 0.0;
    for (double v : x)
      acc += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(acc / static_cast<double>(x.size() - 1));
  }
  return s;
}

inline std::uint64_t trial_seed(std::uint64_t seed, int trial) {
  return derive_seed(seed, static_cast<std::uint64_t>(trial));
}

inline Rng channel_rng(std::uint64_t child) { return Rng(derive_seed(child, 0)); }
inline Rng solver_rng(std::uint64_t child) { return Rng(derive_seed(child, 1)); }
inline Rng nmse_rng(std::uint64_t child) { return Rng(derive_seed(child, 2)); }

// ---- experiments ----------------------------------------------------------------

/// convergence.csv: variant, seed, outer_iter, sum_mi. With trace_inner also
/// convergence_inner.csv: variant, seed, outer_iter, sweep, surrogate.
inline std::vector<CsvTable> run_converge(const ExperimentSpec &spec) {
  validate(spec);
  const auto nv = spec.variants.size();
  std::vector<std::vector<RunResult>> results(static_cast<std::size_t>(spec.trials), std::vector<RunResult>(nv));
  parallel_for(spec.trials, spec.threads, [&](int t) {
    const auto child = trial_seed(spec.seed, t);
    Rng crng = channel_rng(child);
    const ChannelSet ch = generate_channels(spec.config, crng);
    for (std::size_t v = 0; v < nv; ++v) {
      Rng srng = solver_rng(child);
      results[static_cast<std::size_t>(t)][v] = run_variant(spec.variants[v], ch, spec.config, srng);
    }
  });
  CsvTable outer{"convergence.csv", {"variant", "seed", "outer_iter", "sum_mi"}, {}};
  CsvTable inner{"convergence_inner.csv", {"variant", "seed", "outer_iter", "sweep", "surrogate"}, {}};
  for (std::size_t v = 0; v < nv; ++v) {
    for (int t = 0; t < spec.trials; ++t) {
      const auto &r = results[static_cast<std::size_t>(t)][v];
      const auto child = trial_seed(spec.seed, t);
      for (std::size_t i = 0; i < r.trace.size(); ++i)
        outer.rows.push_back({to_string(spec.variants[v]), fmt(child), fmt(static_cast<int>(i + 1)), fmt(r.trace[i])});
      for (std::size_t i = 0; i < r.inner_traces.size(); ++i)
        for (std::size_t p = 0; p < r.inner_traces[i].size(); ++p)
          inner.rows.push_back({to_string(spec.variants[v]), fmt(child), fmt(static_cast<int>(i + 1)),
                                fmt(static_cast<int>(p + 1)), fmt(r.inner_traces[i][p])});
    }
  }
  std::vector<CsvTable> out{outer};
  if (spec.trace_inner)
    out.push_back(inner);
  return out;
}

/// snr_sweep.csv: variant, snr_db, mean_sum_mi, std_sum_mi, mean_sum_nmse,
/// std_sum_nmse, trials. The channel draw of a trial is shared by all SNR
/// points; only the noise powers change.
inline CsvTable run_snr_sweep(const ExperimentSpec &spec) {
  validate(spec);
  const auto nv = spec.variants.size();
  const auto ns = spec.snr_grid.size();
  // [snr][variant][trial]
  std::vector<std::vector<std::vector<double>>> mi(ns, std::vector<std::vector<double>>(nv, std::vector<double>(static_cast<std::size_t>(spec.trials))));
  auto nmse = mi;
  parallel_for(spec.trials, spec.threads, [&](int t) {
    const auto child = trial_seed(spec.seed, t);
    Rng crng = channel_rng(child);
    const ChannelSet ch = generate_channels(spec.config, crng);
    for (std::size_t si = 0; si < ns; ++si) {
      SystemConfig cfg = spec.config;
      cfg.set_snr_db(spec.snr_grid[si]);
      for (std::size_t v = 0; v < nv; ++v) {
        Rng srng = solver_rng(child);
        RunResult r = run_variant(spec.variants[v], ch, cfg, srng);
        Rng nrng = nmse_rng(child);
        attach_nmse(r, ch, cfg, cfg.nmse_trials, nrng);
        mi[si][v][static_cast<std::size_t>(t)] = r.metrics.sum_objective;
        nmse[si][v][static_cast<std::size_t>(t)] = r.metrics.sum_nmse;
      }
    }
  });
  CsvTable tab{"snr_sweep.csv",
               {"variant", "snr_db", "mean_sum_mi", "std_sum_mi", "mean_sum_nmse", "std_sum_nmse", "trials"},
               {}};
  for (std::size_t v = 0; v < nv; ++v)
    for (std::size_t si = 0; si < ns; ++si) {
      const Stats a = stats(mi[si][v]);
      const Stats b = stats(nmse[si][v]);
      tab.rows.push_back({to_string(spec.variants[v]), fmt(spec.snr_grid[si]), fmt(a.mean), fmt(a.std), fmt(b.mean),
                          fmt(b.std), fmt(spec.trials)});
    }
  return tab;
}

/// Line-of-sight user angles for the beampattern scenario: K users evenly
/// spaced on the segment y in [0, 150] m at x = 50 m in front of a base
/// station at (0, 50) m, measured from array broadside.
inline std::vector<double> beampattern_user_angles(int K) {
  std::vector<double> a;
  for (int k = 0; k < K; ++k) {
    const double y = K == 1 ? 75.0 : 150.0 * k / (K - 1);
    a.push_back(std::atan2(y - 50.0, 50.0));
  }
  return a;
}

/// Channel set of the beampattern scenario for an n-element array.
inline ChannelSet beampattern_scenario(const SystemConfig &cfg, Rng &rng) {
  ChannelSet ch = generate_channels(cfg, cfg.target_angle, rng);
  ch.H = los_user_channels(beampattern_user_angles(cfg.K), cfg.N_T);
  return ch;
}

/// beampattern.csv: side, angle_deg, power_norm, variant, array_size. Each
/// side is reported in its own half-space frame, -90..90 degrees from that
/// side's broadside in 1 degree steps.
inline CsvTable run_beampattern(const ExperimentSpec &spec) {
  validate(spec);
  CsvTable tab{"beampattern.csv", {"side", "angle_deg", "power_norm", "variant", "array_size"}, {}};
  std::vector<double> grid;
  for (int d = -90; d <= 90; ++d)
    grid.push_back(deg_to_rad(d));
  const auto child = trial_seed(spec.seed, 0);
  for (int n : spec.array_sizes) {
    SystemConfig cfg = spec.config;
    cfg.M = cfg.N_T = cfg.N_R = n;
    validate(cfg);
    Rng crng = channel_rng(child);
    const ChannelSet ch = beampattern_scenario(cfg, crng);
    for (Variant v : spec.variants) {
      Rng srng = solver_rng(child);
      const RunResult r = run_variant(v, ch, cfg, srng);
      for (auto side : {BeamSide::Forward, BeamSide::Backward}) {
        const Beampattern bp = beampattern(r.vars, ch, grid, side);
        for (const auto &s : bp.samples)
          tab.rows.push_back({side == BeamSide::Forward ? "forward" : "backward",
                              fmt(static_cast<int>(std::lround(rad_to_deg(s.angle)))), fmt(s.power), to_string(v),
                              fmt(n)});
      }
    }
  }
  return tab;
}

/// Angle of bin i out of n over 0..360 degrees (bin centers).
inline double bin_center_deg(int i, int n) { return (i + 0.5) * 360.0 / n; }

/// angle_bins.csv: bin_center_deg, mean_sensing_mi, std_sensing_mi, scheme.
///
/// Single-user scenario. Bin centers in [0, 180) lie in front of the array
/// (local angle phi - 90 deg) and are sensed directly; the rest lie behind
/// it (local angle phi - 270 deg) and are sensed through the plate. The
/// forward-only reference has no plate: it matches the proposed scheme in
/// front and reports zero behind.
inline CsvTable run_angle_bins(const ExperimentSpec &spec) {
  validate(spec);
  SystemConfig cfg = spec.config;
  cfg.K = 1;
  cfg.N_S = 1;
  validate(cfg);
  const Variant proposed = spec.variants.front();
  const int nb = spec.bins;
  std::vector<std::vector<double>> mi(static_cast<std::size_t>(nb), std::vector<double>(static_cast<std::size_t>(spec.trials)));
  parallel_for(spec.trials, spec.threads, [&](int t) {
    const auto child = trial_seed(spec.seed, t);
    for (int b = 0; b < nb; ++b) {
      const double phi = bin_center_deg(b, nb);
      Rng crng = channel_rng(child);
      ChannelSet ch;
      if (phi < 180.0) {
        ch = generate_channels(cfg, deg_to_rad(phi - 90.0), crng);
        ch = with_forward_target(std::move(ch), cfg, deg_to_rad(phi - 90.0));
      } else {
        ch = generate_channels(cfg, deg_to_rad(phi - 270.0), crng);
      }
      Rng srng = solver_rng(child);
      const RunResult r = run_variant(proposed, ch, cfg, srng);
      mi[static_cast<std::size_t>(b)][static_cast<std::size_t>(t)] = r.metrics.sensing_mi;
    }
  });
  CsvTable tab{"angle_bins.csv", {"bin_center_deg", "mean_sensing_mi", "std_sensing_mi", "scheme"}, {}};
  for (const char *scheme : {"proposed", "forward-only"}) {
    const bool forward_only = std::string(scheme) == "forward-only";
    for (int b = 0; b < nb; ++b) {
      const double phi = bin_center_deg(b, nb);
      Stats s = stats(mi[static_cast<std::size_t>(b)]);
      if (forward_only && phi >= 180.0)
        s = {};
      tab.rows.push_back({fmt(phi), fmt(s.mean), fmt(s.std), scheme});
    }
  }
  return tab;
}

/// run_summary.csv: one row per (trial, variant) with the final metrics.
inline CsvTable run_single(const ExperimentSpec &spec) {
  validate(spec);
  const auto nv = spec.variants.size();
  std::vector<std::vector<RunResult>> results(static_cast<std::size_t>(spec.trials), std::vector<RunResult>(nv));
  parallel_for(spec.trials, spec.threads, [&](int t) {
    const auto child = trial_seed(spec.seed, t);
    Rng crng = channel_rng(child);
    const ChannelSet ch = generate_channels(spec.config, crng);
    for (std::size_t v = 0; v < nv; ++v) {
      Rng srng = solver_rng(child);
      RunResult r = run_variant(spec.variants[v], ch, spec.config, srng);
      Rng nrng = nmse_rng(child);
      attach_nmse(r, ch, spec.config, spec.config.nmse_trials, nrng);
      results[static_cast<std::size_t>(t)][v] = std::move(r);
    }
  });
  CsvTable tab{"run_summary.csv",
               {"variant", "seed", "sum_mi", "comm_mi", "sensing_mi", "sum_nmse", "comm_nmse", "sensing_nmse",
                "scheduled", "outer_iters"},
               {}};
  for (int t = 0; t < spec.trials; ++t)
    for (std::size_t v = 0; v < nv; ++v) {
      const auto &r = results[static_cast<std::size_t>(t)][v];
      std::string sched;
      for (Eigen::Index k = 0; k < r.vars.alpha.size(); ++k)
        if (r.vars.alpha(k) > 0.5)
          sched += (sched.empty() ? "" : " ") + std::to_string(k);
      tab.rows.push_back({to_string(spec.variants[v]), fmt(trial_seed(spec.seed, t)), fmt(r.metrics.sum_objective),
                          fmt(r.metrics.mi_per_user.sum()), fmt(r.metrics.sensing_mi), fmt(r.metrics.sum_nmse),
                          fmt(r.metrics.comm_nmse), fmt(r.metrics.sensing_nmse), sched, fmt(r.outer_iterations)});
    }
  return tab;
}

inline std::vector<CsvTable> run_experiment(const ExperimentSpec &spec) {
  switch (spec.kind) {
  case ExperimentKind::Converge: return run_converge(spec);
  case ExperimentKind::SnrSweep: return {run_snr_sweep(spec)};
  case ExperimentKind::Beampattern: return {run_beampattern(spec)};
  case ExperimentKind::AngleBins: return {run_angle_bins(spec)};
  case ExperimentKind::SingleRun: return {run_single(spec)};
  }
  throw ConfigError("unknown experiment kind");
}

} // namespace omnisteer
