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

// Command-line experiment harness.
//
//   omnisteer <kind> [--config FILE] [--seed N] [--trials N] [--variant LIST]
//             [--snr LIST] [--out DIR] [--bins N] [--trace-inner]
//             [--array-sizes LIST] [--threads N] [--set KEY=VALUE]...
//             [--dump-config]
//
// kind: converge | snr-sweep | beampattern | angle-bins | single-run

#include "omnisteer/experiment.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <sstream>

using namespace omnisteer;

namespace {

std::vector<std::string> split_list(const std::string &s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty())
      out.push_back(item);
  return out;
}

double parse_double(const std::string &s, const std::string &what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size())
      throw std::invalid_argument(s);
    return v;
  } catch (const std::exception &) {
    throw ConfigError("bad number '" + s + "' in " + what);
  }
}

/// KEY=VALUE with VALUE parsed as JSON (falls back to a string).
void apply_override(json &system, const std::string &kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos || eq == 0)
    throw ConfigError("--set expects KEY=VALUE, got '" + kv + "'");
  const std::string key = kv.substr(0, eq);
  const std::string val = kv.substr(eq + 1);
  try {
    system[key] = json::parse(val);
  } catch (const nlohmann::json::exception &) {
    system[key] = val;
  }
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"omnisteer: joint scheduling, beamforming and plate phase experiments"};
  app.set_version_flag("--version", "omnisteer 0.1.0");

  std::string kind, config_path, variants, snrs, out_dir, array_sizes;
  std::uint64_t seed = 0;
  int trials = 0, bins = 0, threads = 0;
  bool trace_inner = false, dump = false;
  std::vector<std::string> sets;

  app.add_option("kind", kind, "converge | snr-sweep | beampattern | angle-bins | single-run")->required();
  app.add_option("--config", config_path, "experiment JSON file");
  auto *seed_opt = app.add_option("--seed", seed, "master seed");
  app.add_option("--trials", trials, "number of seeded trials");
  app.add_option("--variant", variants, "comma separated, e.g. US-AGO-R,MMSE-RP");
  app.add_option("--snr", snrs, "comma separated SNR grid in dB");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--bins", bins, "angle bins over 360 degrees");
  app.add_option("--array-sizes", array_sizes, "comma separated array sizes (beampattern)");
  app.add_option("--threads", threads, "worker threads");
  app.add_option("--set", sets, "override a system field, KEY=VALUE (repeatable)");
  app.add_flag("--trace-inner", trace_inner, "also write per-sweep surrogate traces");
  app.add_flag("--dump-config", dump, "print the resolved experiment as JSON and exit");

  CLI11_PARSE(app, argc, argv);

  try {
    json file = json::object();
    if (!config_path.empty())
      file = read_json_file(config_path);
    if (!sets.empty()) {
      json &system = file["system"];
      if (system.is_null())
        system = json::object();
      for (const auto &kv : sets)
        apply_override(system, kv);
    }
    ExperimentSpec spec = spec_from_json(file);
    spec.kind = parse_kind(kind);
    if (*seed_opt)
      spec.seed = seed;
    if (trials > 0)
      spec.trials = trials;
    if (!variants.empty()) {
      spec.variants.clear();
      for (const auto &v : split_list(variants))
        spec.variants.push_back(parse_variant(v));
    }
    if (!snrs.empty()) {
      spec.snr_grid.clear();
      for (const auto &s : split_list(snrs))
        spec.snr_grid.push_back(parse_double(s, "--snr"));
    }
    if (!out_dir.empty())
      spec.out_dir = out_dir;
    if (bins > 0)
      spec.bins = bins;
    if (threads > 0)
      spec.threads = threads;
    if (!array_sizes.empty()) {
      spec.array_sizes.clear();
      for (const auto &s : split_list(array_sizes))
        spec.array_sizes.push_back(static_cast<int>(parse_double(s, "--array-sizes")));
    }
    if (trace_inner)
      spec.trace_inner = true;
    validate(spec);

    if (dump) {
      std::cout << to_json(spec).dump(2) << "\n";
      return 0;
    }
    for (const auto &t : run_experiment(spec))
      std::cout << write_table(t, spec.out_dir).string() << "\n";
  } catch (const ConfigError &e) {
    std::cerr << "omnisteer: " << e.what() << "\n";
    return 2;
  } catch (const std::exception &e) {
    std::cerr << "omnisteer: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
