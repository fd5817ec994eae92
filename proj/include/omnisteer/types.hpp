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

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

namespace omnisteer {

using cd = std::complex<double>;
using cvec = Eigen::VectorXcd;
using cmat = Eigen::MatrixXcd;
using rvec = Eigen::VectorXd;
using rmat = Eigen::MatrixXd;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kSpeedOfLight = 299792458.0;
inline constexpr cd kI{0.0, 1.0};

/// Re{x^H y} summed over all entries.
inline double real_inner(const cmat &x, const cmat &y) {
  return (x.array().conjugate() * y.array()).real().sum();
}

/// Random engine used everywhere. One engine per trial, never shared.
using Rng = std::mt19937_64;

/// Raised when an iterative solver cannot deliver a result within its
/// tolerances. The message carries the residuals.
class SolverError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Raised for configurations or inputs that violate a precondition.
class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Child seed for (seed, stream) pairs; streams never collide for a fixed seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632BE59BD9B4E019ULL));
}

/// Standard circularly-symmetric complex Gaussian CN(0, 1).
inline cd complex_normal(Rng &rng) {
  std::normal_distribution<double> n(0.0, std::sqrt(0.5));
  const double re = n(rng);
  const double im = n(rng);
  return {re, im};
}

inline cvec complex_normal_vector(Eigen::Index n, Rng &rng) {
  cvec out(n);
  for (Eigen::Index i = 0; i < n; ++i)
    out(i) = complex_normal(rng);
  return out;
}

inline double uniform01(Rng &rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

/// Vector of i.i.d. uniform phases exp(i*phi), phi ~ U[0, 2pi).
inline cvec random_phases(Eigen::Index n, Rng &rng) {
  cvec out(n);
  for (Eigen::Index i = 0; i < n; ++i)
    out(i) = std::polar(1.0, 2.0 * kPi * uniform01(rng));
  return out;
}

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }
inline double linear_to_db(double lin) { return 10.0 * std::log10(lin); }
inline double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
inline double watts_to_dbm(double w) { return 10.0 * std::log10(w) + 30.0; }
inline double deg_to_rad(double deg) { return deg * kPi / 180.0; }
inline double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

} // namespace omnisteer
