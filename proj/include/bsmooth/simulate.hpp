#pragma once

/**
 * @file simulate.hpp
 * @brief Test surface and a clustered covariate sampler for the unit square.
 *
 * Covariates lie in two diagonal strips |z - (x + s c)| <= w, s = +/-1, so
 * that the corners off the strips hold no data and a tensor basis over the
 * square has coefficients that no observation touches.
 */

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "bsmooth/error.hpp"

namespace bsmooth {

/// exp{-(z - 0.3)^2 / 2 - (x - 0.2)^2 / 4}; equals 1 at (0.2, 0.3).
inline double truth(double x, double z) noexcept {
  const double dz = z - 0.3;
  const double dx = x - 0.2;
  return std::exp(-dz * dz / 2.0 - dx * dx / 4.0);
}

struct StripDesign {
  double offset = 0.12;
  double half_width = 0.08;
};

struct Sample {
  std::vector<double> x;
  std::vector<double> z;
  std::vector<double> y;
  std::vector<double> f;  ///< noiseless truth
};

/**
 * Draws n points: strip chosen with probability 1/2, x uniform on [0, 1],
 * z uniform across the strip, rejected until inside the square. Responses are
 * truth plus N(0, sd^2) noise. Deterministic for a given seed.
 */
inline Sample simulate(std::size_t n, std::uint64_t seed, double sd = 0.1, StripDesign design = {}) {
  if (n == 0) throw InvalidArgument("n must be at least 1");
  if (!(sd >= 0.0)) throw InvalidArgument("noise standard deviation must be non-negative");
  if (!(design.half_width > 0.0) || !(design.offset - design.half_width < 1.0)) {
    throw InvalidArgument("strips do not intersect the unit square");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> across(-design.half_width, design.half_width);
  std::normal_distribution<double> noise(0.0, 1.0);
  Sample s;
  s.x.reserve(n);
  s.z.reserve(n);
  s.y.reserve(n);
  s.f.reserve(n);
  while (s.x.size() < n) {
    const double side = unit(rng) < 0.5 ? -1.0 : 1.0;
    const double x = unit(rng);
    const double z = x + side * design.offset + across(rng);
    if (z < 0.0 || z > 1.0) continue;
    const double f = truth(x, z);
    s.x.push_back(x);
    s.z.push_back(z);
    s.f.push_back(f);
    s.y.push_back(sd > 0.0 ? f + sd * noise(rng) : f);
  }
  return s;
}

}  // namespace bsmooth
