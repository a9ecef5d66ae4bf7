#pragma once

#include <cstdint>
#include <random>

namespace catef {

// Standard normal density, CDF and quantile.
double norm_pdf(double x);
double norm_cdf(double x);

//! Inverse standard normal CDF (Wichura's AS 241, double precision).
double norm_quantile(double p);

// Numerically safe logistic link and log(1 + e^x).
double logistic(double x);
double softplus(double x);

// 64-bit mix used to derive independent per-replication seeds from a master
// seed (splittable counter scheme).
std::uint64_t splitmix64(std::uint64_t x);

//! Deterministic RNG wrapper. Uniform/normal transforms are implemented
//! in-library (not via std::*_distribution) so that streams are identical
//! across standard libraries.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform on the open interval (0, 1).
  double uniform() {
    const std::uint64_t bits = engine_() >> 11; // 53 random bits
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
  }

  // Standard normal via inverse CDF.
  double normal() { return norm_quantile(uniform()); }

private:
  std::mt19937_64 engine_;
};

} // namespace catef
