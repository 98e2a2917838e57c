// Deterministic counter-based random numbers.
//
// Every Gaussian variate consumed anywhere in the library is addressed by a
// fixed key (seed, path, group, step, component) and produced by
//
//   1. mixing the key fields through SplitMix64 (one absorb per field),
//   2. mapping the final 64-bit word to a uniform in (0,1) via
//      u = (x >> 12) * 2^-52 + 2^-53 in (0, 1),
//   3. applying Wichura's AS241 (PPND16) inverse normal CDF.
//
// This makes ensembles order-independent and reproducible: the variate drawn
// for a given (path, stream, step) does not depend on how many worker threads
// run, in which order paths are simulated, or which platform std::library is
// in use (no std::normal_distribution, whose output is implementation
// defined).
#pragma once

#include <cmath>
#include <cstdint>

namespace fredholm {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Absorb one key field into the running hash state.
inline std::uint64_t rng_absorb(std::uint64_t state, std::uint64_t field) {
  return splitmix64(state ^ (field + 0x9E3779B97F4A7C15ULL + (state << 6) + (state >> 2)));
}

inline std::uint64_t rng_key(std::uint64_t seed, std::uint64_t path, std::uint64_t group,
                             std::uint64_t step, std::uint64_t comp) {
  std::uint64_t h = splitmix64(seed);
  h = rng_absorb(h, path);
  h = rng_absorb(h, group);
  h = rng_absorb(h, step);
  h = rng_absorb(h, comp);
  return h;
}

// Uniform in the open interval (0,1); never returns 0 or 1 exactly.
inline double u01_from_bits(std::uint64_t x) {
  // (x >> 12) in [0, 2^52): the sum stays strictly inside (0, 1) without
  // rounding up to 1.0 (u = k * 2^-52 + 2^-53 is exactly representable).
  return static_cast<double>(x >> 12) * 0x1p-52 + 0x1p-53;
}

// Wichura (1988), algorithm AS241, routine PPND16: inverse of the standard
// normal CDF to double precision.
inline double inv_normal_cdf(double p) {
  const double q = p - 0.5;
  if (std::fabs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    const double num =
        (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
              6.7265770927008700853e+4) * r +
             4.5921953931549871457e+4) * r +
            1.3731693765509461125e+4) * r +
           1.9715909503065514427e+3) * r +
          1.3314166789178437745e+2) * r +
         3.3871328727963666080e+0);
    const double den =
        (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
              3.9307895800092710610e+4) * r +
             2.1213794301586595867e+4) * r +
            5.3941960214247511077e+3) * r +
           6.8718700749205790830e+2) * r +
          4.2313330701600911252e+1) * r +
         1.0);
    return q * num / den;
  }
  double r = (q < 0.0) ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double val;
  if (r <= 5.0) {
    r -= 1.6;
    const double num =
        (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
              2.41780725177450611770e-1) * r +
             1.27045825245236838258e+0) * r +
            3.64784832476320460504e+0) * r +
           5.76949722146069140550e+0) * r +
          4.63033784615654529590e+0) * r +
         1.42343711074968357734e+0);
    const double den =
        (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
              1.51986665636164571966e-2) * r +
             1.48103976427480074590e-1) * r +
            6.89767334985100004550e-1) * r +
           1.67638483018380384940e+0) * r +
          2.05319162663775882187e+0) * r +
         1.0);
    val = num / den;
  } else {
    r -= 5.0;
    const double num =
        (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
              1.24266094738807843860e-3) * r +
             2.65321895265761230930e-2) * r +
            2.96560571828504891230e-1) * r +
           1.78482653991729133580e+0) * r +
          5.46378491116411436990e+0) * r +
         6.65790464350110377720e+0);
    const double den =
        (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
              1.84631831751005468180e-5) * r +
             7.86869131145613259100e-4) * r +
            1.48753612908506148525e-2) * r +
           1.36929880922735805310e-1) * r +
          5.99832206555887937690e-1) * r +
         1.0);
    val = num / den;
  }
  return (q < 0.0) ? -val : val;
}

// Standard normal variate for a fully specified key.
inline double normal_draw(std::uint64_t seed, std::uint64_t path, std::uint64_t group,
                          std::uint64_t step, std::uint64_t comp) {
  return inv_normal_cdf(u01_from_bits(rng_key(seed, path, group, step, comp)));
}

}  // namespace fredholm
