#ifndef NMSLAB_NOISE_HPP
#define NMSLAB_NOISE_HPP

#include <cmath>
#include <stdexcept>
#include <string>

#include "nmslab/rng.hpp"

namespace nmslab {

// Parametric timing-noise model. Gaussian covers local jitter, the shifted
// lognormal covers network round-trip tails, constant/uniform cover the
// delay countermeasure.
struct NoiseSpec {
  enum class Family { none, constant, gaussian, uniform, shifted_lognormal };

  Family family = Family::none;
  double value = 0.0;       // constant
  double mean = 0.0;        // gaussian
  double sigma = 0.0;       // gaussian / shifted_lognormal (log-space)
  double lo = 0.0;          // uniform
  double hi = 0.0;          // uniform
  double shift = 0.0;       // shifted_lognormal
  double log_mean = 0.0;    // shifted_lognormal (log-space)

  static NoiseSpec none() { return {}; }

  static NoiseSpec constant(double v) {
    NoiseSpec s;
    s.family = Family::constant;
    s.value = v;
    return s;
  }

  static NoiseSpec gaussian(double sigma, double mean = 0.0) {
    NoiseSpec s;
    s.family = Family::gaussian;
    s.sigma = sigma;
    s.mean = mean;
    return s;
  }

  static NoiseSpec uniform(double lo, double hi) {
    if (hi < lo) throw std::invalid_argument("NoiseSpec::uniform: hi < lo");
    NoiseSpec s;
    s.family = Family::uniform;
    s.lo = lo;
    s.hi = hi;
    return s;
  }

  static NoiseSpec shifted_lognormal(double shift, double log_mean, double log_sigma) {
    NoiseSpec s;
    s.family = Family::shifted_lognormal;
    s.shift = shift;
    s.log_mean = log_mean;
    s.sigma = log_sigma;
    return s;
  }

  double mean_value() const {
    switch (family) {
      case Family::none: return 0.0;
      case Family::constant: return value;
      case Family::gaussian: return mean;
      case Family::uniform: return 0.5 * (lo + hi);
      case Family::shifted_lognormal:
        return shift + std::exp(log_mean + 0.5 * sigma * sigma);
    }
    return 0.0;
  }

  double sample(Rng& rng) const {
    switch (family) {
      case Family::none: return 0.0;
      case Family::constant: return value;
      case Family::gaussian: return rng.gaussian(mean, sigma);
      case Family::uniform: return rng.uniform(lo, hi);
      case Family::shifted_lognormal:
        return shift + std::exp(rng.gaussian(log_mean, sigma));
    }
    return 0.0;
  }
};

std::string to_string(NoiseSpec::Family family);
NoiseSpec::Family noise_family_from_string(const std::string& name);

}  // namespace nmslab

#endif  // NMSLAB_NOISE_HPP
