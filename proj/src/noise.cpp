#include "nmslab/noise.hpp"

namespace nmslab {

std::string to_string(NoiseSpec::Family family) {
  switch (family) {
    case NoiseSpec::Family::none: return "none";
    case NoiseSpec::Family::constant: return "constant";
    case NoiseSpec::Family::gaussian: return "gaussian";
    case NoiseSpec::Family::uniform: return "uniform";
    case NoiseSpec::Family::shifted_lognormal: return "shifted_lognormal";
  }
  return "none";
}

NoiseSpec::Family noise_family_from_string(const std::string& name) {
  if (name == "none") return NoiseSpec::Family::none;
  if (name == "constant") return NoiseSpec::Family::constant;
  if (name == "gaussian") return NoiseSpec::Family::gaussian;
  if (name == "uniform") return NoiseSpec::Family::uniform;
  if (name == "shifted_lognormal") return NoiseSpec::Family::shifted_lognormal;
  throw std::invalid_argument("unknown noise family: " + name);
}

}  // namespace nmslab
