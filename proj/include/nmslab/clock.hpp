#ifndef NMSLAB_CLOCK_HPP
#define NMSLAB_CLOCK_HPP

#include <cstdint>
#include <stdexcept>

#include "nmslab/noise.hpp"
#include "nmslab/rng.hpp"

namespace nmslab {

enum class ClockMode { modeled, wall_clock, remote_rtt };

// One query's timing breakdown. In modeled mode the total is exactly the sum
// of the two reported phases (noise included); wall-clock fills the phases
// from a monotonic timer; remote observations carry only the round trip.
struct TimingObservation {
  double neural_time = 0.0;
  double nms_time = 0.0;
  double total_time = 0.0;
  uint64_t comparison_count = 0;
  uint64_t box_count = 0;     // candidates entering suppression
  uint64_t object_count = 0;  // kept detections
  ClockMode mode = ClockMode::modeled;
};

struct ClockSpec {
  ClockMode mode = ClockMode::modeled;
  NoiseSpec noise;       // applied per phase in modeled mode
  int repeats = 1;       // measurements per query, aggregated by median
  uint64_t rng_seed = 0;

  void validate() const {
    if (repeats < 1) throw std::invalid_argument("ClockSpec: repeats must be >= 1");
  }
};

// Owns the noise stream of one measurement campaign. Queries against a clock
// must be serial; give each concurrent campaign its own clock.
class MeasurementClock {
 public:
  explicit MeasurementClock(const ClockSpec& spec) : spec_(spec), rng_(spec.rng_seed) {
    spec.validate();
  }

  ClockMode mode() const { return spec_.mode; }
  int repeats() const { return spec_.repeats; }
  const NoiseSpec& noise() const { return spec_.noise; }
  double sample_noise() { return spec_.noise.sample(rng_); }
  Rng& rng() { return rng_; }

 private:
  ClockSpec spec_;
  Rng rng_;
};

}  // namespace nmslab

#endif  // NMSLAB_CLOCK_HPP
