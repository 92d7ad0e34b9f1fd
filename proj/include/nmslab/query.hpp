#ifndef NMSLAB_QUERY_HPP
#define NMSLAB_QUERY_HPP

#include "nmslab/measurement.hpp"

namespace nmslab {

// Black-box detector access as the attacks see it: a decision plus a latency.
// No scores, no counters.
struct QueryReply {
  bool detected = false;
  double seconds = 0.0;
  size_t detection_count = 0;
};

class QueryTarget {
 public:
  virtual ~QueryTarget() = default;
  virtual QueryReply query(const Raster& img) = 0;
  // Total queries issued, for budget accounting.
  virtual uint64_t query_count() const = 0;
};

class LocalQueryTarget : public QueryTarget {
 public:
  LocalQueryTarget(const SyntheticDetector& detector, const ClockSpec& clock)
      : detector_(detector), clock_(clock) {}

  QueryReply query(const Raster& img) override {
    ++count_;
    const DetectResult r = timed_detect(detector_, img, clock_);
    return QueryReply{!r.detections.empty(), r.timing.total_time, r.detections.size()};
  }

  uint64_t query_count() const override { return count_; }

 private:
  const SyntheticDetector& detector_;
  MeasurementClock clock_;
  uint64_t count_ = 0;
};

}  // namespace nmslab

#endif  // NMSLAB_QUERY_HPP
