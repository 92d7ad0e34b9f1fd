#ifndef NMSLAB_SERVICE_HPP
#define NMSLAB_SERVICE_HPP

#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "nmslab/detector.hpp"
#include "nmslab/query.hpp"
#include "nmslab/raster.hpp"

namespace nmslab {

// Connection-level failures (refused, timed out, reset), as opposed to HTTP
// error responses, which carry a status code.
class TransportError : public std::runtime_error {
 public:
  explicit TransportError(const std::string& what) : std::runtime_error(what) {}
};

class HttpError : public std::runtime_error {
 public:
  HttpError(int status, const std::string& body)
      : std::runtime_error("HTTP " + std::to_string(status) + ": " + body), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

struct ServerOptions {
  std::string bind_address = "127.0.0.1";
  int port = 0;  // 0: pick a free port
  // Requests are served one at a time by default to keep the timing channel
  // clean; measurement campaigns rely on that.
  bool serialize_requests = true;
  // Hold each response for the modeled processing time so a client-side
  // round trip actually carries the leak.
  bool sleep_modeled_time = true;
  NoiseSpec injected_jitter;  // extra server-side delay per request
  uint64_t jitter_seed = 0;
};

// POST /detect: body is either a raw float tensor ("RFT0") or a PNG.
// Response JSON is decision-only: {"detections":[{"box":[x0,y0,x1,y1],
// "class":k}],"id":"..."} with no score field. Malformed payloads get a 400
// with a machine-readable reason.
class DetectionServer {
 public:
  DetectionServer(SyntheticDetector detector, ClockSpec clock, ServerOptions options);
  ~DetectionServer();

  DetectionServer(const DetectionServer&) = delete;
  DetectionServer& operator=(const DetectionServer&) = delete;

  // Binds and serves on a background thread; returns the bound port.
  int start();
  void stop();
  int port() const { return port_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = -1;
};

struct RemoteBox {
  BoundingBox box;
  int class_id;
};

struct DetectResponse {
  std::vector<RemoteBox> detections;
  std::string id;
};

struct RttSample {
  std::string request_id;
  double rtt = 0.0;  // seconds, send-to-full-response on a monotonic clock
};

struct TimedQueryResult {
  DetectResponse response;  // from the final repeat
  double rtt_median = 0.0;
  std::vector<RttSample> samples;
};

enum class WireFormat { rft, png };

// Measurement campaigns keep one connection open: fresh TCP connections pay
// a large first-transfer penalty that would drown the timing signal.
class ServiceClient {
 public:
  ServiceClient(const std::string& host, int port);
  ~ServiceClient();

  ServiceClient(const ServiceClient&) = delete;
  ServiceClient& operator=(const ServiceClient&) = delete;

  // Sends the raster `repeats` times and reports the median round trip.
  // PNG payloads transfer a quarter of the bytes at 8-bit precision; float
  // tensors are bit-exact.
  TimedQueryResult timed_query(const Raster& img, int repeats,
                               WireFormat format = WireFormat::rft);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// One-shot convenience wrapper around a transient ServiceClient.
TimedQueryResult timed_query(const std::string& host, int port, const Raster& img, int repeats);

class RemoteQueryTarget : public QueryTarget {
 public:
  RemoteQueryTarget(const std::string& host, int port, int repeats)
      : client_(host, port), repeats_(repeats) {}

  QueryReply query(const Raster& img) override {
    count_ += 1;
    const TimedQueryResult r = client_.timed_query(img, repeats_);
    return QueryReply{!r.response.detections.empty(), r.rtt_median, r.response.detections.size()};
  }

  uint64_t query_count() const override { return count_; }

 private:
  ServiceClient client_;
  int repeats_;
  uint64_t count_ = 0;
};

}  // namespace nmslab

#endif  // NMSLAB_SERVICE_HPP
