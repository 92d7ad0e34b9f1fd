#include "nmslab/service.hpp"

#include <atomic>
#include <chrono>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "nmslab/stats.hpp"

namespace nmslab {

using nlohmann::json;

struct DetectionServer::Impl {
  SyntheticDetector detector;
  MeasurementClock clock;
  ServerOptions options;
  Rng jitter_rng;
  httplib::Server server;
  std::thread worker;
  std::mutex serial_mutex;

  Impl(SyntheticDetector det, const ClockSpec& clock_spec, ServerOptions opts)
      : detector(std::move(det)),
        clock(clock_spec),
        options(std::move(opts)),
        jitter_rng(derive_seed(options.jitter_seed, "server-jitter")) {}

  void handle_detect(const httplib::Request& req, httplib::Response& res) {
    std::unique_lock<std::mutex> lock(serial_mutex, std::defer_lock);
    if (options.serialize_requests) lock.lock();

    const std::string request_id =
        req.has_header("X-Request-Id") ? req.get_header_value("X-Request-Id") : "";

    Raster img(32, 32);
    try {
      const auto* bytes = reinterpret_cast<const uint8_t*>(req.body.data());
      std::span<const uint8_t> body(bytes, req.body.size());
      if (req.body.size() >= 4 && req.body.compare(0, 4, "RFT0") == 0) {
        img = decode_rft(body);
      } else {
        img = decode_png(body);
      }
    } catch (const std::exception& e) {
      res.status = 400;
      res.set_content(json{{"error", "bad_payload"}, {"reason", e.what()}}.dump(),
                      "application/json");
      return;
    }

    const DetectResult result = detector.detect(img, clock);

    double hold = 0.0;
    if (options.sleep_modeled_time && clock.mode() == ClockMode::modeled) {
      hold += result.timing.total_time;
    }
    hold += options.injected_jitter.sample(jitter_rng);
    if (hold > 0.0) {
      std::this_thread::sleep_for(std::chrono::duration<double>(hold));
    }

    // Decision-only response: boxes and classes, never scores.
    json detections = json::array();
    for (const Detection& d : result.detections) {
      detections.push_back(json{
          {"box", {d.box.x_min, d.box.y_min, d.box.x_max, d.box.y_max}},
          {"class", d.class_id},
      });
    }
    res.set_content(json{{"detections", detections}, {"id", request_id}}.dump(),
                    "application/json");
  }
};

DetectionServer::DetectionServer(SyntheticDetector detector, ClockSpec clock,
                                 ServerOptions options)
    : impl_(std::make_unique<Impl>(std::move(detector), clock, std::move(options))) {
  impl_->server.set_tcp_nodelay(true);
  impl_->server.set_keep_alive_max_count(1 << 30);
  impl_->server.Post("/detect", [this](const httplib::Request& req, httplib::Response& res) {
    impl_->handle_detect(req, res);
  });
  impl_->server.Get("/health", [](const httplib::Request&, httplib::Response& res) {
    res.set_content("ok", "text/plain");
  });
}

DetectionServer::~DetectionServer() { stop(); }

int DetectionServer::start() {
  auto& server = impl_->server;
  const auto& opts = impl_->options;
  if (opts.port == 0) {
    port_ = server.bind_to_any_port(opts.bind_address);
    if (port_ < 0) throw TransportError("bind failed on " + opts.bind_address);
  } else {
    if (!server.bind_to_port(opts.bind_address, opts.port)) {
      throw TransportError("bind failed on " + opts.bind_address + ":" +
                           std::to_string(opts.port));
    }
    port_ = opts.port;
  }
  impl_->worker = std::thread([this] { impl_->server.listen_after_bind(); });
  server.wait_until_ready();
  return port_;
}

void DetectionServer::stop() {
  if (impl_ && impl_->worker.joinable()) {
    impl_->server.stop();
    impl_->worker.join();
  }
}

struct ServiceClient::Impl {
  httplib::Client client;
  uint64_t next_request_id = 0;

  Impl(const std::string& host, int port) : client(host, port) {
    client.set_tcp_nodelay(true);
    client.set_connection_timeout(10);
    client.set_read_timeout(60);
    client.set_keep_alive(true);
  }
};

ServiceClient::ServiceClient(const std::string& host, int port)
    : impl_(std::make_unique<Impl>(host, port)) {}

ServiceClient::~ServiceClient() = default;

TimedQueryResult ServiceClient::timed_query(const Raster& img, int repeats, WireFormat format) {
  if (repeats < 1) throw std::invalid_argument("timed_query: repeats must be >= 1");

  const std::vector<uint8_t> payload =
      format == WireFormat::png ? encode_png(img) : encode_rft(img);
  const std::string body(reinterpret_cast<const char*>(payload.data()), payload.size());

  TimedQueryResult result;
  std::vector<double> rtts;
  std::string last_body;
  for (int i = 0; i < repeats; ++i) {
    const std::string request_id = std::to_string(impl_->next_request_id++);
    httplib::Headers headers{{"X-Request-Id", request_id}};

    const auto t0 = std::chrono::steady_clock::now();
    httplib::Result res =
        impl_->client.Post("/detect", headers, body, "application/octet-stream");
    const auto t1 = std::chrono::steady_clock::now();

    if (!res) {
      throw TransportError("transport failure: " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
      throw HttpError(res->status, res->body);
    }
    const double rtt = std::chrono::duration<double>(t1 - t0).count();
    rtts.push_back(rtt);
    result.samples.push_back(RttSample{request_id, rtt});
    last_body = res->body;
  }
  result.rtt_median = median(rtts);

  const json parsed = json::parse(last_body);
  result.response.id = parsed.value("id", "");
  for (const auto& d : parsed.at("detections")) {
    const auto& b = d.at("box");
    result.response.detections.push_back(RemoteBox{
        BoundingBox(b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(),
                    b.at(3).get<double>()),
        d.at("class").get<int>()});
  }
  return result;
}

TimedQueryResult timed_query(const std::string& host, int port, const Raster& img, int repeats) {
  ServiceClient client(host, port);
  return client.timed_query(img, repeats);
}

}  // namespace nmslab
