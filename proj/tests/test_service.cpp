#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include <httplib.h>
#include <json.hpp>

#include "nmslab/scenes.hpp"
#include "nmslab/service.hpp"

using namespace nmslab;
using nlohmann::json;

namespace {

SyntheticDetectorConfig test_config() {
  SyntheticDetectorConfig config;
  config.weight_seed = 7;
  config.neural_cost_fixed = 0.0;
  return config;
}

ServerOptions fast_options() {
  ServerOptions opts;
  opts.sleep_modeled_time = false;  // tests care about payloads, not latency
  return opts;
}

}  // namespace

TEST_CASE("black raster round trip returns no detections") {
  DetectionServer server(SyntheticDetector(test_config()),
                         ClockSpec{ClockMode::modeled, NoiseSpec::none(), 1, 1}, fast_options());
  const int port = server.start();
  REQUIRE(port > 0);

  const auto r = timed_query("127.0.0.1", port, Raster(64, 64, 0.0f), 1);
  CHECK(r.response.detections.empty());
  CHECK(r.rtt_median > 0.0);
}

TEST_CASE("malformed payloads get a 400 with a machine-readable reason") {
  DetectionServer server(SyntheticDetector(test_config()),
                         ClockSpec{ClockMode::modeled, NoiseSpec::none(), 1, 1}, fast_options());
  const int port = server.start();

  httplib::Client cli("127.0.0.1", port);

  // Declared dimensions that violate the contract: 31 is not a multiple of 32.
  std::string body = "RFT0";
  auto push_u32 = [&body](uint32_t v) {
    for (int i = 0; i < 4; ++i) body.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  };
  push_u32(31);
  push_u32(32);
  push_u32(3);
  body.append(static_cast<size_t>(31 * 32 * 3 * 4), '\0');
  auto res = cli.Post("/detect", body, "application/octet-stream");
  REQUIRE(res);
  CHECK(res->status == 400);
  const json reason = json::parse(res->body);
  CHECK(reason.at("error") == "bad_payload");

  // Garbage bytes.
  auto res2 = cli.Post("/detect", "not an image", "application/octet-stream");
  REQUIRE(res2);
  CHECK(res2->status == 400);

  // The typed client surfaces it as an HttpError.
  CHECK_THROWS_AS(timed_query("127.0.0.1", port, Raster(32, 32, 0.0f), 0), std::invalid_argument);
}

TEST_CASE("remote detections match the in-process pipeline exactly") {
  const SyntheticDetector detector(test_config());
  DetectionServer server(SyntheticDetector(test_config()),
                         ClockSpec{ClockMode::modeled, NoiseSpec::none(), 1, 1}, fast_options());
  const int port = server.start();

  const SingleObjectScene scene = make_single_object_scene(detector, 160, 160, 10, 0.85);
  MeasurementClock clock(ClockSpec{ClockMode::modeled, NoiseSpec::none(), 1, 0});
  const auto local = detector.detect(scene.raster, clock).detections;

  const auto remote = timed_query("127.0.0.1", port, scene.raster, 1);
  REQUIRE(remote.response.detections.size() == local.size());
  for (size_t i = 0; i < local.size(); ++i) {
    CHECK(remote.response.detections[i].box.x_min == local[i].box.x_min);
    CHECK(remote.response.detections[i].box.y_min == local[i].box.y_min);
    CHECK(remote.response.detections[i].box.x_max == local[i].box.x_max);
    CHECK(remote.response.detections[i].box.y_max == local[i].box.y_max);
    CHECK(remote.response.detections[i].class_id == local[i].class_id);
  }
}

TEST_CASE("png payloads are accepted") {
  // A low-gain detector keeps planted amplitudes far above the 8-bit
  // quantization step.
  SyntheticDetectorConfig config = test_config();
  config.gain = 4.0;
  config.black_score = 0.1;
  const SyntheticDetector detector(config);
  DetectionServer server(SyntheticDetector(config),
                         ClockSpec{ClockMode::modeled, NoiseSpec::none(), 1, 1}, fast_options());
  const int port = server.start();

  const SingleObjectScene scene = make_single_object_scene(detector, 160, 160, 8, 0.85);
  ServiceClient client("127.0.0.1", port);
  const auto remote = client.timed_query(scene.raster, 1, WireFormat::png);
  MeasurementClock clock(ClockSpec{ClockMode::modeled, NoiseSpec::none(), 1, 0});
  const auto local = detector.detect(scene.raster, clock).detections;
  CHECK(remote.response.detections.size() == local.size());
}

TEST_CASE("responses are decision-only: no score field ever appears") {
  const SyntheticDetector detector(test_config());
  DetectionServer server(SyntheticDetector(test_config()),
                         ClockSpec{ClockMode::modeled, NoiseSpec::none(), 1, 1}, fast_options());
  const int port = server.start();

  const SingleObjectScene scene = make_single_object_scene(detector, 160, 160, 10, 0.85);
  const auto payload = encode_rft(scene.raster);

  httplib::Client cli("127.0.0.1", port);
  auto res = cli.Post("/detect",
                      std::string(reinterpret_cast<const char*>(payload.data()), payload.size()),
                      "application/octet-stream");
  REQUIRE(res);
  REQUIRE(res->status == 200);
  CHECK(res->body.find("score") == std::string::npos);
  CHECK(res->body.find("confidence") == std::string::npos);

  const json parsed = json::parse(res->body);
  REQUIRE(!parsed.at("detections").empty());
  for (const auto& d : parsed.at("detections")) {
    CHECK(d.contains("box"));
    CHECK(d.contains("class"));
    CHECK(d.size() == 2);
  }
}

TEST_CASE("request ids echo back") {
  DetectionServer server(SyntheticDetector(test_config()),
                         ClockSpec{ClockMode::modeled, NoiseSpec::none(), 1, 1}, fast_options());
  const int port = server.start();
  ServiceClient client("127.0.0.1", port);
  const auto first = client.timed_query(Raster(32, 32, 0.0f), 2);
  CHECK(first.response.id == "1");  // id of the final repeat
}

TEST_CASE("unreachable endpoints raise a transport error") {
  // A port from the discard range with nothing bound to it.
  CHECK_THROWS_AS(timed_query("127.0.0.1", 9, Raster(32, 32, 0.0f), 1), TransportError);
}

TEST_CASE("repeats aggregate to the exact median of the samples") {
  DetectionServer server(SyntheticDetector(test_config()),
                         ClockSpec{ClockMode::modeled, NoiseSpec::none(), 1, 1}, fast_options());
  const int port = server.start();

  const auto r = timed_query("127.0.0.1", port, Raster(64, 64, 0.0f), 5);
  REQUIRE(r.samples.size() == 5);
  std::vector<double> rtts;
  for (const auto& s : r.samples) rtts.push_back(s.rtt);
  std::sort(rtts.begin(), rtts.end());
  CHECK(r.rtt_median == rtts[2]);
}

TEST_CASE("remote calibration recovers the served slope under jitter") {
  // Latency dominated by the modeled per-pixel cost; PNG probes keep the
  // transfer share of the slope small.
  SyntheticDetectorConfig config = test_config();
  config.neural_cost_per_pixel = 3e-7;
  ServerOptions opts;
  opts.injected_jitter = NoiseSpec::shifted_lognormal(0.0, std::log(5e-3), 0.6);
  opts.jitter_seed = 99;
  DetectionServer server(SyntheticDetector(config),
                         ClockSpec{ClockMode::modeled, NoiseSpec::none(), 1, 1}, opts);
  const int port = server.start();

  ServiceClient client("127.0.0.1", port);
  client.timed_query(Raster(32, 32, 0.0f), 1);  // warm-up

  std::vector<std::pair<size_t, size_t>> sizes;
  for (size_t k = 0; k < 16; ++k) sizes.emplace_back(416, 416 + 32 * k);

  const auto model = calibrate_neural_model(
      [&](size_t h, size_t w) {
        return client.timed_query(Raster(h, w, 0.0f), 3, WireFormat::png).rtt_median;
      },
      sizes);

  REQUIRE(model.slope_standard_error > 0.0);
  CHECK(std::fabs(model.slope_per_pixel - config.neural_cost_per_pixel) <=
        3.0 * model.slope_standard_error + 2e-8);
}
