#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "nmslab/geometry.hpp"
#include "nmslab/rng.hpp"

using namespace nmslab;

namespace {

// Counting oracle: IoU of integer-coordinate boxes by rasterizing onto a
// unit grid and counting cells. Independent of the analytic formula.
double iou_counting_oracle(const BoundingBox& a, const BoundingBox& b) {
  const int x0 = static_cast<int>(std::min(a.x_min, b.x_min));
  const int y0 = static_cast<int>(std::min(a.y_min, b.y_min));
  const int x1 = static_cast<int>(std::max(a.x_max, b.x_max));
  const int y1 = static_cast<int>(std::max(a.y_max, b.y_max));
  long inter = 0, uni = 0;
  for (int y = y0; y < y1; ++y) {
    for (int x = x0; x < x1; ++x) {
      const double cx = x + 0.5, cy = y + 0.5;
      const bool in_a = cx > a.x_min && cx < a.x_max && cy > a.y_min && cy < a.y_max;
      const bool in_b = cx > b.x_min && cx < b.x_max && cy > b.y_min && cy < b.y_max;
      if (in_a && in_b) ++inter;
      if (in_a || in_b) ++uni;
    }
  }
  return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

BoundingBox random_box(Rng& rng, double extent) {
  const double x0 = rng.uniform(-extent, extent);
  const double y0 = rng.uniform(-extent, extent);
  return BoundingBox(x0, y0, x0 + rng.uniform(0.1, extent), y0 + rng.uniform(0.1, extent));
}

BoundingBox random_int_box(Rng& rng) {
  const auto x0 = rng.uniform_int(-20, 20);
  const auto y0 = rng.uniform_int(-20, 20);
  return BoundingBox(static_cast<double>(x0), static_cast<double>(y0),
                     static_cast<double>(x0 + rng.uniform_int(1, 15)),
                     static_cast<double>(y0 + rng.uniform_int(1, 15)));
}

}  // namespace

TEST_CASE("box construction rejects degenerate and non-finite inputs") {
  CHECK_THROWS_AS(BoundingBox(0, 0, 0, 1), std::invalid_argument);
  CHECK_THROWS_AS(BoundingBox(0, 0, 1, 0), std::invalid_argument);
  CHECK_THROWS_AS(BoundingBox(2, 0, 1, 1), std::invalid_argument);
  CHECK_THROWS_AS(BoundingBox(0, 0, std::numeric_limits<double>::infinity(), 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(BoundingBox(std::nan(""), 0, 1, 1), std::invalid_argument);
}

TEST_CASE("detection score must lie in [0,1]") {
  const BoundingBox box(0, 0, 1, 1);
  CHECK_THROWS_AS(Detection(box, 0, -0.1), std::invalid_argument);
  CHECK_THROWS_AS(Detection(box, 0, 1.1), std::invalid_argument);
  CHECK_NOTHROW(Detection(box, 0, 0.0));
  CHECK_NOTHROW(Detection(box, 0, 1.0));
}

TEST_CASE("area on known boxes") {
  CHECK(area(BoundingBox(0, 0, 1, 1)) == doctest::Approx(1.0));
  CHECK(area(BoundingBox(0, 0, 2, 3)) == doctest::Approx(6.0));
  CHECK(area(BoundingBox(1.5, 1.5, 2.5, 4.0)) == doctest::Approx(2.5));
}

TEST_CASE("iou on known boxes") {
  CHECK(iou(BoundingBox(0, 0, 10, 10), BoundingBox(0, 0, 10, 10)) == doctest::Approx(1.0));
  CHECK(iou(BoundingBox(0, 0, 1, 1), BoundingBox(5, 5, 6, 6)) == doctest::Approx(0.0));
  // intersection 1, union 4 + 4 - 1 = 7
  CHECK(iou(BoundingBox(0, 0, 2, 2), BoundingBox(1, 1, 3, 3)) == doctest::Approx(1.0 / 7.0));
}

TEST_CASE("iou matches the rasterized counting oracle on integer boxes") {
  Rng rng(20240001);
  for (int i = 0; i < 500; ++i) {
    const BoundingBox a = random_int_box(rng);
    const BoundingBox b = random_int_box(rng);
    CHECK(iou(a, b) == doctest::Approx(iou_counting_oracle(a, b)).epsilon(1e-9));
  }
}

TEST_CASE("iou symmetry and range properties") {
  Rng rng(20240002);
  for (int i = 0; i < 1000; ++i) {
    const BoundingBox a = random_box(rng, 30.0);
    const BoundingBox b = random_box(rng, 30.0);
    const double v = iou(a, b);
    CHECK(v == iou(b, a));
    CHECK(v >= 0.0);
    const double bound = std::min(area(a), area(b)) / std::max(area(a), area(b));
    CHECK(v <= bound + 1e-12);
  }
}

TEST_CASE("iou of a box with itself is exactly one") {
  Rng rng(20240003);
  for (int i = 0; i < 100; ++i) {
    const BoundingBox a = random_box(rng, 30.0);
    CHECK(iou(a, a) == 1.0);
  }
}
