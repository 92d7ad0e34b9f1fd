#ifndef NMSLAB_GEOMETRY_HPP
#define NMSLAB_GEOMETRY_HPP

#include <cmath>
#include <stdexcept>

namespace nmslab {

// Axis-aligned box in corner format with continuous pixel coordinates.
// Degenerate (zero-area) boxes are rejected at construction so that iou()
// is total on its domain.
struct BoundingBox {
  double x_min;
  double y_min;
  double x_max;
  double y_max;

  BoundingBox(double x0, double y0, double x1, double y1)
      : x_min(x0), y_min(y0), x_max(x1), y_max(y1) {
    if (!(std::isfinite(x0) && std::isfinite(y0) && std::isfinite(x1) &&
          std::isfinite(y1))) {
      throw std::invalid_argument("BoundingBox: coordinates must be finite");
    }
    if (!(x0 < x1 && y0 < y1)) {
      throw std::invalid_argument("BoundingBox: requires x_min < x_max and y_min < y_max");
    }
  }

  double width() const { return x_max - x_min; }
  double height() const { return y_max - y_min; }
};

inline double area(const BoundingBox& b) { return b.width() * b.height(); }

// Intersection over union. Symmetric, 0 for disjoint boxes, 1 for identical.
inline double iou(const BoundingBox& a, const BoundingBox& b) {
  const double ix = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double iy = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (ix <= 0.0 || iy <= 0.0) return 0.0;
  const double inter = ix * iy;
  return inter / (area(a) + area(b) - inter);
}

// A scored, classified box: one detector candidate or one kept detection.
struct Detection {
  BoundingBox box;
  int class_id;
  double score;

  Detection(BoundingBox b, int cls, double s) : box(b), class_id(cls), score(s) {
    if (!(s >= 0.0 && s <= 1.0)) {
      throw std::invalid_argument("Detection: score must lie in [0,1]");
    }
  }
};

}  // namespace nmslab

#endif  // NMSLAB_GEOMETRY_HPP
