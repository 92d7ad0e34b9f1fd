#include "nmslab/scenes.hpp"

#include <stdexcept>

namespace nmslab {

Raster flat_scene(size_t height, size_t width, float level) {
  return Raster(height, width, level);
}

BoundingBox centered_region(const SyntheticDetector& detector, size_t height, size_t width) {
  const double margin = static_cast<double>(detector.config().grid.window);
  const double w = static_cast<double>(width);
  const double h = static_cast<double>(height);
  if (w <= 2 * margin || h <= 2 * margin) {
    throw std::invalid_argument("centered_region: raster too small for a margin of one window");
  }
  return BoundingBox(margin, margin, w - margin, h - margin);
}

SingleObjectScene make_single_object_scene(const SyntheticDetector& detector, size_t height,
                                           size_t width, size_t n_boxes, double confidence) {
  SingleObjectScene scene{flat_scene(height, width), n_boxes, confidence, 0};
  scene.raster = detector.plant_object(scene.raster, centered_region(detector, height, width),
                                       confidence, n_boxes);
  scene.measured_boxes = detector.score_anchors(scene.raster).size();
  return scene;
}

SingleObjectScene make_gadget(const SyntheticDetector& detector, size_t dim, size_t n_boxes,
                              double confidence) {
  SingleObjectScene scene{flat_scene(dim, dim), n_boxes, confidence, 0};
  const BoundingBox whole(0.0, 0.0, static_cast<double>(dim), static_cast<double>(dim));
  scene.raster = detector.plant_object(scene.raster, whole, confidence, n_boxes);
  scene.measured_boxes = detector.score_anchors(scene.raster).size();
  return scene;
}

Raster make_multi_object_scene(const SyntheticDetector& detector, size_t height, size_t width,
                               const std::vector<ObjectRequest>& objects) {
  Raster scene = flat_scene(height, width);
  for (const ObjectRequest& object : objects) {
    scene = detector.plant_object(scene, object.region, object.confidence, object.n_boxes);
  }
  return scene;
}

}  // namespace nmslab
