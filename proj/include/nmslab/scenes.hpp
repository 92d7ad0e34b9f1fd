#ifndef NMSLAB_SCENES_HPP
#define NMSLAB_SCENES_HPP

#include <cstdint>
#include <vector>

#include "nmslab/detector.hpp"
#include "nmslab/raster.hpp"

namespace nmslab {

// Flat background field (no boundaries, so no anchor fires anywhere).
Raster flat_scene(size_t height, size_t width, float level = kSceneBackground);

// The largest centered region that keeps one window of margin to every
// raster edge, so k x k tiling leaves tile-seam anchors on plain background.
BoundingBox centered_region(const SyntheticDetector& detector, size_t height, size_t width);

struct SingleObjectScene {
  Raster raster;
  size_t planted_boxes = 0;
  double confidence = 0.0;
  uint64_t measured_boxes = 0;  // candidates actually above threshold
};

// One planted object in the centered region. Pattern spill can push a few
// extra anchors over the threshold, so the measured count is recorded
// alongside the request.
SingleObjectScene make_single_object_scene(const SyntheticDetector& detector, size_t height,
                                           size_t width, size_t n_boxes, double confidence);

// Margin-free gadget for the evasion attacks: the whole raster is the
// object region.
SingleObjectScene make_gadget(const SyntheticDetector& detector, size_t dim, size_t n_boxes,
                              double confidence);

struct ObjectRequest {
  BoundingBox region;
  size_t n_boxes = 1;
  double confidence = 0.7;
};

// Several objects in one scene; callers space the regions at least one
// box size apart when they need the kept count to equal the object count.
Raster make_multi_object_scene(const SyntheticDetector& detector, size_t height, size_t width,
                               const std::vector<ObjectRequest>& objects);

}  // namespace nmslab

#endif  // NMSLAB_SCENES_HPP
