#include "nmslab/nms.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace nmslab {

namespace {

void validate(const NmsInput& input) {
  if (!(input.nms_threshold > 0.0 && input.nms_threshold < 1.0)) {
    throw std::invalid_argument("NmsInput: nms_threshold must lie strictly in (0,1)");
  }
}

}  // namespace

NmsOutcome greedy_nms(const NmsInput& input) {
  validate(input);
  NmsOutcome out;
  const auto& dets = input.detections;
  const double threshold = input.nms_threshold;

  std::vector<uint32_t> remaining(dets.size());
  std::iota(remaining.begin(), remaining.end(), 0u);

  while (!remaining.empty()) {
    // argmax over scores; ties resolved toward the lowest input index, which
    // `remaining` preserves by staying in ascending index order.
    size_t best_pos = 0;
    for (size_t i = 1; i < remaining.size(); ++i) {
      if (dets[remaining[i]].score > dets[remaining[best_pos]].score) best_pos = i;
    }
    const Detection& pivot = dets[remaining[best_pos]];
    out.kept.push_back(pivot);
    out.outer_iterations += 1;
    remaining.erase(remaining.begin() + static_cast<ptrdiff_t>(best_pos));

    // One IoU evaluation per remaining candidate, then drop the overlaps.
    std::vector<uint32_t> survivors;
    survivors.reserve(remaining.size());
    for (uint32_t idx : remaining) {
      out.comparison_count += 1;
      if (iou(pivot.box, dets[idx].box) < threshold) survivors.push_back(idx);
    }
    remaining = std::move(survivors);
  }
  return out;
}

NmsOutcome constant_time_nms(const NmsInput& input, size_t capacity) {
  validate(input);
  if (input.detections.size() > capacity) {
    throw std::invalid_argument("constant_time_nms: input exceeds configured capacity");
  }

  struct Slot {
    BoundingBox box;
    double score;
    uint32_t index;
    unsigned char active;
  };

  // Sentinel slots sit far from any plausible detection and carry a score
  // below every valid one, so they sort last and never suppress a real box.
  std::vector<Slot> slots;
  slots.reserve(capacity);
  for (uint32_t i = 0; i < input.detections.size(); ++i) {
    const Detection& d = input.detections[i];
    slots.push_back(Slot{d.box, d.score, i, 1});
  }
  for (size_t i = slots.size(); i < capacity; ++i) {
    const double offset = 1e9 + 2.0 * static_cast<double>(i);
    slots.push_back(Slot{BoundingBox(offset, 0.0, offset + 1.0, 1.0), -1.0,
                         static_cast<uint32_t>(i), 0});
  }

  // Descending score, input order on ties: the same visit order the greedy
  // argmax produces.
  std::stable_sort(slots.begin(), slots.end(), [](const Slot& a, const Slot& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.index < b.index;
  });

  const double threshold = input.nms_threshold;
  std::vector<unsigned char> suppressed(capacity, 0);
  NmsOutcome out;
  out.padded = true;
  out.outer_iterations = capacity;

  // Fixed schedule over all ordered pairs; suppression is applied through
  // masks so the work done never depends on the data.
  for (size_t i = 0; i < capacity; ++i) {
    const unsigned char alive = static_cast<unsigned char>(slots[i].active & (suppressed[i] ^ 1));
    for (size_t j = i + 1; j < capacity; ++j) {
      const double v = iou(slots[i].box, slots[j].box);
      out.comparison_count += 1;
      const unsigned char hit =
          static_cast<unsigned char>(alive & slots[j].active & (v >= threshold ? 1 : 0));
      suppressed[j] = static_cast<unsigned char>(suppressed[j] | hit);
    }
  }

  for (size_t i = 0; i < capacity; ++i) {
    if (slots[i].active && !suppressed[i]) {
      out.kept.push_back(Detection(slots[i].box,
                                   input.detections[slots[i].index].class_id,
                                   slots[i].score));
    }
  }
  return out;
}

RandomDelayResult random_delay_nms(const NmsInput& input, const NoiseSpec& delay,
                                   uint64_t rng_seed) {
  if (!std::isfinite(delay.mean_value())) {
    throw std::invalid_argument("random_delay_nms: delay distribution needs a finite mean");
  }
  RandomDelayResult result;
  result.outcome = greedy_nms(input);
  Rng rng(rng_seed);
  result.extra_delay = delay.sample(rng);
  return result;
}

}  // namespace nmslab
