#include "nmslab/detector.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace nmslab {

void AnchorGridConfig::validate() const {
  if (stride == 0) throw std::invalid_argument("AnchorGridConfig: stride must be positive");
  if (window < stride || window % stride != 0) {
    throw std::invalid_argument("AnchorGridConfig: window must be a positive multiple of stride");
  }
  if (!(box_size > 0.0)) throw std::invalid_argument("AnchorGridConfig: box_size must be positive");
}

void SyntheticDetectorConfig::validate() const {
  grid.validate();
  if (!(gain > 0.0)) throw std::invalid_argument("detector: gain must be positive");
  if (!(black_score > 0.0 && black_score < 1.0)) {
    throw std::invalid_argument("detector: black_score must lie in (0,1)");
  }
  if (!(detection_threshold > 0.0 && detection_threshold < 1.0)) {
    throw std::invalid_argument("detector: detection_threshold must lie in (0,1)");
  }
  if (black_score >= detection_threshold) {
    throw std::invalid_argument("detector: black_score must stay below the detection threshold");
  }
  if (!(nms_threshold > 0.0 && nms_threshold < 1.0)) {
    throw std::invalid_argument("detector: nms_threshold must lie in (0,1)");
  }
  if (!(nms_cost.cost_per_comparison > 0.0) || nms_cost.cost_per_iteration < 0.0 ||
      nms_cost.fixed_cost < 0.0) {
    throw std::invalid_argument("detector: invalid NMS cost model");
  }
  if (neural_cost_per_pixel < 0.0 || neural_cost_fixed < 0.0) {
    throw std::invalid_argument("detector: neural costs must be non-negative");
  }
}

SyntheticDetector::SyntheticDetector(const SyntheticDetectorConfig& config) : config_(config) {
  config_.validate();
  const size_t stride = config_.grid.stride;
  const size_t n = stride * stride * Raster::kChannels;
  pattern_.resize(n);

  Rng rng(derive_seed(config_.weight_seed, "detector-weights"));
  double sum = 0.0;
  for (double& v : pattern_) {
    v = rng.gaussian();
    sum += v;
  }
  // Zero-sum: every flat field then scores exactly logistic(bias).
  const double shift = sum / static_cast<double>(n);
  for (double& v : pattern_) v -= shift;

  // Normalize so the window-tiled weight vector has unit norm.
  const size_t per_axis = config_.grid.window / stride;
  const double copies = static_cast<double>(per_axis * per_axis);
  double sq = 0.0;
  for (double v : pattern_) sq += v * v;
  const double scale = 1.0 / std::sqrt(sq * copies);
  for (double& v : pattern_) v *= scale;

  bias_ = logit(config_.black_score);
}

std::vector<std::pair<size_t, size_t>> SyntheticDetector::anchor_positions(size_t height,
                                                                           size_t width) const {
  std::vector<std::pair<size_t, size_t>> positions;
  const size_t stride = config_.grid.stride;
  const size_t window = config_.grid.window;
  if (height < window || width < window) return positions;
  for (size_t ay = 0; ay + window <= height; ay += stride) {
    for (size_t ax = 0; ax + window <= width; ax += stride) {
      positions.emplace_back(ay, ax);
    }
  }
  return positions;
}

double SyntheticDetector::anchor_score(const Raster& img, size_t ax, size_t ay) const {
  const size_t window = config_.grid.window;
  if (ay + window > img.height() || ax + window > img.width()) {
    throw std::invalid_argument("anchor_score: window does not fit the raster");
  }
  double dot = 0.0;
  for (size_t y = 0; y < window; ++y) {
    for (size_t x = 0; x < window; ++x) {
      for (size_t c = 0; c < Raster::kChannels; ++c) {
        dot += pattern_weight(ay + y, ax + x, c) * static_cast<double>(img.at(ay + y, ax + x, c));
      }
    }
  }
  return logistic(config_.gain * dot + bias_);
}

std::vector<Detection> SyntheticDetector::score_anchors(const Raster& img) const {
  const size_t stride = config_.grid.stride;
  const size_t window = config_.grid.window;
  const size_t h = img.height();
  const size_t w = img.width();
  std::vector<Detection> out;
  if (h < window || w < window) return out;

  // The pattern repeats with the stride, so each stride-aligned block's dot
  // product is shared by every window covering it. One pass over the image
  // fills the block grid; each anchor then sums its blocks.
  const size_t by_count = h / stride;
  const size_t bx_count = w / stride;
  std::vector<double> block_dot(by_count * bx_count, 0.0);
  for (size_t by = 0; by < by_count; ++by) {
    for (size_t bx = 0; bx < bx_count; ++bx) {
      double dot = 0.0;
      const size_t y0 = by * stride;
      const size_t x0 = bx * stride;
      for (size_t y = 0; y < stride; ++y) {
        const float* row = &img.values()[((y0 + y) * w + x0) * Raster::kChannels];
        const double* pat = &pattern_[y * stride * Raster::kChannels];
        for (size_t i = 0; i < stride * Raster::kChannels; ++i) {
          dot += pat[i] * static_cast<double>(row[i]);
        }
      }
      block_dot[by * bx_count + bx] = dot;
    }
  }

  const size_t per_axis = window / stride;
  const double half = 0.5 * static_cast<double>(window);
  const double half_box = 0.5 * config_.grid.box_size;
  for (size_t ay = 0; ay + window <= h; ay += stride) {
    for (size_t ax = 0; ax + window <= w; ax += stride) {
      double dot = 0.0;
      for (size_t r = 0; r < per_axis; ++r) {
        for (size_t s = 0; s < per_axis; ++s) {
          dot += block_dot[(ay / stride + r) * bx_count + (ax / stride + s)];
        }
      }
      const double score = logistic(config_.gain * dot + bias_);
      if (score >= config_.detection_threshold) {
        const double cx = static_cast<double>(ax) + half;
        const double cy = static_cast<double>(ay) + half;
        out.push_back(Detection(
            BoundingBox(cx - half_box, cy - half_box, cx + half_box, cy + half_box), 0, score));
      }
    }
  }
  return out;
}

Raster SyntheticDetector::plant_object(const Raster& img, const BoundingBox& region,
                                       double target_score, size_t n_boxes) const {
  if (!(target_score > config_.detection_threshold && target_score < 1.0)) {
    throw std::invalid_argument("plant_object: target_score must lie in (threshold, 1)");
  }
  if (n_boxes == 0) throw std::invalid_argument("plant_object: n_boxes must be positive");
  if (region.x_min < 0.0 || region.y_min < 0.0 ||
      region.x_max > static_cast<double>(img.width()) ||
      region.y_max > static_cast<double>(img.height())) {
    throw std::invalid_argument("plant_object: region must lie inside the raster");
  }

  const size_t window = config_.grid.window;
  std::vector<std::pair<size_t, size_t>> inside;
  for (const auto& [ay, ax] : anchor_positions(img.height(), img.width())) {
    if (static_cast<double>(ax) >= region.x_min && static_cast<double>(ay) >= region.y_min &&
        static_cast<double>(ax + window) <= region.x_max &&
        static_cast<double>(ay + window) <= region.y_max) {
      inside.emplace_back(ay, ax);
    }
  }
  if (inside.size() < n_boxes) {
    throw std::invalid_argument("plant_object: region holds fewer anchors than n_boxes");
  }

  // A compact blob around the region center: keeps one object's boxes
  // mutually overlapping so suppression collapses them to a single keep.
  const double cx = 0.5 * (region.x_min + region.x_max) - 0.5 * static_cast<double>(window);
  const double cy = 0.5 * (region.y_min + region.y_max) - 0.5 * static_cast<double>(window);
  std::stable_sort(inside.begin(), inside.end(), [&](const auto& a, const auto& b) {
    const double da = (static_cast<double>(a.second) - cx) * (static_cast<double>(a.second) - cx) +
                      (static_cast<double>(a.first) - cy) * (static_cast<double>(a.first) - cy);
    const double db = (static_cast<double>(b.second) - cx) * (static_cast<double>(b.second) - cx) +
                      (static_cast<double>(b.first) - cy) * (static_cast<double>(b.first) - cy);
    return da < db;
  });
  inside.resize(n_boxes);
  std::sort(inside.begin(), inside.end());

  Raster out = img;
  const double target_z = logit(target_score);
  const size_t stride = config_.grid.stride;
  const size_t blocks_per_window = (window / stride) * (window / stride);
  const size_t n = inside.size();

  // Selected windows overlap, so a boost along one window's weight vector
  // spills into its neighbors. The Gram matrix of the window vectors turns
  // the joint targeting into a small linear solve: entries are the shared
  // stride-block fraction.
  std::vector<double> gram(n * n, 0.0);
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < n; ++j) {
      const auto [ay_i, ax_i] = inside[i];
      const auto [ay_j, ax_j] = inside[j];
      const double oy = std::max(0.0, static_cast<double>(std::min(ay_i, ay_j) + window) -
                                          static_cast<double>(std::max(ay_i, ay_j)));
      const double ox = std::max(0.0, static_cast<double>(std::min(ax_i, ax_j) + window) -
                                          static_cast<double>(std::max(ax_i, ax_j)));
      const double shared_blocks = (oy / static_cast<double>(stride)) *
                                   (ox / static_cast<double>(stride));
      gram[i * n + j] = shared_blocks / static_cast<double>(blocks_per_window);
    }
  }

  // Clipping breaks linearity, so the solve is repeated against measured
  // scores; untouched pixels converge in one pass.
  for (int pass = 0; pass < 8; ++pass) {
    std::vector<double> residual(n);
    double worst = 0.0;
    for (size_t i = 0; i < n; ++i) {
      const auto [ay, ax] = inside[i];
      residual[i] = target_z - logit(anchor_score(out, ax, ay));
      worst = std::max(worst, std::fabs(residual[i]));
    }
    if (worst <= std::max(1e-5, config_.gain * 1e-6)) break;
    if (pass == 7) {
      throw std::runtime_error("plant_object: clipping prevents reaching the target score");
    }

    // Gaussian elimination with partial pivoting on a copy of the Gram
    // matrix; window vectors are linearly independent, so it is regular.
    std::vector<double> a(gram);
    std::vector<double> u(residual);
    for (size_t col = 0; col < n; ++col) {
      size_t pivot = col;
      for (size_t r = col + 1; r < n; ++r) {
        if (std::fabs(a[r * n + col]) > std::fabs(a[pivot * n + col])) pivot = r;
      }
      if (std::fabs(a[pivot * n + col]) < 1e-12) {
        throw std::runtime_error("plant_object: degenerate window arrangement");
      }
      if (pivot != col) {
        for (size_t c = 0; c < n; ++c) std::swap(a[col * n + c], a[pivot * n + c]);
        std::swap(u[col], u[pivot]);
      }
      for (size_t r = col + 1; r < n; ++r) {
        const double f = a[r * n + col] / a[col * n + col];
        for (size_t c = col; c < n; ++c) a[r * n + c] -= f * a[col * n + c];
        u[r] -= f * u[col];
      }
    }
    for (size_t row = n; row-- > 0;) {
      for (size_t c = row + 1; c < n; ++c) u[row] -= a[row * n + c] * u[c];
      u[row] /= a[row * n + row];
    }

    for (size_t j = 0; j < n; ++j) {
      const double beta = u[j] / config_.gain;
      if (beta == 0.0) continue;
      const auto [ay, ax] = inside[j];
      for (size_t y = 0; y < window; ++y) {
        for (size_t x = 0; x < window; ++x) {
          for (size_t c = 0; c < Raster::kChannels; ++c) {
            float& px = out.at(ay + y, ax + x, c);
            px = std::clamp(
                px + static_cast<float>(beta * pattern_weight(ay + y, ax + x, c)), 0.0f, 1.0f);
          }
        }
      }
    }
  }

  for (const auto& [ay, ax] : inside) {
    if (anchor_score(out, ax, ay) < target_score - 1e-3) {
      throw std::runtime_error("plant_object: clipping prevents reaching the target score");
    }
  }
  return out;
}

NmsOutcome SyntheticDetector::run_nms(NmsInput input, MeasurementClock& clock,
                                      double* extra_delay) const {
  *extra_delay = 0.0;
  switch (config_.nms_variant) {
    case NmsVariant::greedy:
      return greedy_nms(input);
    case NmsVariant::constant_time:
      return constant_time_nms(input, config_.constant_time_capacity);
    case NmsVariant::random_delay: {
      auto result = random_delay_nms(input, config_.delay_spec, clock.rng().next_u64());
      *extra_delay = result.extra_delay;
      return result.outcome;
    }
  }
  throw std::logic_error("unreachable NMS variant");
}

DetectResult SyntheticDetector::detect(const Raster& img, MeasurementClock& clock) const {
  using Clock = std::chrono::steady_clock;
  const bool wall = clock.mode() == ClockMode::wall_clock;

  const auto t0 = Clock::now();
  std::vector<Detection> candidates = score_anchors(img);
  const auto t1 = Clock::now();

  const uint64_t box_count = candidates.size();
  double extra_delay = 0.0;
  NmsInput input{std::move(candidates), config_.nms_threshold};
  NmsOutcome outcome = run_nms(std::move(input), clock, &extra_delay);
  const auto t2 = Clock::now();

  DetectResult result;
  result.timing.mode = clock.mode();
  result.timing.comparison_count = outcome.comparison_count;
  result.timing.box_count = box_count;
  result.timing.object_count = outcome.kept.size();

  if (wall) {
    result.timing.neural_time = std::chrono::duration<double>(t1 - t0).count();
    result.timing.nms_time = std::chrono::duration<double>(t2 - t1).count() + extra_delay;
  } else {
    result.timing.neural_time = modeled_neural_time(img.pixel_count()) + clock.sample_noise();
    result.timing.nms_time =
        modeled_nms_time(outcome, config_.nms_cost) + extra_delay + clock.sample_noise();
  }
  result.timing.total_time = result.timing.neural_time + result.timing.nms_time;
  result.detections = std::move(outcome.kept);
  return result;
}

}  // namespace nmslab
