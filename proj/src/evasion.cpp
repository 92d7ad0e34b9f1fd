#include "nmslab/evasion.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <stdexcept>

#include "nmslab/rng.hpp"

namespace nmslab {

void EvasionConfig::validate() const {
  if (population_size < 2) throw std::invalid_argument("EvasionConfig: population_size must be >= 2");
  if (!(radius > 0.0)) throw std::invalid_argument("EvasionConfig: radius must be positive");
  if (!(lambda > 0.0)) throw std::invalid_argument("EvasionConfig: lambda must be positive");
  if (amplification_k == 0) throw std::invalid_argument("EvasionConfig: amplification_k must be >= 1");
  if (max_iterations == 0) throw std::invalid_argument("EvasionConfig: max_iterations must be >= 1");
}

FitnessResult fitness_and_direction(double gadget_time, std::span<const double> member_times) {
  FitnessResult result;
  result.fitness.resize(member_times.size(), 0.0);
  result.direction.resize(member_times.size(), 0);

  double denom = 0.0;
  for (double t : member_times) denom += std::fabs(t - gadget_time);
  if (denom == 0.0) {
    result.degenerate = true;
    return result;
  }
  for (size_t j = 0; j < member_times.size(); ++j) {
    const double dt = member_times[j] - gadget_time;
    result.fitness[j] = std::fabs(dt) / denom;
    result.direction[j] = dt < 0.0 ? 1 : (dt > 0.0 ? -1 : 0);
  }
  return result;
}

std::vector<double> breed(std::span<const double> gadget,
                          const std::vector<std::vector<double>>& perturbations,
                          std::span<const double> fitness, std::span<const int> direction,
                          double lambda, bool clip_to_valid, double clip_lo, double clip_hi) {
  if (perturbations.size() != fitness.size() || fitness.size() != direction.size()) {
    throw std::invalid_argument("breed: population arrays disagree in length");
  }
  std::vector<double> out(gadget.begin(), gadget.end());

  std::vector<double> mutation(gadget.size(), 0.0);
  bool any_term = false;
  for (size_t j = 0; j < perturbations.size(); ++j) {
    const double w = fitness[j] * static_cast<double>(direction[j]);
    if (w == 0.0) continue;
    if (perturbations[j].size() != gadget.size()) {
      throw std::invalid_argument("breed: perturbation shape mismatch");
    }
    any_term = true;
    for (size_t i = 0; i < mutation.size(); ++i) mutation[i] += w * perturbations[j][i];
  }
  if (!any_term) return out;

  double norm_sq = 0.0;
  for (double v : mutation) norm_sq += v * v;
  if (norm_sq == 0.0) return out;  // exact cancellation

  const double scale = lambda / std::sqrt(norm_sq);
  for (size_t i = 0; i < out.size(); ++i) {
    out[i] += scale * mutation[i];
    if (clip_to_valid) out[i] = std::clamp(out[i], clip_lo, clip_hi);
  }
  return out;
}

PerturbationReport perturbation_metrics(const Raster& original, const Raster& adversarial,
                                        MetricScale scale) {
  if (!original.same_shape(adversarial)) {
    throw std::invalid_argument("perturbation_metrics: raster shapes differ");
  }
  const double factor = scale == MetricScale::byte ? 255.0 : 1.0;
  const auto a = original.values();
  const auto b = adversarial.values();

  double sum_sq = 0.0;
  double max_abs = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = factor * (static_cast<double>(b[i]) - static_cast<double>(a[i]));
    sum_sq += d * d;
    max_abs = std::max(max_abs, std::fabs(d));
  }

  PerturbationReport report;
  report.scale = scale;
  report.l2 = std::sqrt(sum_sq);
  report.l_inf = max_abs;
  report.mse = sum_sq / static_cast<double>(a.size());
  return report;
}

namespace {

constexpr double kByteScale = 255.0;
constexpr size_t kMaxRedraws = 2;  // degenerate-fitness retries per iteration

Raster to_raster(std::span<const double> byte_values, size_t height, size_t width) {
  Raster img(height, width);
  auto out = img.values();
  for (size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<float>(std::clamp(byte_values[i] / kByteScale, 0.0, 1.0));
  }
  return img;
}

struct AttackLoop {
  QueryTarget& target;
  const EvasionConfig& cfg;
  EvasionTrace trace;
  Rng rng;
  size_t height;
  size_t width;

  AttackLoop(QueryTarget& t, const EvasionConfig& c, const Raster& gadget0)
      : target(t), cfg(c), rng(derive_seed(c.rng_seed, "evasion-population")),
        height(gadget0.height()), width(gadget0.width()) {}

  QueryReply issue(const Raster& img, size_t iteration, QueryRole role, int member_index) {
    const QueryReply reply = target.query(img);
    trace.query_count += 1;
    trace.queries.push_back(QueryRecord{trace.query_count, iteration, role, member_index,
                                        reply.seconds, reply.detected});
    return reply;
  }

  std::vector<std::vector<double>> draw_population(size_t values) {
    std::vector<std::vector<double>> perts(cfg.population_size);
    for (auto& pert : perts) {
      pert.resize(values);
      for (double& v : pert) v = cfg.radius * rng.uniform(-1.0, 1.0);
    }
    return perts;
  }
};

// The loop shared by both attacks; `timing_mode` selects the fitness source.
AttackResult run_attack(QueryTarget& target, const Raster& gadget0, const EvasionConfig& cfg,
                        bool timing_mode) {
  cfg.validate();
  AttackLoop loop(target, cfg, gadget0);

  const size_t p = cfg.population_size;
  const size_t amplification = timing_mode ? cfg.amplification_k : 1;
  const uint64_t iteration_cost = timing_mode ? p + 1 : p;  // queries beyond the check

  std::vector<double> gadget(gadget0.values().size());
  for (size_t i = 0; i < gadget.size(); ++i) {
    gadget[i] = static_cast<double>(gadget0.values()[i]) * kByteScale;
  }

  size_t iteration = 0;
  for (;; ++iteration) {
    const Raster current = to_raster(gadget, loop.height, loop.width);
    const QueryReply check =
        cfg.success_check_amplified && timing_mode
            ? loop.issue(amplify(current, amplification, cfg.amplify_resize_back,
                                 cfg.amplify_degradation),
                         iteration, QueryRole::detection_check, -1)
            : loop.issue(current, iteration, QueryRole::detection_check, -1);
    if (!check.detected) {
      loop.trace.succeeded = true;
      break;
    }
    if (iteration >= cfg.max_iterations) break;
    // The budget must also cover this iteration's closing detection check.
    if (cfg.max_queries != 0 &&
        loop.trace.query_count + iteration_cost + 1 > cfg.max_queries) {
      break;
    }

    IterationRecord record;
    record.iteration = iteration;

    double gadget_time = 0.0;
    if (timing_mode) {
      const Raster amplified =
          amplify(current, amplification, cfg.amplify_resize_back, cfg.amplify_degradation);
      gadget_time = loop.issue(amplified, iteration, QueryRole::gadget_timing, -1).seconds;
    }
    record.gadget_time = gadget_time;

    // Population draw; a fitness-degenerate draw (all member times equal to
    // the gadget's) is redrawn a bounded number of times so a flat timing
    // surface cannot stall the loop forever.
    std::vector<std::vector<double>> perts;
    std::vector<double> fitness;
    std::vector<int> direction;
    for (size_t attempt = 0;; ++attempt) {
      perts = loop.draw_population(gadget.size());
      std::vector<double> member_times(p, 0.0);
      std::vector<bool> member_detected(p, false);
      for (size_t j = 0; j < p; ++j) {
        std::vector<double> member(gadget);
        for (size_t i = 0; i < member.size(); ++i) member[i] += perts[j][i];
        const Raster member_img = to_raster(member, loop.height, loop.width);
        const Raster query_img =
            amplification > 1
                ? amplify(member_img, amplification, cfg.amplify_resize_back,
                          cfg.amplify_degradation)
                : member_img;
        const QueryReply reply =
            loop.issue(query_img, iteration, QueryRole::member_timing, static_cast<int>(j));
        member_times[j] = reply.seconds;
        member_detected[j] = reply.detected;
      }
      record.member_times = member_times;

      if (timing_mode) {
        FitnessResult f = fitness_and_direction(gadget_time, member_times);
        const bool redraw_affordable =
            cfg.max_queries == 0 || loop.trace.query_count + p + 1 <= cfg.max_queries;
        if (f.degenerate && attempt < kMaxRedraws && redraw_affordable) {
          loop.trace.redraw_count += 1;
          record.redraws += 1;
          continue;
        }
        fitness = std::move(f.fitness);
        direction = std::move(f.direction);
      } else {
        // Decision-only fitness: +1/p for an evading member, -1/p otherwise,
        // with the direction folded into the sign.
        fitness.assign(p, 0.0);
        direction.assign(p, 1);
        for (size_t j = 0; j < p; ++j) {
          fitness[j] = (member_detected[j] ? -1.0 : 1.0) / static_cast<double>(p);
        }
      }
      break;
    }

    std::vector<double> next =
        breed(gadget, perts, fitness, direction, cfg.lambda, cfg.clip_to_valid, 0.0, kByteScale);

    {
      std::vector<double> mutation(gadget.size(), 0.0);
      for (size_t j = 0; j < perts.size(); ++j) {
        const double w = fitness.empty() ? 0.0 : fitness[j] * static_cast<double>(direction[j]);
        if (w == 0.0) continue;
        for (size_t i = 0; i < mutation.size(); ++i) mutation[i] += w * perts[j][i];
      }
      double norm_sq = 0.0;
      for (double v : mutation) norm_sq += v * v;
      record.mutation_norm = std::sqrt(norm_sq);
    }

    record.fitness = fitness;
    record.direction = direction;
    loop.trace.iterations.push_back(std::move(record));
    gadget = std::move(next);
  }

  loop.trace.iteration_count = loop.trace.iterations.size();

  // Query accounting: one detection check opens every iteration and one
  // closes the loop, so after i full iterations the count is
  // 1 + i*(p+2) for the timing attack and 1 + i*(p+1) for the baseline,
  // plus p per redraw batch.
  const uint64_t expected = 1 + loop.trace.iteration_count * (iteration_cost + 1) +
                            loop.trace.redraw_count * p;
  assert(loop.trace.query_count == expected);
  (void)expected;

  AttackResult result{to_raster(gadget, loop.height, loop.width), std::move(loop.trace)};
  result.trace.final_unit = perturbation_metrics(gadget0, result.gadget, MetricScale::unit);
  result.trace.final_byte = perturbation_metrics(gadget0, result.gadget, MetricScale::byte);
  return result;
}

}  // namespace

AttackResult run_timing_attack(QueryTarget& target, const Raster& gadget0,
                               const EvasionConfig& cfg) {
  return run_attack(target, gadget0, cfg, true);
}

AttackResult run_decision_baseline(QueryTarget& target, const Raster& gadget0,
                                   const EvasionConfig& cfg) {
  return run_attack(target, gadget0, cfg, false);
}

}  // namespace nmslab
