#ifndef NMSLAB_EXPERIMENTS_HPP
#define NMSLAB_EXPERIMENTS_HPP

#include <filesystem>
#include <string>

#include <json.hpp>

#include "nmslab/clock.hpp"
#include "nmslab/detector.hpp"

namespace nmslab {

enum class ExperimentKind {
  profile,
  amplify_sweep,
  calibrate,
  evade,
  evade_baseline,
  lambda_sweep,
  infer_dataset,
  fp_bound_curve,
  countermeasure_eval,
  serve,
};

std::string to_string(ExperimentKind kind);
ExperimentKind experiment_kind_from_string(const std::string& name);

// One experiment run: everything an invocation needs, and nothing that is
// not derived from the master seed. Replaying a config in modeled mode
// reproduces every CSV byte for byte.
struct RunConfig {
  ExperimentKind kind = ExperimentKind::profile;
  std::filesystem::path out_dir = "runs";
  uint64_t master_seed = 1;
  SyntheticDetectorConfig detector;
  ClockSpec clock;
  nlohmann::json params = nlohmann::json::object();

  static RunConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

// Executes the experiment and returns the run directory, which holds the
// resolved config snapshot, the CSV outputs, summary.json, and report.txt.
// A failed run leaves a FAILED marker with the error text.
std::filesystem::path run(const RunConfig& config);

// Shortest round-trip decimal form; CSV output must not depend on locale or
// stream state.
std::string format_double(double v);

}  // namespace nmslab

#endif  // NMSLAB_EXPERIMENTS_HPP
