// nmslab: experiment runner for the NMS timing-leakage laboratory.
//
// Each subcommand is one experiment kind; every one accepts --config (JSON),
// fields from which can be overridden with the flags below. Outputs land in
// a run directory (--out, or the RUN_DIR environment variable).
//
// Exit codes: 0 success, 2 configuration error, 3 runtime failure,
// 4 experiment-internal check failure.

#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "nmslab/config.hpp"
#include "nmslab/experiments.hpp"

using nlohmann::json;

namespace {

struct CommonArgs {
  std::string config_path;
  std::string out_dir;
  uint64_t master_seed = 0;
  bool seed_set = false;
  std::vector<std::string> overrides;  // key=value dotted JSON pointers
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "JSON config file");
  cmd->add_option("--out", args.out_dir, "run directory (default runs/<kind>)");
  cmd->add_option("--seed", args.master_seed, "master seed")->each([&](const std::string&) {
    args.seed_set = true;
  });
  cmd->add_option("--set", args.overrides,
                  "override a config field, e.g. --set params.scenes=100");
}

json load_config(const CommonArgs& args, const std::string& kind) {
  json j = json::object();
  if (!args.config_path.empty()) {
    std::ifstream f(args.config_path);
    if (!f) throw std::invalid_argument("cannot open config file: " + args.config_path);
    f >> j;
  }
  j["kind"] = kind;
  if (!args.out_dir.empty()) {
    j["out_dir"] = args.out_dir;
  } else if (const char* env = std::getenv("RUN_DIR"); env != nullptr && *env != '\0') {
    j["out_dir"] = std::string(env);
  } else if (!j.contains("out_dir")) {
    j["out_dir"] = "runs/" + kind;
  }
  if (args.seed_set) j["master_seed"] = args.master_seed;

  for (const std::string& kv : args.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("--set expects key=value, got: " + kv);
    }
    std::string pointer = "/" + kv.substr(0, eq);
    for (auto& c : pointer) {
      if (c == '.') c = '/';
    }
    const std::string value = kv.substr(eq + 1);
    json parsed;
    try {
      parsed = json::parse(value);
    } catch (const json::parse_error&) {
      parsed = value;  // bare strings are fine
    }
    j[json::json_pointer(pointer)] = parsed;
  }
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"NMS timing-leakage laboratory"};
  app.require_subcommand(1);

  const std::vector<std::string> kinds = {
      "profile",      "amplify-sweep", "calibrate",      "evade",
      "evade-baseline", "lambda-sweep", "infer-dataset", "fp-bound-curve",
      "countermeasure-eval", "serve"};
  const std::vector<std::string> descriptions = {
      "runtime vs object count over random scenes",
      "leakage correlation vs amplification factor (local or --set params.endpoint...)",
      "black-image neural-runtime regression",
      "timing-guided evasion attack",
      "decision-only evasion baseline",
      "evasion budget vs lambda",
      "timing-only dataset inference",
      "false-positive union-bound curve",
      "leakage under greedy / constant-time / random-delay suppression",
      "HTTP detection service"};

  std::vector<CommonArgs> args(kinds.size());
  for (size_t i = 0; i < kinds.size(); ++i) {
    CLI::App* cmd = app.add_subcommand(kinds[i], descriptions[i]);
    add_common(cmd, args[i]);
  }

  CLI11_PARSE(app, argc, argv);

  for (size_t i = 0; i < kinds.size(); ++i) {
    if (!app.got_subcommand(kinds[i])) continue;
    try {
      const json j = load_config(args[i], kinds[i]);
      nmslab::RunConfig config;
      try {
        config = nmslab::RunConfig::from_json(j);
      } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
      }
      const auto dir = nmslab::run(config);
      std::cout << "run directory: " << dir.string() << "\n";

      // Surface experiment-internal check failures distinctly.
      std::ifstream summary_file(dir / "summary.json");
      if (summary_file) {
        json summary;
        summary_file >> summary;
        if (summary.contains("variants")) {
          for (const auto& v : summary.at("variants")) {
            if (!v.value("detections_match", true)) {
              std::cerr << "check failed: variant output diverges from greedy\n";
              return 4;
            }
          }
        }
      }
      return 0;
    } catch (const std::invalid_argument& e) {
      std::cerr << "config error: " << e.what() << "\n";
      return 2;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << "\n";
      return 3;
    }
  }
  return 2;
}
