#pragma once

#include "drift/eval/eval.hpp"
#include "drift/trainer/trainer.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace drift::cli {

struct RunSpec {
    std::string subcommand;
    std::optional<std::filesystem::path> config_path;
    std::vector<std::string> overrides;    // "dotted.key=value", applied in order
    std::optional<std::uint64_t> seed;     // sets synth.seed and train.seed
    std::filesystem::path out = "out";
    std::string device = "cpu";
    bool fallback_captions = false;
};

/// Resolved config for a run; the seed and fallback flags are folded in.
/// Throws ConfigError for an unsupported device.
nlohmann::json resolve_run_config(const RunSpec& spec);

/// Writes <out>/manifest.jsonl, <out>/images/*.ppm and <out>/resolved_config.json.
std::filesystem::path cmd_synth(const RunSpec& spec, std::ostream& log);

/// Captions (or falls back to templates), curates, and writes
/// <out>/manifest.jsonl plus <out>/curation_report.json.
std::filesystem::path cmd_caption(const RunSpec& spec, const std::filesystem::path& manifest, std::ostream& log);

/// Few-shot sampling then training; outputs land in <out>.
trainer::TrainResult cmd_train(const RunSpec& spec, const std::filesystem::path& manifest, std::ostream& log);

struct EvalOutput {
    eval::Metrics metrics;
    std::filesystem::path report;
};
EvalOutput cmd_eval(const RunSpec& spec, const std::filesystem::path& checkpoint,
                    const std::filesystem::path& manifest, std::ostream& log);

struct CrossEvalOutput {
    eval::CrossEvalResult result;
    std::filesystem::path report;
};
/// `targets` maps dataset names to manifest paths.
CrossEvalOutput cmd_crosseval(const RunSpec& spec, const std::filesystem::path& checkpoint,
                              const std::map<std::string, std::filesystem::path>& targets, std::ostream& log);

enum class AblationAxis { shots, tokens, depth, backbone_width, losses };
AblationAxis parse_axis(const std::string& name);
std::string to_string(AblationAxis axis);

struct AblationPoint {
    std::string label;                 // column name in the sweep table, e.g. "shots=4"
    nlohmann::json config;             // fully resolved config for this point
};

/// Every sweep point for the axis, validated before anything runs. The losses
/// axis ignores `values` and yields exactly three configurations.
std::vector<AblationPoint> ablation_points(const nlohmann::json& base, AblationAxis axis,
                                           const std::vector<int>& values);

struct AblationOutput {
    eval::Report report;
    std::filesystem::path report_path;
};
AblationOutput cmd_ablate(const RunSpec& spec, const std::filesystem::path& manifest, AblationAxis axis,
                          const std::vector<int>& values, std::ostream& log);

/// Entry point used by the `drift` executable. Returns the process exit code.
int run_main(int argc, char** argv);

}  // namespace drift::cli
