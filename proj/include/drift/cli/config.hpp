#pragma once

#include "drift/data/captioner.hpp"
#include "drift/data/curation.hpp"
#include "drift/data/synthetic.hpp"
#include "drift/eval/eval.hpp"
#include "drift/model/config.hpp"
#include "drift/trainer/trainer.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace drift::cli {

/// Every configurable value, grouped by section: synth, backbone, train,
/// captioner, curation, eval, crosseval, ablate.
nlohmann::json default_config();

/// Leaf keys of `config` in dotted form. Objects are descended into unless
/// they are empty in the defaults (free-form maps such as crosseval.alignment).
std::vector<std::string> config_keys(const nlohmann::json& config);

/// Applies `key=value` to a config. The key must already exist; the value is
/// parsed as JSON when possible and taken as a string otherwise.
void apply_override(nlohmann::json& config, const std::string& assignment);

/// Defaults, then the file (nested or flat dotted keys), then overrides.
/// Unknown keys in either source raise ConfigError.
nlohmann::json resolve_config(const std::optional<std::filesystem::path>& file,
                              const std::vector<std::string>& overrides);

/// Hex SHA-256 of the canonical dump.
std::string config_hash(const nlohmann::json& config);

data::SyntheticBenchConfig synth_config(const nlohmann::json& config);
model::BackboneConfig backbone_config(const nlohmann::json& config);
trainer::TrainConfig train_config(const nlohmann::json& config);
data::CurationRules curation_rules(const nlohmann::json& config);

struct CaptionerSettings {
    data::CaptionerEndpoint endpoint;
    std::string prompt;
    int max_concurrency = 4;
    bool fallback = false;
};
CaptionerSettings captioner_settings(const nlohmann::json& config);

struct EvalSettings {
    data::Split split = data::Split::test_id;
    bool allow_missing_auc = true;
    std::string method = "DRiFt";
};
EvalSettings eval_settings(const nlohmann::json& config);
eval::CrossEvalSpec crosseval_spec(const nlohmann::json& config);

}  // namespace drift::cli
