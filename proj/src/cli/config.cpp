#include "drift/cli/config.hpp"

#include "drift/errors.hpp"
#include "drift/hashing.hpp"

#include <fmt/format.h>

#include <fstream>
#include <set>

namespace drift::cli {
namespace {

using nlohmann::json;

json::json_pointer pointer(const std::string& dotted) {
    std::string p;
    std::size_t start = 0;
    while (true) {
        const auto dot = dotted.find('.', start);
        p += "/" + dotted.substr(start, dot - start);
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    return json::json_pointer(p);
}

void collect(const json& node, const std::string& prefix, std::vector<std::string>& out) {
    if (node.is_object() && !node.empty()) {
        for (const auto& [k, v] : node.items()) collect(v, prefix.empty() ? k : prefix + "." + k, out);
    } else {
        out.push_back(prefix);
    }
}

void set_key(json& config, const std::set<std::string>& known, const std::string& key, json value,
             const std::string& source) {
    if (!known.contains(key)) throw ConfigError(fmt::format("unknown config key '{}' ({})", key, source));
    config[pointer(key)] = std::move(value);
}

// Walks a user document guided by the defaults so that free-form leaves are
// taken whole.
void merge_nested(json& config, const std::set<std::string>& known, const json& user, const std::string& prefix,
                  const std::string& source) {
    for (const auto& [k, v] : user.items()) {
        const std::string key = prefix.empty() ? k : prefix + "." + k;
        if (known.contains(key)) {
            set_key(config, known, key, v, source);
        } else if (v.is_object()) {
            merge_nested(config, known, v, key, source);
        } else {
            throw ConfigError(fmt::format("unknown config key '{}' ({})", key, source));
        }
    }
}

template <typename T>
T section(const json& config, const char* name) {
    try {
        return config.at(name).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(fmt::format("config section '{}': {}", name, e.what()));
    }
}

}  // namespace

json default_config() {
    json captioner = {{"base_url", "http://127.0.0.1:8080"},
                      {"timeout_ms", 5000},
                      {"retries", 2},
                      {"auth_token", ""},
                      {"prompt", data::kDefaultCaptionPrompt},
                      {"max_concurrency", 4},
                      {"fallback", false}};
    json eval = {{"split", "test_id"}, {"allow_missing_auc", true}, {"method", "DRiFt"}};
    json crosseval = {{"source", ""},
                      {"targets", json::array()},
                      {"alignment", json::object()},
                      {"target_split", "test_id"}};
    json ablate = {{"axis", "shots"}, {"values", json::array({1, 2, 4, 8, 16})}};
    return json{{"synth", data::SyntheticBenchConfig{}},
                {"backbone", model::BackboneConfig{}},
                {"train", trainer::TrainConfig{}},
                {"captioner", captioner},
                {"curation", data::CurationRules{}},
                {"eval", eval},
                {"crosseval", crosseval},
                {"ablate", ablate},
                {"device", "cpu"}};
}

std::vector<std::string> config_keys(const json& config) {
    std::vector<std::string> out;
    collect(config, "", out);
    return out;
}

void apply_override(json& config, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError(fmt::format("override '{}' is not of the form key=value", assignment));
    }
    const std::string key = assignment.substr(0, eq);
    const std::string text = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(text);
    } catch (const json::exception&) {
        value = text;
    }
    const auto keys = config_keys(default_config());
    set_key(config, {keys.begin(), keys.end()}, key, std::move(value), "--set");
}

json resolve_config(const std::optional<std::filesystem::path>& file, const std::vector<std::string>& overrides) {
    json config = default_config();
    const auto keys = config_keys(config);
    const std::set<std::string> known(keys.begin(), keys.end());
    if (file) {
        std::ifstream in(*file);
        if (!in) throw ConfigError(fmt::format("cannot read config file {}", file->string()));
        json user;
        try {
            user = json::parse(in);
        } catch (const json::exception& e) {
            throw ConfigError(fmt::format("{}: {}", file->string(), e.what()));
        }
        if (!user.is_object()) throw ConfigError(fmt::format("{}: top level must be an object", file->string()));
        merge_nested(config, known, user, "", file->string());
    }
    for (const auto& o : overrides) apply_override(config, o);
    return config;
}

std::string config_hash(const json& config) { return sha256_hex(config.dump()); }

data::SyntheticBenchConfig synth_config(const json& config) {
    auto c = section<data::SyntheticBenchConfig>(config, "synth");
    c.validate();
    return c;
}

model::BackboneConfig backbone_config(const json& config) {
    auto c = section<model::BackboneConfig>(config, "backbone");
    c.validate();
    return c;
}

trainer::TrainConfig train_config(const json& config) {
    auto c = section<trainer::TrainConfig>(config, "train");
    c.validate();
    return c;
}

data::CurationRules curation_rules(const json& config) { return section<data::CurationRules>(config, "curation"); }

CaptionerSettings captioner_settings(const json& config) {
    const auto& c = config.at("captioner");
    CaptionerSettings s;
    try {
        s.endpoint.base_url = c.at("base_url").get<std::string>();
        s.endpoint.timeout = std::chrono::milliseconds(c.at("timeout_ms").get<long>());
        s.endpoint.retries = c.at("retries").get<int>();
        if (auto token = c.at("auth_token").get<std::string>(); !token.empty()) s.endpoint.auth_token = token;
        s.prompt = c.at("prompt").get<std::string>();
        s.max_concurrency = c.at("max_concurrency").get<int>();
        s.fallback = c.at("fallback").get<bool>();
    } catch (const json::exception& e) {
        throw ConfigError(fmt::format("config section 'captioner': {}", e.what()));
    }
    s.endpoint.validate();
    if (s.max_concurrency < 1) throw ConfigError("captioner.max_concurrency must be >= 1");
    return s;
}

EvalSettings eval_settings(const json& config) {
    const auto& c = config.at("eval");
    EvalSettings s;
    try {
        s.split = data::parse_split(c.at("split").get<std::string>());
        s.allow_missing_auc = c.at("allow_missing_auc").get<bool>();
        s.method = c.at("method").get<std::string>();
    } catch (const Error& e) {
        throw ConfigError(fmt::format("eval.split: {}", e.what()));
    } catch (const json::exception& e) {
        throw ConfigError(fmt::format("config section 'eval': {}", e.what()));
    }
    return s;
}

eval::CrossEvalSpec crosseval_spec(const json& config) {
    const auto& c = config.at("crosseval");
    eval::CrossEvalSpec spec;
    try {
        spec.source = c.at("source").get<std::string>();
        spec.targets = c.at("targets").get<std::vector<std::string>>();
        spec.alignment = c.at("alignment").get<std::map<std::string, std::string>>();
        spec.target_split = data::parse_split(c.at("target_split").get<std::string>());
    } catch (const json::exception& e) {
        throw ConfigError(fmt::format("config section 'crosseval': {}", e.what()));
    } catch (const ParseError& e) {
        throw ConfigError(fmt::format("crosseval.target_split: {}", e.what()));
    }
    return spec;
}

}  // namespace drift::cli
