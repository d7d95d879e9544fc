#pragma once

#include "drift/data/manifest.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace drift::data {

struct CurationRules {
    int min_tokens = 0;                        // 0 disables the rule
    std::vector<std::string> banned_phrases;   // case-insensitive substring match
    bool require_class_term = false;           // caption must mention its class name

    bool empty() const { return min_tokens <= 0 && banned_phrases.empty() && !require_class_term; }
};

struct CurationReport {
    int total = 0;
    int kept = 0;
    int replaced = 0;
    // rule name -> number of captions it rejected (first failing rule only)
    std::map<std::string, int> replaced_by_rule;
};

struct CurationResult {
    std::vector<ExampleRecord> records;
    CurationReport report;
};

/// Replaces every caption that fails a rule with the template caption for its
/// class. Never throws on content.
CurationResult curate_captions(std::vector<ExampleRecord> records, const CurationRules& rules);

void to_json(nlohmann::json& j, const CurationRules& r);
void from_json(const nlohmann::json& j, CurationRules& r);
void to_json(nlohmann::json& j, const CurationReport& r);
void from_json(const nlohmann::json& j, CurationReport& r);

void write_curation_report(const CurationReport& report, const std::filesystem::path& path);

}  // namespace drift::data
