#include "drift/data/curation.hpp"

#include "drift/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace drift::data {
namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

int count_tokens(const std::string& s) {
    std::istringstream in(s);
    int n = 0;
    for (std::string w; in >> w;) ++n;
    return n;
}

// Name of the first rule the caption violates, or empty.
std::string first_violation(const ExampleRecord& r, const CurationRules& rules) {
    if (rules.min_tokens > 0 && count_tokens(r.caption) < rules.min_tokens) return "min_tokens";
    const std::string text = lower(r.caption);
    for (const auto& phrase : rules.banned_phrases) {
        if (!phrase.empty() && text.find(lower(phrase)) != std::string::npos) return "banned_phrase";
    }
    if (rules.require_class_term && text.find(lower(r.class_name)) == std::string::npos) {
        return "require_class_term";
    }
    return {};
}

}  // namespace

CurationResult curate_captions(std::vector<ExampleRecord> records, const CurationRules& rules) {
    CurationReport report;
    report.total = static_cast<int>(records.size());
    for (auto& r : records) {
        const std::string rule = first_violation(r, rules);
        if (rule.empty()) {
            ++report.kept;
            continue;
        }
        r.caption = template_caption(r.class_name);
        r.caption_source = "template";
        ++report.replaced;
        ++report.replaced_by_rule[rule];
    }
    return {std::move(records), std::move(report)};
}

void to_json(nlohmann::json& j, const CurationRules& r) {
    j = {{"min_tokens", r.min_tokens}, {"banned_phrases", r.banned_phrases}, {"require_class_term", r.require_class_term}};
}

void from_json(const nlohmann::json& j, CurationRules& r) {
    r.min_tokens = j.value("min_tokens", 0);
    r.banned_phrases = j.value("banned_phrases", std::vector<std::string>{});
    r.require_class_term = j.value("require_class_term", false);
}

void to_json(nlohmann::json& j, const CurationReport& r) {
    j = {{"total", r.total}, {"kept", r.kept}, {"replaced", r.replaced}, {"replaced_by_rule", r.replaced_by_rule}};
}

void from_json(const nlohmann::json& j, CurationReport& r) {
    r.total = j.at("total").get<int>();
    r.kept = j.at("kept").get<int>();
    r.replaced = j.at("replaced").get<int>();
    r.replaced_by_rule = j.at("replaced_by_rule").get<std::map<std::string, int>>();
}

void write_curation_report(const CurationReport& report, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError(fmt::format("cannot write curation report {}", path.string()));
    out << nlohmann::json(report).dump(2) << '\n';
}

}  // namespace drift::data
