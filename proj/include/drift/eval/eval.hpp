#pragma once

#include "drift/data/manifest.hpp"
#include "drift/losses/losses.hpp"
#include "drift/trainer/trainer.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace drift::eval {

struct ClassMetrics {
    double precision = 0.0;   // percentages
    double recall = 0.0;
    double f1 = 0.0;
    int support = 0;
};

struct Metrics {
    double top1 = 0.0;
    double macro_f1 = 0.0;
    std::optional<double> auc;           // absent when no class could be scored
    std::vector<ClassMetrics> per_class;
    std::vector<int> auc_skipped;        // classes lacking positives or negatives
};

/// Invariant-branch class distributions for each record. Throws
/// CompatibilityError when the model's classes differ from `class_names`.
std::vector<losses::ProbDist> predict(const trainer::ModelState& state,
                                      const std::vector<std::string>& class_names,
                                      std::span<const data::ExampleRecord* const> records);

/// Same, using the spurious branch. Diagnostic only; never used to classify.
std::vector<losses::ProbDist> predict_spurious(const trainer::ModelState& state,
                                               const std::vector<std::string>& class_names,
                                               std::span<const data::ExampleRecord* const> records);

/// 100 * fraction of records whose argmax (lowest index on ties) equals the label.
double top1_accuracy(std::span<const losses::ProbDist> preds, std::span<const int> labels);

std::vector<ClassMetrics> per_class_metrics(std::span<const losses::ProbDist> preds, std::span<const int> labels,
                                            int num_classes);
/// Unweighted mean of per-class F1; a class with no predictions and no
/// support contributes 0.
double macro_f1(std::span<const losses::ProbDist> preds, std::span<const int> labels, int num_classes);

struct AucResult {
    double auc = 0.0;
    std::vector<int> skipped;
};
/// One-vs-rest macro AUC from the Mann-Whitney rank statistic (ties count
/// one half). Throws EvaluationError when no class has both label sides.
AucResult roc_auc(std::span<const losses::ProbDist> preds, std::span<const int> labels, int num_classes);

struct EvaluateOptions {
    bool allow_missing_auc = false;   // otherwise the AUC error propagates
};

Metrics evaluate(const trainer::ModelState& state, const data::DatasetManifest& manifest, data::Split split,
                 const EvaluateOptions& options = {});

/// Top-1 on each target through a target-class -> source-class name map.
/// Classes absent from the map align to the source class of the same name.
struct CrossEvalSpec {
    std::string source;
    std::vector<std::string> targets;
    std::map<std::string, std::string> alignment;
    data::Split target_split = data::Split::test_id;

    void validate() const;
};

struct CrossEvalResult {
    double average_top1 = 0.0;
    std::map<std::string, double> per_target;
};

CrossEvalResult cross_eval(const trainer::ModelState& state, const CrossEvalSpec& spec,
                           const std::map<std::string, data::DatasetManifest>& manifests);

// Reports -------------------------------------------------------------------

enum class Layout { table1, table2 };

struct MethodCell {
    std::optional<double> accuracy;
    std::optional<double> macro_f1;   // table1 only
    std::optional<double> auc;        // table1 only
    std::string target;               // table2 only, e.g. "avg(derm, isic)"

    bool operator==(const MethodCell&) const = default;
};

struct ReportRow {
    std::string dataset;
    int num_classes = 0;              // table1 only
    std::vector<MethodCell> cells;    // aligned with Report::methods

    bool operator==(const ReportRow&) const = default;
};

struct Report {
    Layout layout = Layout::table1;
    std::vector<std::string> methods;
    std::vector<ReportRow> rows;

    bool operator==(const Report&) const = default;
};

inline constexpr const char* kMissingCell = "—";

MethodCell to_cell(const Metrics& m);

/// "<layout>_<dataset>_<hash12>_seed<seed>.tsv"
std::string report_filename(Layout layout, const std::string& dataset, const std::string& config_hash,
                            std::uint64_t seed);

/// Tab-separated table at `path` (missing values rendered as an em dash,
/// table1 gets a trailing "average" row) plus `path` + ".json" with exact values.
void emit_report(const Report& report, const std::filesystem::path& path);
/// Parses the tab-separated table back; the average row is dropped.
Report parse_report(const std::filesystem::path& path);
Report read_report_json(const std::filesystem::path& path);

void to_json(nlohmann::json& j, const Metrics& m);
void to_json(nlohmann::json& j, const Report& r);
void from_json(const nlohmann::json& j, Report& r);

}  // namespace drift::eval
