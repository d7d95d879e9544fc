#include "drift/errors.hpp"
#include "drift/eval/eval.hpp"
#include "drift/model/heads.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <numeric>

namespace drift::eval {
namespace {

void check_lengths(std::span<const losses::ProbDist> preds, std::span<const int> labels) {
    if (preds.empty()) throw EvaluationError("no predictions to score");
    if (preds.size() != labels.size()) {
        throw DimensionError(fmt::format("{} predictions for {} labels", preds.size(), labels.size()));
    }
}

void check_labels(std::span<const int> labels, int num_classes) {
    if (num_classes < 2) throw EvaluationError(fmt::format("need at least 2 classes, got {}", num_classes));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= num_classes) {
            throw LabelError(fmt::format("label {} at index {} outside [0, {})", labels[i], i, num_classes));
        }
    }
}

enum class Branch { invariant, spurious };

std::vector<losses::ProbDist> predict_branch(const trainer::ModelState& state,
                                             const std::vector<std::string>& class_names,
                                             std::span<const data::ExampleRecord* const> records, Branch branch) {
    if (class_names != state.class_names) {
        throw CompatibilityError(fmt::format("model classes [{}] differ from dataset classes [{}]",
                                             fmt::join(state.class_names, ", "), fmt::join(class_names, ", ")));
    }
    ag::NoGradGuard guard;
    const auto rows = state.class_embeddings();
    const auto& class_rows = branch == Branch::invariant ? rows.invariant : rows.spurious;
    const auto& enc = *state.encoder;

    std::vector<losses::ProbDist> out;
    out.reserve(records.size());
    constexpr std::size_t chunk = 64;
    for (std::size_t start = 0; start < records.size(); start += chunk) {
        std::vector<Image> images;
        for (std::size_t i = start; i < std::min(records.size(), start + chunk); ++i) {
            images.push_back(data::load_record_image(*records[i]));
        }
        auto [u, s] = model::decouple_rows(enc.encode_images(images), enc.heads(), model::Modality::vision);
        const auto& z = branch == Branch::invariant ? u.value() : s.value();
        for (Eigen::Index r = 0; r < z.rows(); ++r) {
            out.push_back(losses::class_probs(z.row(r).transpose(), class_rows, state.tau));
        }
    }
    return out;
}

}  // namespace

std::vector<losses::ProbDist> predict(const trainer::ModelState& state, const std::vector<std::string>& class_names,
                                      std::span<const data::ExampleRecord* const> records) {
    return predict_branch(state, class_names, records, Branch::invariant);
}

std::vector<losses::ProbDist> predict_spurious(const trainer::ModelState& state,
                                               const std::vector<std::string>& class_names,
                                               std::span<const data::ExampleRecord* const> records) {
    return predict_branch(state, class_names, records, Branch::spurious);
}

double top1_accuracy(std::span<const losses::ProbDist> preds, std::span<const int> labels) {
    check_lengths(preds, labels);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
        if (preds[i].argmax() == labels[i]) ++correct;
    }
    return 100.0 * static_cast<double>(correct) / static_cast<double>(preds.size());
}

std::vector<ClassMetrics> per_class_metrics(std::span<const losses::ProbDist> preds, std::span<const int> labels,
                                            int num_classes) {
    check_lengths(preds, labels);
    check_labels(labels, num_classes);
    std::vector<int> tp(std::size_t(num_classes), 0), fp(std::size_t(num_classes), 0), fn(std::size_t(num_classes), 0);
    for (std::size_t i = 0; i < preds.size(); ++i) {
        const auto p = static_cast<std::size_t>(preds[i].argmax());
        const auto y = static_cast<std::size_t>(labels[i]);
        if (p == y) {
            ++tp[y];
        } else {
            ++fp[p];
            ++fn[y];
        }
    }
    auto ratio = [](int num, int den) { return den == 0 ? 0.0 : 100.0 * num / den; };
    std::vector<ClassMetrics> out;
    for (std::size_t c = 0; c < std::size_t(num_classes); ++c) {
        out.push_back({ratio(tp[c], tp[c] + fp[c]), ratio(tp[c], tp[c] + fn[c]),
                       ratio(2 * tp[c], 2 * tp[c] + fp[c] + fn[c]), tp[c] + fn[c]});
    }
    return out;
}

double macro_f1(std::span<const losses::ProbDist> preds, std::span<const int> labels, int num_classes) {
    const auto per_class = per_class_metrics(preds, labels, num_classes);
    double total = 0.0;
    for (const auto& m : per_class) total += m.f1;
    return total / static_cast<double>(per_class.size());
}

AucResult roc_auc(std::span<const losses::ProbDist> preds, std::span<const int> labels, int num_classes) {
    check_lengths(preds, labels);
    check_labels(labels, num_classes);
    const std::size_t n = preds.size();
    AucResult result;
    double total = 0.0;
    int scored = 0;
    std::vector<std::size_t> order(n);
    std::vector<double> ranks(n);
    for (int c = 0; c < num_classes; ++c) {
        const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), c));
        const std::size_t negatives = n - positives;
        if (positives == 0 || negatives == 0) {
            result.skipped.push_back(c);
            continue;
        }
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return preds[a][c] < preds[b][c]; });
        // Average 1-based ranks across runs of tied scores.
        for (std::size_t i = 0; i < n;) {
            std::size_t j = i;
            while (j + 1 < n && preds[order[j + 1]][c] == preds[order[i]][c]) ++j;
            const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
            for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
            i = j + 1;
        }
        double rank_sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            if (labels[i] == c) rank_sum += ranks[i];
        }
        const double np = static_cast<double>(positives);
        total += (rank_sum - np * (np + 1.0) / 2.0) / (np * static_cast<double>(negatives));
        ++scored;
    }
    if (scored == 0) throw EvaluationError("AUC undefined: no class has both positive and negative examples");
    result.auc = 100.0 * total / scored;
    return result;
}

Metrics evaluate(const trainer::ModelState& state, const data::DatasetManifest& manifest, data::Split split,
                 const EvaluateOptions& options) {
    const auto records = manifest.split(split);
    if (records.empty()) {
        throw EvaluationError(fmt::format("split '{}' of '{}' is empty", data::to_string(split), manifest.name));
    }
    const auto preds = predict(state, manifest.class_names, records);
    std::vector<int> labels;
    for (const auto* r : records) labels.push_back(r->label);

    Metrics m;
    const int c = manifest.num_classes();
    m.top1 = top1_accuracy(preds, labels);
    m.per_class = per_class_metrics(preds, labels, c);
    m.macro_f1 = macro_f1(preds, labels, c);
    try {
        auto auc = roc_auc(preds, labels, c);
        m.auc = auc.auc;
        m.auc_skipped = std::move(auc.skipped);
    } catch (const EvaluationError&) {
        if (!options.allow_missing_auc) throw;
        for (int k = 0; k < c; ++k) m.auc_skipped.push_back(k);
    }
    return m;
}

void CrossEvalSpec::validate() const {
    if (targets.empty()) throw ConfigError("cross-evaluation needs at least one target");
}

CrossEvalResult cross_eval(const trainer::ModelState& state, const CrossEvalSpec& spec,
                           const std::map<std::string, data::DatasetManifest>& manifests) {
    spec.validate();
    const auto& source_classes = state.class_names;
    auto source_index = [&](const std::string& name) -> int {
        auto it = std::find(source_classes.begin(), source_classes.end(), name);
        return it == source_classes.end() ? -1 : static_cast<int>(it - source_classes.begin());
    };

    std::vector<std::string> gaps;
    std::map<std::string, std::vector<int>> mapped;
    for (const auto& target : spec.targets) {
        auto it = manifests.find(target);
        if (it == manifests.end()) throw EvaluationError(fmt::format("no manifest for target '{}'", target));
        auto& map = mapped[target];
        for (const auto& name : it->second.class_names) {
            auto a = spec.alignment.find(name);
            const int idx = source_index(a == spec.alignment.end() ? name : a->second);
            if (idx < 0) gaps.push_back(fmt::format("{}:{}", target, name));
            map.push_back(idx);
        }
    }
    if (!gaps.empty()) {
        throw AlignmentError(fmt::format("unmapped target classes: {}", fmt::join(gaps, ", ")));
    }

    CrossEvalResult result;
    for (const auto& target : spec.targets) {
        const auto& manifest = manifests.at(target);
        const auto records = manifest.split(spec.target_split);
        if (records.empty()) {
            throw EvaluationError(fmt::format("split '{}' of target '{}' is empty", data::to_string(spec.target_split),
                                              target));
        }
        const auto preds = predict(state, source_classes, records);
        std::vector<int> labels;
        for (const auto* r : records) labels.push_back(mapped[target][static_cast<std::size_t>(r->label)]);
        const double acc = top1_accuracy(preds, labels);
        result.per_target[target] = acc;
        result.average_top1 += acc;
    }
    result.average_top1 /= static_cast<double>(spec.targets.size());
    return result;
}

void to_json(nlohmann::json& j, const Metrics& m) {
    j = nlohmann::json{{"top1", m.top1}, {"macro_f1", m.macro_f1}, {"auc_skipped", m.auc_skipped}};
    j["auc"] = m.auc ? nlohmann::json(*m.auc) : nlohmann::json(nullptr);
    auto& pc = j["per_class"] = nlohmann::json::array();
    for (const auto& c : m.per_class) {
        pc.push_back({{"precision", c.precision}, {"recall", c.recall}, {"f1", c.f1}, {"support", c.support}});
    }
}

}  // namespace drift::eval
