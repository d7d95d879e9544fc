#include "drift/cli/commands.hpp"

#include "drift/cli/config.hpp"
#include "drift/data/captioner.hpp"
#include "drift/data/curation.hpp"
#include "drift/data/few_shot.hpp"
#include "drift/data/image_io.hpp"
#include "drift/data/synthetic.hpp"
#include "drift/errors.hpp"
#include "drift/fs.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <fstream>

namespace drift::cli {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void write_json(const fs::path& path, const json& j) {
    ensure_directory(path.parent_path());
    std::ofstream out(path);
    if (!out) throw IoError(fmt::format("cannot write {}", path.string()));
    out << j.dump(2) << '\n';
    if (!out) throw IoError(fmt::format("failed writing {}", path.string()));
}

void write_resolved(const fs::path& out, const json& config) { write_json(out / "resolved_config.json", config); }

std::uint64_t run_seed(const json& config) { return config.at("train").at("seed").get<std::uint64_t>(); }

trainer::TrainResult train_run(const json& config, const fs::path& manifest_path, const fs::path& out,
                               std::ostream& log) {
    auto cfg = train_config(config);
    cfg.output_dir = out.string();
    const auto backbone = std::make_shared<const model::FrozenBackbone>(backbone_config(config));
    const auto full = data::load_manifest(manifest_path);
    const auto subset = data::sample_few_shot(full, cfg.shots, cfg.seed);
    ensure_directory(out);
    write_resolved(out, config);
    data::save_manifest(subset, out / "few_shot_manifest.jsonl");

    auto state = trainer::build_model_state(cfg, backbone, subset);
    auto result = trainer::train(cfg, subset, state);
    if (!result.log.empty()) {
        log << "final loss " << json(result.log.back().loss).dump() << '\n';
    } else {
        log << "no optimisation steps (epochs = 0)\n";
    }
    log << "checkpoint " << result.checkpoint.string() << '\n';
    return result;
}

struct EvalRun {
    eval::Metrics metrics;
    std::uint64_t seed = 0;   // training seed recorded in the checkpoint
};

EvalRun eval_run(const json& config, const fs::path& checkpoint, const data::DatasetManifest& manifest) {
    const auto settings = eval_settings(config);
    const auto loaded = trainer::load_checkpoint(checkpoint);
    return {eval::evaluate(loaded.state, manifest, settings.split, {settings.allow_missing_auc}), loaded.config.seed};
}

}  // namespace

json resolve_run_config(const RunSpec& spec) {
    json config = resolve_config(spec.config_path, spec.overrides);
    if (spec.device != "cpu") config["device"] = spec.device;
    if (config["device"] != "cpu") {
        throw ConfigError(fmt::format("device {} is not available; this build runs on \"cpu\"", config["device"].dump()));
    }
    if (spec.seed) {
        config["synth"]["seed"] = *spec.seed;
        config["train"]["seed"] = *spec.seed;
    }
    if (spec.fallback_captions) config["captioner"]["fallback"] = true;
    return config;
}

fs::path cmd_synth(const RunSpec& spec, std::ostream& log) {
    const json config = resolve_run_config(spec);
    auto manifest = data::generate_synthetic_benchmark(synth_config(config));
    const fs::path images = spec.out / "images";
    ensure_directory(images);
    for (auto& r : manifest.records) {
        const fs::path file = images / (r.id + ".ppm");
        data::write_pnm(file, *r.image);
        r.image_path = file.string();
        r.image.reset();
    }
    const fs::path path = spec.out / "manifest.jsonl";
    data::save_manifest(manifest, path);
    write_resolved(spec.out, config);
    const auto hash = data::manifest_content_hash(data::load_manifest(path));
    log << fmt::format("wrote {} records to {} (content sha256 {})\n", manifest.records.size(), path.string(), hash);
    return path;
}

fs::path cmd_caption(const RunSpec& spec, const fs::path& manifest_path, std::ostream& log) {
    const json config = resolve_run_config(spec);
    const auto settings = captioner_settings(config);
    const auto rules = curation_rules(config);
    auto manifest = data::load_manifest(manifest_path);

    auto captioned = data::caption_records(settings.endpoint, std::move(manifest.records), settings.prompt,
                                           settings.fallback, settings.max_concurrency);
    auto curated = data::curate_captions(std::move(captioned.records), rules);
    manifest.records = std::move(curated.records);
    manifest.provenance += fmt::format("; captioned via {} ({} fetched, {} template fallbacks)",
                                       settings.endpoint.base_url, captioned.fetched, captioned.fallback);

    ensure_directory(spec.out);
    const fs::path path = spec.out / "manifest.jsonl";
    data::save_manifest(manifest, path);
    data::write_curation_report(curated.report, spec.out / "curation_report.json");
    write_resolved(spec.out, config);
    log << fmt::format("captioned {} records ({} fetched, {} fallback); curation kept {}, replaced {}\n",
                       curated.report.total, captioned.fetched, captioned.fallback, curated.report.kept,
                       curated.report.replaced);
    return path;
}

trainer::TrainResult cmd_train(const RunSpec& spec, const fs::path& manifest, std::ostream& log) {
    return train_run(resolve_run_config(spec), manifest, spec.out, log);
}

EvalOutput cmd_eval(const RunSpec& spec, const fs::path& checkpoint, const fs::path& manifest_path,
                    std::ostream& log) {
    const json config = resolve_run_config(spec);
    const auto settings = eval_settings(config);
    const auto manifest = data::load_manifest(manifest_path);
    EvalOutput out;
    const auto run = eval_run(config, checkpoint, manifest);
    out.metrics = run.metrics;

    eval::Report report{eval::Layout::table1, {settings.method},
                        {{manifest.name, manifest.num_classes(), {eval::to_cell(out.metrics)}}}};
    out.report = spec.out / eval::report_filename(eval::Layout::table1, manifest.name, config_hash(config), run.seed);
    eval::emit_report(report, out.report);
    write_json(spec.out / fmt::format("metrics_{}.json", data::to_string(settings.split)), json(out.metrics));
    write_resolved(spec.out, config);
    log << fmt::format("{} {}: top1 {:.2f} macro-F1 {:.2f} AUC {}\n", manifest.name, data::to_string(settings.split),
                       out.metrics.top1, out.metrics.macro_f1,
                       out.metrics.auc ? fmt::format("{:.2f}", *out.metrics.auc) : std::string(eval::kMissingCell));
    return out;
}

CrossEvalOutput cmd_crosseval(const RunSpec& spec, const fs::path& checkpoint,
                              const std::map<std::string, fs::path>& targets, std::ostream& log) {
    const json config = resolve_run_config(spec);
    auto xspec = crosseval_spec(config);
    if (xspec.targets.empty()) {
        for (const auto& [name, _] : targets) xspec.targets.push_back(name);
    }
    if (xspec.source.empty()) xspec.source = "source";
    std::map<std::string, data::DatasetManifest> manifests;
    for (const auto& name : xspec.targets) {
        auto it = targets.find(name);
        if (it == targets.end()) throw ConfigError(fmt::format("no manifest given for target '{}'", name));
        manifests.emplace(name, data::load_manifest(it->second));
    }
    const auto loaded = trainer::load_checkpoint(checkpoint);

    CrossEvalOutput out;
    out.result = eval::cross_eval(loaded.state, xspec, manifests);
    const auto settings = eval_settings(config);
    eval::MethodCell cell;
    cell.target = fmt::format("avg({})", fmt::join(xspec.targets, ", "));
    cell.accuracy = out.result.average_top1;
    eval::Report report{eval::Layout::table2, {settings.method}, {{xspec.source, 0, {cell}}}};
    out.report = spec.out / eval::report_filename(eval::Layout::table2, xspec.source, config_hash(config),
                                                  loaded.config.seed);
    eval::emit_report(report, out.report);
    write_json(spec.out / "crosseval.json",
               json{{"source", xspec.source},
                    {"average_top1", out.result.average_top1},
                    {"per_target", out.result.per_target}});
    write_resolved(spec.out, config);
    for (const auto& [name, acc] : out.result.per_target) log << fmt::format("{}: top1 {:.2f}\n", name, acc);
    log << fmt::format("average top1 {:.2f}\n", out.result.average_top1);
    return out;
}

AblationAxis parse_axis(const std::string& name) {
    if (name == "shots") return AblationAxis::shots;
    if (name == "tokens") return AblationAxis::tokens;
    if (name == "depth") return AblationAxis::depth;
    if (name == "backbone_width") return AblationAxis::backbone_width;
    if (name == "losses") return AblationAxis::losses;
    throw ConfigError(fmt::format("unknown ablation axis '{}' (shots, tokens, depth, backbone_width, losses)", name));
}

std::string to_string(AblationAxis axis) {
    switch (axis) {
        case AblationAxis::shots: return "shots";
        case AblationAxis::tokens: return "tokens";
        case AblationAxis::depth: return "depth";
        case AblationAxis::backbone_width: return "backbone_width";
        case AblationAxis::losses: return "losses";
    }
    return "?";
}

std::vector<AblationPoint> ablation_points(const json& base, AblationAxis axis, const std::vector<int>& values) {
    std::vector<AblationPoint> points;
    if (axis == AblationAxis::losses) {
        const auto& w = base.at("train").at("weights");
        const double alpha = w.at("alpha_sp").get<double>() > 0 ? w.at("alpha_sp").get<double>() : 0.5;
        const double beta = w.at("beta").get<double>() > 0 ? w.at("beta").get<double>() : 0.5;
        for (auto [label, a, b] : {std::tuple{"ce", 0.0, 0.0}, {"ce+kl", alpha, 0.0}, {"ce+kl+hsic", alpha, beta}}) {
            json c = base;
            c["train"]["weights"]["alpha_sp"] = a;
            c["train"]["weights"]["beta"] = b;
            points.push_back({fmt::format("losses={}", label), std::move(c)});
        }
    } else {
        if (values.empty()) throw ConfigError(fmt::format("ablation axis '{}' needs at least one value", to_string(axis)));
        for (int v : values) {
            json c = base;
            switch (axis) {
                case AblationAxis::shots:
                    if (v < 1) throw ConfigError(fmt::format("shots value {} must be >= 1", v));
                    c["train"]["shots"] = v;
                    break;
                case AblationAxis::tokens:
                    if (v < 0) throw ConfigError(fmt::format("tokens value {} must be >= 0", v));
                    c["train"]["adaptation"]["prompt_width"] = v;
                    break;
                case AblationAxis::depth: {
                    const auto& bb = c.at("backbone");
                    const int layers = std::min(bb.at("vision_layers").get<int>(), bb.at("text_layers").get<int>());
                    if (v < 0 || v > layers) {
                        throw ConfigError(fmt::format("depth value {} must be in [0, {}]", v, layers));
                    }
                    c["train"]["adaptation"]["prompt_depth"] = v;
                    break;
                }
                case AblationAxis::backbone_width:
                    c["backbone"]["text_dim"] = v;
                    c["backbone"]["vision_dim"] = v;
                    c["backbone"]["joint_dim"] = v;
                    break;
                case AblationAxis::losses:
                    break;
            }
            points.push_back({fmt::format("{}={}", to_string(axis), v), std::move(c)});
        }
    }
    for (const auto& p : points) {
        try {
            train_config(p.config);
            backbone_config(p.config);
        } catch (const ConfigError& e) {
            throw ConfigError(fmt::format("ablation point {}: {}", p.label, e.what()));
        }
    }
    return points;
}

AblationOutput cmd_ablate(const RunSpec& spec, const fs::path& manifest_path, AblationAxis axis,
                          const std::vector<int>& values, std::ostream& log) {
    const json base = resolve_run_config(spec);
    std::vector<int> vals = values;
    if (vals.empty() && axis != AblationAxis::losses) vals = base.at("ablate").at("values").get<std::vector<int>>();
    const auto points = ablation_points(base, axis, vals);
    const auto manifest = data::load_manifest(manifest_path);
    write_resolved(spec.out, base);

    // One row per sweep point so rows line up with individual train + eval runs.
    eval::Report report{eval::Layout::table1, {eval_settings(base).method}, {}};
    for (const auto& p : points) {
        log << "== " << p.label << '\n';
        const fs::path dir = spec.out / p.label;
        const auto trained = train_run(p.config, manifest_path, dir, log);
        const auto metrics = eval_run(p.config, trained.checkpoint, manifest).metrics;
        write_json(dir / "metrics.json", json(metrics));
        report.rows.push_back({p.label, manifest.num_classes(), {eval::to_cell(metrics)}});
        log << fmt::format("{}: top1 {:.2f} macro-F1 {:.2f}\n", p.label, metrics.top1, metrics.macro_f1);
    }
    AblationOutput out{std::move(report), {}};
    out.report_path = spec.out / eval::report_filename(eval::Layout::table1,
                                                       fmt::format("{}_{}", manifest.name, to_string(axis)),
                                                       config_hash(base), run_seed(base));
    eval::emit_report(out.report, out.report_path);
    return out;
}

}  // namespace drift::cli
