#include "drift/cli/commands.hpp"
#include "drift/errors.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <iostream>

namespace drift::cli {

int run_main(int argc, char** argv) {
    CLI::App app{"Few-shot decoupled fine-tuning of a dual encoder: data, training, evaluation and ablations."};
    app.require_subcommand(1);

    RunSpec spec;
    std::string config_path;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON config (nested sections or flat dotted keys)");
        sub->add_option("--set", spec.overrides, "Override a config value: dotted.key=value (repeatable)")
            ->allow_extra_args(false);
        sub->add_option("--seed", spec.seed, "Seed for synthesis, sampling and training");
        sub->add_option("--out", spec.out, "Output directory")->capture_default_str();
        sub->add_option("--device", spec.device, "Compute device")->capture_default_str();
        sub->add_flag("--fallback-captions", spec.fallback_captions,
                      "Use template captions when the captioner is unreachable");
    };

    auto* synth = app.add_subcommand("synth", "Generate the synthetic spurious-correlation benchmark");
    add_common(synth);

    std::string manifest;
    auto* caption = app.add_subcommand("caption", "Caption and curate a manifest");
    add_common(caption);
    caption->add_option("--manifest", manifest, "Input manifest")->required();

    auto* train = app.add_subcommand("train", "Few-shot training");
    add_common(train);
    train->add_option("--manifest", manifest, "Dataset manifest")->required();

    std::string checkpoint;
    auto* evaluate = app.add_subcommand("eval", "Evaluate a checkpoint on one split");
    add_common(evaluate);
    evaluate->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
    evaluate->add_option("--manifest", manifest, "Dataset manifest")->required();

    std::vector<std::string> target_args;
    auto* crosseval = app.add_subcommand("crosseval", "Cross-dataset Top-1 averaged over targets");
    add_common(crosseval);
    crosseval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
    crosseval->add_option("--target", target_args, "Target as name=manifest_path (repeatable)")->required();

    std::string axis;
    std::vector<int> values;
    auto* ablate = app.add_subcommand("ablate", "Sweep one axis with train + eval per value");
    add_common(ablate);
    ablate->add_option("--manifest", manifest, "Dataset manifest")->required();
    ablate->add_option("--axis", axis, "shots | tokens | depth | backbone_width | losses")->required();
    ablate->add_option("--values", values, "Axis values (comma separated)")->delimiter(',');

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }
    if (!config_path.empty()) spec.config_path = config_path;

    try {
        auto* sub = app.get_subcommands().front();
        spec.subcommand = sub->get_name();
        if (sub == synth) {
            cmd_synth(spec, std::cout);
        } else if (sub == caption) {
            cmd_caption(spec, manifest, std::cout);
        } else if (sub == train) {
            cmd_train(spec, manifest, std::cout);
        } else if (sub == evaluate) {
            cmd_eval(spec, checkpoint, manifest, std::cout);
        } else if (sub == crosseval) {
            std::map<std::string, std::filesystem::path> targets;
            for (const auto& t : target_args) {
                const auto eq = t.find('=');
                if (eq == std::string::npos || eq == 0) {
                    throw ConfigError(fmt::format("--target '{}' is not of the form name=path", t));
                }
                targets[t.substr(0, eq)] = t.substr(eq + 1);
            }
            cmd_crosseval(spec, checkpoint, targets, std::cout);
        } else if (sub == ablate) {
            cmd_ablate(spec, manifest, parse_axis(axis), values, std::cout);
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}

}  // namespace drift::cli
