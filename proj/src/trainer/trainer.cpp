#include "drift/trainer/trainer.hpp"

#include "drift/errors.hpp"
#include "drift/fs.hpp"
#include "drift/model/heads.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>

namespace drift::trainer {

void TrainConfig::validate() const {
    if (shots < 1) throw ConfigError(fmt::format("shots must be >= 1 (got {})", shots));
    if (epochs < 0) throw ConfigError(fmt::format("epochs must be >= 0 (got {})", epochs));
    if (batch_size < 1) throw ConfigError(fmt::format("batch_size must be >= 1 (got {})", batch_size));
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
        throw ConfigError(fmt::format("learning_rate must be finite and >= 0 (got {})", learning_rate));
    }
    if (!(momentum >= 0.0 && momentum < 1.0)) {
        throw ConfigError(fmt::format("momentum must be in [0, 1) (got {})", momentum));
    }
    if (!(max_grad_norm >= 0.0)) throw ConfigError("max_grad_norm must be >= 0");
    weights.validate();
    hsic.validate();
    adaptation.validate();
}

model::ClassTextEmbeddings ModelState::class_embeddings() const {
    return encoder->class_text_embeddings(class_names, class_captions);
}

std::vector<std::string> designated_captions(const data::DatasetManifest& manifest) {
    std::vector<std::string> captions(manifest.class_names.size());
    std::vector<bool> seen(manifest.class_names.size(), false);
    for (const auto* r : manifest.split(data::Split::train)) {
        auto c = static_cast<std::size_t>(r->label);
        if (seen[c]) continue;
        seen[c] = true;
        captions[c] = r->caption.empty() ? data::template_caption(r->class_name) : r->caption;
    }
    return captions;
}

model::PromptBank init_prompts(const model::DualEncoder& encoder, std::span<const std::string> class_names,
                               std::span<const std::string> captions, std::uint64_t seed) {
    const auto& adapt = encoder.adaptation();
    const auto& bb = encoder.backbone();
    std::mt19937_64 rng(seed);
    model::PromptBank bank(adapt.prompt_depth, adapt.prompt_width, bb.width(model::Modality::vision),
                           bb.width(model::Modality::text), rng, 0.02);
    if (adapt.prompt_depth == 0 || adapt.prompt_width == 0) return bank;
    if (class_names.empty()) throw InitializationError("init_prompts needs at least one class name");

    const std::string text =
        model::class_prompt_text(class_names[0], captions.empty() ? std::string_view{} : captions[0]);
    const auto ids = bb.tokenizer().encode_words(text);
    const int m = adapt.prompt_width;
    if (static_cast<int>(ids.size()) < m) {
        throw InitializationError(
            fmt::format("prompt template '{}' has {} tokens, fewer than m = {}", text, ids.size(), m));
    }
    auto& first = bank.tokens(model::Modality::text, 1).mutable_value();
    for (int i = 0; i < m; ++i) first.row(i) = bb.token_embedding(ids[static_cast<std::size_t>(i)]);
    return bank;
}

ModelState build_model_state(const TrainConfig& cfg, std::shared_ptr<const model::FrozenBackbone> backbone,
                             const data::DatasetManifest& manifest) {
    cfg.validate();
    ModelState state;
    state.encoder = std::make_shared<model::DualEncoder>(std::move(backbone), cfg.adaptation, cfg.seed);
    state.class_names = manifest.class_names;
    state.class_captions = designated_captions(manifest);
    state.tau = cfg.weights.tau;
    state.encoder->prompts() = init_prompts(*state.encoder, state.class_names, state.class_captions, cfg.seed);
    return state;
}

std::vector<std::vector<std::size_t>> batch_schedule(std::size_t n, int batch_size, int epochs,
                                                     std::uint64_t seed) {
    std::mt19937_64 rng(seed ^ 0x5eed5eed5eed5eedULL);
    std::vector<std::vector<std::size_t>> batches;
    std::vector<std::size_t> order(n);
    const auto b = static_cast<std::size_t>(batch_size);
    for (int e = 0; e < epochs; ++e) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t start = 0; start < n; start += b) {
            batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                                 order.begin() + static_cast<std::ptrdiff_t>(std::min(n, start + b)));
        }
    }
    return batches;
}

double learning_rate_at(const TrainConfig& cfg, int step, int total_steps) {
    if (!cfg.cosine_decay || total_steps <= 1) return cfg.learning_rate;
    const double t = static_cast<double>(step) / static_cast<double>(total_steps - 1);
    return cfg.learning_rate * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

std::string sample_text(const data::ExampleRecord& record) {
    const std::string caption = record.caption.empty() ? data::template_caption(record.class_name) : record.caption;
    return model::class_prompt_text(record.class_name, caption);
}

namespace {

void write_log(const std::vector<TrainLogEntry>& log, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError(fmt::format("cannot write training log {}", path.string()));
    for (const auto& e : log) out << nlohmann::json(e).dump() << '\n';
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const data::DatasetManifest& manifest, ModelState& state) {
    cfg.validate();
    const auto train_split = manifest.split(data::Split::train);
    if (train_split.empty()) throw ConfigError(fmt::format("manifest '{}' has an empty train split", manifest.name));
    if (state.class_names != manifest.class_names) {
        throw CompatibilityError("model classes differ from the manifest's classes");
    }

    std::vector<Image> images;
    std::vector<std::string> texts;
    std::vector<int> labels;
    for (const auto* r : train_split) {
        images.push_back(data::load_record_image(*r));
        texts.push_back(sample_text(*r));
        labels.push_back(r->label);
    }

    const auto schedule = batch_schedule(train_split.size(), cfg.batch_size, cfg.epochs, cfg.seed);
    const int steps_per_epoch = static_cast<int>((train_split.size() + std::size_t(cfg.batch_size) - 1) /
                                                 std::size_t(cfg.batch_size));
    const int total_steps = static_cast<int>(schedule.size());
    auto& enc = *state.encoder;
    const auto params = enc.trainable_parameters();
    std::vector<ag::Matrix> velocity;
    for (const auto& p : params) velocity.push_back(ag::Matrix::Zero(p.var.rows(), p.var.cols()));

    std::vector<TrainLogEntry> log;
    const auto start = std::chrono::steady_clock::now();
    for (int step = 0; step < total_steps; ++step) {
        const auto& idx = schedule[static_cast<std::size_t>(step)];
        std::vector<Image> batch_images;
        std::vector<std::string> batch_texts;
        std::vector<int> batch_labels;
        for (auto i : idx) {
            batch_images.push_back(images[i]);
            batch_texts.push_back(texts[i]);
            batch_labels.push_back(labels[i]);
        }

        enc.zero_grad();
        auto [vi, vs] = model::decouple_rows(enc.encode_images(batch_images), enc.heads(), model::Modality::vision);
        auto [ti, ts] = model::decouple_rows(enc.encode_texts(batch_texts), enc.heads(), model::Modality::text);
        const auto rows = enc.class_text_rows(state.class_names, state.class_captions);
        losses::TotalLossInputs in{{vi, vs}, {ti, ts}, rows.invariant, rows.spurious, batch_labels, cfg.text_side_kl};
        const auto terms = losses::total_loss(in, cfg.weights, cfg.hsic);
        const auto breakdown = terms.breakdown();
        if (!std::isfinite(breakdown.total)) {
            throw NonFiniteLossError(fmt::format("non-finite loss at step {}: {}", step,
                                                 nlohmann::json(breakdown).dump()));
        }

        const double lr = learning_rate_at(cfg, step, total_steps);
        ag::scale(terms.total, 1.0 / static_cast<double>(idx.size())).backward();

        double clip = 1.0;
        if (cfg.max_grad_norm > 0.0) {
            double sq = 0.0;
            for (const auto& p : params) {
                if (p.var.has_grad()) sq += p.var.grad().squaredNorm();
            }
            const double norm = std::sqrt(sq);
            if (norm > cfg.max_grad_norm) clip = cfg.max_grad_norm / norm;
        }
        for (std::size_t k = 0; k < params.size(); ++k) {
            auto var = params[k].var;
            if (!var.has_grad()) continue;
            velocity[k] = cfg.momentum * velocity[k] + clip * var.grad();
            var.mutable_value() -= lr * velocity[k];
        }

        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        log.push_back({step, step / steps_per_epoch, breakdown, lr, wall});
    }
    enc.zero_grad();

    const std::filesystem::path dir(cfg.output_dir);
    ensure_directory(dir);
    TrainResult result{dir / "checkpoint.bin", std::move(log)};
    save_checkpoint(state, cfg, result.checkpoint);
    write_log(result.log, dir / "train_log.jsonl");
    return result;
}

std::vector<TrainLogEntry> read_train_log(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError(fmt::format("cannot read training log {}", path.string()));
    std::vector<TrainLogEntry> log;
    int line_no = 0;
    for (std::string line; std::getline(in, line);) {
        ++line_no;
        if (line.empty()) continue;
        try {
            log.push_back(nlohmann::json::parse(line).get<TrainLogEntry>());
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(fmt::format("{}:{}: {}", path.string(), line_no, e.what()));
        }
    }
    return log;
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
    j = nlohmann::json{{"shots", c.shots},
                       {"epochs", c.epochs},
                       {"batch_size", c.batch_size},
                       {"learning_rate", c.learning_rate},
                       {"optimizer", "sgd"},
                       {"momentum", c.momentum},
                       {"cosine_decay", c.cosine_decay},
                       {"max_grad_norm", c.max_grad_norm},
                       {"weights", c.weights},
                       {"hsic", c.hsic},
                       {"adaptation", c.adaptation},
                       {"text_side_kl", c.text_side_kl},
                       {"seed", c.seed},
                       {"output_dir", c.output_dir}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
    c.shots = j.at("shots").get<int>();
    c.epochs = j.at("epochs").get<int>();
    c.batch_size = j.at("batch_size").get<int>();
    c.learning_rate = j.at("learning_rate").get<double>();
    const auto opt = j.at("optimizer").get<std::string>();
    if (opt != "sgd") throw ConfigError(fmt::format("optimizer must be 'sgd' (got '{}')", opt));
    c.optimizer = Optimizer::sgd;
    c.momentum = j.at("momentum").get<double>();
    c.cosine_decay = j.at("cosine_decay").get<bool>();
    c.max_grad_norm = j.at("max_grad_norm").get<double>();
    c.weights = j.at("weights").get<losses::LossWeights>();
    c.hsic = j.at("hsic").get<losses::HsicConfig>();
    c.adaptation = j.at("adaptation").get<model::AdaptationConfig>();
    c.text_side_kl = j.at("text_side_kl").get<bool>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.output_dir = j.at("output_dir").get<std::string>();
}

void to_json(nlohmann::json& j, const TrainLogEntry& e) {
    j = nlohmann::json{{"step", e.step},
                       {"epoch", e.epoch},
                       {"ce", e.loss.ce},
                       {"kl", e.loss.kl},
                       {"hsic_v", e.loss.hsic_v},
                       {"hsic_t", e.loss.hsic_t},
                       {"total", e.loss.total},
                       {"learning_rate", e.learning_rate},
                       {"wall_time", e.wall_time}};
}

void from_json(const nlohmann::json& j, TrainLogEntry& e) {
    e.step = j.at("step").get<int>();
    e.epoch = j.at("epoch").get<int>();
    e.loss.ce = j.at("ce").get<double>();
    e.loss.kl = j.at("kl").get<double>();
    e.loss.hsic_v = j.at("hsic_v").get<double>();
    e.loss.hsic_t = j.at("hsic_t").get<double>();
    e.loss.total = j.at("total").get<double>();
    e.learning_rate = j.at("learning_rate").get<double>();
    e.wall_time = j.at("wall_time").get<double>();
}

}  // namespace drift::trainer
