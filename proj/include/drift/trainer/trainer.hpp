#pragma once

#include "drift/data/manifest.hpp"
#include "drift/losses/losses.hpp"
#include "drift/model/dual_encoder.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace drift::trainer {

enum class Optimizer { sgd };

struct TrainConfig {
    int shots = 16;
    int epochs = 10;
    int batch_size = 4;
    double learning_rate = 2.6e-6;
    Optimizer optimizer = Optimizer::sgd;
    double momentum = 0.0;
    bool cosine_decay = false;
    double max_grad_norm = 0.0;            // 0 disables clipping
    losses::LossWeights weights;
    losses::HsicConfig hsic;
    model::AdaptationConfig adaptation;    // LoRA rank/scale, J, m
    bool text_side_kl = false;
    std::uint64_t seed = 0;
    std::string output_dir = "runs/train";

    /// Throws ConfigError naming the offending field.
    void validate() const;
    bool operator==(const TrainConfig&) const = default;
};

struct TrainLogEntry {
    int step = 0;
    int epoch = 0;
    losses::LossBreakdown loss;   // batch-summed terms; the step uses total / batch
    double learning_rate = 0.0;
    double wall_time = 0.0;       // seconds since the run started
};

/// A dual encoder plus the class vocabulary its text rows are built from.
struct ModelState {
    std::shared_ptr<model::DualEncoder> encoder;
    std::vector<std::string> class_names;
    std::vector<std::string> class_captions;  // one designated caption per class, may be empty strings
    double tau = 0.07;                        // softmax temperature used at prediction time

    model::ClassTextEmbeddings class_embeddings() const;
};

/// The first train caption of each class in manifest order (empty if none).
std::vector<std::string> designated_captions(const data::DatasetManifest& manifest);

/// Layer-1 text prompts copy the raw embeddings of the first m words of
/// "a photo of a <class> <caption>" (the first class's text); every other
/// prompt is drawn from N(0, 0.02^2) using `seed`. Throws InitializationError
/// when the text has fewer than m words.
model::PromptBank init_prompts(const model::DualEncoder& encoder, std::span<const std::string> class_names,
                               std::span<const std::string> captions, std::uint64_t seed);

/// Fresh encoder for cfg with initialised prompts and the manifest's classes.
ModelState build_model_state(const TrainConfig& cfg, std::shared_ptr<const model::FrozenBackbone> backbone,
                             const data::DatasetManifest& manifest);

/// Index batches for every step: a fresh permutation per epoch drawn from
/// mt19937_64(seed); the last batch of an epoch may be short.
std::vector<std::vector<std::size_t>> batch_schedule(std::size_t n, int batch_size, int epochs,
                                                     std::uint64_t seed);

double learning_rate_at(const TrainConfig& cfg, int step, int total_steps);

/// Per-sample caption text used on the text side of the objective.
std::string sample_text(const data::ExampleRecord& record);

struct TrainResult {
    std::filesystem::path checkpoint;
    std::vector<TrainLogEntry> log;
};

/// Optimises the trainable set of `state` on the manifest's train split.
/// Writes <output_dir>/checkpoint.bin and <output_dir>/train_log.jsonl.
TrainResult train(const TrainConfig& cfg, const data::DatasetManifest& manifest, ModelState& state);

inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const ModelState& state, const TrainConfig& cfg, const std::filesystem::path& path);

struct LoadedCheckpoint {
    ModelState state;
    TrainConfig config;
};

/// Rebuilds the backbone from the stored config.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);
/// Uses the supplied backbone; tensor shapes must match (DimensionError) and
/// the backbone hash must match (CompatibilityError).
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path,
                                 std::shared_ptr<const model::FrozenBackbone> backbone);

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);
void to_json(nlohmann::json& j, const TrainLogEntry& e);
void from_json(const nlohmann::json& j, TrainLogEntry& e);

std::vector<TrainLogEntry> read_train_log(const std::filesystem::path& path);

}  // namespace drift::trainer
