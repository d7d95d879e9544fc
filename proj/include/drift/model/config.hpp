#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <string>

namespace drift::model {

enum class Modality { vision, text };

std::string to_string(Modality m);

/// Shape and initialisation of the frozen dual-encoder backbone.
///
/// A config (including its seed) fully determines every frozen weight, so two
/// backbones built from equal configs produce identical outputs.
struct BackboneConfig {
    int text_dim = 64;                 // d_l
    int vision_dim = 64;               // d_v
    int joint_dim = 64;                // d_vl
    int vision_layers = 4;
    int text_layers = 4;
    int patch_or_token_count = 16;     // image patches per image (perfect square)
    std::uint64_t seed = 0;

    int image_channels = 3;
    int image_size = 16;
    int heads = 4;
    int mlp_ratio = 2;
    int vocab_size = 4096;
    int context_length = 48;

    int patch_size() const;
    int patches_per_side() const;

    /// Throws ConfigError naming the first invalid field.
    void validate() const;

    bool operator==(const BackboneConfig&) const = default;
};

/// Trainable-surface hyperparameters.
struct AdaptationConfig {
    int lora_rank = 4;
    double lora_scale = 1.0;
    int prompt_depth = 3;   // J
    int prompt_width = 2;   // m

    void validate() const;
    bool operator==(const AdaptationConfig&) const = default;
};

void to_json(nlohmann::json& j, const BackboneConfig& c);
void from_json(const nlohmann::json& j, BackboneConfig& c);
void to_json(nlohmann::json& j, const AdaptationConfig& c);
void from_json(const nlohmann::json& j, AdaptationConfig& c);

}  // namespace drift::model
