#include "drift/model/config.hpp"

#include "drift/errors.hpp"

#include <fmt/format.h>

#include <cmath>

namespace drift::model {

std::string to_string(Modality m) { return m == Modality::vision ? "vision" : "text"; }

int BackboneConfig::patches_per_side() const {
    return static_cast<int>(std::lround(std::sqrt(static_cast<double>(patch_or_token_count))));
}

int BackboneConfig::patch_size() const { return image_size / patches_per_side(); }

void BackboneConfig::validate() const {
    auto positive = [](const char* name, int v) {
        if (v < 1) throw ConfigError(fmt::format("backbone.{} must be >= 1 (got {})", name, v));
    };
    positive("text_dim", text_dim);
    positive("vision_dim", vision_dim);
    positive("joint_dim", joint_dim);
    positive("vision_layers", vision_layers);
    positive("text_layers", text_layers);
    positive("patch_or_token_count", patch_or_token_count);
    positive("image_channels", image_channels);
    positive("image_size", image_size);
    positive("heads", heads);
    positive("mlp_ratio", mlp_ratio);
    positive("context_length", context_length);
    if (vocab_size < 4) throw ConfigError("backbone.vocab_size must be >= 4");
    const int side = patches_per_side();
    if (side * side != patch_or_token_count) {
        throw ConfigError(fmt::format("backbone.patch_or_token_count {} is not a perfect square",
                                      patch_or_token_count));
    }
    if (image_size % side != 0) {
        throw ConfigError(fmt::format("backbone.image_size {} is not divisible by {} patches per side",
                                      image_size, side));
    }
    if (vision_dim % heads != 0 || text_dim % heads != 0) {
        throw ConfigError(fmt::format("backbone.heads {} must divide vision_dim and text_dim", heads));
    }
}

void AdaptationConfig::validate() const {
    if (lora_rank < 1) throw ConfigError("lora_rank must be >= 1");
    if (prompt_depth < 0) throw ConfigError("prompt_depth (J) must be >= 0");
    if (prompt_width < 1) throw ConfigError("prompt_width (m) must be >= 1");
    if (!std::isfinite(lora_scale)) throw ConfigError("lora_scale must be finite");
}

void to_json(nlohmann::json& j, const BackboneConfig& c) {
    j = nlohmann::json{{"text_dim", c.text_dim},
                       {"vision_dim", c.vision_dim},
                       {"joint_dim", c.joint_dim},
                       {"vision_layers", c.vision_layers},
                       {"text_layers", c.text_layers},
                       {"patch_or_token_count", c.patch_or_token_count},
                       {"seed", c.seed},
                       {"image_channels", c.image_channels},
                       {"image_size", c.image_size},
                       {"heads", c.heads},
                       {"mlp_ratio", c.mlp_ratio},
                       {"vocab_size", c.vocab_size},
                       {"context_length", c.context_length}};
}

void from_json(const nlohmann::json& j, BackboneConfig& c) {
    c.text_dim = j.at("text_dim").get<int>();
    c.vision_dim = j.at("vision_dim").get<int>();
    c.joint_dim = j.at("joint_dim").get<int>();
    c.vision_layers = j.at("vision_layers").get<int>();
    c.text_layers = j.at("text_layers").get<int>();
    c.patch_or_token_count = j.at("patch_or_token_count").get<int>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.image_channels = j.at("image_channels").get<int>();
    c.image_size = j.at("image_size").get<int>();
    c.heads = j.at("heads").get<int>();
    c.mlp_ratio = j.at("mlp_ratio").get<int>();
    c.vocab_size = j.at("vocab_size").get<int>();
    c.context_length = j.at("context_length").get<int>();
}

void to_json(nlohmann::json& j, const AdaptationConfig& c) {
    j = nlohmann::json{{"lora_rank", c.lora_rank},
                       {"lora_scale", c.lora_scale},
                       {"prompt_depth", c.prompt_depth},
                       {"prompt_width", c.prompt_width}};
}

void from_json(const nlohmann::json& j, AdaptationConfig& c) {
    c.lora_rank = j.at("lora_rank").get<int>();
    c.lora_scale = j.at("lora_scale").get<double>();
    c.prompt_depth = j.at("prompt_depth").get<int>();
    c.prompt_width = j.at("prompt_width").get<int>();
}

}  // namespace drift::model
