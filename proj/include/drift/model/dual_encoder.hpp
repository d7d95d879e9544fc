#pragma once

#include "drift/ag/tensor.hpp"
#include "drift/image.hpp"
#include "drift/model/backbone.hpp"
#include "drift/model/config.hpp"
#include "drift/model/heads.hpp"
#include "drift/model/lora.hpp"
#include "drift/model/prompts.hpp"

#include <Eigen/Dense>

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace drift::model {

struct NamedParameter {
    std::string name;
    ag::Var var;
};

/// Per-class text rows for both branches; rows are unit norm.
struct ClassTextEmbeddings {
    std::vector<std::string> class_names;
    Eigen::MatrixXd invariant;  // C x joint_dim
    Eigen::MatrixXd spurious;   // C x joint_dim

    /// Throws LookupError listing the known classes.
    std::size_t index_of(std::string_view name) const;
    Eigen::RowVectorXd invariant_row(std::string_view name) const;
    Eigen::RowVectorXd spurious_row(std::string_view name) const;
};

/// Differentiable variant of ClassTextEmbeddings.
struct ClassTextRows {
    ag::Var invariant;
    ag::Var spurious;
};

/// Frozen backbone plus the trainable set: LoRA on Q/K of every layer of both
/// towers, deep prompts for both towers, and the four decoupling heads.
///
/// Inference methods are const and build no gradient graph, so they may run
/// concurrently while parameters are not being updated.
class DualEncoder {
public:
    DualEncoder(std::shared_ptr<const FrozenBackbone> backbone, AdaptationConfig adaptation,
                std::uint64_t seed);

    const FrozenBackbone& backbone() const { return *backbone_; }
    std::shared_ptr<const FrozenBackbone> backbone_ptr() const { return backbone_; }
    const BackboneConfig& backbone_config() const { return backbone_->config(); }
    const AdaptationConfig& adaptation() const { return adaptation_; }

    PromptBank& prompts() { return prompts_; }
    const PromptBank& prompts() const { return prompts_; }
    ProjectionHeads& heads() { return heads_; }
    const ProjectionHeads& heads() const { return heads_; }
    LoraAdapter& lora(Modality m, int layer, Projection p);
    const LoraAdapter& lora(Modality m, int layer, Projection p) const;

    /// Every trainable tensor, in a stable order with unique names.
    std::vector<NamedParameter> trainable_parameters() const;
    void zero_grad() const;

    // Differentiable batch encoders; rows are joint_dim embeddings.
    ag::Var encode_images(std::span<const Image> images) const;
    ag::Var encode_texts(std::span<const std::string> texts) const;
    ag::Var encode_token_sequences(std::span<const std::vector<int>> word_ids) const;

    Eigen::VectorXd encode_image(const Image& image) const;
    /// `word_ids` excludes BOS/EOS, which the encoder adds. Throws
    /// ContextLengthError when the sequence plus prompts exceeds the limit.
    Eigen::VectorXd encode_text(std::span<const int> word_ids) const;
    Eigen::VectorXd encode_text(std::string_view text) const;

    /// For each class, encodes "a photo of a <class>" followed by its caption
    /// (when supplied) and decouples it. Requires at least two classes.
    ClassTextRows class_text_rows(std::span<const std::string> class_names,
                                  std::span<const std::string> captions = {}) const;
    ClassTextEmbeddings class_text_embeddings(std::span<const std::string> class_names,
                                              std::span<const std::string> captions = {}) const;

    /// Copies all trainable values from another model with identical shapes.
    void copy_parameters_from(const DualEncoder& other);

private:
    ag::Var run_tower(Modality m, ag::Var tokens, bool causal) const;

    std::shared_ptr<const FrozenBackbone> backbone_;
    AdaptationConfig adaptation_;
    std::vector<LoraAdapter> vision_lora_;  // [layer * 2 + {q, k}]
    std::vector<LoraAdapter> text_lora_;
    PromptBank prompts_;
    ProjectionHeads heads_;
};

}  // namespace drift::model
