#pragma once

#include "drift/ag/tensor.hpp"
#include "drift/image.hpp"
#include "drift/model/config.hpp"
#include "drift/model/tokenizer.hpp"

#include <span>
#include <string>
#include <utility>
#include <vector>

namespace drift::model {

struct LayerWeights {
    ag::Var ln1_gamma, ln1_beta;
    ag::Var wq, bq, wk, bk, wv, bv, wo, bo;
    ag::Var ln2_gamma, ln2_beta;
    ag::Var w1, b1, w2, b2;
};

struct TowerWeights {
    std::vector<LayerWeights> layers;
    ag::Var positional;        // max_len x d
    ag::Var ln_final_gamma, ln_final_beta;
    ag::Var projection;        // joint_dim x d
};

/// Randomly initialised, frozen dual-encoder weights. Every tensor is a graph
/// constant: no gradient is ever allocated for it.
class FrozenBackbone {
public:
    explicit FrozenBackbone(BackboneConfig cfg);

    const BackboneConfig& config() const { return cfg_; }
    const Tokenizer& tokenizer() const { return tokenizer_; }
    const TowerWeights& tower(Modality m) const { return m == Modality::vision ? vision_ : text_; }
    int width(Modality m) const { return m == Modality::vision ? cfg_.vision_dim : cfg_.text_dim; }
    int layers(Modality m) const {
        return m == Modality::vision ? cfg_.vision_layers : cfg_.text_layers;
    }

    /// Patch tokens with a leading class token and positional embeddings, (1 + P) x d_v.
    ag::Var embed_image(const Image& image) const;
    /// Token embeddings plus positions for a full id sequence (BOS ... EOS), L x d_l.
    ag::Var embed_tokens(std::span<const int> ids) const;
    /// Raw (position-free) embedding vector of one vocabulary id.
    Eigen::RowVectorXd token_embedding(int id) const;

    std::vector<std::pair<std::string, ag::Var>> named_weights() const;

    /// SHA-256 over the config and every frozen tensor.
    const std::string& content_hash() const { return hash_; }

private:
    BackboneConfig cfg_;
    Tokenizer tokenizer_;
    TowerWeights vision_;
    TowerWeights text_;
    ag::Var patch_embedding_;  // d_v x (C * p * p)
    ag::Var class_token_;      // 1 x d_v
    ag::Var token_embedding_;  // vocab x d_l
    std::string hash_;
};

}  // namespace drift::model
