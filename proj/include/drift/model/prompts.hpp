#pragma once

#include "drift/ag/tensor.hpp"
#include "drift/model/config.hpp"

#include <random>
#include <vector>

namespace drift::model {

/// Learnable deep prompts: for each modality and each of the first J layers,
/// m token vectors of that tower's width.
class PromptBank {
public:
    PromptBank() = default;

    /// All tokens drawn from N(0, stddev^2).
    PromptBank(int depth, int width, int vision_dim, int text_dim, std::mt19937_64& rng,
               double stddev = 0.02);

    int depth() const { return depth_; }
    int width() const { return width_; }
    int token_dim(Modality m) const { return m == Modality::vision ? vision_dim_ : text_dim_; }

    /// m x d tokens for 1-based layer j (1 <= j <= J).
    const ag::Var& tokens(Modality m, int layer) const;
    ag::Var& tokens(Modality m, int layer);

    std::vector<ag::Var> parameters() const;

private:
    int depth_ = 0;
    int width_ = 0;
    int vision_dim_ = 0;
    int text_dim_ = 0;
    std::vector<ag::Var> vision_;
    std::vector<ag::Var> text_;
};

/// Deep prompt insertion before transformer layer `layer` (1-based).
///
/// Reserved prompt positions are 1..m, right after the leading class/BOS token.
/// Layer 1 inserts m fresh tokens; layers 2..J replace the m tokens carried over
/// from the previous layer; layers beyond J pass the sequence through.
ag::Var inject_prompts(const ag::Var& layer_tokens, const PromptBank& bank, Modality modality,
                       int layer, int total_layers);

}  // namespace drift::model
