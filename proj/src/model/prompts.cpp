#include "drift/model/prompts.hpp"

#include "drift/errors.hpp"

#include <fmt/format.h>

namespace drift::model {

PromptBank::PromptBank(int depth, int width, int vision_dim, int text_dim, std::mt19937_64& rng,
                       double stddev)
    : depth_(depth), width_(width), vision_dim_(vision_dim), text_dim_(text_dim) {
    if (depth < 0 || width < 1) {
        throw ConfigError(fmt::format("invalid prompt bank J={} m={}", depth, width));
    }
    std::normal_distribution<double> normal(0.0, stddev);
    auto draw = [&](int d) {
        Eigen::MatrixXd t(width, d);
        for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = normal(rng);
        return ag::Var::parameter(std::move(t));
    };
    for (int j = 0; j < depth; ++j) vision_.push_back(draw(vision_dim));
    for (int j = 0; j < depth; ++j) text_.push_back(draw(text_dim));
}

const ag::Var& PromptBank::tokens(Modality m, int layer) const {
    if (layer < 1 || layer > depth_) {
        throw LookupError(fmt::format("prompt layer {} outside 1..{}", layer, depth_));
    }
    return m == Modality::vision ? vision_[layer - 1] : text_[layer - 1];
}

ag::Var& PromptBank::tokens(Modality m, int layer) {
    return const_cast<ag::Var&>(static_cast<const PromptBank&>(*this).tokens(m, layer));
}

std::vector<ag::Var> PromptBank::parameters() const {
    std::vector<ag::Var> out(vision_.begin(), vision_.end());
    out.insert(out.end(), text_.begin(), text_.end());
    return out;
}

ag::Var inject_prompts(const ag::Var& layer_tokens, const PromptBank& bank, Modality modality,
                       int layer, int total_layers) {
    if (layer < 1 || layer > total_layers) {
        throw ConfigError(fmt::format("layer {} outside 1..{}", layer, total_layers));
    }
    if (layer > bank.depth()) return layer_tokens;

    const ag::Var& fresh = bank.tokens(modality, layer);
    const int m = bank.width();
    if (fresh.cols() != layer_tokens.cols()) {
        throw ConfigError(fmt::format("{} prompt width {} does not match token width {}",
                                      to_string(modality), fresh.cols(), layer_tokens.cols()));
    }
    const Eigen::Index carried = layer == 1 ? 0 : m;
    if (layer_tokens.rows() < 1 + carried) {
        throw ConfigError(fmt::format("layer {} input has {} tokens; expected at least {} reserved slots",
                                      layer, layer_tokens.rows(), 1 + carried));
    }
    const Eigen::Index rest = layer_tokens.rows() - 1 - carried;
    std::vector<ag::Var> parts{ag::slice_rows(layer_tokens, 0, 1), fresh};
    if (rest > 0) parts.push_back(ag::slice_rows(layer_tokens, 1 + carried, rest));
    return ag::concat_rows(parts);
}

}  // namespace drift::model
