#include "drift/model/backbone.hpp"

#include "drift/errors.hpp"
#include "drift/hashing.hpp"

#include <fmt/format.h>

#include <cmath>
#include <random>

namespace drift::model {
namespace {

class Init {
public:
    explicit Init(std::uint64_t seed) : rng_(seed) {}

    ag::Var normal(Eigen::Index r, Eigen::Index c, double stddev) {
        std::normal_distribution<double> dist(0.0, stddev);
        Eigen::MatrixXd m(r, c);
        for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng_);
        return ag::Var::constant(std::move(m));
    }
    static ag::Var zeros(Eigen::Index r, Eigen::Index c) {
        return ag::Var::constant(Eigen::MatrixXd::Zero(r, c));
    }
    static ag::Var ones(Eigen::Index r, Eigen::Index c) {
        return ag::Var::constant(Eigen::MatrixXd::Ones(r, c));
    }

private:
    std::mt19937_64 rng_;
};

TowerWeights make_tower(Init& init, int d, int n_layers, int mlp_ratio, int max_len, int joint) {
    TowerWeights t;
    const double s = 1.0 / std::sqrt(static_cast<double>(d));
    const int hidden = d * mlp_ratio;
    for (int l = 0; l < n_layers; ++l) {
        LayerWeights w;
        w.ln1_gamma = Init::ones(1, d);
        w.ln1_beta = Init::zeros(1, d);
        w.wq = init.normal(d, d, s);
        w.bq = Init::zeros(1, d);
        w.wk = init.normal(d, d, s);
        w.bk = Init::zeros(1, d);
        w.wv = init.normal(d, d, s);
        w.bv = Init::zeros(1, d);
        w.wo = init.normal(d, d, s);
        w.bo = Init::zeros(1, d);
        w.ln2_gamma = Init::ones(1, d);
        w.ln2_beta = Init::zeros(1, d);
        w.w1 = init.normal(hidden, d, s);
        w.b1 = Init::zeros(1, hidden);
        w.w2 = init.normal(d, hidden, 1.0 / std::sqrt(static_cast<double>(hidden)));
        w.b2 = Init::zeros(1, d);
        t.layers.push_back(std::move(w));
    }
    t.positional = init.normal(max_len, d, 0.1);
    t.ln_final_gamma = Init::ones(1, d);
    t.ln_final_beta = Init::zeros(1, d);
    t.projection = init.normal(joint, d, s);
    return t;
}

void append_tower(std::vector<std::pair<std::string, ag::Var>>& out, const std::string& prefix,
                  const TowerWeights& t) {
    for (std::size_t l = 0; l < t.layers.size(); ++l) {
        const auto& w = t.layers[l];
        const auto p = fmt::format("{}.layer{}.", prefix, l + 1);
        const std::pair<const char*, const ag::Var*> items[] = {
            {"ln1_gamma", &w.ln1_gamma}, {"ln1_beta", &w.ln1_beta}, {"wq", &w.wq}, {"bq", &w.bq},
            {"wk", &w.wk},               {"bk", &w.bk},             {"wv", &w.wv}, {"bv", &w.bv},
            {"wo", &w.wo},               {"bo", &w.bo},             {"ln2_gamma", &w.ln2_gamma},
            {"ln2_beta", &w.ln2_beta},   {"w1", &w.w1},             {"b1", &w.b1}, {"w2", &w.w2},
            {"b2", &w.b2}};
        for (const auto& [name, var] : items) out.emplace_back(p + name, *var);
    }
    out.emplace_back(prefix + ".positional", t.positional);
    out.emplace_back(prefix + ".ln_final_gamma", t.ln_final_gamma);
    out.emplace_back(prefix + ".ln_final_beta", t.ln_final_beta);
    out.emplace_back(prefix + ".projection", t.projection);
}

}  // namespace

FrozenBackbone::FrozenBackbone(BackboneConfig cfg) : cfg_(std::move(cfg)), tokenizer_(cfg_.vocab_size) {
    cfg_.validate();
    Init init(cfg_.seed);
    const int p = cfg_.patch_size();
    const int patch_in = cfg_.image_channels * p * p;
    patch_embedding_ = init.normal(cfg_.vision_dim, patch_in, 1.0 / std::sqrt(double(patch_in)));
    class_token_ = init.normal(1, cfg_.vision_dim, 1.0);
    token_embedding_ = init.normal(cfg_.vocab_size, cfg_.text_dim, 1.0);
    vision_ = make_tower(init, cfg_.vision_dim, cfg_.vision_layers, cfg_.mlp_ratio,
                         cfg_.patch_or_token_count + 1, cfg_.joint_dim);
    text_ = make_tower(init, cfg_.text_dim, cfg_.text_layers, cfg_.mlp_ratio, cfg_.context_length,
                       cfg_.joint_dim);

    Sha256 h;
    nlohmann::json j = cfg_;
    h.update(j.dump());
    for (const auto& [name, var] : named_weights()) {
        h.update(name);
        h.update(var.value());
    }
    hash_ = h.hex_digest();
}

ag::Var FrozenBackbone::embed_image(const Image& image) const {
    if (image.channels != cfg_.image_channels || image.height != cfg_.image_size ||
        image.width != cfg_.image_size) {
        throw DimensionError(fmt::format("image is {}x{}x{}, backbone expects {}x{}x{}", image.channels,
                                         image.height, image.width, cfg_.image_channels,
                                         cfg_.image_size, cfg_.image_size));
    }
    const int p = cfg_.patch_size();
    const int side = cfg_.patches_per_side();
    Eigen::MatrixXd patches(cfg_.patch_or_token_count, cfg_.image_channels * p * p);
    for (int py = 0; py < side; ++py) {
        for (int px = 0; px < side; ++px) {
            const int row = py * side + px;
            int col = 0;
            for (int c = 0; c < cfg_.image_channels; ++c) {
                for (int y = 0; y < p; ++y) {
                    for (int x = 0; x < p; ++x) {
                        patches(row, col++) = image.at(c, py * p + y, px * p + x);
                    }
                }
            }
        }
    }
    ag::Var tokens = ag::linear(ag::Var::constant(std::move(patches)), patch_embedding_);
    tokens = ag::concat_rows({class_token_, tokens});
    return ag::add(tokens, vision_.positional);
}

ag::Var FrozenBackbone::embed_tokens(std::span<const int> ids) const {
    if (static_cast<int>(ids.size()) > cfg_.context_length) {
        throw ContextLengthError(fmt::format("sequence of {} tokens exceeds the context limit of {}",
                                             ids.size(), cfg_.context_length));
    }
    std::vector<Eigen::Index> rows;
    rows.reserve(ids.size());
    for (int id : ids) {
        if (id < 0 || id >= cfg_.vocab_size) {
            throw DimensionError(fmt::format("token id {} outside vocabulary of {}", id, cfg_.vocab_size));
        }
        rows.push_back(id);
    }
    ag::Var tok = ag::gather_rows(token_embedding_, rows);
    return ag::add(tok, ag::slice_rows(text_.positional, 0, static_cast<Eigen::Index>(ids.size())));
}

Eigen::RowVectorXd FrozenBackbone::token_embedding(int id) const {
    if (id < 0 || id >= cfg_.vocab_size) {
        throw DimensionError(fmt::format("token id {} outside vocabulary of {}", id, cfg_.vocab_size));
    }
    return token_embedding_.value().row(id);
}

std::vector<std::pair<std::string, ag::Var>> FrozenBackbone::named_weights() const {
    std::vector<std::pair<std::string, ag::Var>> out;
    out.emplace_back("vision.patch_embedding", patch_embedding_);
    out.emplace_back("vision.class_token", class_token_);
    out.emplace_back("text.token_embedding", token_embedding_);
    append_tower(out, "vision", vision_);
    append_tower(out, "text", text_);
    return out;
}

}  // namespace drift::model
