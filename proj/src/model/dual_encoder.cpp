#include "drift/model/dual_encoder.hpp"

#include "drift/errors.hpp"

#include <fmt/format.h>

#include <cmath>
#include <random>

namespace drift::model {
namespace {

constexpr double kHeadInitNoise = 0.02;

Eigen::MatrixXd causal_mask(Eigen::Index n) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) m(i, j) = -1e9;
    }
    return m;
}

}  // namespace

std::size_t ClassTextEmbeddings::index_of(std::string_view name) const {
    for (std::size_t i = 0; i < class_names.size(); ++i) {
        if (class_names[i] == name) return i;
    }
    std::string known;
    for (const auto& n : class_names) known += (known.empty() ? "" : ", ") + n;
    throw LookupError(fmt::format("unknown class '{}'; known classes: [{}]", name, known));
}

Eigen::RowVectorXd ClassTextEmbeddings::invariant_row(std::string_view name) const {
    return invariant.row(static_cast<Eigen::Index>(index_of(name)));
}

Eigen::RowVectorXd ClassTextEmbeddings::spurious_row(std::string_view name) const {
    return spurious.row(static_cast<Eigen::Index>(index_of(name)));
}

DualEncoder::DualEncoder(std::shared_ptr<const FrozenBackbone> backbone, AdaptationConfig adaptation,
                         std::uint64_t seed)
    : backbone_(std::move(backbone)), adaptation_(adaptation) {
    adaptation_.validate();
    const auto& cfg = backbone_->config();
    for (Modality m : {Modality::vision, Modality::text}) {
        if (adaptation_.prompt_depth > backbone_->layers(m)) {
            throw ConfigError(fmt::format("prompt_depth {} exceeds the {} layers of the {} tower",
                                          adaptation_.prompt_depth, backbone_->layers(m), to_string(m)));
        }
    }
    std::mt19937_64 rng(seed);
    for (Modality m : {Modality::vision, Modality::text}) {
        auto& bank = m == Modality::vision ? vision_lora_ : text_lora_;
        const int d = backbone_->width(m);
        for (int l = 1; l <= backbone_->layers(m); ++l) {
            for (Projection p : {Projection::query, Projection::key}) {
                bank.push_back(LoraAdapter::create(d, d, adaptation_.lora_rank, adaptation_.lora_scale,
                                                   LoraTarget{p, m, l}, rng));
            }
        }
    }
    prompts_ = PromptBank(adaptation_.prompt_depth, adaptation_.prompt_width, cfg.vision_dim,
                          cfg.text_dim, rng);
    const int j = cfg.joint_dim;
    heads_.vision_invariant = AffineHead::near_identity(j, kHeadInitNoise, rng);
    heads_.vision_spurious = AffineHead::near_identity(j, kHeadInitNoise, rng);
    heads_.text_invariant = AffineHead::near_identity(j, kHeadInitNoise, rng);
    heads_.text_spurious = AffineHead::near_identity(j, kHeadInitNoise, rng);
}

LoraAdapter& DualEncoder::lora(Modality m, int layer, Projection p) {
    return const_cast<LoraAdapter&>(static_cast<const DualEncoder&>(*this).lora(m, layer, p));
}

const LoraAdapter& DualEncoder::lora(Modality m, int layer, Projection p) const {
    const auto& bank = m == Modality::vision ? vision_lora_ : text_lora_;
    if (layer < 1 || layer > backbone_->layers(m)) {
        throw LookupError(fmt::format("no {} layer {}", to_string(m), layer));
    }
    return bank[static_cast<std::size_t>((layer - 1) * 2 + (p == Projection::key ? 1 : 0))];
}

std::vector<NamedParameter> DualEncoder::trainable_parameters() const {
    std::vector<NamedParameter> out;
    for (const auto* bank : {&vision_lora_, &text_lora_}) {
        for (const auto& a : *bank) {
            out.push_back({a.target.name() + ".A", a.a});
            out.push_back({a.target.name() + ".B", a.b});
        }
    }
    for (Modality m : {Modality::vision, Modality::text}) {
        for (int j = 1; j <= prompts_.depth(); ++j) {
            out.push_back({fmt::format("prompts.{}.layer{}", to_string(m), j), prompts_.tokens(m, j)});
        }
    }
    for (Modality m : {Modality::vision, Modality::text}) {
        for (Branch b : {Branch::invariant, Branch::spurious}) {
            const auto& h = heads_.get(m, b);
            const auto p = fmt::format("heads.{}.{}", to_string(m),
                                       b == Branch::invariant ? "invariant" : "spurious");
            out.push_back({p + ".weight", h.weight});
            out.push_back({p + ".bias", h.bias});
        }
    }
    return out;
}

void DualEncoder::zero_grad() const {
    for (auto& p : trainable_parameters()) p.var.zero_grad();
}

ag::Var DualEncoder::run_tower(Modality m, ag::Var x, bool causal) const {
    const auto& tower = backbone_->tower(m);
    const int n_layers = backbone_->layers(m);
    const int d = backbone_->width(m);
    const int heads = backbone_->config().heads;
    const int dh = d / heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

    for (int l = 1; l <= n_layers; ++l) {
        x = inject_prompts(x, prompts_, m, l, n_layers);
        const auto& w = tower.layers[static_cast<std::size_t>(l - 1)];
        ag::Var h = ag::layer_norm_rows(x, w.ln1_gamma, w.ln1_beta);
        ag::Var q = ag::add_row(lora_project(h, w.wq, lora(m, l, Projection::query),
                                             LoraTarget{Projection::query, m, l}),
                                w.bq);
        ag::Var k = ag::add_row(lora_project(h, w.wk, lora(m, l, Projection::key),
                                             LoraTarget{Projection::key, m, l}),
                                w.bk);
        ag::Var v = ag::add_row(ag::linear(h, w.wv), w.bv);
        std::vector<ag::Var> outs;
        outs.reserve(static_cast<std::size_t>(heads));
        const Eigen::MatrixXd mask = causal ? causal_mask(x.rows()) : Eigen::MatrixXd();
        for (int hd = 0; hd < heads; ++hd) {
            ag::Var qh = ag::slice_cols(q, hd * dh, dh);
            ag::Var kh = ag::slice_cols(k, hd * dh, dh);
            ag::Var vh = ag::slice_cols(v, hd * dh, dh);
            ag::Var scores = ag::scale(ag::linear(qh, kh), inv_sqrt);
            if (causal) scores = ag::add_const(scores, mask);
            outs.push_back(ag::matmul(ag::softmax_rows(scores), vh));
        }
        ag::Var attn = ag::add_row(ag::linear(ag::concat_cols(outs), w.wo), w.bo);
        x = ag::add(x, attn);
        ag::Var h2 = ag::layer_norm_rows(x, w.ln2_gamma, w.ln2_beta);
        ag::Var mlp = ag::add_row(ag::linear(ag::gelu(ag::add_row(ag::linear(h2, w.w1), w.b1)), w.w2), w.b2);
        x = ag::add(x, mlp);
    }
    // Vision pools the class token, text pools the end-of-sequence token.
    const Eigen::Index pool = m == Modality::vision ? 0 : x.rows() - 1;
    ag::Var pooled = ag::layer_norm_rows(ag::slice_rows(x, pool, 1), tower.ln_final_gamma,
                                         tower.ln_final_beta);
    return ag::linear(pooled, tower.projection);
}

ag::Var DualEncoder::encode_images(std::span<const Image> images) const {
    if (images.empty()) throw DimensionError("encode_images: empty batch");
    std::vector<ag::Var> rows;
    rows.reserve(images.size());
    for (const auto& img : images) {
        rows.push_back(run_tower(Modality::vision, backbone_->embed_image(img), false));
    }
    return ag::concat_rows(rows);
}

ag::Var DualEncoder::encode_token_sequences(std::span<const std::vector<int>> word_ids) const {
    if (word_ids.empty()) throw DimensionError("encode_token_sequences: empty batch");
    const int limit = backbone_->config().context_length;
    const int prompt_slots = prompts_.depth() > 0 ? prompts_.width() : 0;
    std::vector<ag::Var> rows;
    rows.reserve(word_ids.size());
    for (const auto& words : word_ids) {
        const int total = static_cast<int>(words.size()) + 2 + prompt_slots;
        if (total > limit) {
            throw ContextLengthError(fmt::format(
                "text of {} tokens plus BOS/EOS and {} prompt slots exceeds the context limit of {}",
                words.size(), prompt_slots, limit));
        }
        std::vector<int> ids;
        ids.reserve(words.size() + 2);
        ids.push_back(Tokenizer::kBos);
        ids.insert(ids.end(), words.begin(), words.end());
        ids.push_back(Tokenizer::kEos);
        rows.push_back(run_tower(Modality::text, backbone_->embed_tokens(ids), true));
    }
    return ag::concat_rows(rows);
}

ag::Var DualEncoder::encode_texts(std::span<const std::string> texts) const {
    std::vector<std::vector<int>> ids;
    ids.reserve(texts.size());
    for (const auto& t : texts) ids.push_back(backbone_->tokenizer().encode_words(t));
    return encode_token_sequences(ids);
}

Eigen::VectorXd DualEncoder::encode_image(const Image& image) const {
    ag::NoGradGuard guard;
    return encode_images(std::span<const Image>(&image, 1)).value().row(0).transpose();
}

Eigen::VectorXd DualEncoder::encode_text(std::span<const int> word_ids) const {
    ag::NoGradGuard guard;
    std::vector<std::vector<int>> seq{std::vector<int>(word_ids.begin(), word_ids.end())};
    return encode_token_sequences(seq).value().row(0).transpose();
}

Eigen::VectorXd DualEncoder::encode_text(std::string_view text) const {
    const auto ids = backbone_->tokenizer().encode_words(text);
    return encode_text(std::span<const int>(ids));
}

ClassTextRows DualEncoder::class_text_rows(std::span<const std::string> class_names,
                                           std::span<const std::string> captions) const {
    if (class_names.size() < 2) {
        throw ConfigError(fmt::format("need at least 2 classes, got {}", class_names.size()));
    }
    if (!captions.empty() && captions.size() != class_names.size()) {
        throw DimensionError(fmt::format("{} captions for {} classes", captions.size(), class_names.size()));
    }
    std::vector<std::string> texts;
    texts.reserve(class_names.size());
    for (std::size_t c = 0; c < class_names.size(); ++c) {
        texts.push_back(class_prompt_text(class_names[c], captions.empty() ? std::string_view{} : captions[c]));
    }
    auto [u, s] = decouple_rows(encode_texts(texts), heads_, Modality::text);
    return {u, s};
}

ClassTextEmbeddings DualEncoder::class_text_embeddings(std::span<const std::string> class_names,
                                                       std::span<const std::string> captions) const {
    ag::NoGradGuard guard;
    auto rows = class_text_rows(class_names, captions);
    return {std::vector<std::string>(class_names.begin(), class_names.end()), rows.invariant.value(),
            rows.spurious.value()};
}

void DualEncoder::copy_parameters_from(const DualEncoder& other) {
    auto mine = trainable_parameters();
    auto theirs = other.trainable_parameters();
    if (mine.size() != theirs.size()) {
        throw DimensionError("copy_parameters_from: parameter sets differ");
    }
    for (std::size_t i = 0; i < mine.size(); ++i) {
        if (mine[i].name != theirs[i].name || mine[i].var.rows() != theirs[i].var.rows() ||
            mine[i].var.cols() != theirs[i].var.cols()) {
            throw DimensionError(fmt::format("copy_parameters_from: '{}' does not match '{}'",
                                             mine[i].name, theirs[i].name));
        }
        mine[i].var.mutable_value() = theirs[i].var.value();
    }
}

}  // namespace drift::model
