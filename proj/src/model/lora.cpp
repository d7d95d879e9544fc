#include "drift/model/lora.hpp"

#include <algorithm>

namespace drift::model {

std::string LoraTarget::name() const {
    return fmt::format("lora.{}.layer{}.{}", to_string(modality), layer,
                       projection == Projection::query ? "q" : "k");
}

LoraAdapter LoraAdapter::create(Eigen::Index d_out, Eigen::Index d_in, int rank, double scale,
                                LoraTarget target, std::mt19937_64& rng) {
    if (rank < 1 || rank >= std::min(d_out, d_in)) {
        throw ConfigError(fmt::format("LoRA rank {} must satisfy 1 <= r < min(d_out={}, d_in={})",
                                      rank, d_out, d_in));
    }
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(d_in)));
    Eigen::MatrixXd b(rank, d_in);
    for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = normal(rng);
    return from_matrices(Eigen::MatrixXd::Zero(d_out, rank), std::move(b), scale, target);
}

LoraAdapter LoraAdapter::from_matrices(Eigen::MatrixXd a, Eigen::MatrixXd b, double scale,
                                       LoraTarget target) {
    if (a.cols() != b.rows()) {
        throw DimensionError(fmt::format("rank mismatch: A has {} columns but B has {} rows",
                                         a.cols(), b.rows()));
    }
    LoraAdapter out;
    out.a = ag::Var::parameter(std::move(a));
    out.b = ag::Var::parameter(std::move(b));
    out.scale = scale;
    out.target = target;
    return out;
}

Eigen::VectorXd lora_forward(const Eigen::VectorXd& x, const Eigen::MatrixXd& w0,
                             const LoraAdapter& adapter) {
    return lora_forward<double>(x, w0, adapter.a.value(), adapter.b.value(), adapter.scale);
}

Eigen::MatrixXd lora_merge(const Eigen::MatrixXd& w0, const LoraAdapter& adapter) {
    return lora_merge<double>(w0, adapter.a.value(), adapter.b.value(), adapter.scale);
}

ag::Var lora_project(const ag::Var& x, const ag::Var& w0, const LoraAdapter& adapter,
                     const LoraTarget& expected) {
    if (!(adapter.target == expected)) {
        throw ConfigError(fmt::format("adapter {} attached to projection {}", adapter.target.name(),
                                      expected.name()));
    }
    detail::check_lora_shapes(x.cols(), w0.value(), adapter.a.value(), adapter.b.value());
    ag::Var base = ag::linear(x, w0);
    ag::Var low = ag::linear(x, adapter.b);              // n x r
    ag::Var delta = ag::linear(low, adapter.a);          // n x d_out
    return ag::add(base, ag::scale(delta, adapter.scale));
}

}  // namespace drift::model
