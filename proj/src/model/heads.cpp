#include "drift/model/heads.hpp"

#include "drift/errors.hpp"

#include <fmt/format.h>

#include <cmath>

namespace drift::model {

AffineHead AffineHead::identity(int dim) {
    return {ag::Var::parameter(Eigen::MatrixXd::Identity(dim, dim)),
            ag::Var::parameter(Eigen::MatrixXd::Zero(1, dim))};
}

AffineHead AffineHead::near_identity(int dim, double noise, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, noise);
    Eigen::MatrixXd w = Eigen::MatrixXd::Identity(dim, dim);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] += normal(rng);
    return {ag::Var::parameter(std::move(w)), ag::Var::parameter(Eigen::MatrixXd::Zero(1, dim))};
}

ag::Var AffineHead::apply(const ag::Var& rows) const {
    return ag::add_row(ag::linear(rows, weight), bias);
}

const AffineHead& ProjectionHeads::get(Modality m, Branch b) const {
    if (m == Modality::vision) return b == Branch::invariant ? vision_invariant : vision_spurious;
    return b == Branch::invariant ? text_invariant : text_spurious;
}

AffineHead& ProjectionHeads::get(Modality m, Branch b) {
    return const_cast<AffineHead&>(static_cast<const ProjectionHeads&>(*this).get(m, b));
}

std::vector<ag::Var> ProjectionHeads::parameters() const {
    return {vision_invariant.weight, vision_invariant.bias, vision_spurious.weight,
            vision_spurious.bias,    text_invariant.weight,   text_invariant.bias,
            text_spurious.weight,    text_spurious.bias};
}

DecoupledEmbedding decouple(const Eigen::VectorXd& z, const ProjectionHeads& heads, Modality modality) {
    if (!z.allFinite()) throw NumericError("decouple: embedding has non-finite entries");
    ag::NoGradGuard guard;
    auto [u, s] = decouple_rows(ag::Var::constant(z.transpose()), heads, modality);
    return {u.value().row(0).transpose(), s.value().row(0).transpose(), modality};
}

std::pair<ag::Var, ag::Var> decouple_rows(const ag::Var& z, const ProjectionHeads& heads,
                                          Modality modality) {
    const auto& hu = heads.get(modality, Branch::invariant);
    if (z.cols() != hu.weight.cols()) {
        throw DimensionError(fmt::format("decouple: embedding width {} but heads expect {}", z.cols(),
                                         hu.weight.cols()));
    }
    ag::Var u = ag::l2_normalize_rows(hu.apply(z));
    ag::Var s = ag::l2_normalize_rows(heads.get(modality, Branch::spurious).apply(z));
    return {u, s};
}

}  // namespace drift::model
