#pragma once

// Plain Eigen forward pass of the frozen towers, written independently of the
// autodiff graph so the adapted encoder can be checked against it.

#include "drift/model/backbone.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <numbers>

namespace drift::testing {

inline Eigen::MatrixXd ref_layer_norm(const Eigen::MatrixXd& x, const Eigen::MatrixXd& gamma,
                                      const Eigen::MatrixXd& beta) {
    Eigen::MatrixXd out(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const double mean = x.row(i).mean();
        const double var = (x.row(i).array() - mean).square().mean();
        out.row(i) = ((x.row(i).array() - mean) / std::sqrt(var + 1e-5)).matrix();
        out.row(i) = out.row(i).cwiseProduct(gamma.row(0)) + beta.row(0);
    }
    return out;
}

inline Eigen::MatrixXd ref_gelu(const Eigen::MatrixXd& x) {
    const double c = std::sqrt(2.0 / std::numbers::pi);
    return x.unaryExpr([c](double v) { return 0.5 * v * (1.0 + std::tanh(c * (v + 0.044715 * v * v * v))); });
}

inline Eigen::MatrixXd ref_softmax_rows(Eigen::MatrixXd s) {
    for (Eigen::Index i = 0; i < s.rows(); ++i) {
        s.row(i) = (s.row(i).array() - s.row(i).maxCoeff()).exp().matrix();
        s.row(i) /= s.row(i).sum();
    }
    return s;
}

/// Frozen tower output for already-embedded tokens (no prompts, no adapters).
inline Eigen::VectorXd reference_tower(const model::FrozenBackbone& bb, model::Modality m, Eigen::MatrixXd x) {
    const auto& tower = bb.tower(m);
    const int heads = bb.config().heads;
    const int d = bb.width(m);
    const int dh = d / heads;
    const bool causal = m == model::Modality::text;
    for (const auto& w : tower.layers) {
        const Eigen::MatrixXd h = ref_layer_norm(x, w.ln1_gamma.value(), w.ln1_beta.value());
        Eigen::MatrixXd q = h * w.wq.value().transpose();
        Eigen::MatrixXd k = h * w.wk.value().transpose();
        Eigen::MatrixXd v = h * w.wv.value().transpose();
        q.rowwise() += w.bq.value().row(0);
        k.rowwise() += w.bk.value().row(0);
        v.rowwise() += w.bv.value().row(0);
        Eigen::MatrixXd concat(x.rows(), d);
        for (int hd = 0; hd < heads; ++hd) {
            Eigen::MatrixXd s = q.middleCols(hd * dh, dh) * k.middleCols(hd * dh, dh).transpose() / std::sqrt(double(dh));
            if (causal) {
                for (Eigen::Index i = 0; i < s.rows(); ++i) {
                    for (Eigen::Index j = i + 1; j < s.cols(); ++j) s(i, j) = -1e9;
                }
            }
            concat.middleCols(hd * dh, dh) = ref_softmax_rows(s) * v.middleCols(hd * dh, dh);
        }
        Eigen::MatrixXd attn = concat * w.wo.value().transpose();
        attn.rowwise() += w.bo.value().row(0);
        x += attn;
        const Eigen::MatrixXd h2 = ref_layer_norm(x, w.ln2_gamma.value(), w.ln2_beta.value());
        Eigen::MatrixXd hidden = h2 * w.w1.value().transpose();
        hidden.rowwise() += w.b1.value().row(0);
        Eigen::MatrixXd mlp = ref_gelu(hidden) * w.w2.value().transpose();
        mlp.rowwise() += w.b2.value().row(0);
        x += mlp;
    }
    const Eigen::Index pool = m == model::Modality::vision ? 0 : x.rows() - 1;
    const Eigen::MatrixXd pooled = ref_layer_norm(x.row(pool), tower.ln_final_gamma.value(), tower.ln_final_beta.value());
    return tower.projection.value() * pooled.transpose();
}

}  // namespace drift::testing
