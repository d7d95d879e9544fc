#pragma once

#include "drift/ag/tensor.hpp"
#include "drift/errors.hpp"
#include "drift/model/config.hpp"

#include <Eigen/Dense>
#include <fmt/format.h>

#include <random>
#include <string>

namespace drift::model {

enum class Projection { query, key };

struct LoraTarget {
    Projection projection = Projection::query;
    Modality modality = Modality::vision;
    int layer = 0;

    std::string name() const;
    bool operator==(const LoraTarget&) const = default;
};

/// Trainable low-rank pair attached to a frozen projection W0 (d_out x d_in).
/// The adapted weight is W0 + scale * A * B.
struct LoraAdapter {
    ag::Var a;  // d_out x r
    ag::Var b;  // r x d_in
    double scale = 1.0;
    LoraTarget target;

    int rank() const { return static_cast<int>(a.cols()); }
    Eigen::Index d_out() const { return a.rows(); }
    Eigen::Index d_in() const { return b.cols(); }

    /// A starts at zero so the adapted projection initially equals W0; B is
    /// drawn from N(0, 1/d_in). Throws ConfigError unless r < min(d_out, d_in).
    static LoraAdapter create(Eigen::Index d_out, Eigen::Index d_in, int rank, double scale,
                              LoraTarget target, std::mt19937_64& rng);

    /// Wraps explicit matrices as trainable parameters.
    static LoraAdapter from_matrices(Eigen::MatrixXd a, Eigen::MatrixXd b, double scale,
                                     LoraTarget target);
};

namespace detail {

template <typename Scalar>
void check_lora_shapes(Eigen::Index x_len, const Eigen::Matrix<Scalar, -1, -1>& w0,
                       const Eigen::Matrix<Scalar, -1, -1>& a,
                       const Eigen::Matrix<Scalar, -1, -1>& b) {
    if (a.rows() != w0.rows()) {
        throw DimensionError(fmt::format("d_out mismatch: A has {} rows but W0 has {}", a.rows(), w0.rows()));
    }
    if (b.cols() != w0.cols()) {
        throw DimensionError(fmt::format("d_in mismatch: B has {} columns but W0 has {}", b.cols(), w0.cols()));
    }
    if (a.cols() != b.rows()) {
        throw DimensionError(fmt::format("rank mismatch: A has {} columns but B has {} rows", a.cols(), b.rows()));
    }
    if (x_len >= 0 && x_len != w0.cols()) {
        throw DimensionError(fmt::format("d_in mismatch: x has {} entries but W0 has {} columns", x_len, w0.cols()));
    }
}

}  // namespace detail

/// (W0 + scale * A * B) x without materialising the dense delta.
template <typename Scalar>
Eigen::Matrix<Scalar, -1, 1> lora_forward(const Eigen::Matrix<Scalar, -1, 1>& x,
                                          const Eigen::Matrix<Scalar, -1, -1>& w0,
                                          const Eigen::Matrix<Scalar, -1, -1>& a,
                                          const Eigen::Matrix<Scalar, -1, -1>& b, Scalar scale) {
    detail::check_lora_shapes(x.size(), w0, a, b);
    Eigen::Matrix<Scalar, -1, 1> low = b * x;
    return w0 * x + scale * (a * low);
}

template <typename Scalar>
Eigen::Matrix<Scalar, -1, -1> lora_merge(const Eigen::Matrix<Scalar, -1, -1>& w0,
                                         const Eigen::Matrix<Scalar, -1, -1>& a,
                                         const Eigen::Matrix<Scalar, -1, -1>& b, Scalar scale) {
    detail::check_lora_shapes(Eigen::Index{-1}, w0, a, b);
    return w0 + scale * (a * b);
}

Eigen::VectorXd lora_forward(const Eigen::VectorXd& x, const Eigen::MatrixXd& w0,
                             const LoraAdapter& adapter);
Eigen::MatrixXd lora_merge(const Eigen::MatrixXd& w0, const LoraAdapter& adapter);

/// Differentiable row-batched form: rows of x (n x d_in) map to n x d_out.
/// W0 is treated as frozen; gradients reach A and B only. The adapter's
/// target must equal `expected`, otherwise ConfigError.
ag::Var lora_project(const ag::Var& x, const ag::Var& w0, const LoraAdapter& adapter,
                     const LoraTarget& expected);

}  // namespace drift::model
