#pragma once

#include "drift/ag/tensor.hpp"
#include "drift/model/config.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <random>

namespace drift::testing {

inline Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng,
                                     double stddev = 1.0) {
    std::normal_distribution<double> n(0.0, stddev);
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
    return m;
}

/// Central differences of f with respect to every entry of x.
inline Eigen::MatrixXd numeric_gradient(const std::function<double()>& f, Eigen::MatrixXd& x, double h = 1e-5) {
    Eigen::MatrixXd g(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double saved = x.data()[i];
        x.data()[i] = saved + h;
        const double up = f();
        x.data()[i] = saved - h;
        const double down = f();
        x.data()[i] = saved;
        g.data()[i] = (up - down) / (2.0 * h);
    }
    return g;
}

/// max |a - b| / max(1e-8, max(|a|, |b|)) over the whole matrix.
inline double relative_error(const Eigen::MatrixXd& analytic, const Eigen::MatrixXd& numeric) {
    const double scale = std::max({1e-8, analytic.cwiseAbs().maxCoeff(), numeric.cwiseAbs().maxCoeff()});
    return (analytic - numeric).cwiseAbs().maxCoeff() / scale;
}

/// Small backbone that keeps model tests fast.
inline model::BackboneConfig small_backbone(std::uint64_t seed = 0) {
    model::BackboneConfig c;
    c.text_dim = 16;
    c.vision_dim = 16;
    c.joint_dim = 16;
    c.vision_layers = 3;
    c.text_layers = 3;
    c.heads = 2;
    c.vocab_size = 512;
    c.seed = seed;
    return c;
}

}  // namespace drift::testing
