#include "drift/ag/tensor.hpp"
#include "drift/errors.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <functional>
#include <string>
#include <vector>

namespace {

using drift::ag::Matrix;
using drift::ag::Var;
namespace ag = drift::ag;
using drift::testing::numeric_gradient;
using drift::testing::random_matrix;
using drift::testing::relative_error;

// Reduces an op's output to a scalar with fixed random weights so every
// output entry contributes to the checked gradient.
double check_unary(const std::function<Var(const Var&)>& op, Matrix x0, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Var probe = op(Var::constant(x0));
    const Matrix w = random_matrix(probe.rows(), probe.cols(), rng);
    Var x = Var::parameter(x0);
    ag::sum(ag::mul_const(op(x), w)).backward();
    Matrix xv = x0;
    auto f = [&] { return (op(Var::constant(xv)).value().array() * w.array()).sum(); };
    return relative_error(x.grad(), numeric_gradient(f, xv));
}

struct UnaryCase {
    std::string name;
    std::function<Var(const Var&)> op;
    bool positive = false;
};

TEST(Autodiff, UnaryOpsMatchFiniteDifferences) {
    std::mt19937_64 rng(11);
    const Matrix gamma = random_matrix(1, 5, rng);
    const Matrix beta = random_matrix(1, 5, rng);
    const Matrix other = random_matrix(4, 5, rng);
    const std::vector<UnaryCase> cases = {
        {"scale", [](const Var& a) { return ag::scale(a, -1.7); }},
        {"add_scalar", [](const Var& a) { return ag::add_scalar(a, 0.3); }},
        {"exp", [](const Var& a) { return ag::exp(a); }},
        {"log", [](const Var& a) { return ag::log(a); }, true},
        {"gelu", [](const Var& a) { return ag::gelu(a); }},
        {"xlogx", [](const Var& a) { return ag::xlogx(a); }, true},
        {"softmax_rows", [](const Var& a) { return ag::softmax_rows(a); }},
        {"log_softmax_rows", [](const Var& a) { return ag::log_softmax_rows(a); }},
        {"layer_norm_rows",
         [&](const Var& a) { return ag::layer_norm_rows(a, Var::constant(gamma), Var::constant(beta)); }},
        {"l2_normalize_rows", [](const Var& a) { return ag::l2_normalize_rows(a); }},
        {"pairwise_sq_dists", [](const Var& a) { return ag::pairwise_sq_dists(a); }},
        {"transpose", [](const Var& a) { return ag::transpose(a); }},
        {"row_sum", [](const Var& a) { return ag::row_sum(a); }},
        {"mean", [](const Var& a) { return ag::mean(a); }},
        {"mul_self", [](const Var& a) { return ag::mul(a, a); }},
        {"matmul_self_t", [](const Var& a) { return ag::matmul(a, ag::transpose(a)); }},
        {"linear_const", [&](const Var& a) { return ag::linear(a, Var::constant(other)); }},
        {"slice_rows", [](const Var& a) { return ag::slice_rows(a, 1, 2); }},
        {"slice_cols", [](const Var& a) { return ag::slice_cols(a, 2, 3); }},
        {"gather_rows", [](const Var& a) { return ag::gather_rows(a, {3, 0, 3}); }},
        {"concat_rows", [](const Var& a) { return ag::concat_rows({a, ag::scale(a, 2.0)}); }},
        {"concat_cols", [](const Var& a) { return ag::concat_cols({a, ag::exp(a)}); }},
        {"add_row", [&](const Var& a) { return ag::add_row(a, ag::slice_rows(a, 0, 1)); }},
        {"add_col", [&](const Var& a) { return ag::add_col(a, ag::slice_cols(a, 0, 1)); }},
        {"mul_col", [&](const Var& a) { return ag::mul_col(a, ag::slice_cols(a, 4, 1)); }},
    };
    for (const auto& c : cases) {
        for (std::uint64_t trial = 0; trial < 3; ++trial) {
            Matrix x = random_matrix(4, 5, rng);
            if (c.positive) x = x.array().abs() + 0.1;
            EXPECT_LT(check_unary(c.op, x, trial), 1e-6) << c.name << " trial " << trial;
        }
    }
}

TEST(Autodiff, ConstantsNeverReceiveGradients) {
    std::mt19937_64 rng(1);
    Var w = Var::constant(random_matrix(3, 3, rng));
    Var p = Var::parameter(random_matrix(2, 3, rng));
    ag::sum(ag::linear(p, w)).backward();
    EXPECT_TRUE(p.has_grad());
    EXPECT_FALSE(w.has_grad());
}

TEST(Autodiff, NoGradGuardRecordsNothing) {
    Var p = Var::parameter(Matrix::Ones(2, 2));
    Var y;
    {
        ag::NoGradGuard guard;
        EXPECT_FALSE(ag::grad_enabled());
        y = ag::sum(ag::exp(p));
    }
    EXPECT_TRUE(ag::grad_enabled());
    EXPECT_FALSE(y.requires_grad());
}

TEST(Autodiff, GradientsAccumulateAcrossSharedUses) {
    Var p = Var::parameter(Matrix::Constant(1, 1, 3.0));
    ag::add(ag::mul(p, p), ag::scale(p, 2.0)).backward();
    EXPECT_DOUBLE_EQ(p.grad()(0, 0), 8.0);
}

TEST(Autodiff, ShapeMismatchIsDimensionError) {
    Var a = Var::constant(Matrix::Zero(2, 3));
    Var b = Var::constant(Matrix::Zero(3, 2));
    EXPECT_THROW(ag::add(a, b), drift::DimensionError);
    EXPECT_THROW(ag::matmul(a, a), drift::DimensionError);
}

TEST(Autodiff, NormalizingZeroRowIsDegenerate) {
    EXPECT_THROW(ag::l2_normalize_rows(Var::constant(Matrix::Zero(1, 4))), drift::DegenerateEmbeddingError);
}

TEST(Autodiff, XlogxAtZeroIsZero) {
    Matrix x(1, 2);
    x << 0.0, 0.5;
    EXPECT_DOUBLE_EQ(ag::xlogx(Var::constant(x)).value()(0, 0), 0.0);
}

}  // namespace
