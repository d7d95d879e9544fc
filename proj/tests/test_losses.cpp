#include "drift/errors.hpp"
#include "drift/losses/losses.hpp"
#include "loss_checks.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <numeric>

namespace {

using namespace drift;
using namespace drift::losses;
using namespace drift::testing;
using Eigen::MatrixXd;
using Eigen::VectorXd;

std::vector<std::vector<double>> to_rows(const MatrixXd& m) {
    std::vector<std::vector<double>> out;
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        out.emplace_back();
        for (Eigen::Index j = 0; j < m.cols(); ++j) out.back().push_back(m(i, j));
    }
    return out;
}

TEST(Similarity, Extremes) {
    const VectorXd a{{0.6, 0.8}};
    EXPECT_DOUBLE_EQ(similarity(a, a), 1.0);
    EXPECT_DOUBLE_EQ(similarity(a, -a), -1.0);
    EXPECT_DOUBLE_EQ(similarity(a, VectorXd{{-0.8, 0.6}}), 0.0);
    EXPECT_THROW(similarity(a, VectorXd{{std::nan(""), 0.0}}), NumericError);
}

TEST(ClassProbs, HandComputedSoftmax) {
    const MatrixXd rows = MatrixXd::Identity(3, 3);
    const auto p = class_probs(VectorXd{{1.0, 0.0, 0.0}}, rows, 1.0);
    EXPECT_NEAR(p[0], 0.5761, 1e-3);
    EXPECT_NEAR(p[1], 0.2119, 1e-3);
    EXPECT_NEAR(p[2], 0.2119, 1e-3);
}

TEST(ClassProbs, IdenticalRowsAreUniform) {
    MatrixXd rows(4, 2);
    rows.rowwise() = Eigen::RowVector2d(0.6, 0.8);
    const auto p = class_probs(VectorXd{{1.0, 0.0}}, rows, 0.07);
    for (int c = 0; c < 4; ++c) EXPECT_NEAR(p[c], 0.25, 1e-12);
}

TEST(ClassProbs, ShiftInvarianceAndValidity) {
    std::mt19937_64 rng(1);
    for (int t = 0; t < 50; ++t) {
        const MatrixXd rows = unit_rows(5, 6, rng);
        const VectorXd z = unit_rows(1, 6, rng).transpose();
        const auto p = class_probs(z, rows, 0.07);
        EXPECT_NEAR(p.probs().sum(), 1.0, 1e-6);
        EXPECT_GE(p.probs().minCoeff(), 0.0);
        // Adding a constant c to every logit: append a coordinate carrying c*tau.
        MatrixXd rows_aug(5, 7);
        rows_aug << rows, MatrixXd::Constant(5, 1, 1.0);
        VectorXd z_aug(7);
        z_aug << z, 0.3;
        const auto q = class_probs(z_aug, rows_aug, 0.07);
        EXPECT_LT((p.probs() - q.probs()).cwiseAbs().maxCoeff(), 1e-9);
    }
}

TEST(ClassProbs, RejectsBadTemperature) {
    EXPECT_THROW(class_probs(VectorXd::Ones(2), MatrixXd::Identity(2, 2), 0.0), ParameterError);
    EXPECT_THROW(class_probs(VectorXd::Ones(2), MatrixXd::Identity(2, 2), -1.0), ParameterError);
}

TEST(InvariantCe, MatchesLoopOracle) {
    std::mt19937_64 rng(2);
    for (int t = 0; t < 20; ++t) {
        const MatrixXd z = unit_rows(8, 16, rng);
        const MatrixXd rows = unit_rows(3, 16, rng);
        const auto y = random_labels(8, 3, rng);
        const double got = invariant_ce(ag::Var::constant(z), ag::Var::constant(rows), y, 0.07).item();
        EXPECT_NEAR(got, loop_ce(z, rows, y, 0.07), 1e-6);
    }
}

TEST(InvariantCe, UniformPredictionGivesNLogC) {
    MatrixXd rows(3, 2);
    rows.rowwise() = Eigen::RowVector2d(1.0, 0.0);
    const std::vector<int> y{0, 1, 2, 1};
    const double got = invariant_ce(ag::Var::constant(MatrixXd::Constant(4, 2, 0.5)), ag::Var::constant(rows), y, 0.07).item();
    EXPECT_NEAR(got, 4.0 * std::log(3.0), 1e-12);
}

TEST(InvariantCe, SharpMatchApproachesZero) {
    const MatrixXd rows = MatrixXd::Identity(3, 3);
    const std::vector<int> y{1};
    const double got = invariant_ce(ag::Var::constant(MatrixXd(rows.row(1))), ag::Var::constant(rows), y, 0.01).item();
    EXPECT_LT(got, 1e-40);
}

TEST(InvariantCe, LabelOutOfRangeNamesIndex) {
    const std::vector<int> y{0, 3};
    try {
        invariant_ce(ag::Var::constant(MatrixXd::Ones(2, 2)), ag::Var::constant(MatrixXd::Identity(2, 2)), y, 0.07);
        FAIL();
    } catch (const LabelError& e) {
        EXPECT_NE(std::string(e.what()).find("index 1"), std::string::npos);
    }
}

TEST(SpuriousKl, DirectSumOracle) {
    const auto prior = ProbDist::uniform(4);
    const std::vector<ProbDist> ps{ProbDist(VectorXd{{0.7, 0.1, 0.1, 0.1}})};
    EXPECT_NEAR(spurious_kl(ps, prior), direct_kl({{0.7, 0.1, 0.1, 0.1}}, {0.25, 0.25, 0.25, 0.25}), 1e-8);
}

TEST(SpuriousKl, EntropyExtremeAndZeroAtPrior) {
    const auto prior = ProbDist::uniform(2);
    const std::vector<ProbDist> one_hot{ProbDist(VectorXd{{1.0, 0.0}}), ProbDist(VectorXd{{0.0, 1.0}})};
    EXPECT_NEAR(spurious_kl(one_hot, prior), 2.0 * std::log(2.0), 1e-12);
    const std::vector<ProbDist> at_prior(3, prior);
    EXPECT_EQ(spurious_kl(at_prior, prior), 0.0);
}

TEST(SpuriousKl, NonNegativeAndMatchesOracleOnRandomBatches) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 100; ++t) {
        MatrixXd p(6, 5);
        for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = u(rng) < 0.2 ? 0.0 : u(rng);
        for (Eigen::Index i = 0; i < 6; ++i) {
            if (p.row(i).sum() == 0.0) p(i, 0) = 1.0;
            p.row(i) /= p.row(i).sum();
        }
        std::vector<ProbDist> ps;
        for (Eigen::Index i = 0; i < 6; ++i) ps.emplace_back(VectorXd(p.row(i).transpose()));
        const double kl = spurious_kl(ps, ProbDist::uniform(5));
        EXPECT_GE(kl, 0.0);
        EXPECT_NEAR(kl, direct_kl(to_rows(p), std::vector<double>(5, 0.2)), 1e-8);
        EXPECT_NEAR(spurious_kl(ag::Var::constant(p), ProbDist::uniform(5)).item(), kl, 1e-12);
    }
}

TEST(SpuriousKl, ZeroInPriorIsInfinite) {
    const ProbDist prior(VectorXd{{1.0, 0.0}});
    const std::vector<ProbDist> ps{ProbDist(VectorXd{{0.5, 0.5}})};
    EXPECT_THROW(spurious_kl(ps, prior), InfiniteDivergenceError);
    const std::vector<ProbDist> ok{ProbDist(VectorXd{{1.0, 0.0}})};
    EXPECT_EQ(spurious_kl(ok, prior), 0.0);
}

TEST(SpuriousKl, EmbeddingFormAgreesWithProbabilityForm) {
    std::mt19937_64 rng(4);
    const MatrixXd s = unit_rows(5, 4, rng);
    const MatrixXd rows = unit_rows(3, 4, rng);
    std::vector<ProbDist> ps;
    for (Eigen::Index i = 0; i < 5; ++i) ps.push_back(class_probs(s.row(i).transpose(), rows, 0.07));
    const auto prior = ProbDist::uniform(3);
    EXPECT_NEAR(spurious_kl_from_embeddings(ag::Var::constant(s), ag::Var::constant(rows), 0.07, prior).item(),
                spurious_kl(ps, prior), 1e-10);
}

TEST(ProbDist, Validation) {
    EXPECT_THROW(ProbDist(VectorXd{{0.5, 0.6}}), NumericError);
    EXPECT_THROW(ProbDist(VectorXd{{1.5, -0.5}}), NumericError);
    EXPECT_EQ(ProbDist(VectorXd{{0.4, 0.4, 0.2}}).argmax(), 0);
}

TEST(Hsic, PerfectDependenceMatchesBruteForce) {
    std::mt19937_64 rng(5);
    const MatrixXd u = random_matrix(16, 4, rng);
    const std::vector<int> y(16, 0);
    const double got = conditional_hsic(ag::Var::constant(u), ag::Var::constant(u), y, {}).item();
    EXPECT_GT(got, 0.0);
    EXPECT_NEAR(got, brute_force_hsic(u, u), 1e-8);
}

TEST(Hsic, TraceFormMatchesDoubleSumUpTo32) {
    std::mt19937_64 rng(6);
    for (int n = 2; n <= 32; n += 3) {
        const MatrixXd u = random_matrix(n, 5, rng);
        const MatrixXd s = random_matrix(n, 3, rng);
        const double sigma_u = median_bandwidth(u);
        const double sigma_s = median_bandwidth(s);
        EXPECT_NEAR(sigma_u, loop_median_distance(u), 1e-12);
        const double trace = hsic_statistic(rbf_gram(u, sigma_u), rbf_gram(s, sigma_s));
        EXPECT_NEAR(trace, brute_force_hsic(u, s), 1e-8) << "n=" << n;
        EXPECT_GE(trace, -1e-10);
    }
}

TEST(Hsic, ConditionalWeightingMatchesOracle) {
    std::mt19937_64 rng(7);
    for (int t = 0; t < 20; ++t) {
        const MatrixXd u = random_matrix(24, 4, rng);
        const MatrixXd s = random_matrix(24, 4, rng) + 0.5 * u;
        const auto y = random_labels(24, 4, rng);
        const double got = conditional_hsic(ag::Var::constant(u), ag::Var::constant(s), y, {}).item();
        EXPECT_NEAR(got, brute_force_conditional_hsic(u, s, y), 1e-8);
    }
}

TEST(Hsic, SingletonsGiveZero) {
    std::mt19937_64 rng(8);
    const std::vector<int> y{0, 1, 2, 3};
    EXPECT_EQ(conditional_hsic(ag::Var::constant(random_matrix(4, 3, rng)), ag::Var::constant(random_matrix(4, 3, rng)),
                               y, {})
                  .item(),
              0.0);
}

TEST(Hsic, ShapeMismatchIsDimensionError) {
    const std::vector<int> y{0, 0, 0};
    EXPECT_THROW(conditional_hsic(ag::Var::constant(MatrixXd::Ones(3, 2)), ag::Var::constant(MatrixXd::Ones(2, 2)), y, {}),
                 DimensionError);
}

TEST(Hsic, PermutationNull) {
    std::mt19937_64 rng(9);
    const MatrixXd u = random_matrix(64, 4, rng);
    const MatrixXd s = random_matrix(64, 4, rng);
    auto stat = [](const MatrixXd& a, const MatrixXd& b) {
        return hsic_statistic(rbf_gram(a, median_bandwidth(a)), rbf_gram(b, median_bandwidth(b)));
    };
    const auto indep = permutation_null(u, s, stat, 200, rng);
    EXPECT_LE(std::abs(indep.observed - indep.mean), 3.0 * indep.stddev);
    const auto dep = permutation_null(u, u, stat, 200, rng);
    EXPECT_GT(dep.observed, dep.p99);
}

TEST(TotalLoss, ReconcilesWithComponents) {
    std::mt19937_64 rng(10);
    for (int t = 0; t < 20; ++t) {
        const auto y = random_labels(8, 3, rng);
        std::vector<ag::Var> v;
        for (int i = 0; i < 4; ++i) v.push_back(ag::Var::constant(unit_rows(8, 6, rng)));
        const auto ci = ag::Var::constant(unit_rows(3, 6, rng));
        const auto cs = ag::Var::constant(unit_rows(3, 6, rng));
        const LossWeights w;
        const auto terms = total_loss({{v[0], v[1]}, {v[2], v[3]}, ci, cs, y}, w, {});
        const auto b = terms.breakdown();
        EXPECT_NEAR(b.total, b.ce + w.alpha_sp * b.kl + w.beta * (b.hsic_v + b.hsic_t) / 2.0, 1e-7);
        EXPECT_NEAR(b.ce, loop_ce(v[0].value(), ci.value(), y, w.tau), 1e-6);
        EXPECT_NEAR(b.hsic_v, brute_force_conditional_hsic(v[0].value(), v[1].value(), y), 1e-8);
        EXPECT_NEAR(b.hsic_t, brute_force_conditional_hsic(v[2].value(), v[3].value(), y), 1e-8);
    }
}

TEST(TotalLoss, ZeroWeightsGiveCeExactly) {
    std::mt19937_64 rng(11);
    const auto y = random_labels(6, 2, rng);
    std::vector<ag::Var> v;
    for (int i = 0; i < 4; ++i) v.push_back(ag::Var::constant(unit_rows(6, 4, rng)));
    const auto ci = ag::Var::constant(unit_rows(2, 4, rng));
    LossWeights w;
    w.alpha_sp = 0.0;
    w.beta = 0.0;
    const auto terms = total_loss({{v[0], v[1]}, {v[2], v[3]}, ci, ci, y}, w, {});
    EXPECT_EQ(terms.total.item(), invariant_ce(v[0], ci, y, w.tau).item());
}

TEST(TotalLoss, HsicContributionIsAveraged) {
    LossWeights w;
    w.alpha_sp = 0.0;
    w.beta = 0.4;
    const auto t = combine_losses(ag::Var::scalar(1.0), ag::Var::scalar(5.0), ag::Var::scalar(0.3),
                                  ag::Var::scalar(0.7), w);
    EXPECT_NEAR(t.total.item(), 1.0 + 0.4 * 0.5, 1e-15);
}

TEST(TotalLoss, PermutationInvariant) {
    std::mt19937_64 rng(12);
    const int n = 10;
    auto y = random_labels(n, 3, rng);
    std::vector<MatrixXd> m;
    for (int i = 0; i < 4; ++i) m.push_back(unit_rows(n, 5, rng));
    const auto ci = ag::Var::constant(unit_rows(3, 5, rng));
    const auto cs = ag::Var::constant(unit_rows(3, 5, rng));
    auto eval = [&](const std::vector<MatrixXd>& mats, const std::vector<int>& labels) {
        return total_loss({{ag::Var::constant(mats[0]), ag::Var::constant(mats[1])},
                           {ag::Var::constant(mats[2]), ag::Var::constant(mats[3])}, ci, cs, labels, true},
                          LossWeights{}, {})
            .breakdown();
    };
    const auto base = eval(m, y);
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<MatrixXd> pm(4, MatrixXd(n, 5));
    std::vector<int> py(n);
    for (int r = 0; r < n; ++r) {
        for (int i = 0; i < 4; ++i) pm[std::size_t(i)].row(r) = m[std::size_t(i)].row(order[std::size_t(r)]);
        py[std::size_t(r)] = y[std::size_t(order[std::size_t(r)])];
    }
    const auto perm = eval(pm, py);
    EXPECT_NEAR(perm.ce, base.ce, 1e-9);
    EXPECT_NEAR(perm.kl, base.kl, 1e-9);
    EXPECT_NEAR(perm.hsic_v, base.hsic_v, 1e-9);
    EXPECT_NEAR(perm.hsic_t, base.hsic_t, 1e-9);
    EXPECT_NEAR(perm.total, base.total, 1e-9);
}

TEST(Gradients, FiniteDifferencesForAllLosses) {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        EXPECT_LT(ce_gradient_error(seed), 1e-4) << "ce seed " << seed;
        EXPECT_LT(kl_gradient_error(seed), 1e-4) << "kl seed " << seed;
        EXPECT_LT(hsic_gradient_error(seed), 1e-4) << "hsic seed " << seed;
        EXPECT_LT(total_gradient_error(seed), 1e-4) << "total seed " << seed;
    }
}

TEST(Weights, Validation) {
    LossWeights w;
    w.tau = 0.0;
    EXPECT_THROW(w.validate(), ParameterError);
    w = {};
    w.beta = -0.1;
    EXPECT_THROW(w.validate(), ParameterError);
    HsicConfig h;
    h.min_class_count = 1;
    EXPECT_THROW(h.validate(), ParameterError);
}

}  // namespace
