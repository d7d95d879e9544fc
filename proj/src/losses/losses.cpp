#include "drift/losses/losses.hpp"

#include "drift/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

namespace drift::losses {
namespace {

void check_tau(double tau) {
    if (!(tau > 0.0) || !std::isfinite(tau)) {
        throw ParameterError(fmt::format("temperature tau must be > 0 (got {})", tau));
    }
}

void check_labels(std::span<const int> labels, Eigen::Index n, Eigen::Index classes) {
    if (static_cast<Eigen::Index>(labels.size()) != n) {
        throw DimensionError(fmt::format("{} labels for a batch of {}", labels.size(), n));
    }
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= classes) {
            throw LabelError(fmt::format("label {} at index {} outside [0, {})", labels[i], i, classes));
        }
    }
}

Eigen::MatrixXd centering(Eigen::Index n) {
    return Eigen::MatrixXd::Identity(n, n) -
           Eigen::MatrixXd::Constant(n, n, 1.0 / static_cast<double>(n));
}

double bandwidth_for(const Eigen::MatrixXd& x, const HsicConfig& cfg) {
    return cfg.bandwidth == BandwidthPolicy::fixed ? cfg.fixed_bandwidth : median_bandwidth(x);
}

ag::Var rbf_gram(const ag::Var& x, double bandwidth) {
    return ag::exp(ag::scale(ag::pairwise_sq_dists(x), -1.0 / (2.0 * bandwidth * bandwidth)));
}

}  // namespace

void LossWeights::validate() const {
    check_tau(tau);
    if (!(alpha_sp >= 0.0)) throw ParameterError(fmt::format("alpha_sp must be >= 0 (got {})", alpha_sp));
    if (!(beta >= 0.0)) throw ParameterError(fmt::format("beta must be >= 0 (got {})", beta));
}

ProbDist::ProbDist(Eigen::VectorXd probs) : probs_(std::move(probs)) {
    if (probs_.size() == 0) throw ParameterError("empty distribution");
    if (!probs_.allFinite() || (probs_.array() < 0.0).any()) {
        throw NumericError("distribution has negative or non-finite entries");
    }
    if (std::abs(probs_.sum() - 1.0) > 1e-6) {
        throw NumericError(fmt::format("distribution sums to {}, not 1", probs_.sum()));
    }
}

ProbDist ProbDist::uniform(int classes) {
    if (classes < 1) throw ParameterError("uniform distribution needs at least one class");
    return ProbDist(Eigen::VectorXd::Constant(classes, 1.0 / classes));
}

Eigen::Index ProbDist::argmax() const {
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < probs_.size(); ++i) {
        if (probs_(i) > probs_(best)) best = i;
    }
    return best;
}

void HsicConfig::validate() const {
    if (bandwidth == BandwidthPolicy::fixed && !(fixed_bandwidth > 0.0)) {
        throw ParameterError(fmt::format("fixed HSIC bandwidth must be > 0 (got {})", fixed_bandwidth));
    }
    if (min_class_count < 2) throw ParameterError("hsic min_class_count must be >= 2");
}

double similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    if (a.size() != b.size()) {
        throw DimensionError(fmt::format("similarity: sizes {} and {}", a.size(), b.size()));
    }
    if (!a.allFinite() || !b.allFinite()) throw NumericError("similarity: non-finite input");
    return a.dot(b);
}

ProbDist class_probs(const Eigen::VectorXd& z, const Eigen::MatrixXd& class_rows, double tau) {
    check_tau(tau);
    if (class_rows.rows() < 2) throw ParameterError("class_probs needs at least 2 classes");
    if (class_rows.cols() != z.size()) {
        throw DimensionError(fmt::format("class rows have width {} but embedding has {}",
                                         class_rows.cols(), z.size()));
    }
    if (!z.allFinite() || !class_rows.allFinite()) throw NumericError("class_probs: non-finite input");
    Eigen::VectorXd logits = (class_rows * z) / tau;
    Eigen::VectorXd e = (logits.array() - logits.maxCoeff()).exp();
    return ProbDist(e / e.sum());
}

ag::Var class_log_probs(const ag::Var& embeddings, const ag::Var& class_rows, double tau) {
    check_tau(tau);
    if (class_rows.rows() < 2) throw ParameterError("class_log_probs needs at least 2 classes");
    return ag::log_softmax_rows(ag::scale(ag::linear(embeddings, class_rows), 1.0 / tau));
}

ag::Var invariant_ce(const ag::Var& image_invariant, const ag::Var& class_invariant,
                     std::span<const int> labels, double tau) {
    if (image_invariant.rows() < 1) throw DimensionError("invariant_ce: empty batch");
    check_labels(labels, image_invariant.rows(), class_invariant.rows());
    ag::Var logp = class_log_probs(image_invariant, class_invariant, tau);
    Eigen::MatrixXd onehot = Eigen::MatrixXd::Zero(logp.rows(), logp.cols());
    for (std::size_t i = 0; i < labels.size(); ++i) onehot(Eigen::Index(i), labels[i]) = 1.0;
    return ag::scale(ag::sum(ag::mul_const(logp, onehot)), -1.0);
}

double spurious_kl(std::span<const ProbDist> spurious_probs, const ProbDist& prior) {
    double total = 0.0;
    for (std::size_t i = 0; i < spurious_probs.size(); ++i) {
        const auto& p = spurious_probs[i];
        if (p.size() != prior.size()) {
            throw DimensionError(fmt::format("distribution {} has {} classes, prior has {}", i, p.size(),
                                             prior.size()));
        }
        for (Eigen::Index c = 0; c < p.size(); ++c) {
            if (p[c] == 0.0) continue;
            if (prior[c] == 0.0) {
                throw InfiniteDivergenceError(
                    fmt::format("prior is zero at class {} where distribution {} is positive", c, i));
            }
            total += p[c] * (std::log(p[c]) - std::log(prior[c]));
        }
    }
    return total;
}

ag::Var spurious_kl(const ag::Var& spurious_probs, const ProbDist& prior) {
    if (spurious_probs.cols() != prior.size()) {
        throw DimensionError(fmt::format("distributions have {} classes, prior has {}",
                                         spurious_probs.cols(), prior.size()));
    }
    const auto& p = spurious_probs.value();
    Eigen::MatrixXd log_prior(p.rows(), p.cols());
    for (Eigen::Index c = 0; c < p.cols(); ++c) {
        for (Eigen::Index i = 0; i < p.rows(); ++i) {
            if (prior[c] == 0.0) {
                if (p(i, c) > 0.0) {
                    throw InfiniteDivergenceError(fmt::format(
                        "prior is zero at class {} where distribution {} is positive", c, i));
                }
                log_prior(i, c) = 0.0;
            } else {
                log_prior(i, c) = std::log(prior[c]);
            }
        }
    }
    ag::Var neg_entropy = ag::sum(ag::xlogx(spurious_probs));
    ag::Var cross = ag::sum(ag::mul_const(spurious_probs, log_prior));
    return ag::sub(neg_entropy, cross);
}

ag::Var spurious_kl_from_embeddings(const ag::Var& spurious_embeddings, const ag::Var& class_spurious,
                                    double tau, const ProbDist& prior) {
    ag::Var logp = class_log_probs(spurious_embeddings, class_spurious, tau);
    if (logp.cols() != prior.size()) {
        throw DimensionError(fmt::format("{} classes but prior has {}", logp.cols(), prior.size()));
    }
    if ((prior.probs().array() <= 0.0).any()) {
        throw InfiniteDivergenceError("prior must be strictly positive for softmax distributions");
    }
    Eigen::MatrixXd log_prior = prior.probs().array().log().matrix().transpose().replicate(logp.rows(), 1);
    ag::Var p = ag::exp(logp);
    return ag::sum(ag::mul(p, ag::add_const(logp, -log_prior)));
}

double median_bandwidth(const Eigen::MatrixXd& x) {
    std::vector<double> d;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index j = i + 1; j < x.rows(); ++j) d.push_back((x.row(i) - x.row(j)).norm());
    }
    if (d.empty()) return 1.0;
    const auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
    std::nth_element(d.begin(), mid, d.end());
    double med = *mid;
    if (d.size() % 2 == 0) {
        med = 0.5 * (med + *std::max_element(d.begin(), mid));
    }
    return std::max(med, 1e-6);
}

Eigen::MatrixXd rbf_gram(const Eigen::MatrixXd& x, double bandwidth) {
    ag::NoGradGuard guard;
    return rbf_gram(ag::Var::constant(x), bandwidth).value();
}

double hsic_statistic(const Eigen::MatrixXd& k, const Eigen::MatrixXd& l) {
    const auto n = k.rows();
    if (n < 2) return 0.0;
    const Eigen::MatrixXd h = centering(n);
    return (k * h * l * h).trace() / static_cast<double>((n - 1) * (n - 1));
}

ag::Var conditional_hsic(const ag::Var& u, const ag::Var& s, std::span<const int> labels,
                         const HsicConfig& cfg) {
    cfg.validate();
    if (u.rows() != s.rows()) {
        throw DimensionError(fmt::format("conditional_hsic: U has {} rows, S has {}", u.rows(), s.rows()));
    }
    if (static_cast<Eigen::Index>(labels.size()) != u.rows()) {
        throw DimensionError(fmt::format("{} labels for {} rows", labels.size(), u.rows()));
    }
    std::map<int, std::vector<Eigen::Index>> groups;
    for (std::size_t i = 0; i < labels.size(); ++i) groups[labels[i]].push_back(Eigen::Index(i));

    std::vector<ag::Var> terms;
    double weight_total = 0.0;
    for (const auto& [label, idx] : groups) {
        const auto n = static_cast<Eigen::Index>(idx.size());
        if (n < cfg.min_class_count) continue;
        ag::Var uc = ag::gather_rows(u, idx);
        ag::Var sc = ag::gather_rows(s, idx);
        ag::Var k = rbf_gram(uc, bandwidth_for(uc.value(), cfg));
        ag::Var l = rbf_gram(sc, bandwidth_for(sc.value(), cfg));
        ag::Var h = ag::Var::constant(centering(n));
        ag::Var hkh = ag::matmul(h, ag::matmul(k, h));
        const double norm = 1.0 / static_cast<double>((n - 1) * (n - 1));
        terms.push_back(ag::scale(ag::sum(ag::mul(hkh, l)), norm * static_cast<double>(n)));
        weight_total += static_cast<double>(n);
    }
    if (terms.empty()) return ag::Var::scalar(0.0);
    ag::Var total = terms.front();
    for (std::size_t i = 1; i < terms.size(); ++i) total = ag::add(total, terms[i]);
    return ag::scale(total, 1.0 / weight_total);
}

LossBreakdown LossTerms::breakdown() const {
    return {ce.item(), kl.item(), hsic_v.item(), hsic_t.item(), total.item()};
}

LossTerms combine_losses(ag::Var ce, ag::Var kl, ag::Var hsic_v, ag::Var hsic_t,
                         const LossWeights& weights) {
    weights.validate();
    ag::Var total = ce;
    if (weights.alpha_sp != 0.0) total = ag::add(total, ag::scale(kl, weights.alpha_sp));
    if (weights.beta != 0.0) {
        total = ag::add(total, ag::scale(ag::add(hsic_v, hsic_t), weights.beta * 0.5));
    }
    return {total, ce, kl, hsic_v, hsic_t};
}

LossTerms total_loss(const TotalLossInputs& in, const LossWeights& weights, const HsicConfig& hsic) {
    weights.validate();
    const auto classes = in.class_invariant.rows();
    const auto prior = ProbDist::uniform(static_cast<int>(classes));
    ag::Var ce = invariant_ce(in.image.invariant, in.class_invariant, in.labels, weights.tau);
    ag::Var kl = spurious_kl_from_embeddings(in.image.spurious, in.class_spurious, weights.tau, prior);
    if (in.text_side_kl) {
        kl = ag::add(kl, spurious_kl_from_embeddings(in.text.spurious, in.class_spurious, weights.tau, prior));
    }
    ag::Var hv = conditional_hsic(in.image.invariant, in.image.spurious, in.labels, hsic);
    ag::Var ht = conditional_hsic(in.text.invariant, in.text.spurious, in.labels, hsic);
    return combine_losses(ce, kl, hv, ht, weights);
}

void to_json(nlohmann::json& j, const LossWeights& w) {
    j = nlohmann::json{{"tau", w.tau}, {"alpha_sp", w.alpha_sp}, {"beta", w.beta}};
}

void from_json(const nlohmann::json& j, LossWeights& w) {
    w.tau = j.at("tau").get<double>();
    w.alpha_sp = j.at("alpha_sp").get<double>();
    w.beta = j.at("beta").get<double>();
}

void to_json(nlohmann::json& j, const HsicConfig& h) {
    j = nlohmann::json{{"bandwidth", h.bandwidth == BandwidthPolicy::fixed ? "fixed" : "median_heuristic"},
                       {"fixed_bandwidth", h.fixed_bandwidth},
                       {"min_class_count", h.min_class_count}};
}

void from_json(const nlohmann::json& j, HsicConfig& h) {
    const auto policy = j.at("bandwidth").get<std::string>();
    if (policy == "fixed") {
        h.bandwidth = BandwidthPolicy::fixed;
    } else if (policy == "median_heuristic") {
        h.bandwidth = BandwidthPolicy::median_heuristic;
    } else {
        throw ParameterError(fmt::format("unknown HSIC bandwidth policy '{}'", policy));
    }
    h.fixed_bandwidth = j.at("fixed_bandwidth").get<double>();
    h.min_class_count = j.at("min_class_count").get<int>();
}

void to_json(nlohmann::json& j, const LossBreakdown& b) {
    j = nlohmann::json{{"ce", b.ce}, {"kl", b.kl}, {"hsic_v", b.hsic_v}, {"hsic_t", b.hsic_t}, {"total", b.total}};
}

}  // namespace drift::losses
