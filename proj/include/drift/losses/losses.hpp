#pragma once

#include "drift/ag/tensor.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <span>

namespace drift::losses {

/// tau: softmax temperature; alpha_sp: spurious-suppression weight;
/// beta: conditional-independence weight.
struct LossWeights {
    double tau = 0.07;
    double alpha_sp = 0.5;
    double beta = 0.5;

    void validate() const;
    bool operator==(const LossWeights&) const = default;
};

/// Non-negative vector summing to one (within 1e-6).
class ProbDist {
public:
    explicit ProbDist(Eigen::VectorXd probs);
    static ProbDist uniform(int classes);

    const Eigen::VectorXd& probs() const { return probs_; }
    Eigen::Index size() const { return probs_.size(); }
    double operator[](Eigen::Index i) const { return probs_(i); }
    /// Ties resolve to the lowest class index.
    Eigen::Index argmax() const;

private:
    Eigen::VectorXd probs_;
};

enum class BandwidthPolicy { median_heuristic, fixed };

struct HsicConfig {
    BandwidthPolicy bandwidth = BandwidthPolicy::median_heuristic;
    double fixed_bandwidth = 1.0;
    int min_class_count = 2;

    void validate() const;
    bool operator==(const HsicConfig&) const = default;
};

/// Dot product of two unit vectors.
double similarity(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

/// softmax_c(sim(z, row_c) / tau), max-subtracted.
ProbDist class_probs(const Eigen::VectorXd& z, const Eigen::MatrixXd& class_rows, double tau);

/// Row-wise log class probabilities for a batch: N x C.
ag::Var class_log_probs(const ag::Var& embeddings, const ag::Var& class_rows, double tau);

/// Sum over the batch of -log p(y_i | x_i) on the invariant branch.
ag::Var invariant_ce(const ag::Var& image_invariant, const ag::Var& class_invariant,
                     std::span<const int> labels, double tau);

/// Sum over the batch of KL(p_i || p0), with 0 log 0 = 0.
double spurious_kl(std::span<const ProbDist> spurious_probs, const ProbDist& prior);
/// Differentiable form over an N x C matrix of distributions.
ag::Var spurious_kl(const ag::Var& spurious_probs, const ProbDist& prior);
/// KL to the prior computed from logits through log-softmax (stable form used in training).
ag::Var spurious_kl_from_embeddings(const ag::Var& spurious_embeddings, const ag::Var& class_spurious,
                                    double tau, const ProbDist& prior);

/// Median of pairwise Euclidean distances between rows, floored at 1e-6.
double median_bandwidth(const Eigen::MatrixXd& x);
Eigen::MatrixXd rbf_gram(const Eigen::MatrixXd& x, double bandwidth);
/// trace(K H L H) / (n - 1)^2.
double hsic_statistic(const Eigen::MatrixXd& k, const Eigen::MatrixXd& l);

/// Class-conditional HSIC between rows of U and S: per qualifying class
/// (n_c >= min_class_count) the biased HSIC with RBF kernels, averaged with
/// weights n_c. Zero when no class qualifies. Bandwidths are constants.
ag::Var conditional_hsic(const ag::Var& u, const ag::Var& s, std::span<const int> labels,
                         const HsicConfig& cfg);

struct LossBreakdown {
    double ce = 0.0;
    double kl = 0.0;
    double hsic_v = 0.0;
    double hsic_t = 0.0;
    double total = 0.0;
};

struct LossTerms {
    ag::Var total;
    ag::Var ce;
    ag::Var kl;
    ag::Var hsic_v;
    ag::Var hsic_t;

    LossBreakdown breakdown() const;
};

/// ce + alpha_sp * kl + beta * (hsic_v + hsic_t) / 2.
LossTerms combine_losses(ag::Var ce, ag::Var kl, ag::Var hsic_v, ag::Var hsic_t,
                         const LossWeights& weights);

struct DecoupledRows {
    ag::Var invariant;  // N x d
    ag::Var spurious;   // N x d
};

struct TotalLossInputs {
    DecoupledRows image;
    DecoupledRows text;              // per-sample caption embeddings
    ag::Var class_invariant;         // C x d
    ag::Var class_spurious;          // C x d
    std::span<const int> labels;
    /// Adds the spurious caption embeddings scored against spurious class rows
    /// to the KL term.
    bool text_side_kl = false;
};

/// Full objective. Spurious distributions use the spurious image rows against
/// the spurious class rows with the same tau; the prior is uniform over C.
LossTerms total_loss(const TotalLossInputs& in, const LossWeights& weights, const HsicConfig& hsic);

void to_json(nlohmann::json& j, const LossWeights& w);
void from_json(const nlohmann::json& j, LossWeights& w);
void to_json(nlohmann::json& j, const HsicConfig& h);
void from_json(const nlohmann::json& j, HsicConfig& h);
void to_json(nlohmann::json& j, const LossBreakdown& b);

}  // namespace drift::losses
