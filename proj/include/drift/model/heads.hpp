#pragma once

#include "drift/ag/tensor.hpp"
#include "drift/model/config.hpp"

#include <Eigen/Dense>

#include <random>
#include <utility>
#include <vector>

namespace drift::model {

enum class Branch { invariant, spurious };

struct AffineHead {
    ag::Var weight;  // d x d
    ag::Var bias;    // 1 x d

    static AffineHead identity(int dim);
    /// Identity plus N(0, noise^2) perturbation; zero bias.
    static AffineHead near_identity(int dim, double noise, std::mt19937_64& rng);

    ag::Var apply(const ag::Var& rows) const;
};

/// Four independently parameterised heads (2 modalities x 2 branches), each
/// joint_dim -> joint_dim.
struct ProjectionHeads {
    AffineHead vision_invariant;
    AffineHead vision_spurious;
    AffineHead text_invariant;
    AffineHead text_spurious;

    const AffineHead& get(Modality m, Branch b) const;
    AffineHead& get(Modality m, Branch b);
    std::vector<ag::Var> parameters() const;
};

struct DecoupledEmbedding {
    Eigen::VectorXd invariant;
    Eigen::VectorXd spurious;
    Modality modality = Modality::vision;
};

/// Unit-normalised invariant and spurious projections of a single embedding.
/// Throws DegenerateEmbeddingError when a projection is the zero vector.
DecoupledEmbedding decouple(const Eigen::VectorXd& z, const ProjectionHeads& heads, Modality modality);

/// Batched differentiable form over rows: returns (invariant rows, spurious rows).
std::pair<ag::Var, ag::Var> decouple_rows(const ag::Var& z, const ProjectionHeads& heads,
                                          Modality modality);

}  // namespace drift::model
