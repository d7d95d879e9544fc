#pragma once

// Minimal reverse-mode automatic differentiation over dense double matrices.
//
// A Var is a handle to a node in a dynamically recorded graph. Leaves created
// with requires_grad = true are parameters; every other leaf is a constant and
// never receives a gradient buffer. Calling backward() on a 1x1 Var walks the
// graph in reverse topological order and accumulates into parameter grads.

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace drift::ag {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

struct Node {
    Matrix value;
    Matrix grad;  // empty until a gradient reaches this node
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward_fn;

    void accumulate(const Matrix& g);
};

class Var {
public:
    Var() = default;
    explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}

    static Var constant(Matrix value);
    static Var parameter(Matrix value);
    static Var scalar(double v) { return constant(Matrix::Constant(1, 1, v)); }

    const Matrix& value() const { return node_->value; }
    Matrix& mutable_value() { return node_->value; }
    const Matrix& grad() const { return node_->grad; }
    bool has_grad() const { return node_->grad.size() > 0; }
    bool requires_grad() const { return node_->requires_grad; }

    Eigen::Index rows() const { return node_->value.rows(); }
    Eigen::Index cols() const { return node_->value.cols(); }
    double item() const;

    void zero_grad() { node_->grad.resize(0, 0); }
    void backward() const;

    bool defined() const { return node_ != nullptr; }
    const std::shared_ptr<Node>& node() const { return node_; }

private:
    std::shared_ptr<Node> node_;
};

/// While alive on a thread, operations record no graph edges.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

bool grad_enabled();

// Elementwise and structural operations. Shapes must conform exactly unless
// noted; mismatches raise DimensionError.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);                // Hadamard
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var add_row(const Var& a, const Var& row);          // broadcast 1 x cols over rows
Var add_col(const Var& a, const Var& col);          // broadcast rows x 1 over cols
Var mul_col(const Var& a, const Var& col);          // scale row i by col(i)
Var add_const(const Var& a, const Matrix& c);
Var mul_const(const Var& a, const Matrix& c);

Var matmul(const Var& a, const Var& b);
Var linear(const Var& x, const Var& w);             // x * w^T
Var transpose(const Var& a);

Var sum(const Var& a);                              // 1 x 1
Var mean(const Var& a);
Var row_sum(const Var& a);                          // rows x 1

Var exp(const Var& a);
Var log(const Var& a);
Var gelu(const Var& a);                             // tanh approximation
Var xlogx(const Var& a);                            // with 0 log 0 = 0

Var softmax_rows(const Var& a);
Var log_softmax_rows(const Var& a);
Var layer_norm_rows(const Var& a, const Var& gamma, const Var& beta, double eps = 1e-5);
Var l2_normalize_rows(const Var& a, double min_norm = 1e-12);
Var pairwise_sq_dists(const Var& a);                // n x n, |a_i - a_j|^2

Var concat_rows(const std::vector<Var>& parts);
Var concat_cols(const std::vector<Var>& parts);
Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count);
Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count);
Var gather_rows(const Var& a, const std::vector<Eigen::Index>& rows);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(double s, const Var& a) { return scale(a, s); }

}  // namespace drift::ag
