#include "drift/ag/tensor.hpp"

#include "drift/errors.hpp"

#include <fmt/format.h>

#include <cmath>
#include <unordered_set>

namespace drift::ag {
namespace {

thread_local bool g_grad_enabled = true;

void require_same_shape(const char* op, const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw DimensionError(fmt::format("{}: shape mismatch {}x{} vs {}x{}", op, a.rows(),
                                         a.cols(), b.rows(), b.cols()));
    }
}

// Records a node when any parent needs a gradient and recording is enabled.
Var make(Matrix value, std::vector<Var> parents, std::function<void(Node&)> fn) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    if (!g_grad_enabled) return Var(node);
    bool needs = false;
    for (const auto& p : parents) needs = needs || p.requires_grad();
    if (!needs) return Var(node);
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (const auto& p : parents) node->parents.push_back(p.node());
    node->backward_fn = std::move(fn);
    return Var(node);
}

inline void push(Node& self, std::size_t i, const Matrix& g) {
    auto& p = self.parents[i];
    if (p->requires_grad) p->accumulate(g);
}

}  // namespace

void Node::accumulate(const Matrix& g) {
    if (grad.size() == 0) {
        grad = g;
    } else {
        grad += g;
    }
}

Var Var::constant(Matrix value) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    return Var(node);
}

Var Var::parameter(Matrix value) {
    auto node = std::make_shared<Node>();
    node->value = std::move(value);
    node->requires_grad = true;
    return Var(node);
}

double Var::item() const {
    if (rows() != 1 || cols() != 1) {
        throw DimensionError(fmt::format("item() on a {}x{} value", rows(), cols()));
    }
    return node_->value(0, 0);
}

void Var::backward() const {
    if (rows() != 1 || cols() != 1) {
        throw DimensionError("backward() requires a scalar output");
    }
    if (!node_->requires_grad) return;

    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
    seen.insert(node_.get());
    while (!stack.empty()) {
        auto& [n, idx] = stack.back();
        if (idx < n->parents.size()) {
            Node* p = n->parents[idx++].get();
            if (p->requires_grad && !seen.count(p)) {
                seen.insert(p);
                stack.emplace_back(p, 0);
            }
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }
    for (Node* n : order) {
        if (n->backward_fn) n->grad.resize(0, 0);
    }
    node_->grad = Matrix::Ones(1, 1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Node* n = *it;
        if (n->backward_fn && n->grad.size() > 0) n->backward_fn(*n);
    }
}

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

Var add(const Var& a, const Var& b) {
    require_same_shape("add", a.value(), b.value());
    return make(a.value() + b.value(), {a, b}, [](Node& s) {
        push(s, 0, s.grad);
        push(s, 1, s.grad);
    });
}

Var sub(const Var& a, const Var& b) {
    require_same_shape("sub", a.value(), b.value());
    return make(a.value() - b.value(), {a, b}, [](Node& s) {
        push(s, 0, s.grad);
        push(s, 1, -s.grad);
    });
}

Var mul(const Var& a, const Var& b) {
    require_same_shape("mul", a.value(), b.value());
    Matrix av = a.value();
    Matrix bv = b.value();
    return make(av.cwiseProduct(bv), {a, b}, [av, bv](Node& s) {
        push(s, 0, s.grad.cwiseProduct(bv));
        push(s, 1, s.grad.cwiseProduct(av));
    });
}

Var scale(const Var& a, double k) {
    return make(a.value() * k, {a}, [k](Node& s) { push(s, 0, s.grad * k); });
}

Var add_scalar(const Var& a, double k) {
    return make(a.value().array() + k, {a}, [](Node& s) { push(s, 0, s.grad); });
}

Var add_row(const Var& a, const Var& row) {
    if (row.rows() != 1 || row.cols() != a.cols()) {
        throw DimensionError(fmt::format("add_row: row is {}x{}, expected 1x{}", row.rows(),
                                         row.cols(), a.cols()));
    }
    Matrix v = a.value().rowwise() + row.value().row(0);
    return make(std::move(v), {a, row}, [](Node& s) {
        push(s, 0, s.grad);
        push(s, 1, s.grad.colwise().sum());
    });
}

Var add_col(const Var& a, const Var& col) {
    if (col.cols() != 1 || col.rows() != a.rows()) {
        throw DimensionError(fmt::format("add_col: col is {}x{}, expected {}x1", col.rows(),
                                         col.cols(), a.rows()));
    }
    Matrix v = a.value().colwise() + col.value().col(0);
    return make(std::move(v), {a, col}, [](Node& s) {
        push(s, 0, s.grad);
        push(s, 1, s.grad.rowwise().sum());
    });
}

Var mul_col(const Var& a, const Var& col) {
    if (col.cols() != 1 || col.rows() != a.rows()) {
        throw DimensionError(fmt::format("mul_col: col is {}x{}, expected {}x1", col.rows(),
                                         col.cols(), a.rows()));
    }
    Matrix av = a.value();
    Vector cv = col.value().col(0);
    Matrix v = cv.asDiagonal() * av;
    return make(std::move(v), {a, col}, [av, cv](Node& s) {
        push(s, 0, cv.asDiagonal() * s.grad);
        push(s, 1, s.grad.cwiseProduct(av).rowwise().sum());
    });
}

Var add_const(const Var& a, const Matrix& c) {
    require_same_shape("add_const", a.value(), c);
    return make(a.value() + c, {a}, [](Node& s) { push(s, 0, s.grad); });
}

Var mul_const(const Var& a, const Matrix& c) {
    require_same_shape("mul_const", a.value(), c);
    return make(a.value().cwiseProduct(c), {a},
                [c](Node& s) { push(s, 0, s.grad.cwiseProduct(c)); });
}

Var matmul(const Var& a, const Var& b) {
    if (a.cols() != b.rows()) {
        throw DimensionError(fmt::format("matmul: inner dimensions {} vs {}", a.cols(), b.rows()));
    }
    Matrix av = a.value();
    Matrix bv = b.value();
    return make(av * bv, {a, b}, [av, bv](Node& s) {
        if (s.parents[0]->requires_grad) push(s, 0, s.grad * bv.transpose());
        if (s.parents[1]->requires_grad) push(s, 1, av.transpose() * s.grad);
    });
}

Var linear(const Var& x, const Var& w) {
    if (x.cols() != w.cols()) {
        throw DimensionError(
            fmt::format("linear: input width {} does not match weight d_in {}", x.cols(), w.cols()));
    }
    Matrix xv = x.value();
    Matrix wv = w.value();
    return make(xv * wv.transpose(), {x, w}, [xv, wv](Node& s) {
        if (s.parents[0]->requires_grad) push(s, 0, s.grad * wv);
        if (s.parents[1]->requires_grad) push(s, 1, s.grad.transpose() * xv);
    });
}

Var transpose(const Var& a) {
    return make(a.value().transpose(), {a}, [](Node& s) { push(s, 0, s.grad.transpose()); });
}

Var sum(const Var& a) {
    const auto r = a.rows();
    const auto c = a.cols();
    return make(Matrix::Constant(1, 1, a.value().sum()), {a},
                [r, c](Node& s) { push(s, 0, Matrix::Constant(r, c, s.grad(0, 0))); });
}

Var mean(const Var& a) {
    const double n = static_cast<double>(a.value().size());
    return scale(sum(a), 1.0 / n);
}

Var row_sum(const Var& a) {
    const auto c = a.cols();
    return make(a.value().rowwise().sum(), {a},
                [c](Node& s) { push(s, 0, s.grad.col(0).replicate(1, c)); });
}

Var exp(const Var& a) {
    Matrix v = a.value().array().exp();
    return make(v, {a}, [v](Node& s) { push(s, 0, s.grad.cwiseProduct(v)); });
}

Var log(const Var& a) {
    Matrix av = a.value();
    return make(av.array().log(), {a},
                [av](Node& s) { push(s, 0, s.grad.cwiseQuotient(av)); });
}

Var gelu(const Var& a) {
    static constexpr double k = 0.7978845608028654;  // sqrt(2/pi)
    static constexpr double c = 0.044715;
    Matrix x = a.value();
    Matrix t = (k * (x.array() + c * x.array().cube())).tanh();
    Matrix v = 0.5 * x.array() * (1.0 + t.array());
    return make(std::move(v), {a}, [x, t](Node& s) {
        Matrix d = 0.5 * (1.0 + t.array()) +
                   0.5 * x.array() * (1.0 - t.array().square()) * k *
                       (1.0 + 3.0 * c * x.array().square());
        push(s, 0, s.grad.cwiseProduct(d));
    });
}

Var xlogx(const Var& a) {
    Matrix x = a.value();
    Matrix v = x.unaryExpr([](double p) { return p > 0.0 ? p * std::log(p) : 0.0; });
    return make(std::move(v), {a}, [x](Node& s) {
        Matrix d = x.unaryExpr([](double p) { return std::log(std::max(p, 1e-300)) + 1.0; });
        push(s, 0, s.grad.cwiseProduct(d));
    });
}

Var softmax_rows(const Var& a) {
    Matrix v = a.value();
    for (Eigen::Index i = 0; i < v.rows(); ++i) {
        const double m = v.row(i).maxCoeff();
        v.row(i) = (v.row(i).array() - m).exp();
        v.row(i) /= v.row(i).sum();
    }
    return make(v, {a}, [v](Node& s) {
        Vector dots = s.grad.cwiseProduct(v).rowwise().sum();
        push(s, 0, v.cwiseProduct(s.grad.colwise() - dots));
    });
}

Var log_softmax_rows(const Var& a) {
    Matrix v = a.value();
    for (Eigen::Index i = 0; i < v.rows(); ++i) {
        const double m = v.row(i).maxCoeff();
        const double lse = m + std::log((v.row(i).array() - m).exp().sum());
        v.row(i).array() -= lse;
    }
    Matrix p = v.array().exp();
    return make(std::move(v), {a}, [p](Node& s) {
        Vector g = s.grad.rowwise().sum();
        push(s, 0, s.grad - p.cwiseProduct(g.replicate(1, p.cols())));
    });
}

Var layer_norm_rows(const Var& a, const Var& gamma, const Var& beta, double eps) {
    const auto n = a.rows();
    const auto d = a.cols();
    if (gamma.rows() != 1 || gamma.cols() != d || beta.rows() != 1 || beta.cols() != d) {
        throw DimensionError(fmt::format("layer_norm: affine params must be 1x{}", d));
    }
    Matrix xhat(n, d);
    Vector inv_std(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double mu = a.value().row(i).mean();
        const double var = (a.value().row(i).array() - mu).square().mean();
        inv_std(i) = 1.0 / std::sqrt(var + eps);
        xhat.row(i) = (a.value().row(i).array() - mu) * inv_std(i);
    }
    RowVector g = gamma.value().row(0);
    Matrix v = (xhat.array().rowwise() * g.array()).rowwise() + beta.value().row(0).array();
    return make(std::move(v), {a, gamma, beta}, [xhat, inv_std, g, d](Node& s) {
        if (s.parents[0]->requires_grad) {
            Matrix dxhat = s.grad.array().rowwise() * g.array();
            Vector m1 = dxhat.rowwise().mean();
            Vector m2 = dxhat.cwiseProduct(xhat).rowwise().mean();
            Matrix dx = dxhat;
            for (Eigen::Index i = 0; i < dx.rows(); ++i) {
                dx.row(i) = (dxhat.row(i).array() - m1(i) - xhat.row(i).array() * m2(i)) * inv_std(i);
            }
            push(s, 0, dx);
        }
        push(s, 1, s.grad.cwiseProduct(xhat).colwise().sum());
        push(s, 2, s.grad.colwise().sum());
        (void)d;
    });
}

Var l2_normalize_rows(const Var& a, double min_norm) {
    Matrix v = a.value();
    Vector norms(v.rows());
    for (Eigen::Index i = 0; i < v.rows(); ++i) {
        norms(i) = v.row(i).norm();
        if (!(norms(i) > min_norm)) {
            throw DegenerateEmbeddingError(
                fmt::format("cannot normalize row {}: norm {} is zero or undefined", i, norms(i)));
        }
        v.row(i) /= norms(i);
    }
    return make(v, {a}, [v, norms](Node& s) {
        Vector dots = s.grad.cwiseProduct(v).rowwise().sum();
        Matrix dx = s.grad - v.cwiseProduct(dots.replicate(1, v.cols()));
        dx = norms.cwiseInverse().asDiagonal() * dx;
        push(s, 0, dx);
    });
}

Var pairwise_sq_dists(const Var& a) {
    const Matrix& x = a.value();
    const auto n = x.rows();
    Matrix v = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            v(i, j) = v(j, i) = (x.row(i) - x.row(j)).squaredNorm();
        }
    }
    Matrix xv = x;
    return make(std::move(v), {a}, [xv](Node& s) {
        Matrix gs = s.grad + s.grad.transpose();
        Vector rs = gs.rowwise().sum();
        push(s, 0, 2.0 * (rs.asDiagonal() * xv - gs * xv));
    });
}

Var concat_rows(const std::vector<Var>& parts) {
    if (parts.empty()) throw DimensionError("concat_rows: no inputs");
    const auto c = parts.front().cols();
    Eigen::Index total = 0;
    for (const auto& p : parts) {
        if (p.cols() != c) {
            throw DimensionError(
                fmt::format("concat_rows: column mismatch {} vs {}", p.cols(), c));
        }
        total += p.rows();
    }
    Matrix v(total, c);
    std::vector<Eigen::Index> offsets;
    Eigen::Index off = 0;
    for (const auto& p : parts) {
        v.middleRows(off, p.rows()) = p.value();
        offsets.push_back(off);
        off += p.rows();
    }
    return make(std::move(v), parts, [offsets](Node& s) {
        for (std::size_t i = 0; i < s.parents.size(); ++i) {
            if (!s.parents[i]->requires_grad) continue;
            const auto r = s.parents[i]->value.rows();
            s.parents[i]->accumulate(s.grad.middleRows(offsets[i], r));
        }
    });
}

Var concat_cols(const std::vector<Var>& parts) {
    if (parts.empty()) throw DimensionError("concat_cols: no inputs");
    const auto r = parts.front().rows();
    Eigen::Index total = 0;
    for (const auto& p : parts) {
        if (p.rows() != r) {
            throw DimensionError(fmt::format("concat_cols: row mismatch {} vs {}", p.rows(), r));
        }
        total += p.cols();
    }
    Matrix v(r, total);
    std::vector<Eigen::Index> offsets;
    Eigen::Index off = 0;
    for (const auto& p : parts) {
        v.middleCols(off, p.cols()) = p.value();
        offsets.push_back(off);
        off += p.cols();
    }
    return make(std::move(v), parts, [offsets](Node& s) {
        for (std::size_t i = 0; i < s.parents.size(); ++i) {
            if (!s.parents[i]->requires_grad) continue;
            const auto c = s.parents[i]->value.cols();
            s.parents[i]->accumulate(s.grad.middleCols(offsets[i], c));
        }
    });
}

Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count) {
    if (start < 0 || count < 0 || start + count > a.rows()) {
        throw DimensionError(
            fmt::format("slice_rows: [{}, {}) out of range for {} rows", start, start + count, a.rows()));
    }
    const auto r = a.rows();
    const auto c = a.cols();
    return make(a.value().middleRows(start, count), {a}, [start, count, r, c](Node& s) {
        Matrix g = Matrix::Zero(r, c);
        g.middleRows(start, count) = s.grad;
        push(s, 0, g);
    });
}

Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count) {
    if (start < 0 || count < 0 || start + count > a.cols()) {
        throw DimensionError(
            fmt::format("slice_cols: [{}, {}) out of range for {} cols", start, start + count, a.cols()));
    }
    const auto r = a.rows();
    const auto c = a.cols();
    return make(a.value().middleCols(start, count), {a}, [start, count, r, c](Node& s) {
        Matrix g = Matrix::Zero(r, c);
        g.middleCols(start, count) = s.grad;
        push(s, 0, g);
    });
}

Var gather_rows(const Var& a, const std::vector<Eigen::Index>& rows) {
    Matrix v(static_cast<Eigen::Index>(rows.size()), a.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] < 0 || rows[i] >= a.rows()) {
            throw DimensionError(fmt::format("gather_rows: index {} out of range", rows[i]));
        }
        v.row(static_cast<Eigen::Index>(i)) = a.value().row(rows[i]);
    }
    const auto r = a.rows();
    const auto c = a.cols();
    return make(std::move(v), {a}, [rows, r, c](Node& s) {
        Matrix g = Matrix::Zero(r, c);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            g.row(rows[i]) += s.grad.row(static_cast<Eigen::Index>(i));
        }
        push(s, 0, g);
    });
}

}  // namespace drift::ag
