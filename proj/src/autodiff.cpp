#include "gchs/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace gchs::ad {

namespace {

std::string shape(const Matrix& m) { return std::to_string(m.rows()) + "x" + std::to_string(m.cols()); }

Tape& same_tape(const Var& a, const Var& b) {
    if (!a.valid() || !b.valid() || a.tape() != b.tape()) throw UsageError("operands live on different tapes");
    return *a.tape();
}

enum class Expand { none, scalar, row };

Expand expansion(const Matrix& a, const Matrix& b, const char* op) {
    if (a.rows() == b.rows() && a.cols() == b.cols()) return Expand::none;
    if (b.rows() == 1 && b.cols() == 1) return Expand::scalar;
    if (b.rows() == 1 && b.cols() == a.cols()) return Expand::row;
    throw DimensionError(std::string(op) + ": cannot combine " + shape(a) + " with " + shape(b));
}

Matrix expand(const Matrix& b, Expand mode, Eigen::Index rows, Eigen::Index cols) {
    switch (mode) {
        case Expand::scalar:
            return Matrix::Constant(rows, cols, b(0, 0));
        case Expand::row:
            return b.replicate(rows, 1);
        case Expand::none:
            break;
    }
    return b;
}

Matrix reduce(const Matrix& g, Expand mode) {
    switch (mode) {
        case Expand::scalar:
            return Matrix::Constant(1, 1, g.sum());
        case Expand::row:
            return g.colwise().sum();
        case Expand::none:
            break;
    }
    return g;
}

template <class Forward, class Derivative>
Var unary(const Var& a, Forward forward, Derivative derivative) {
    Matrix out = a.value().unaryExpr(forward);
    return a.tape()->record(std::move(out), {a}, [a, derivative](Tape& t, const Matrix& adj) {
        const Matrix& x = a.value();
        Matrix g(x.rows(), x.cols());
        for (Eigen::Index i = 0; i < x.size(); ++i) g(i) = adj(i) * derivative(x(i));
        t.accumulate(a, g);
    });
}

}  // namespace

const Matrix& Var::value() const { return tape_->node(*this).value; }

const Matrix& Var::grad() const {
    const auto& n = tape_->node(*this);
    if (n.grad.size() == 0 && n.value.size() != 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
    return n.grad;
}

double Var::scalar() const {
    const Matrix& v = value();
    if (v.rows() != 1 || v.cols() != 1) throw DimensionError("expected a 1x1 value, got " + shape(v));
    return v(0, 0);
}

bool Var::requires_grad() const { return tape_->node(*this).requires_grad; }

const Tape::Node& Tape::node(const Var& v) const {
    if (v.tape_ != this || v.id_ >= nodes_.size()) throw UsageError("variable does not belong to this tape");
    return nodes_[v.id_];
}

Var Tape::constant(Matrix value) {
    nodes_.push_back(Node{std::move(value), Matrix(), false, nullptr});
    return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(Matrix value) {
    nodes_.push_back(Node{std::move(value), Matrix(), true, nullptr});
    return Var(this, nodes_.size() - 1);
}

Var Tape::record(Matrix value, std::initializer_list<Var> parents, Backward backward) {
    bool needs_grad = false;
    for (const auto& p : parents) {
        if (p.tape_ != this) throw UsageError("parent variable belongs to another tape");
        needs_grad = needs_grad || nodes_[p.id_].requires_grad;
    }
    nodes_.push_back(Node{std::move(value), Matrix(), needs_grad, needs_grad ? std::move(backward) : nullptr});
    return Var(this, nodes_.size() - 1);
}

void Tape::accumulate(const Var& target, Matrix contribution) {
    if (!nodes_[target.id_].requires_grad) return;
    Matrix& slot = adjoints_[target.id_];
    if (slot.size() == 0) {
        slot = std::move(contribution);
    } else {
        slot += contribution;
    }
}

void Tape::backward(const Var& loss) {
    const Node& root = node(loss);
    if (root.value.rows() != 1 || root.value.cols() != 1) {
        throw UsageError("backward needs a scalar loss, got " + shape(root.value));
    }
    adjoints_.assign(loss.id_ + 1, Matrix());
    if (root.requires_grad) adjoints_[loss.id_] = Matrix::Ones(1, 1);
    for (std::size_t i = loss.id_ + 1; i-- > 0;) {
        Node& n = nodes_[i];
        if (!n.requires_grad || adjoints_[i].size() == 0) continue;
        // Move out first: a backward rule never writes its own slot.
        Matrix adj = std::move(adjoints_[i]);
        if (n.backward) n.backward(*this, adj);
        if (n.grad.size() == 0) {
            n.grad = std::move(adj);
        } else {
            n.grad += adj;
        }
    }
    adjoints_.clear();
}

void Tape::zero_grad() {
    for (auto& n : nodes_) n.grad.resize(0, 0);
}

Var matmul(const Var& a, const Var& b) {
    Tape& t = same_tape(a, b);
    if (a.cols() != b.rows()) throw DimensionError("matmul: " + shape(a.value()) + " times " + shape(b.value()));
    return t.record(a.value() * b.value(), {a, b}, [a, b](Tape& t, const Matrix& adj) {
        if (a.requires_grad()) t.accumulate(a, adj * b.value().transpose());
        if (b.requires_grad()) t.accumulate(b, a.value().transpose() * adj);
    });
}

Var transpose(const Var& a) {
    return a.tape()->record(a.value().transpose(), {a},
                            [a](Tape& t, const Matrix& adj) { t.accumulate(a, adj.transpose()); });
}

Var trace(const Var& a) {
    if (a.rows() != a.cols()) throw DimensionError("trace of non-square " + shape(a.value()));
    return a.tape()->record(Matrix::Constant(1, 1, a.value().trace()), {a}, [a](Tape& t, const Matrix& adj) {
        t.accumulate(a, adj(0, 0) * Matrix::Identity(a.rows(), a.cols()));
    });
}

Var sum(const Var& a) {
    return a.tape()->record(Matrix::Constant(1, 1, a.value().sum()), {a}, [a](Tape& t, const Matrix& adj) {
        t.accumulate(a, Matrix::Constant(a.rows(), a.cols(), adj(0, 0)));
    });
}

Var add(const Var& a, const Var& b) {
    Tape& t = same_tape(a, b);
    const Expand mode = expansion(a.value(), b.value(), "add");
    Matrix out = a.value() + expand(b.value(), mode, a.rows(), a.cols());
    return t.record(std::move(out), {a, b}, [a, b, mode](Tape& t, const Matrix& adj) {
        t.accumulate(a, adj);
        if (b.requires_grad()) t.accumulate(b, reduce(adj, mode));
    });
}

Var sub(const Var& a, const Var& b) {
    Tape& t = same_tape(a, b);
    const Expand mode = expansion(a.value(), b.value(), "sub");
    Matrix out = a.value() - expand(b.value(), mode, a.rows(), a.cols());
    return t.record(std::move(out), {a, b}, [a, b, mode](Tape& t, const Matrix& adj) {
        t.accumulate(a, adj);
        if (b.requires_grad()) t.accumulate(b, reduce(-adj, mode));
    });
}

Var mul(const Var& a, const Var& b) {
    Tape& t = same_tape(a, b);
    const Expand mode = expansion(a.value(), b.value(), "mul");
    Matrix out = a.value().cwiseProduct(expand(b.value(), mode, a.rows(), a.cols()));
    return t.record(std::move(out), {a, b}, [a, b, mode](Tape& t, const Matrix& adj) {
        if (a.requires_grad()) t.accumulate(a, adj.cwiseProduct(expand(b.value(), mode, a.rows(), a.cols())));
        if (b.requires_grad()) t.accumulate(b, reduce(adj.cwiseProduct(a.value()), mode));
    });
}

Var div(const Var& a, const Var& b) {
    Tape& t = same_tape(a, b);
    const Expand mode = expansion(a.value(), b.value(), "div");
    if ((b.value().array() == 0.0).any()) throw DomainError("div: zero divisor");
    const Matrix denom = expand(b.value(), mode, a.rows(), a.cols());
    Matrix out = a.value().cwiseQuotient(denom);
    return t.record(std::move(out), {a, b}, [a, b, mode](Tape& t, const Matrix& adj) {
        const Matrix denom = expand(b.value(), mode, a.rows(), a.cols());
        if (a.requires_grad()) t.accumulate(a, adj.cwiseQuotient(denom));
        if (b.requires_grad()) {
            const Matrix g = -(adj.array() * a.value().array() / denom.array().square()).matrix();
            t.accumulate(b, reduce(g, mode));
        }
    });
}

Var scale(const Var& a, double s) {
    return a.tape()->record(a.value() * s, {a}, [a, s](Tape& t, const Matrix& adj) { t.accumulate(a, adj * s); });
}

Var shift(const Var& a, double s) {
    return a.tape()->record((a.value().array() + s).matrix(), {a},
                            [a](Tape& t, const Matrix& adj) { t.accumulate(a, adj); });
}

Var exp(const Var& a) {
    return a.tape()->record(a.value().array().exp().matrix(), {a}, [a](Tape& t, const Matrix& adj) {
        t.accumulate(a, adj.cwiseProduct(a.value().array().exp().matrix()));
    });
}

Var log(const Var& a) {
    if ((a.value().array() <= 0.0).any()) throw DomainError("log: non-positive operand");
    return a.tape()->record(a.value().array().log().matrix(), {a}, [a](Tape& t, const Matrix& adj) {
        t.accumulate(a, adj.cwiseQuotient(a.value()));
    });
}

Var sigmoid(const Var& a) {
    Matrix out = (1.0 + (-a.value().array()).exp()).inverse().matrix();
    Matrix slope = (out.array() * (1.0 - out.array())).matrix();
    return a.tape()->record(std::move(out), {a}, [a, slope = std::move(slope)](Tape& t, const Matrix& adj) {
        t.accumulate(a, adj.cwiseProduct(slope));
    });
}

// Subgradient 0 at exactly 0.
Var relu(const Var& a) {
    return a.tape()->record(a.value().cwiseMax(0.0), {a}, [a](Tape& t, const Matrix& adj) {
        t.accumulate(a, (a.value().array() > 0.0).select(adj, 0.0).matrix());
    });
}

Var elu(const Var& a) {
    const auto x = a.value().array();
    Matrix out = (x > 0.0).select(x, x.exp() - 1.0).matrix();
    return a.tape()->record(std::move(out), {a}, [a](Tape& t, const Matrix& adj) {
        const auto x = a.value().array();
        t.accumulate(a, (x > 0.0).select(adj.array(), adj.array() * x.exp()).matrix());
    });
}

Var power(const Var& a, double p) {
    const bool integral = p == std::floor(p);
    if (!integral && (a.value().array() <= 0.0).any()) throw DomainError("power: non-positive base");
    if (p < 0.0 && (a.value().array() == 0.0).any()) throw DomainError("power: zero base with negative exponent");
    return unary(a, [p](double x) { return std::pow(x, p); }, [p](double x) { return p * std::pow(x, p - 1.0); });
}

Var straight_through_round(const Var& a) {
    return a.tape()->record(a.value().unaryExpr([](double x) { return std::floor(x + 0.5); }), {a},
                            [a](Tape& t, const Matrix& adj) { t.accumulate(a, adj); });
}

Var row_norms(const Var& a, double floor) {
    const Vector raw = a.value().rowwise().norm();
    Matrix out = raw.cwiseMax(floor);
    return a.tape()->record(std::move(out), {a}, [a, raw, floor](Tape& t, const Matrix& adj) {
        Matrix g = Matrix::Zero(a.rows(), a.cols());
        for (Eigen::Index i = 0; i < a.rows(); ++i) {
            if (raw(i) > floor) g.row(i) = a.value().row(i) * (adj(i, 0) / raw(i));
        }
        t.accumulate(a, g);
    });
}

Var diagonal(const Var& a) {
    if (a.rows() != a.cols()) throw DimensionError("diagonal of non-square " + shape(a.value()));
    return a.tape()->record(Matrix(a.value().diagonal()), {a}, [a](Tape& t, const Matrix& adj) {
        Matrix g = Matrix::Zero(a.rows(), a.cols());
        g.diagonal() = adj.col(0);
        t.accumulate(a, g);
    });
}

Var row_logsumexp(const Var& a, const Matrix* exclude) {
    const Matrix& x = a.value();
    if (exclude && (exclude->rows() != x.rows() || exclude->cols() != x.cols())) {
        throw DimensionError("row_logsumexp: exclusion mask shape mismatch");
    }
    constexpr double kSkip = -std::numeric_limits<double>::infinity();
    Matrix masked = exclude ? Matrix((exclude->array() != 0.0).select(kSkip, x.array())) : x;
    const Eigen::VectorXd peak = masked.rowwise().maxCoeff();
    // NaN inputs propagate so the caller can report a diverged loss.
    if ((peak.array() == kSkip).any()) throw DomainError("row_logsumexp: a row has no finite entry");
    // Softmax weights are kept for the backward rule; exp(-inf) = 0 drops
    // excluded entries.
    Matrix weights = (masked.colwise() - peak).array().exp().matrix();
    const Eigen::VectorXd total = weights.rowwise().sum();
    weights.array().colwise() /= total.array();
    Matrix out = (peak.array() + total.array().log()).matrix();
    return a.tape()->record(std::move(out), {a}, [a, weights = std::move(weights)](Tape& t, const Matrix& adj) {
        t.accumulate(a, (weights.array().colwise() * adj.col(0).array()).matrix());
    });
}

Var concat_cols(const Var& a, const Var& b) {
    Tape& t = same_tape(a, b);
    if (a.rows() != b.rows()) throw DimensionError("concat_cols: " + shape(a.value()) + " and " + shape(b.value()));
    Matrix out(a.rows(), a.cols() + b.cols());
    out << a.value(), b.value();
    return t.record(std::move(out), {a, b}, [a, b](Tape& t, const Matrix& adj) {
        t.accumulate(a, adj.leftCols(a.cols()));
        t.accumulate(b, adj.rightCols(b.cols()));
    });
}

Var concat_rows(const Var& a, const Var& b) {
    Tape& t = same_tape(a, b);
    if (a.cols() != b.cols()) throw DimensionError("concat_rows: " + shape(a.value()) + " and " + shape(b.value()));
    Matrix out(a.rows() + b.rows(), a.cols());
    out << a.value(), b.value();
    return t.record(std::move(out), {a, b}, [a, b](Tape& t, const Matrix& adj) {
        t.accumulate(a, adj.topRows(a.rows()));
        t.accumulate(b, adj.bottomRows(b.rows()));
    });
}

Var select_rows(const Var& a, std::span<const int> rows) {
    std::vector<int> idx(rows.begin(), rows.end());
    Matrix out(static_cast<Eigen::Index>(idx.size()), a.cols());
    for (std::size_t r = 0; r < idx.size(); ++r) {
        if (idx[r] < 0 || idx[r] >= a.rows()) throw IndexError("select_rows: row " + std::to_string(idx[r]));
        out.row(static_cast<Eigen::Index>(r)) = a.value().row(idx[r]);
    }
    return a.tape()->record(std::move(out), {a}, [a, idx](Tape& t, const Matrix& adj) {
        Matrix g = Matrix::Zero(a.rows(), a.cols());
        for (std::size_t r = 0; r < idx.size(); ++r) g.row(idx[r]) += adj.row(static_cast<Eigen::Index>(r));
        t.accumulate(a, g);
    });
}

namespace {

void check_edge_weights(const Var& w, std::span<const Edge> edges, int n) {
    if (w.cols() != 1 || w.rows() != static_cast<Eigen::Index>(edges.size())) {
        throw DimensionError("edge weights must be " + std::to_string(edges.size()) + "x1, got " + shape(w.value()));
    }
    for (const auto& e : edges) {
        if (e.u < 0 || e.v < 0 || e.u >= n || e.v >= n) throw IndexError("edge endpoint out of range");
    }
}

}  // namespace

Var scatter_adjacency(const Var& weights, std::span<const Edge> edges, int n) {
    check_edge_weights(weights, edges, n);
    std::vector<Edge> list(edges.begin(), edges.end());
    Matrix a = Matrix::Zero(n, n);
    for (std::size_t e = 0; e < list.size(); ++e) {
        a(list[e].u, list[e].v) += weights.value()(static_cast<Eigen::Index>(e), 0);
        a(list[e].v, list[e].u) += weights.value()(static_cast<Eigen::Index>(e), 0);
    }
    return weights.tape()->record(std::move(a), {weights}, [weights, list](Tape& t, const Matrix& adj) {
        Matrix g(static_cast<Eigen::Index>(list.size()), 1);
        for (std::size_t e = 0; e < list.size(); ++e) {
            g(static_cast<Eigen::Index>(e), 0) = adj(list[e].u, list[e].v) + adj(list[e].v, list[e].u);
        }
        t.accumulate(weights, g);
    });
}

Var edge_degrees(const Var& weights, std::span<const Edge> edges, int n) {
    check_edge_weights(weights, edges, n);
    std::vector<Edge> list(edges.begin(), edges.end());
    Matrix d = Matrix::Zero(n, 1);
    for (std::size_t e = 0; e < list.size(); ++e) {
        d(list[e].u, 0) += weights.value()(static_cast<Eigen::Index>(e), 0);
        d(list[e].v, 0) += weights.value()(static_cast<Eigen::Index>(e), 0);
    }
    return weights.tape()->record(std::move(d), {weights}, [weights, list](Tape& t, const Matrix& adj) {
        Matrix g(static_cast<Eigen::Index>(list.size()), 1);
        for (std::size_t e = 0; e < list.size(); ++e) {
            g(static_cast<Eigen::Index>(e), 0) = adj(list[e].u, 0) + adj(list[e].v, 0);
        }
        t.accumulate(weights, g);
    });
}

double gradcheck(const std::function<Var(Tape&, const Var&)>& f, const Matrix& x, double h) {
    if (!(h > 0.0)) throw UsageError("gradcheck step must be positive");
    Matrix analytic;
    {
        Tape tape;
        Var input = tape.parameter(x);
        Var out = f(tape, input);
        tape.backward(out);
        analytic = input.grad();
    }
    auto eval = [&](const Matrix& at) {
        Tape tape;
        Var input = tape.constant(at);
        return f(tape, input).scalar();
    };
    double worst = 0.0;
    Matrix probe = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double orig = probe(i);
        probe(i) = orig + h;
        const double up = eval(probe);
        probe(i) = orig - h;
        const double down = eval(probe);
        probe(i) = orig;
        const double numeric = (up - down) / (2.0 * h);
        const double denom = std::max({std::abs(analytic(i)), std::abs(numeric), 1e-8});
        worst = std::max(worst, std::abs(analytic(i) - numeric) / denom);
    }
    return worst;
}

}  // namespace gchs::ad
