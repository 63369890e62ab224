#pragma once

// Reverse-mode differentiation over dense double matrices.
//
// A Tape owns every intermediate value in creation order, which is already a
// topological order of the expression graph. A Var is a cheap handle (tape
// pointer plus index). Binary elementwise primitives accept a right operand of
// the same shape, a 1x1 scalar, or a 1 x cols row vector; any other shape
// pairing is a DimensionError.

#include "gchs/common.hpp"
#include "gchs/graph.hpp"

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <vector>

namespace gchs::ad {

class Tape;

class Var {
public:
    Var() = default;

    const Matrix& value() const;
    const Matrix& grad() const;
    Eigen::Index rows() const { return value().rows(); }
    Eigen::Index cols() const { return value().cols(); }
    double scalar() const;
    bool requires_grad() const;

    Tape* tape() const noexcept { return tape_; }
    std::size_t id() const noexcept { return id_; }
    bool valid() const noexcept { return tape_ != nullptr; }

private:
    friend class Tape;
    Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

    Tape* tape_ = nullptr;
    std::size_t id_ = 0;
};

class Tape {
public:
    // Propagates the adjoint of one node to its parents via accumulate().
    using Backward = std::function<void(Tape&, const Matrix& adjoint)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Matrix value);
    Var parameter(Matrix value);

    // Registers a computed node. It requires a gradient iff any parent does;
    // `backward` is dropped otherwise.
    Var record(Matrix value, std::initializer_list<Var> parents, Backward backward);

    // Seeds d(loss)/d(loss) = 1 and adds d(loss)/d(node) into every node's
    // grad. Repeated calls accumulate.
    void backward(const Var& loss);
    void zero_grad();

    // Only valid while backward() runs.
    void accumulate(const Var& target, Matrix contribution);

    std::size_t size() const noexcept { return nodes_.size(); }

private:
    friend class Var;

    struct Node {
        Matrix value;
        mutable Matrix grad;
        bool requires_grad = false;
        Backward backward;
    };

    const Node& node(const Var& v) const;

    std::deque<Node> nodes_;
    std::vector<Matrix> adjoints_;
};

// Linear algebra.
Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var trace(const Var& a);
Var sum(const Var& a);

// Elementwise binary, with scalar / row-vector expansion of `b`.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);

Var scale(const Var& a, double s);
Var shift(const Var& a, double s);

// Elementwise unary.
Var exp(const Var& a);
Var log(const Var& a);
Var sigmoid(const Var& a);
Var relu(const Var& a);
Var elu(const Var& a);
Var power(const Var& a, double p);

// Forward rounds to nearest integer with ties going up; backward is identity.
Var straight_through_round(const Var& a);

// Row-wise max(||a_i||_2, floor) as an n x 1 column.
Var row_norms(const Var& a, double floor);
// Diagonal of a square matrix as an n x 1 column.
Var diagonal(const Var& a);
// Row-wise log Σ_j exp(a_ij), skipping entries where `exclude` is nonzero.
Var row_logsumexp(const Var& a, const Matrix* exclude = nullptr);

Var concat_cols(const Var& a, const Var& b);
Var concat_rows(const Var& a, const Var& b);
Var select_rows(const Var& a, std::span<const int> rows);

// Symmetric n x n adjacency with weights[e] at both (u,v) and (v,u).
Var scatter_adjacency(const Var& weights, std::span<const Edge> edges, int n);
// Weighted degree per node (n x 1), self-loops not included.
Var edge_degrees(const Var& weights, std::span<const Edge> edges, int n);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(double s, const Var& a) { return scale(a, s); }

// Central-difference check of d f / d x against reverse mode. Returns the max
// over entries of |analytic - numeric| / max(|analytic|, |numeric|, 1e-8).
double gradcheck(const std::function<Var(Tape&, const Var&)>& f, const Matrix& x, double h = 1e-5);

}  // namespace gchs::ad
