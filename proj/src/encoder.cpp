#include "gchs/encoder.hpp"

#include <cmath>

namespace gchs {

Matrix glorot_uniform(Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Matrix w(fan_in, fan_out);
    for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = bound * (2.0 * rng.uniform() - 1.0);
    return w;
}

EncoderParams init_encoder(int in_dim, int hidden_dim, int out_dim, std::uint64_t seed) {
    if (in_dim <= 0 || hidden_dim <= 0 || out_dim <= 0) throw UsageError("encoder dimensions must be positive");
    Rng rng(seed);
    EncoderParams p;
    p.w1 = glorot_uniform(in_dim, hidden_dim, rng);
    p.w2 = glorot_uniform(hidden_dim, out_dim, rng);
    return p;
}

ProjectionParams init_projection(int dim, std::uint64_t seed) {
    if (dim <= 0) throw UsageError("projection dimension must be positive");
    Rng rng(seed);
    ProjectionParams p;
    p.u1 = glorot_uniform(dim, dim, rng);
    p.b1 = Matrix::Zero(1, dim);
    p.u2 = glorot_uniform(dim, dim, rng);
    p.b2 = Matrix::Zero(1, dim);
    return p;
}

namespace ad {

EncoderVars bind(Tape& tape, const EncoderParams& p, bool trainable) {
    if (trainable) return {tape.parameter(p.w1), tape.parameter(p.w2)};
    return {tape.constant(p.w1), tape.constant(p.w2)};
}

ProjectionVars bind(Tape& tape, const ProjectionParams& p, bool trainable) {
    if (trainable) return {tape.parameter(p.u1), tape.parameter(p.b1), tape.parameter(p.u2), tape.parameter(p.b2)};
    return {tape.constant(p.u1), tape.constant(p.b1), tape.constant(p.u2), tape.constant(p.b2)};
}

Var normalized_adjacency(const Graph& g, const Var& weights) {
    Tape& t = *weights.tape();
    const int n = g.num_nodes();
    if (!weights.requires_grad()) {
        // Constant view: skip the on-tape construction.
        const Matrix& w = weights.value();
        return t.constant(gchs::normalized_adjacency(g, std::span<const double>(w.data(), static_cast<std::size_t>(w.size()))));
    }
    const Var a = scatter_adjacency(weights, g.edges(), n);
    const Var a_tilde = add(a, t.constant(Matrix::Identity(n, n)));
    const Var inv_sqrt_deg = power(shift(edge_degrees(weights, g.edges(), n), 1.0), -0.5);
    return mul(a_tilde, matmul(inv_sqrt_deg, transpose(inv_sqrt_deg)));
}

namespace {

// Â (X W) or (Â X) W, whichever is cheaper.
Var propagate(const Var& adj_hat, const Var& x, const Var& w) {
    if (x.cols() <= w.cols()) return matmul(matmul(adj_hat, x), w);
    return matmul(adj_hat, matmul(x, w));
}

}  // namespace

Var encode(const Var& adj_hat, const Var& x, const EncoderVars& theta, bool relu_output) {
    if (adj_hat.rows() != adj_hat.cols() || adj_hat.rows() != x.rows()) {
        throw DimensionError("encode: propagation matrix does not match feature rows");
    }
    const Var h1 = relu(propagate(adj_hat, x, theta.w1));
    const Var h2 = propagate(adj_hat, h1, theta.w2);
    return relu_output ? relu(h2) : h2;
}

Var project(const Var& h, const ProjectionVars& phi) {
    const Var hidden = elu(add(matmul(h, phi.u1), phi.b1));
    return add(matmul(hidden, phi.u2), phi.b2);
}

}  // namespace ad

Matrix encode(const Matrix& adj_hat, const Matrix& x, const EncoderParams& theta, bool relu_output) {
    if (adj_hat.rows() != adj_hat.cols() || adj_hat.rows() != x.rows()) {
        throw DimensionError("encode: propagation matrix does not match feature rows");
    }
    if (x.cols() != theta.w1.rows() || theta.w1.cols() != theta.w2.rows()) {
        throw DimensionError("encode: weight shapes do not chain with the features");
    }
    const Matrix h1 = (adj_hat * (x * theta.w1)).cwiseMax(0.0);
    Matrix h2 = adj_hat * (h1 * theta.w2);
    if (relu_output) h2 = h2.cwiseMax(0.0);
    return h2;
}

NamedMatrices to_named(const EncoderParams& theta, const ProjectionParams& phi) {
    return {{"W1", theta.w1}, {"W2", theta.w2}, {"U1", phi.u1}, {"b1", phi.b1}, {"U2", phi.u2}, {"b2", phi.b2}};
}

void from_named(const NamedMatrices& mats, EncoderParams& theta, ProjectionParams& phi) {
    auto find = [&](const std::string& name) -> const Matrix& {
        for (const auto& [key, m] : mats) {
            if (key == name) return m;
        }
        throw ParseError("model file lacks matrix " + name);
    };
    theta.w1 = find("W1");
    theta.w2 = find("W2");
    phi.u1 = find("U1");
    phi.b1 = find("b1");
    phi.u2 = find("U2");
    phi.b2 = find("b2");
}

}  // namespace gchs
