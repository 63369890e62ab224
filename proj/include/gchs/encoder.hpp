#pragma once

#include "gchs/autodiff.hpp"
#include "gchs/graph.hpp"
#include "gchs/io.hpp"

#include <cstdint>

namespace gchs {

// Two-layer GCN weights.
struct EncoderParams {
    Matrix w1;  // p x d1
    Matrix w2;  // d1 x d2
};

// Projection head g(H) = elu(H U1 + b1) U2 + b2. Biases are 1 x d2 rows.
struct ProjectionParams {
    Matrix u1;
    Matrix b1;
    Matrix u2;
    Matrix b2;
};

// Uniform in [-a, a], a = sqrt(6 / (fan_in + fan_out)).
Matrix glorot_uniform(Eigen::Index fan_in, Eigen::Index fan_out, Rng& rng);

EncoderParams init_encoder(int in_dim, int hidden_dim, int out_dim, std::uint64_t seed);
ProjectionParams init_projection(int dim, std::uint64_t seed);

namespace ad {

struct EncoderVars {
    Var w1;
    Var w2;
};

struct ProjectionVars {
    Var u1;
    Var b1;
    Var u2;
    Var b2;
};

EncoderVars bind(Tape& tape, const EncoderParams& p, bool trainable = true);
ProjectionVars bind(Tape& tape, const ProjectionParams& p, bool trainable = true);

// D^{-1/2}(A∘w + I)D^{-1/2} built on the tape so gradients reach `weights`
// through both the adjacency entries and the degree normalization.
Var normalized_adjacency(const Graph& g, const Var& weights);

// H = σ(Â σ(Â X W1) W2), σ = relu; `relu_output = false` leaves the second
// layer linear.
Var encode(const Var& adj_hat, const Var& x, const EncoderVars& theta, bool relu_output = true);

Var project(const Var& h, const ProjectionVars& phi);

}  // namespace ad

// Plain forward pass without gradient bookkeeping.
Matrix encode(const Matrix& adj_hat, const Matrix& x, const EncoderParams& theta, bool relu_output = true);

NamedMatrices to_named(const EncoderParams& theta, const ProjectionParams& phi);
void from_named(const NamedMatrices& mats, EncoderParams& theta, ProjectionParams& phi);

}  // namespace gchs
