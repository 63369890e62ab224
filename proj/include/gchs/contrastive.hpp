#pragma once

#include "gchs/autodiff.hpp"
#include "gchs/encoder.hpp"
#include "gchs/graph.hpp"

#include <cstdint>

namespace gchs {

struct TrainedModel;

struct InfoNceConfig {
    double temperature = 0.5;
};

inline constexpr double kNormFloor = 1e-8;

namespace ad {

// S_ij = <a_i, b_j> / (max(|a_i|, 1e-8) max(|b_j|, 1e-8)).
Var cosine_matrix(const Var& a, const Var& b);

// Symmetric infoNCE on already projected embeddings. Each anchor u_i is
// contrasted against its positive v_i, the inter-view negatives v_k and the
// intra-view negatives u_k (k != i).
Var info_nce_projected(const Var& z1, const Var& z2, const InfoNceConfig& cfg);

// info_nce_projected(project(h1), project(h2)).
Var info_nce(const Var& h1, const Var& h2, const ProjectionVars& phi, const InfoNceConfig& cfg);

}  // namespace ad

// Monte-Carlo mean of -L_info over `n_samples` independent view pairs drawn
// with the model's own augmentation settings.
double mi_estimate(const Graph& g, const TrainedModel& model, int n_samples, std::uint64_t seed);

}  // namespace gchs
