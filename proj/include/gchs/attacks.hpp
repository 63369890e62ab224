#pragma once

#include "gchs/graph.hpp"
#include "gchs/trainer.hpp"

#include <cstdint>
#include <vector>

namespace gchs {

struct AttackBudget {
    double power = 0.05;
    int flips = 1;

    // flips = round(power * |E|); throws UsageError unless power in (0, 1]
    // and at least one flip results.
    static AttackBudget from_power(double power, int num_edges);
};

struct AttackResult {
    Graph poisoned;
    std::vector<Edge> inserted;
    std::vector<Edge> removed;
};

// Adds budget.flips uniformly random absent edges between nodes of different
// classes. Existing edges are never touched.
AttackResult inject_heterophily(const Graph& g, const AttackBudget& budget, std::uint64_t seed);

struct ClgaConfig {
    TrainConfig surrogate;     // trained in baseline mode
    int inner_epochs = 50;     // surrogate epochs per retraining
    int retrain_every = 0;     // 0 = ceil(B / 10)
    int verify_candidates = 8; // top-scoring flips re-evaluated exactly
};

// Dense symmetric adjacency (zero diagonal) of g.
Matrix dense_adjacency(const Graph& g);

// Surrogate objective L_info(A) with frozen encoder / projection: both views
// are A masked elementwise by the symmetric 0/1 matrices view1, view2.
double clga_objective(const Matrix& adjacency, const Matrix& features, const TrainedModel& surrogate,
                      const Matrix& view1, const Matrix& view2);

// dL/dA_ij + dL/dA_ji for every pair (the symmetric-flip derivative).
Matrix clga_gradient(const Matrix& adjacency, const Matrix& features, const TrainedModel& surrogate,
                     const Matrix& view1, const Matrix& view2);

// Flip scores: +grad for absent pairs, -grad for present pairs, upper
// triangle only; -inf elsewhere.
Matrix clga_scores(const Matrix& adjacency, const Matrix& symmetric_grad);

// Symmetric 0/1 keep-masks for the surrogate views of one round.
std::pair<Matrix, Matrix> clga_view_masks(int n, double p_drop, std::uint64_t seed);

// Greedy first-order structure attack against the contrastive objective.
AttackResult clga_greedy(const Graph& g, const AttackBudget& budget, const ClgaConfig& cfg, std::uint64_t seed);

}  // namespace gchs
