#pragma once

#include "gchs/autodiff.hpp"
#include "gchs/graph.hpp"

#include <cstdint>
#include <span>

namespace gchs {

// How a drop probability P_e is turned into a hard sample.
//   gumbel:   M_e = round(sigmoid((log P_e + g) / tau)), g ~ Gumbel(0, 1).
//             Pr[M_e = 1] = 1 - exp(-P_e).
//   logistic: M_e = round(sigmoid((logit P_e + g1 - g2) / tau)).
//             Pr[M_e = 1] = P_e.
enum class MaskLaw { gumbel, logistic };

struct SanitizerState {
    Vector p;  // per-edge drop probabilities, canonical edge order
    double budget = 1.0;
    double tau_gumbel = 0.5;
    double p_min = 1e-4;
    double step = 0.01;
    double tolerance = 1e-8;
    MaskLaw law = MaskLaw::gumbel;
};

// Constant max(budget / (2|E|), p_min) per edge.
SanitizerState init_sanitizer(int num_edges, double budget, double tau_gumbel = 0.5, double p_min = 1e-4,
                              double step = 0.01, MaskLaw law = MaskLaw::gumbel);

// Throws DomainError if any P_e leaves [p_min, 1].
void check_state(const SanitizerState& s);

// Per-edge logistic noise for one draw: g for the gumbel law, g1 - g2 for
// the logistic law. Deterministic in (law, size, seed).
Vector mask_noise(MaskLaw law, Eigen::Index size, std::uint64_t seed);

struct MaskSample {
    Vector hard;     // binary M, 1 = drop
    ad::Var soft;    // relaxed surrogate on the tape
    ad::Var mask;    // straight-through M (or `soft` when rounding is off)
    ad::Var retain;  // 1 - mask, the edge weights of the sanitized view
};

// `p` is the tape variable carrying s.p. With `straight_through = false`
// the relaxed sample itself is used as the mask.
MaskSample sample_mask(const SanitizerState& s, const ad::Var& p, const Vector& noise, bool straight_through = true);
MaskSample sample_mask(const SanitizerState& s, const ad::Var& p, std::uint64_t seed, bool straight_through = true);

// Tape-free hard draw, identical to sample_mask(...).hard for the same seed.
Vector draw_mask(const SanitizerState& s, std::uint64_t seed);

// Retention weights 1 - M.
Vector apply_mask(std::span<const Edge> edges, const Vector& mask);

struct Projection {
    Vector p;
    double mu = 0.0;  // 0 when plain clipping was already feasible
    int iterations = 0;
};

// Euclidean projection onto {p_min <= P_e <= 1, Σ P_e <= budget}. Bisection
// over the shift μ with tolerance `xi` on the clipped sum.
Projection project_budget_detailed(const Vector& p, double budget, double p_min, double xi);
Vector project_budget(const Vector& p, double budget, double p_min, double xi);

// P <- project(P - step * grad).
SanitizerState pgd_step(const SanitizerState& s, const Vector& grad);

}  // namespace gchs
