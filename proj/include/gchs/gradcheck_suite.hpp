#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace gchs {

struct GradcheckEntry {
    std::string name;
    double error = 0.0;
    double tolerance = 1e-4;
    bool pass() const { return error < tolerance; }
};

// Finite-difference checks of every differentiable primitive on random 3x4
// inputs, plus the full joint loss w.r.t. encoder, projection and sanitizer
// parameters on a random 6-node graph (relaxed sample, no rounding).
std::vector<GradcheckEntry> run_primitive_gradchecks(std::uint64_t seed, double h = 1e-5);
std::vector<GradcheckEntry> run_full_loss_gradchecks(std::uint64_t seed, double h = 1e-5);
std::vector<GradcheckEntry> run_gradcheck_suite(std::uint64_t seed, double h = 1e-5);

}  // namespace gchs
