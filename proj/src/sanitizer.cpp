#include "gchs/sanitizer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace gchs {

namespace {

double clipped_sum(const Vector& p, double mu, double p_min) {
    return (p.array() - mu).cwiseMax(p_min).cwiseMin(1.0).sum();
}

Vector clip(const Vector& p, double mu, double p_min) {
    return (p.array() - mu).cwiseMax(p_min).cwiseMin(1.0).matrix();
}

}  // namespace

SanitizerState init_sanitizer(int num_edges, double budget, double tau_gumbel, double p_min, double step,
                              MaskLaw law) {
    if (num_edges <= 0) throw UsageError("sanitizer needs at least one edge");
    if (!(budget > 0.0)) throw UsageError("sanitation budget must be positive");
    if (!(tau_gumbel > 0.0)) throw UsageError("gumbel temperature must be positive");
    if (!(p_min > 0.0 && p_min < 1.0)) throw UsageError("probability floor must lie in (0, 1)");
    if (budget < num_edges * p_min) {
        throw InfeasibleError("budget " + std::to_string(budget) + " is below |E| * p_min");
    }
    SanitizerState s;
    s.p = Vector::Constant(num_edges, std::max(budget / (2.0 * num_edges), p_min));
    s.budget = budget;
    s.tau_gumbel = tau_gumbel;
    s.p_min = p_min;
    s.step = step;
    s.law = law;
    return s;
}

void check_state(const SanitizerState& s) {
    for (Eigen::Index e = 0; e < s.p.size(); ++e) {
        if (!(s.p(e) >= s.p_min && s.p(e) <= 1.0)) {
            throw DomainError("drop probability P[" + std::to_string(e) + "] = " + std::to_string(s.p(e)) +
                              " outside [p_min, 1]");
        }
    }
}

Vector mask_noise(MaskLaw law, Eigen::Index size, std::uint64_t seed) {
    Rng rng(seed);
    auto gumbel = [&rng] { return -std::log(-std::log(rng.uniform())); };
    Vector noise(size);
    for (Eigen::Index e = 0; e < size; ++e) {
        noise(e) = law == MaskLaw::gumbel ? gumbel() : gumbel() - gumbel();
    }
    return noise;
}

MaskSample sample_mask(const SanitizerState& s, const ad::Var& p, const Vector& noise, bool straight_through) {
    check_state(s);
    if (p.rows() != s.p.size() || p.cols() != 1 || noise.size() != s.p.size()) {
        throw DimensionError("sample_mask: probability / noise length mismatch");
    }
    ad::Tape& t = *p.tape();
    // logit(P) = log P - log(1 - P); only the logistic law needs the second term.
    ad::Var location = ad::log(p);
    if (s.law == MaskLaw::logistic) {
        // 1e-12 keeps log(1 - P) finite at P = 1.
        location = ad::sub(location, ad::log(ad::shift(ad::scale(p, -1.0), 1.0 + 1e-12)));
    }
    const ad::Var soft = ad::sigmoid(ad::scale(ad::add(location, t.constant(noise)), 1.0 / s.tau_gumbel));
    const ad::Var mask = straight_through ? ad::straight_through_round(soft) : soft;
    const ad::Var retain = ad::shift(ad::scale(mask, -1.0), 1.0);
    Vector hard = soft.value().col(0).unaryExpr([](double v) { return std::floor(v + 0.5); });
    return {std::move(hard), soft, mask, retain};
}

MaskSample sample_mask(const SanitizerState& s, const ad::Var& p, std::uint64_t seed, bool straight_through) {
    return sample_mask(s, p, mask_noise(s.law, s.p.size(), seed), straight_through);
}

Vector draw_mask(const SanitizerState& s, std::uint64_t seed) {
    ad::Tape tape;
    const ad::Var p = tape.constant(s.p);
    return sample_mask(s, p, seed).hard;
}

Vector apply_mask(std::span<const Edge> edges, const Vector& mask) {
    if (static_cast<std::size_t>(mask.size()) != edges.size()) {
        throw DimensionError("mask has " + std::to_string(mask.size()) + " entries for " +
                             std::to_string(edges.size()) + " edges");
    }
    return (1.0 - mask.array()).matrix();
}

Projection project_budget_detailed(const Vector& p, double budget, double p_min, double xi) {
    if (!(budget > 0.0)) throw UsageError("budget must be positive");
    if (!(xi > 0.0)) throw UsageError("bisection tolerance must be positive");
    if (budget < static_cast<double>(p.size()) * p_min) {
        throw InfeasibleError("budget " + std::to_string(budget) + " is below |E| * p_min");
    }
    Projection out;
    if (clipped_sum(p, 0.0, p_min) <= budget) {
        out.p = clip(p, 0.0, p_min);
        return out;
    }
    // The clipped sum is non-increasing in mu: |E| at lo, |E| p_min at hi.
    double lo = (p.array() - 1.0).minCoeff();
    double hi = p.maxCoeff();
    const int cap = static_cast<int>(std::ceil(std::log2(std::max(hi - lo, xi) / xi))) + 4;
    for (int it = 0; it < cap; ++it) {
        if (budget - clipped_sum(p, hi, p_min) <= xi) break;
        const double mid = 0.5 * (lo + hi);
        if (clipped_sum(p, mid, p_min) > budget) {
            lo = mid;
        } else {
            hi = mid;
        }
        out.iterations = it + 1;
    }
    // hi always keeps the clipped sum at or below the budget.
    out.mu = hi;
    out.p = clip(p, hi, p_min);
    return out;
}

Vector project_budget(const Vector& p, double budget, double p_min, double xi) {
    return project_budget_detailed(p, budget, p_min, xi).p;
}

SanitizerState pgd_step(const SanitizerState& s, const Vector& grad) {
    if (grad.size() != s.p.size()) throw DimensionError("pgd_step: gradient length mismatch");
    SanitizerState next = s;
    next.p = project_budget(s.p - s.step * grad, s.budget, s.p_min, s.tolerance);
    return next;
}

}  // namespace gchs
