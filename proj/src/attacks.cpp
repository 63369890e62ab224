#include "gchs/attacks.hpp"

#include "gchs/autodiff.hpp"
#include "gchs/contrastive.hpp"
#include "gchs/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <tuple>

namespace gchs {

AttackBudget AttackBudget::from_power(double power, int num_edges) {
    if (!(power > 0.0 && power <= 1.0)) throw UsageError("attack power must lie in (0, 1]");
    const int flips = static_cast<int>(std::lround(power * num_edges));
    if (flips < 1) throw UsageError("attack power rounds to zero flips on " + std::to_string(num_edges) + " edges");
    return {power, flips};
}

AttackResult inject_heterophily(const Graph& g, const AttackBudget& budget, std::uint64_t seed) {
    const auto& y = g.labels();
    if (budget.flips < 1) throw UsageError("attack budget must be at least one edge");
    std::vector<Edge> candidates;
    for (int i = 0; i < g.num_nodes(); ++i) {
        for (int j = i + 1; j < g.num_nodes(); ++j) {
            if (y[i] != y[j] && !g.has_edge(i, j)) candidates.push_back({i, j});
        }
    }
    if (static_cast<int>(candidates.size()) < budget.flips) {
        throw InfeasibleError("only " + std::to_string(candidates.size()) + " absent inter-class pairs for " +
                              std::to_string(budget.flips) + " insertions");
    }
    // Partial Fisher-Yates: the first `flips` slots are a uniform sample.
    Rng rng(seed);
    for (int i = 0; i < budget.flips; ++i) {
        const auto pick = static_cast<std::size_t>(i) + rng.below(candidates.size() - static_cast<std::size_t>(i));
        std::swap(candidates[static_cast<std::size_t>(i)], candidates[pick]);
    }
    AttackResult out;
    out.inserted.assign(candidates.begin(), candidates.begin() + budget.flips);
    std::sort(out.inserted.begin(), out.inserted.end());
    std::vector<Edge> edges = g.edges();
    edges.insert(edges.end(), out.inserted.begin(), out.inserted.end());
    out.poisoned = g.with_edges(std::move(edges));
    return out;
}

Matrix dense_adjacency(const Graph& g) { return adjacency(g); }

namespace {

ad::Var dense_normalized(const ad::Var& a, const Matrix& keep) {
    ad::Tape& t = *a.tape();
    const auto n = a.rows();
    const ad::Var a_tilde = ad::add(ad::mul(a, t.constant(keep)), t.constant(Matrix::Identity(n, n)));
    const ad::Var deg = ad::matmul(a_tilde, t.constant(Matrix::Ones(n, 1)));
    const ad::Var s = ad::power(deg, -0.5);
    return ad::mul(a_tilde, ad::matmul(s, ad::transpose(s)));
}

ad::Var objective_on_tape(const ad::Var& a, const Matrix& features, const TrainedModel& surrogate,
                          const Matrix& view1, const Matrix& view2) {
    ad::Tape& t = *a.tape();
    const ad::Var x = t.constant(features);
    const auto theta = ad::bind(t, surrogate.theta, false);
    const auto phi = ad::bind(t, surrogate.phi, false);
    const bool relu_out = surrogate.config.relu_output;
    const ad::Var h1 = ad::encode(dense_normalized(a, view1), x, theta, relu_out);
    const ad::Var h2 = ad::encode(dense_normalized(a, view2), x, theta, relu_out);
    return ad::info_nce(h1, h2, phi, {surrogate.config.tau_info});
}

}  // namespace

double clga_objective(const Matrix& adjacency, const Matrix& features, const TrainedModel& surrogate,
                      const Matrix& view1, const Matrix& view2) {
    ad::Tape tape;
    return objective_on_tape(tape.constant(adjacency), features, surrogate, view1, view2).scalar();
}

Matrix clga_gradient(const Matrix& adjacency, const Matrix& features, const TrainedModel& surrogate,
                     const Matrix& view1, const Matrix& view2) {
    ad::Tape tape;
    const ad::Var a = tape.parameter(adjacency);
    tape.backward(objective_on_tape(a, features, surrogate, view1, view2));
    return a.grad() + a.grad().transpose();
}

Matrix clga_scores(const Matrix& adjacency, const Matrix& symmetric_grad) {
    const auto n = adjacency.rows();
    Matrix scores = Matrix::Constant(n, n, -std::numeric_limits<double>::infinity());
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) {
            scores(i, j) = adjacency(i, j) > 0.0 ? -symmetric_grad(i, j) : symmetric_grad(i, j);
        }
    }
    return scores;
}

std::pair<Matrix, Matrix> clga_view_masks(int n, double p_drop, std::uint64_t seed) {
    Rng rng(seed);
    Matrix m1 = Matrix::Ones(n, n), m2 = Matrix::Ones(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            m1(i, j) = m1(j, i) = rng.uniform() < p_drop ? 0.0 : 1.0;
            m2(i, j) = m2(j, i) = rng.uniform() < p_drop ? 0.0 : 1.0;
        }
    }
    return {m1, m2};
}

AttackResult clga_greedy(const Graph& g, const AttackBudget& budget, const ClgaConfig& cfg, std::uint64_t seed) {
    if (budget.flips < 1) throw UsageError("attack budget must be at least one flip");
    const int n = g.num_nodes();
    const long long pairs = static_cast<long long>(n) * (n - 1) / 2;
    if (budget.flips > pairs) throw InfeasibleError("more flips requested than node pairs");
    const int every = cfg.retrain_every > 0 ? cfg.retrain_every : (budget.flips + 9) / 10;

    TrainConfig surrogate_cfg = cfg.surrogate;
    surrogate_cfg.mode = Mode::baseline;
    surrogate_cfg.epochs = cfg.inner_epochs;

    Matrix a = dense_adjacency(g);
    Matrix locked = Matrix::Zero(n, n);
    TrainedModel surrogate;
    std::pair<Matrix, Matrix> views;
    AttackResult out;

    for (int flip = 0; flip < budget.flips; ++flip) {
        if (flip % every == 0) {
            const auto round = static_cast<std::uint64_t>(flip / every);
            std::vector<Edge> edges;
            for (int i = 0; i < n; ++i) {
                for (int j = i + 1; j < n; ++j) {
                    if (a(i, j) > 0.0) edges.push_back({i, j});
                }
            }
            surrogate_cfg.seed = derive_seed(seed, 2 * round);
            surrogate = train_gchs(g.with_edges(std::move(edges)), surrogate_cfg);
            views = clga_view_masks(n, surrogate_cfg.p_drop, derive_seed(seed, 2 * round + 1));
        }
        const double current = clga_objective(a, g.features(), surrogate, views.first, views.second);
        Matrix scores = clga_scores(a, clga_gradient(a, g.features(), surrogate, views.first, views.second));

        std::vector<std::tuple<double, int, int>> ranked;
        for (int i = 0; i < n; ++i) {
            for (int j = i + 1; j < n; ++j) {
                if (locked(i, j) == 0.0) ranked.emplace_back(scores(i, j), i, j);
            }
        }
        const auto top = std::min<std::size_t>(ranked.size(), static_cast<std::size_t>(std::max(cfg.verify_candidates, 1)));
        // Highest score first, ties to the smallest (i, j).
        std::partial_sort(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(top), ranked.end(),
                          [](const auto& x, const auto& y) {
                              if (std::get<0>(x) != std::get<0>(y)) return std::get<0>(x) > std::get<0>(y);
                              return std::make_pair(std::get<1>(x), std::get<2>(x)) <
                                     std::make_pair(std::get<1>(y), std::get<2>(y));
                          });
        std::size_t chosen = 0;
        for (std::size_t c = 0; c < top; ++c) {
            const auto [score, i, j] = ranked[c];
            Matrix trial = a;
            trial(i, j) = trial(j, i) = 1.0 - trial(i, j);
            if (clga_objective(trial, g.features(), surrogate, views.first, views.second) >= current) {
                chosen = c;
                break;
            }
        }
        const auto [score, i, j] = ranked[chosen];
        (a(i, j) > 0.0 ? out.removed : out.inserted).push_back({i, j});
        a(i, j) = a(j, i) = 1.0 - a(i, j);
        locked(i, j) = 1.0;
    }

    std::vector<Edge> edges;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            if (a(i, j) > 0.0) edges.push_back({i, j});
        }
    }
    std::sort(out.inserted.begin(), out.inserted.end());
    std::sort(out.removed.begin(), out.removed.end());
    out.poisoned = g.with_edges(std::move(edges));
    return out;
}

}  // namespace gchs
