#include "gchs/attacks.hpp"
#include "helpers.hpp"

#include <doctest.h>

using namespace gchs;

namespace {

Graph two_cliques(int m) {
    std::vector<Edge> edges;
    for (int i = 0; i < m; ++i) {
        for (int j = i + 1; j < m; ++j) {
            edges.push_back({i, j});
            edges.push_back({i + m, j + m});
        }
    }
    std::vector<int> y(2 * static_cast<std::size_t>(m), 0);
    for (int i = m; i < 2 * m; ++i) y[i] = 1;
    return Graph(Matrix::Random(2 * m, 2), edges, y);
}

ClgaConfig tiny_clga(int inner_epochs) {
    ClgaConfig c;
    c.surrogate.hidden_dim = 8;
    c.surrogate.out_dim = 4;
    c.surrogate.p_drop = 0.2;
    c.inner_epochs = inner_epochs;
    return c;
}

int changed_entries(const Graph& a, const Graph& b) {
    int diff = 0;
    for (int i = 0; i < a.num_nodes(); ++i) {
        for (int j = i + 1; j < a.num_nodes(); ++j) diff += a.has_edge(i, j) != b.has_edge(i, j) ? 1 : 0;
    }
    return diff;
}

}  // namespace

TEST_CASE("attack budget") {
    CHECK(AttackBudget::from_power(0.05, 100).flips == 5);
    CHECK(AttackBudget::from_power(0.2, 1000).flips == 200);
    CHECK_THROWS_AS(AttackBudget::from_power(0.0, 100), UsageError);
    CHECK_THROWS_AS(AttackBudget::from_power(1.5, 100), UsageError);
    CHECK_THROWS_AS(AttackBudget::from_power(0.01, 10), UsageError);
}

TEST_CASE("heterophily injection on two cliques") {
    const Graph g = two_cliques(5);
    const int m = g.num_edges();
    const AttackResult r = inject_heterophily(g, {0.05, 1}, 3);
    CHECK(r.poisoned.num_edges() == m + 1);
    CHECK(homophily_label(r.poisoned) == doctest::Approx(static_cast<double>(m) / (m + 1)).epsilon(1e-15));
    REQUIRE(r.inserted.size() == 1);
    CHECK(g.labels()[r.inserted[0].u] != g.labels()[r.inserted[0].v]);
    CHECK(r.removed.empty());
    CHECK_THROWS_AS(inject_heterophily(g, {1.0, 26}, 3), InfeasibleError);
}

TEST_CASE("heterophily injection properties") {
    SbmParams p;
    p.seed = 4;
    p.feature_dim = 3;
    const Graph g = generate_sbm(p);
    const AttackBudget b = AttackBudget::from_power(0.2, g.num_edges());
    const AttackResult r = inject_heterophily(g, b, 9);
    CHECK(r.poisoned.num_edges() == g.num_edges() + b.flips);
    for (const Edge& e : r.inserted) {
        CHECK(g.labels()[e.u] != g.labels()[e.v]);
        CHECK_FALSE(g.has_edge(e.u, e.v));
    }
    for (const Edge& e : g.edges()) CHECK(r.poisoned.has_edge(e.u, e.v));
    CHECK(homophily_label(r.poisoned) < homophily_label(g));
    CHECK(homophily_feature(r.poisoned) > homophily_feature(g));
    CHECK(inject_heterophily(g, b, 9).poisoned.edges() == r.poisoned.edges());
    CHECK(inject_heterophily(g, b, 10).poisoned.edges() != r.poisoned.edges());
}

TEST_CASE("clga scores follow the sign rule") {
    Matrix a = Matrix::Zero(3, 3);
    a(0, 1) = a(1, 0) = 1.0;
    Matrix grad(3, 3);
    grad << 0, 2, -1, 2, 0, 3, -1, 3, 0;
    const Matrix s = clga_scores(a, grad);
    CHECK(s(0, 1) == -2.0);
    CHECK(s(0, 2) == -1.0);
    CHECK(s(1, 2) == 3.0);
    CHECK(std::isinf(s(1, 0)));
    CHECK(std::isinf(s(0, 0)));
}

TEST_CASE("clga picks the best first-order flip on a 4-node path") {
    Matrix x(4, 3);
    x << 1.0, 0.2, -0.3, 0.4, -1.0, 0.5, -0.2, 0.8, 1.0, 0.3, 0.3, -0.7;
    const Graph g(x, {{0, 1}, {1, 2}, {2, 3}}, std::vector<int>{0, 0, 1, 1});
    ClgaConfig cfg = tiny_clga(10);
    cfg.verify_candidates = 1;
    const std::uint64_t seed = 5;

    // Same surrogate and view masks as the attacker's first round.
    TrainConfig sc = cfg.surrogate;
    sc.mode = Mode::baseline;
    sc.epochs = cfg.inner_epochs;
    sc.seed = derive_seed(seed, 0);
    const TrainedModel surrogate = train_gchs(g, sc);
    const auto views = clga_view_masks(4, sc.p_drop, derive_seed(seed, 1));
    const Matrix a = dense_adjacency(g);

    // Central differences along each symmetric pair direction.
    const double h = 1e-6;
    double best = -std::numeric_limits<double>::infinity();
    Edge pick{};
    for (int i = 0; i < 4; ++i) {
        for (int j = i + 1; j < 4; ++j) {
            Matrix up = a, down = a;
            up(i, j) += h;
            up(j, i) += h;
            down(i, j) -= h;
            down(j, i) -= h;
            const double g_ij = (clga_objective(up, x, surrogate, views.first, views.second) -
                                 clga_objective(down, x, surrogate, views.first, views.second)) /
                                (2 * h);
            const Matrix analytic = clga_gradient(a, x, surrogate, views.first, views.second);
            CHECK(analytic(i, j) == doctest::Approx(g_ij).epsilon(1e-5));
            const double score = a(i, j) > 0.0 ? -g_ij : g_ij;
            if (score > best) {
                best = score;
                pick = {i, j};
            }
        }
    }
    const AttackResult r = clga_greedy(g, {0.5, 1}, cfg, seed);
    const auto& flipped = r.inserted.empty() ? r.removed : r.inserted;
    REQUIRE(flipped.size() == 1);
    CHECK(flipped[0] == pick);
}

TEST_CASE("clga bookkeeping and determinism") {
    SbmParams p;
    p.n = 24;
    p.k_blocks = 2;
    p.p_intra = 0.3;
    p.p_inter = 0.03;
    p.feature_dim = 3;
    p.feature_std = 0.4;
    p.seed = 6;
    const Graph g = generate_sbm(p);
    ClgaConfig cfg = tiny_clga(15);
    cfg.retrain_every = 6;
    const AttackResult r = clga_greedy(g, {0.2, 6}, cfg, 2);
    CHECK(changed_entries(g, r.poisoned) == 6);
    CHECK(r.inserted.size() + r.removed.size() == 6);
    CHECK(clga_greedy(g, {0.2, 6}, cfg, 2).poisoned.edges() == r.poisoned.edges());
    CHECK(homophily_feature(r.poisoned) > homophily_feature(g));

    // With one surrogate for all flips the objective never drops.
    TrainConfig sc = cfg.surrogate;
    sc.mode = Mode::baseline;
    sc.epochs = cfg.inner_epochs;
    sc.seed = derive_seed(2, 0);
    const TrainedModel surrogate = train_gchs(g, sc);
    const auto views = clga_view_masks(g.num_nodes(), sc.p_drop, derive_seed(2, 1));
    CHECK(clga_objective(dense_adjacency(r.poisoned), g.features(), surrogate, views.first, views.second) >=
          clga_objective(dense_adjacency(g), g.features(), surrogate, views.first, views.second));
    CHECK_THROWS_AS(clga_greedy(g, {0.2, 0}, cfg, 2), UsageError);
}
