#include "gchs/contrastive.hpp"
#include "gchs/trainer.hpp"
#include "helpers.hpp"

#include <doctest.h>

using namespace gchs;

namespace {

double cosine(const Matrix& a, int i, const Matrix& b, int j) {
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (int k = 0; k < a.cols(); ++k) {
        dot += a(i, k) * b(j, k);
        na += a(i, k) * a(i, k);
        nb += b(j, k) * b(j, k);
    }
    return dot / (std::max(std::sqrt(na), 1e-8) * std::max(std::sqrt(nb), 1e-8));
}

// l(u_i, v_i) summed over both directions, straight from the definition.
double info_nce_loop(const Matrix& u, const Matrix& v, double tau) {
    const int n = static_cast<int>(u.rows());
    auto anchor = [&](const Matrix& a, const Matrix& b, int i) {
        const double pos = std::exp(cosine(a, i, b, i) / tau);
        double den = pos;
        for (int k = 0; k < n; ++k) {
            if (k == i) continue;
            den += std::exp(cosine(a, i, b, k) / tau) + std::exp(cosine(a, i, a, k) / tau);
        }
        return -std::log(pos / den);
    };
    double total = 0.0;
    for (int i = 0; i < n; ++i) total += anchor(u, v, i) + anchor(v, u, i);
    return total / (2.0 * n);
}

ProjectionParams identity_head(int d) {
    ProjectionParams phi = init_projection(d, 0);
    phi.u1 = phi.u2 = Matrix::Identity(d, d);
    return phi;
}

}  // namespace

TEST_CASE("cosine matrix") {
    ad::Tape t;
    const Matrix q = Matrix::Identity(3, 3);
    CHECK((ad::cosine_matrix(t.constant(q), t.constant(q)).value() - q).norm() < 1e-15);

    const Matrix a = Matrix::Random(5, 3), b = Matrix::Random(5, 3);
    const Matrix s = ad::cosine_matrix(t.constant(a), t.constant(b)).value();
    double worst = 0.0;
    for (int i = 0; i < 5; ++i) {
        for (int j = 0; j < 5; ++j) worst = std::max(worst, std::abs(s(i, j) - cosine(a, i, b, j)));
    }
    CHECK(worst < 1e-12);
    CHECK((ad::cosine_matrix(t.constant(a), t.constant(2.0 * a)).value() -
           ad::cosine_matrix(t.constant(a), t.constant(a)).value())
              .norm() < 1e-14);
    CHECK(s.cwiseAbs().maxCoeff() <= 1.0 + 1e-9);
    const Matrix zero_rows = ad::cosine_matrix(t.constant(Matrix::Zero(2, 3)), t.constant(a.topRows(2))).value();
    CHECK(zero_rows.allFinite());
}

TEST_CASE("infoNCE closed forms") {
    ad::Tape t;
    CHECK(ad::info_nce_projected(t.constant(Matrix::Ones(1, 3)), t.constant(Matrix::Ones(1, 3)), {1.0}).scalar() ==
          doctest::Approx(0.0));
    const Matrix z = Matrix::Identity(2, 2);
    const double l = ad::info_nce_projected(t.constant(z), t.constant(z), {1.0}).scalar();
    CHECK(l == doctest::Approx(-std::log(std::exp(1.0) / (std::exp(1.0) + 2.0))).epsilon(1e-14));
    CHECK(l == doctest::Approx(0.5514).epsilon(1e-4));
}

TEST_CASE("infoNCE matches the loop oracle and is symmetric") {
    Rng rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 2 + trial;
        Matrix u(n, 4), v(n, 4);
        for (int i = 0; i < u.size(); ++i) {
            u(i) = rng.normal();
            v(i) = rng.normal();
        }
        const double tau = 0.2 + 0.2 * trial;
        ad::Tape t;
        const double lib = ad::info_nce_projected(t.constant(u), t.constant(v), {tau}).scalar();
        CHECK(std::abs(lib - info_nce_loop(u, v, tau)) < 1e-12);
        const double swapped = ad::info_nce_projected(t.constant(v), t.constant(u), {tau}).scalar();
        CHECK(std::abs(lib - swapped) < 1e-12);
        CHECK(lib >= 0.0);
    }
}

TEST_CASE("infoNCE is invariant to positive row scaling") {
    Rng rng(8);
    Matrix h1(6, 3), h2(6, 3);
    for (int i = 0; i < h1.size(); ++i) {
        h1(i) = 0.2 + rng.uniform();
        h2(i) = 0.2 + rng.uniform();
    }
    Vector s(6);
    for (int i = 0; i < 6; ++i) s(i) = 0.5 + 3.0 * rng.uniform();
    // Positive inputs stay in elu's identity region.
    const ProjectionParams phi = identity_head(3);
    ad::Tape t;
    const double a = ad::info_nce(t.constant(h1), t.constant(h2), ad::bind(t, phi, false), {0.5}).scalar();
    const double b =
        ad::info_nce(t.constant(s.asDiagonal() * h1), t.constant(h2), ad::bind(t, phi, false), {0.5}).scalar();
    CHECK(std::abs(a - b) < 1e-10);
}

TEST_CASE("infoNCE gradients") {
    Rng rng(12);
    Matrix h1(5, 3), h2(5, 3);
    for (int i = 0; i < h1.size(); ++i) {
        h1(i) = rng.normal();
        h2(i) = rng.normal();
    }
    ProjectionParams phi = init_projection(3, 7);
    phi.b1 = Matrix::Constant(1, 3, 0.05);
    auto loss = [&](int slot) {
        return [&, slot](ad::Tape& t, const ad::Var& v) {
            auto ph = ad::bind(t, phi, false);
            ad::Var a = t.constant(h1), b = t.constant(h2);
            if (slot == 0) a = v;
            if (slot == 1) b = v;
            if (slot == 2) ph.u1 = v;
            if (slot == 3) ph.u2 = v;
            return ad::info_nce(a, b, ph, {0.5});
        };
    };
    CHECK(ad::gradcheck(loss(0), h1) < 1e-4);
    CHECK(ad::gradcheck(loss(1), h2) < 1e-4);
    CHECK(ad::gradcheck(loss(2), phi.u1) < 1e-4);
    CHECK(ad::gradcheck(loss(3), phi.u2) < 1e-4);
}

TEST_CASE("MI estimate") {
    SbmParams p;
    p.n = 30;
    p.feature_dim = 4;
    p.p_intra = 0.3;
    p.p_inter = 0.02;
    p.seed = 2;
    const Graph g = generate_sbm(p);
    TrainConfig cfg;
    cfg.mode = Mode::baseline;
    cfg.epochs = 3;
    cfg.hidden_dim = 8;
    cfg.out_dim = 4;
    const TrainedModel m = train_gchs(g, cfg);

    const double one = mi_estimate(g, m, 1, 5);
    const ViewPair views = sample_views(g, m, derive_seed(5, 0));
    ad::Tape t;
    const ad::Var x = t.constant(g.features());
    const auto theta = ad::bind(t, m.theta, false);
    const ad::Var h1 = ad::encode(ad::normalized_adjacency(g, t.constant(views.first)), x, theta);
    const ad::Var h2 = ad::encode(ad::normalized_adjacency(g, t.constant(views.second)), x, theta);
    CHECK(one == doctest::Approx(-ad::info_nce(h1, h2, ad::bind(t, m.phi, false), {cfg.tau_info}).scalar()));

    CHECK(mi_estimate(g, m, 4, 9) == mi_estimate(g, m, 4, 9));
    CHECK(mi_estimate(g, m, 4, 9) <= 0.0);
    CHECK(std::abs(mi_estimate(g, m, 64, 1) - mi_estimate(g, m, 64, 2)) < 0.1);
    CHECK_THROWS_AS(mi_estimate(g, m, 0, 1), UsageError);
}
