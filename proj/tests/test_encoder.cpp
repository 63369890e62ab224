#include "gchs/encoder.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <numeric>

using namespace gchs;

TEST_CASE("glorot bounds") {
    Rng rng(1);
    const Matrix w = glorot_uniform(10, 6, rng);
    CHECK(w.cwiseAbs().maxCoeff() <= std::sqrt(6.0 / 16.0));
    CHECK(w.cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("zero first layer gives zero embeddings") {
    const Graph g = testing::random_graph(6, 0.5, 3, 2, 1);
    EncoderParams theta = init_encoder(3, 4, 2, 1);
    theta.w1.setZero();
    CHECK(encode(normalized_adjacency(g), g.features(), theta).norm() == 0.0);
}

TEST_CASE("single isolated node") {
    Matrix x(1, 2);
    x << 0.5, -1.0;
    const Graph g(x, {});
    const EncoderParams theta = init_encoder(2, 3, 2, 4);
    const Matrix expected = (x * theta.w1).cwiseMax(0.0) * theta.w2;
    CHECK((encode(normalized_adjacency(g), x, theta) - expected.cwiseMax(0.0)).norm() < 1e-15);
    CHECK((encode(normalized_adjacency(g), x, theta, false) - expected).norm() < 1e-15);
}

TEST_CASE("encoder is permutation equivariant") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Graph g = testing::random_graph(8, 0.4, 3, 2, seed);
        const EncoderParams theta = init_encoder(3, 5, 4, seed);
        std::vector<int> perm(8);
        std::iota(perm.begin(), perm.end(), 0);
        Rng rng(seed + 50);
        std::shuffle(perm.begin(), perm.end(), rng.engine());
        Matrix pi = Matrix::Zero(8, 8);
        for (int i = 0; i < 8; ++i) pi(perm[i], i) = 1.0;
        const Matrix adj = normalized_adjacency(g);
        const Matrix h = encode(adj, g.features(), theta);
        const Matrix hp = encode(pi * adj * pi.transpose(), pi * g.features(), theta);
        CHECK((hp - pi * h).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("encoder output is Lipschitz in the features") {
    const Graph g = testing::random_graph(10, 0.3, 4, 2, 3);
    const EncoderParams theta = init_encoder(4, 6, 3, 9);
    const Matrix adj = normalized_adjacency(g);
    Rng rng(2);
    Matrix delta(10, 4);
    for (int i = 0; i < delta.size(); ++i) delta(i) = rng.normal();
    delta *= 1e-3 / delta.norm();
    const double bound = 1e-3 * theta.w1.operatorNorm() * theta.w2.operatorNorm() + 1e-8;
    const Matrix h0 = encode(adj, g.features(), theta);
    const Matrix h1 = encode(adj, g.features() + delta, theta);
    CHECK((h1 - h0).norm() <= bound);
    CHECK(h0.allFinite());
}

TEST_CASE("tape and plain forward passes agree") {
    const Graph g = testing::random_graph(7, 0.5, 3, 2, 4);
    const EncoderParams theta = init_encoder(3, 5, 4, 2);
    Rng rng(6);
    Vector w(g.num_edges());
    for (int e = 0; e < w.size(); ++e) w(e) = rng.uniform();
    ad::Tape t;
    const ad::Var adj = ad::normalized_adjacency(g, t.constant(w));
    const std::vector<double> mask = testing::to_std(w);
    CHECK((adj.value() - normalized_adjacency(g, mask)).cwiseAbs().maxCoeff() < 1e-15);
    const ad::Var weights = t.parameter(w);
    const ad::Var adj2 = ad::normalized_adjacency(g, weights);
    CHECK((adj2.value() - adj.value()).cwiseAbs().maxCoeff() < 1e-15);
    const ad::Var h = ad::encode(adj2, t.constant(g.features()), ad::bind(t, theta, false));
    CHECK((h.value() - encode(adj.value(), g.features(), theta)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("normalized adjacency gradient reaches edge weights through the degrees") {
    const Graph g = testing::random_graph(6, 0.6, 2, 2, 8);
    REQUIRE(g.num_edges() > 0);
    Rng rng(3);
    Matrix w(g.num_edges(), 1);
    for (int e = 0; e < w.size(); ++e) w(e) = 0.2 + 0.6 * rng.uniform();
    const Matrix probe = Matrix::Random(6, 6);
    const double err = ad::gradcheck(
        [&](ad::Tape& t, const ad::Var& v) {
            return ad::sum(ad::mul(ad::normalized_adjacency(g, v), t.constant(probe)));
        },
        w);
    CHECK(err < 1e-6);
}

TEST_CASE("projection head") {
    ProjectionParams phi = init_projection(3, 1);
    phi.u1 = Matrix::Identity(3, 3);
    phi.u2 = Matrix::Identity(3, 3);
    Matrix h(2, 3);
    h << 1.0, -1.0, 0.0, 2.0, 0.5, -0.2;
    ad::Tape t;
    const Matrix z = ad::project(t.constant(h), ad::bind(t, phi, false)).value();
    CHECK(z(0, 0) == 1.0);
    CHECK(z(0, 1) == doctest::Approx(std::exp(-1.0) - 1.0).epsilon(1e-15));
    CHECK(ad::project(t.constant(Matrix::Zero(2, 3)), ad::bind(t, init_projection(3, 2), false)).value().norm() ==
          0.0);

    ProjectionParams rnd = init_projection(3, 5);
    rnd.b1 = Matrix::Constant(1, 3, 0.1);
    const Matrix h0 = Matrix::Random(4, 3);
    auto check = [&](Matrix ProjectionParams::*slot) {
        return ad::gradcheck(
            [&](ad::Tape& tape, const ad::Var& v) {
                auto vars = ad::bind(tape, rnd, false);
                if (slot == &ProjectionParams::u1) vars.u1 = v;
                if (slot == &ProjectionParams::b1) vars.b1 = v;
                if (slot == &ProjectionParams::u2) vars.u2 = v;
                if (slot == &ProjectionParams::b2) vars.b2 = v;
                return ad::sum(ad::project(tape.constant(h0), vars));
            },
            rnd.*slot);
    };
    CHECK(check(&ProjectionParams::u1) < 1e-4);
    CHECK(check(&ProjectionParams::b1) < 1e-4);
    CHECK(check(&ProjectionParams::u2) < 1e-4);
    CHECK(check(&ProjectionParams::b2) < 1e-4);
}

TEST_CASE("named parameter round trip") {
    const EncoderParams theta = init_encoder(3, 4, 2, 1);
    const ProjectionParams phi = init_projection(2, 2);
    EncoderParams t2;
    ProjectionParams p2;
    from_named(to_named(theta, phi), t2, p2);
    CHECK(t2.w1 == theta.w1);
    CHECK(t2.w2 == theta.w2);
    CHECK(p2.u2 == phi.u2);
    CHECK(p2.b2 == phi.b2);
    NamedMatrices partial{{"W1", theta.w1}};
    CHECK_THROWS_AS(from_named(partial, t2, p2), ParseError);
}

TEST_CASE("encode rejects mismatched shapes") {
    const EncoderParams theta = init_encoder(3, 4, 2, 1);
    CHECK_THROWS_AS(encode(Matrix::Identity(5, 5), Matrix::Ones(5, 2), theta), DimensionError);
}
