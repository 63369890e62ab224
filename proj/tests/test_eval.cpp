#include "gchs/eval.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <json.hpp>

#include <numeric>

using namespace gchs;

TEST_CASE("splits") {
    const Split s = make_split(100, 1);
    CHECK(s.train.size() == 10);
    CHECK(s.val.size() == 10);
    CHECK(s.test.size() == 80);
    CHECK_NOTHROW(check_split(s, 100));
    Split bad = s;
    bad.val.push_back(s.train[0]);
    CHECK_THROWS_AS(check_split(bad, 100), UsageError);
    bad = s;
    bad.test.push_back(100);
    CHECK_THROWS_AS(check_split(bad, 100), IndexError);
    CHECK_THROWS_AS(make_split(10, 1, 0.6, 0.5), UsageError);
}

TEST_CASE("logistic regression on separable embeddings") {
    std::vector<int> y(60);
    for (int i = 0; i < 60; ++i) y[i] = i % 3;
    const Matrix h = one_hot(y, 3);
    const Split s = make_split(60, 2, 0.3, 0.1);
    CHECK(train_logreg(h, y, s, 1) == 1.0);
    CHECK(train_logreg(h, y, s, 1) == train_logreg(h, y, s, 1));
}

TEST_CASE("logistic regression on shuffled labels is at chance") {
    const int n = 2000, k = 4;
    Rng rng(3);
    Matrix h(n, 8);
    for (int i = 0; i < h.size(); ++i) h(i) = rng.normal();
    std::vector<int> y(n);
    for (auto& v : y) v = static_cast<int>(rng.below(k));
    const Split s = make_split(n, 4);
    const double acc = train_logreg(h, y, s, 1);
    const double sigma = std::sqrt(0.25 * 0.75 / s.test.size());
    CHECK(std::abs(acc - 0.25) < 3.0 * sigma);
}

TEST_CASE("validation indices never affect accuracy") {
    Rng rng(5);
    Matrix h(100, 4);
    for (int i = 0; i < h.size(); ++i) h(i) = rng.normal();
    std::vector<int> y(100);
    for (int i = 0; i < 100; ++i) y[i] = h(i, 0) > 0.0 ? 1 : 0;
    Split s = make_split(100, 6);
    const double a = train_logreg(h, y, s, 2);
    s.val.clear();
    CHECK(train_logreg(h, y, s, 2) == a);
}

TEST_CASE("logistic regression errors") {
    const Matrix h = Matrix::Random(10, 2);
    std::vector<int> y(10, 0);
    y[9] = 1;
    Split s;
    s.train = {0, 1, 2};
    s.test = {9};
    CHECK_THROWS_AS(train_logreg(h, y, s, 1), DegenerateError);
    std::vector<int> short_y(5, 0);
    CHECK_THROWS_AS(train_logreg(h, short_y, s, 1), DimensionError);
}

TEST_CASE("nmi conventions") {
    const std::vector<int> a{0, 0, 1, 1, 2, 2};
    const std::vector<int> relabeled{2, 2, 0, 0, 1, 1};
    const std::vector<int> single(6, 0);
    CHECK(nmi(a, a) == doctest::Approx(1.0));
    CHECK(nmi(a, relabeled) == doctest::Approx(1.0));
    CHECK(nmi(single, a) == 0.0);
    CHECK_THROWS_AS(nmi(a, std::vector<int>{0, 1}), DimensionError);
}

TEST_CASE("nmi matches the contingency oracle and is symmetric") {
    Rng rng(8);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<int> a(50), b(50);
        for (int i = 0; i < 50; ++i) {
            a[i] = static_cast<int>(rng.below(3));
            b[i] = rng.uniform() < 0.6 ? a[i] : static_cast<int>(rng.below(4));
        }
        CHECK(std::abs(nmi(a, b) - oracle::nmi(a, b)) < 1e-12);
        CHECK(std::abs(nmi(a, b) - nmi(b, a)) < 1e-12);
    }
}

TEST_CASE("k-means recovers well separated clusters") {
    Rng rng(9);
    Matrix h(90, 2);
    std::vector<int> y(90);
    for (int i = 0; i < 90; ++i) {
        y[i] = i / 30;
        h(i, 0) = 10.0 * y[i] + 0.1 * rng.normal();
        h(i, 1) = -5.0 * y[i] + 0.1 * rng.normal();
    }
    CHECK(kmeans_nmi(h, y, 3, 5, 1) == doctest::Approx(1.0));
    CHECK(kmeans(h, 3, 5, 1).sse == kmeans(h, 3, 5, 1).sse);
    CHECK_THROWS_AS(kmeans(h, 1, 5, 1), UsageError);
    // Duplicate points force empty clusters during Lloyd iterations.
    const Matrix dup = Matrix::Ones(10, 2);
    const KMeansResult r = kmeans(dup, 3, 2, 1);
    CHECK(r.assignment.size() == 10);
    CHECK(r.sse == 0.0);
}

TEST_CASE("GRV of identical graphs is zero") {
    SbmParams p;
    p.n = 30;
    p.p_intra = 0.3;
    p.feature_dim = 3;
    const Graph g = generate_sbm(p);
    TrainConfig cfg;
    cfg.mode = Mode::baseline;
    cfg.epochs = 3;
    cfg.hidden_dim = 8;
    cfg.out_dim = 4;
    CHECK(grv(g, g, cfg, 2, 1) == 0.0);
    const Graph other(Matrix::Zero(31, 3), {});
    CHECK_THROWS_AS(grv(g, other, cfg, 2, 1), UsageError);
}

TEST_CASE("metrics report JSON") {
    MetricsReport r;
    r.accuracy = 0.75;
    r.runtime_s = 1.5;
    const auto j = nlohmann::json::parse(r.to_json());
    CHECK(j.at("accuracy") == 0.75);
    CHECK_FALSE(j.contains("nmi"));
    CHECK(j.at("runtime_s") == 1.5);
}
