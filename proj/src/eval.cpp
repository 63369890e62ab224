#include "gchs/eval.hpp"

#include "gchs/contrastive.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>

namespace gchs {

Split make_split(int n, std::uint64_t seed, double train_frac, double val_frac) {
    if (n <= 0) throw UsageError("split needs at least one node");
    if (!(train_frac > 0.0 && val_frac >= 0.0 && train_frac + val_frac < 1.0)) {
        throw UsageError("split fractions must satisfy train > 0, val >= 0, train + val < 1");
    }
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    std::shuffle(order.begin(), order.end(), rng.engine());
    const auto n_train = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(train_frac * n)));
    const auto n_val = static_cast<std::size_t>(std::lround(val_frac * n));
    Split s;
    s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.val.assign(order.begin() + static_cast<std::ptrdiff_t>(n_train),
                 order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), n_train + n_val)));
    s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(std::min(order.size(), n_train + n_val)), order.end());
    return s;
}

void check_split(const Split& split, int n) {
    std::set<int> seen;
    for (const auto* part : {&split.train, &split.val, &split.test}) {
        for (int i : *part) {
            if (i < 0 || i >= n) throw IndexError("split index " + std::to_string(i) + " outside the node set");
            if (!seen.insert(i).second) throw UsageError("split parts overlap at node " + std::to_string(i));
        }
    }
}

double train_logreg(const Matrix& h, std::span<const int> labels, const Split& split, std::uint64_t seed,
                    const LogregConfig& cfg) {
    if (static_cast<Eigen::Index>(labels.size()) != h.rows()) throw DimensionError("label count differs from rows");
    check_split(split, static_cast<int>(h.rows()));
    if (split.train.empty() || split.test.empty()) throw DegenerateError("split has an empty train or test part");
    std::set<int> train_classes;
    for (int i : split.train) train_classes.insert(labels[static_cast<std::size_t>(i)]);
    if (train_classes.size() < 2) throw DegenerateError("training split contains a single class");

    const int k = *std::max_element(labels.begin(), labels.end()) + 1;
    const auto d = h.cols();
    const auto n_train = static_cast<Eigen::Index>(split.train.size());

    // Column standardization with training statistics.
    Matrix x_train(n_train, d);
    for (Eigen::Index r = 0; r < n_train; ++r) x_train.row(r) = h.row(split.train[static_cast<std::size_t>(r)]);
    const Eigen::RowVectorXd mean = x_train.colwise().mean();
    Eigen::RowVectorXd scale = ((x_train.rowwise() - mean).array().square().colwise().mean()).sqrt();
    scale = scale.unaryExpr([](double s) { return s > 1e-12 ? 1.0 / s : 1.0; });
    auto standardize = [&](const Matrix& m) -> Matrix {
        return ((m.rowwise() - mean).array().rowwise() * scale.array()).matrix();
    };
    x_train = standardize(x_train);

    Matrix y = Matrix::Zero(n_train, k);
    for (Eigen::Index r = 0; r < n_train; ++r) y(r, labels[static_cast<std::size_t>(split.train[static_cast<std::size_t>(r)])]) = 1.0;

    Rng rng(seed);
    Matrix w = glorot_uniform(d, k, rng);
    Eigen::RowVectorXd b = Eigen::RowVectorXd::Zero(k);
    Matrix mw = Matrix::Zero(d, k), vw = Matrix::Zero(d, k);
    Eigen::RowVectorXd mb = Eigen::RowVectorXd::Zero(k), vb = Eigen::RowVectorXd::Zero(k);
    const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

    for (int t = 1; t <= cfg.epochs; ++t) {
        Matrix logits = (x_train * w).rowwise() + b;
        const Eigen::VectorXd peak = logits.rowwise().maxCoeff();
        Matrix prob = (logits.colwise() - peak).array().exp().matrix();
        prob.array().colwise() /= prob.rowwise().sum().array();
        const Matrix delta = (prob - y) / static_cast<double>(n_train);
        const Matrix gw = x_train.transpose() * delta + cfg.weight_decay * w;
        const Eigen::RowVectorXd gb = delta.colwise().sum();
        const double c1 = 1.0 - std::pow(beta1, t), c2 = 1.0 - std::pow(beta2, t);
        mw = beta1 * mw + (1 - beta1) * gw;
        vw = beta2 * vw + (1 - beta2) * gw.cwiseProduct(gw);
        mb = beta1 * mb + (1 - beta1) * gb;
        vb = beta2 * vb + (1 - beta2) * gb.cwiseProduct(gb);
        w.array() -= cfg.lr * (mw.array() / c1) / ((vw.array() / c2).sqrt() + eps);
        b.array() -= cfg.lr * (mb.array() / c1) / ((vb.array() / c2).sqrt() + eps);
    }

    int correct = 0;
    for (int i : split.test) {
        const Eigen::RowVectorXd x = standardize(h.row(i));
        const Eigen::RowVectorXd scores = x * w + b;
        Eigen::Index arg = 0;
        scores.maxCoeff(&arg);
        correct += (static_cast<int>(arg) == labels[static_cast<std::size_t>(i)]) ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(split.test.size());
}

double probe_accuracy(const Matrix& h, std::span<const int> labels, std::uint64_t seed) {
    const Split split = make_split(static_cast<int>(h.rows()), derive_seed(seed, 99));
    return train_logreg(h, labels, split, derive_seed(seed, 98));
}

double nmi(std::span<const int> a, std::span<const int> b) {
    if (a.size() != b.size()) throw DimensionError("nmi: labelings differ in length");
    if (a.empty()) throw UsageError("nmi of empty labelings");
    const double n = static_cast<double>(a.size());
    std::map<std::pair<int, int>, double> joint;
    std::map<int, double> pa, pb;
    for (std::size_t i = 0; i < a.size(); ++i) {
        joint[{a[i], b[i]}] += 1.0;
        pa[a[i]] += 1.0;
        pb[b[i]] += 1.0;
    }
    auto entropy = [n](const std::map<int, double>& counts) {
        double h = 0.0;
        for (const auto& [key, c] : counts) h -= (c / n) * std::log(c / n);
        return h;
    };
    const double ha = entropy(pa), hb = entropy(pb);
    if (ha <= 0.0 || hb <= 0.0) return 0.0;
    double mi = 0.0;
    for (const auto& [key, c] : joint) {
        mi += (c / n) * std::log(c * n / (pa[key.first] * pb[key.second]));
    }
    return std::clamp(mi / std::sqrt(ha * hb), 0.0, 1.0);
}

namespace {

KMeansResult lloyd(const Matrix& h, int k, Rng& rng, int max_iter) {
    const auto n = h.rows();
    Matrix centroids(k, h.cols());
    // k-means++ seeding.
    Vector dist = Vector::Constant(n, std::numeric_limits<double>::infinity());
    centroids.row(0) = h.row(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n))));
    for (int c = 1; c < k; ++c) {
        for (Eigen::Index i = 0; i < n; ++i) dist(i) = std::min(dist(i), (h.row(i) - centroids.row(c - 1)).squaredNorm());
        const double total = dist.sum();
        Eigen::Index pick = 0;
        if (total > 0.0) {
            double target = rng.uniform() * total;
            for (pick = 0; pick < n - 1; ++pick) {
                target -= dist(pick);
                if (target <= 0.0) break;
            }
        } else {
            pick = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
        }
        centroids.row(c) = h.row(pick);
    }

    KMeansResult r;
    r.assignment.assign(static_cast<std::size_t>(n), -1);
    Vector own(n);
    for (int it = 0; it < max_iter; ++it) {
        bool changed = false;
        for (Eigen::Index i = 0; i < n; ++i) {
            Eigen::Index best = 0;
            own(i) = (centroids.rowwise() - h.row(i)).rowwise().squaredNorm().minCoeff(&best);
            if (r.assignment[static_cast<std::size_t>(i)] != static_cast<int>(best)) {
                r.assignment[static_cast<std::size_t>(i)] = static_cast<int>(best);
                changed = true;
            }
        }
        Matrix sums = Matrix::Zero(k, h.cols());
        std::vector<int> counts(static_cast<std::size_t>(k), 0);
        for (Eigen::Index i = 0; i < n; ++i) {
            sums.row(r.assignment[static_cast<std::size_t>(i)]) += h.row(i);
            ++counts[static_cast<std::size_t>(r.assignment[static_cast<std::size_t>(i)])];
        }
        for (int c = 0; c < k; ++c) {
            if (counts[static_cast<std::size_t>(c)] > 0) {
                centroids.row(c) = sums.row(c) / counts[static_cast<std::size_t>(c)];
            } else {
                // Empty cluster: re-seed from the point farthest from its centroid.
                Eigen::Index far = 0;
                own.maxCoeff(&far);
                centroids.row(c) = h.row(far);
                own(far) = 0.0;
                changed = true;
            }
        }
        if (!changed) break;
    }
    r.sse = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        r.sse += (h.row(i) - centroids.row(r.assignment[static_cast<std::size_t>(i)])).squaredNorm();
    }
    r.centroids = std::move(centroids);
    return r;
}

}  // namespace

KMeansResult kmeans(const Matrix& h, int k, int restarts, std::uint64_t seed, int max_iter) {
    if (k < 2) throw UsageError("k-means needs K >= 2");
    if (h.rows() < k) throw UsageError("k-means needs at least K points");
    if (restarts < 1) throw UsageError("k-means needs at least one restart");
    Rng rng(seed);
    KMeansResult best;
    best.sse = std::numeric_limits<double>::infinity();
    for (int r = 0; r < restarts; ++r) {
        KMeansResult run = lloyd(h, k, rng, max_iter);
        if (run.sse < best.sse) best = std::move(run);
    }
    return best;
}

double kmeans_nmi(const Matrix& h, std::span<const int> labels, int k, int restarts, std::uint64_t seed) {
    if (static_cast<Eigen::Index>(labels.size()) != h.rows()) throw DimensionError("label count differs from rows");
    const KMeansResult r = kmeans(h, k, restarts, seed);
    return nmi(r.assignment, labels);
}

GrvResult grv_detailed(const Graph& clean, const Graph& poisoned, const TrainConfig& cfg, int n_samples,
                       std::uint64_t seed) {
    if (clean.num_nodes() != poisoned.num_nodes()) throw UsageError("GRV needs graphs over the same node set");
    if (clean.features() != poisoned.features()) throw UsageError("GRV needs graphs with identical features");
    const TrainedModel clean_model = train_gchs(clean, cfg);
    const TrainedModel poisoned_model = train_gchs(poisoned, cfg);
    GrvResult r;
    r.mi_clean = mi_estimate(clean, clean_model, n_samples, seed);
    r.mi_poisoned = mi_estimate(poisoned, poisoned_model, n_samples, seed);
    r.grv = r.mi_clean - r.mi_poisoned;
    return r;
}

double grv(const Graph& clean, const Graph& poisoned, const TrainConfig& cfg, int n_samples, std::uint64_t seed) {
    return grv_detailed(clean, poisoned, cfg, n_samples, seed).grv;
}

std::string MetricsReport::to_json() const {
    nlohmann::ordered_json j;
    auto put = [&j](const char* key, const std::optional<double>& v) {
        if (v) j[key] = *v;
    };
    put("accuracy", accuracy);
    put("nmi", nmi);
    put("grv", grv);
    put("h_y_before", h_y_before);
    put("h_y_after", h_y_after);
    put("delta_x_before", delta_x_before);
    put("delta_x_after", delta_x_after);
    j["runtime_s"] = runtime_s;
    return j.dump(2);
}

}  // namespace gchs
