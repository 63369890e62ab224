#pragma once

#include "gchs/graph.hpp"
#include "gchs/trainer.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace gchs {

struct Split {
    std::vector<int> train;
    std::vector<int> val;
    std::vector<int> test;
};

// Random disjoint split, default 10% / 10% / 80%.
Split make_split(int n, std::uint64_t seed, double train_frac = 0.1, double val_frac = 0.1);
void check_split(const Split& split, int n);

struct LogregConfig {
    double lr = 0.01;
    int epochs = 300;
    double weight_decay = 5e-4;
};

// Multinomial logistic regression on frozen embeddings, trained with Adam on
// the train indices. Returns accuracy on the test indices.
double train_logreg(const Matrix& h, std::span<const int> labels, const Split& split, std::uint64_t seed,
                    const LogregConfig& cfg = {});

// Fixed evaluation protocol: split seeded by derive_seed(seed, 99), classifier
// by derive_seed(seed, 98).
double probe_accuracy(const Matrix& h, std::span<const int> labels, std::uint64_t seed);

// I(a; b) / sqrt(H(a) H(b)) with natural logs; 0 if either entropy is 0.
double nmi(std::span<const int> a, std::span<const int> b);

struct KMeansResult {
    std::vector<int> assignment;
    Matrix centroids;
    double sse = 0.0;
};

// Lloyd iterations from k-means++ seeds; best of `restarts` by SSE.
KMeansResult kmeans(const Matrix& h, int k, int restarts, std::uint64_t seed, int max_iter = 300);

double kmeans_nmi(const Matrix& h, std::span<const int> labels, int k, int restarts, std::uint64_t seed);

// mi(clean, model_clean) - mi(poisoned, model_poisoned), both models trained
// with the same configuration and seeds.
struct GrvResult {
    double grv = 0.0;
    double mi_clean = 0.0;
    double mi_poisoned = 0.0;
};
GrvResult grv_detailed(const Graph& clean, const Graph& poisoned, const TrainConfig& cfg, int n_samples,
                       std::uint64_t seed);
double grv(const Graph& clean, const Graph& poisoned, const TrainConfig& cfg, int n_samples, std::uint64_t seed);

struct MetricsReport {
    std::optional<double> accuracy;
    std::optional<double> nmi;
    std::optional<double> grv;
    std::optional<double> h_y_before;
    std::optional<double> h_y_after;
    std::optional<double> delta_x_before;
    std::optional<double> delta_x_after;
    double runtime_s = 0.0;

    std::string to_json() const;
};

}  // namespace gchs
