#pragma once

#include "gchs/common.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <utility>
#include <vector>

namespace gchs {

// Undirected edge stored canonically with first < second.
struct Edge {
    int u = 0;
    int v = 0;

    friend bool operator==(const Edge&, const Edge&) = default;
    friend auto operator<=>(const Edge&, const Edge&) = default;
};

// Attributed undirected graph: node features, canonical edge list and
// optional integer labels. Edges are sorted, deduplicated and loop-free.
class Graph {
public:
    Graph() = default;

    // Validates and canonicalizes `edges` (orientation, order, duplicates).
    // Throws IndexError on out-of-range endpoints, DomainError on self-loops.
    Graph(Matrix features, std::vector<Edge> edges,
          std::optional<std::vector<int>> labels = std::nullopt);

    int num_nodes() const noexcept { return static_cast<int>(features_.rows()); }
    int num_edges() const noexcept { return static_cast<int>(edges_.size()); }
    int feature_dim() const noexcept { return static_cast<int>(features_.cols()); }

    const Matrix& features() const noexcept { return features_; }
    const std::vector<Edge>& edges() const noexcept { return edges_; }
    bool has_labels() const noexcept { return labels_.has_value(); }
    const std::vector<int>& labels() const;
    int num_classes() const;

    bool has_edge(int u, int v) const;

    // Edges whose weight is strictly positive, in canonical order.
    Graph with_retained(std::span<const double> weights) const;
    Graph with_edges(std::vector<Edge> edges) const;

private:
    Matrix features_;
    std::vector<Edge> edges_;
    std::optional<std::vector<int>> labels_;
};

// Dense n x K soft or hard cluster assignment.
using ClusterAssignment = Matrix;

ClusterAssignment one_hot(std::span<const int> assignment, int k);

// Weighted symmetric adjacency A∘mask (zero diagonal). `mask`, when given,
// holds one weight per canonical edge.
Matrix adjacency(const Graph& g, std::span<const double> mask = {});

// Degrees of A∘mask + I.
Vector self_loop_degrees(const Graph& g, std::span<const double> mask = {});

// D^{-1/2}(A∘mask + I)D^{-1/2} with D the degree of A∘mask + I.
Matrix normalized_adjacency(const Graph& g, std::span<const double> mask = {});

// I - normalized_adjacency(g, mask).
Matrix laplacian(const Graph& g, std::span<const double> mask = {});

// Fraction of edges joining same-label endpoints.
double homophily_label(const Graph& g);

// tr(X^T L X) with the self-loop normalized Laplacian.
double homophily_feature(const Graph& g, std::span<const double> mask = {});

// (1/K) Σ_k (C^T L C)_kk / (C^T D C)_kk, D including self-loops.
double normalized_cut(const Graph& g, const ClusterAssignment& c);

struct SbmParams {
    int n = 300;
    int k_blocks = 3;
    double p_intra = 0.05;
    double p_inter = 0.002;
    int feature_dim = 16;
    double mean_sep = 1.0;
    double feature_std = 1.0;
    std::uint64_t seed = 0;
};

// Planted-partition graph with Gaussian class-conditional features.
// Class means are mean_sep/sqrt(2) * e_k minus their centroid: every pair is
// mean_sep apart and the means average to zero. Needs feature_dim >= k.
Graph generate_sbm(const SbmParams& params);

// Text formats: edge list ("u v" per line, '#' comments), CSV features,
// one label per line.
Graph load_graph(const std::filesystem::path& edge_path,
                 const std::filesystem::path& feature_path,
                 const std::optional<std::filesystem::path>& label_path = std::nullopt);

std::vector<Edge> read_edge_list(const std::filesystem::path& path);
Matrix read_features_csv(const std::filesystem::path& path);
std::vector<int> read_labels(const std::filesystem::path& path);

void write_edge_list(const std::filesystem::path& path, std::span<const Edge> edges);
void write_features_csv(const std::filesystem::path& path, const Matrix& features);
void write_labels(const std::filesystem::path& path, std::span<const int> labels);

}  // namespace gchs
