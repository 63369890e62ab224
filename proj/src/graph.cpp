#include "gchs/graph.hpp"

#include "gchs/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace gchs {

namespace {

void canonicalize(std::vector<Edge>& edges, int n) {
    for (auto& e : edges) {
        if (e.u < 0 || e.v < 0 || e.u >= n || e.v >= n) {
            throw IndexError("edge (" + std::to_string(e.u) + ", " + std::to_string(e.v) +
                             ") has endpoint outside [0, " + std::to_string(n) + ")");
        }
        if (e.u == e.v) {
            throw DomainError("self-loop on node " + std::to_string(e.u));
        }
        if (e.u > e.v) std::swap(e.u, e.v);
    }
    std::sort(edges.begin(), edges.end());
    edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
}

void check_mask(const Graph& g, std::span<const double> mask) {
    if (!mask.empty() && static_cast<int>(mask.size()) != g.num_edges()) {
        throw DimensionError("mask has " + std::to_string(mask.size()) + " entries for " +
                             std::to_string(g.num_edges()) + " edges");
    }
}

double weight(std::span<const double> mask, std::size_t e) { return mask.empty() ? 1.0 : mask[e]; }

}  // namespace

Graph::Graph(Matrix features, std::vector<Edge> edges, std::optional<std::vector<int>> labels)
    : features_(std::move(features)), edges_(std::move(edges)), labels_(std::move(labels)) {
    canonicalize(edges_, num_nodes());
    if (labels_ && static_cast<int>(labels_->size()) != num_nodes()) {
        throw DimensionError("label count " + std::to_string(labels_->size()) +
                             " differs from node count " + std::to_string(num_nodes()));
    }
    if (labels_) {
        for (int y : *labels_) {
            if (y < 0) throw DomainError("negative class label " + std::to_string(y));
        }
    }
}

const std::vector<int>& Graph::labels() const {
    if (!labels_) throw UsageError("graph has no labels");
    return *labels_;
}

int Graph::num_classes() const {
    const auto& y = labels();
    return y.empty() ? 0 : *std::max_element(y.begin(), y.end()) + 1;
}

bool Graph::has_edge(int u, int v) const {
    if (u > v) std::swap(u, v);
    return std::binary_search(edges_.begin(), edges_.end(), Edge{u, v});
}

Graph Graph::with_retained(std::span<const double> weights) const {
    check_mask(*this, weights);
    std::vector<Edge> kept;
    kept.reserve(edges_.size());
    for (std::size_t e = 0; e < edges_.size(); ++e) {
        if (weights[e] > 0.0) kept.push_back(edges_[e]);
    }
    return with_edges(std::move(kept));
}

Graph Graph::with_edges(std::vector<Edge> edges) const { return Graph(features_, std::move(edges), labels_); }

ClusterAssignment one_hot(std::span<const int> assignment, int k) {
    ClusterAssignment c = Matrix::Zero(static_cast<Eigen::Index>(assignment.size()), k);
    for (std::size_t i = 0; i < assignment.size(); ++i) {
        if (assignment[i] < 0 || assignment[i] >= k) throw IndexError("cluster id out of range");
        c(static_cast<Eigen::Index>(i), assignment[i]) = 1.0;
    }
    return c;
}

Matrix adjacency(const Graph& g, std::span<const double> mask) {
    check_mask(g, mask);
    Matrix a = Matrix::Zero(g.num_nodes(), g.num_nodes());
    const auto& edges = g.edges();
    for (std::size_t e = 0; e < edges.size(); ++e) {
        const double w = weight(mask, e);
        a(edges[e].u, edges[e].v) = w;
        a(edges[e].v, edges[e].u) = w;
    }
    return a;
}

Vector self_loop_degrees(const Graph& g, std::span<const double> mask) {
    check_mask(g, mask);
    Vector d = Vector::Ones(g.num_nodes());
    const auto& edges = g.edges();
    for (std::size_t e = 0; e < edges.size(); ++e) {
        const double w = weight(mask, e);
        d(edges[e].u) += w;
        d(edges[e].v) += w;
    }
    return d;
}

Matrix normalized_adjacency(const Graph& g, std::span<const double> mask) {
    Matrix a = adjacency(g, mask);
    a.diagonal().array() += 1.0;
    const Vector s = self_loop_degrees(g, mask).array().rsqrt();
    // s_i s_j is commutative, so the result is exactly symmetric.
    return a.cwiseProduct(s * s.transpose());
}

Matrix laplacian(const Graph& g, std::span<const double> mask) {
    const int n = g.num_nodes();
    return Matrix::Identity(n, n) - normalized_adjacency(g, mask);
}

double homophily_label(const Graph& g) {
    const auto& y = g.labels();
    if (g.num_edges() == 0) throw DegenerateError("label homophily is undefined without edges");
    int intra = 0;
    for (const auto& e : g.edges()) intra += (y[e.u] == y[e.v]) ? 1 : 0;
    return static_cast<double>(intra) / g.num_edges();
}

double homophily_feature(const Graph& g, std::span<const double> mask) {
    const Matrix& x = g.features();
    const Matrix l = laplacian(g, mask);
    return (x.array() * (l * x).array()).sum();
}

double normalized_cut(const Graph& g, const ClusterAssignment& c) {
    if (c.rows() != g.num_nodes()) throw DimensionError("assignment rows differ from node count");
    const Matrix l = laplacian(g, {});
    const Vector d = self_loop_degrees(g, {});
    const Vector num = (c.array() * (l * c).array()).colwise().sum();
    const Vector den = (c.array().colwise() * d.array() * c.array()).colwise().sum();
    double total = 0.0;
    for (Eigen::Index k = 0; k < c.cols(); ++k) {
        if (!(den(k) > 0.0)) throw DegenerateError("cluster " + std::to_string(k) + " has zero volume");
        total += num(k) / den(k);
    }
    return total / static_cast<double>(c.cols());
}

Graph generate_sbm(const SbmParams& p) {
    if (p.n <= 0) throw UsageError("SBM needs at least one node");
    if (p.k_blocks <= 0 || p.k_blocks > p.n) throw UsageError("SBM block count must lie in [1, n]");
    if (!(0.0 <= p.p_inter && p.p_inter <= p.p_intra && p.p_intra <= 1.0)) {
        throw UsageError("SBM probabilities must satisfy 0 <= p_inter <= p_intra <= 1");
    }
    if (p.feature_dim < p.k_blocks) throw UsageError("SBM feature_dim must be at least k_blocks");

    Rng rng(p.seed);
    std::vector<int> labels(p.n);
    for (int i = 0; i < p.n; ++i) {
        // Contiguous blocks whose sizes differ by at most one.
        labels[i] = static_cast<int>(static_cast<long long>(i) * p.k_blocks / p.n);
    }

    std::vector<Edge> edges;
    for (int i = 0; i < p.n; ++i) {
        for (int j = i + 1; j < p.n; ++j) {
            const double prob = labels[i] == labels[j] ? p.p_intra : p.p_inter;
            if (rng.uniform() < prob) edges.push_back({i, j});
        }
    }

    // Means are scaled basis vectors shifted by their centroid, so they stay
    // mean_sep apart and average to zero.
    const double offset = p.mean_sep / std::sqrt(2.0);
    const double centroid = offset / p.k_blocks;
    Matrix x(p.n, p.feature_dim);
    for (int i = 0; i < p.n; ++i) {
        for (int f = 0; f < p.feature_dim; ++f) {
            const double mean = f < p.k_blocks ? (f == labels[i] ? offset : 0.0) - centroid : 0.0;
            x(i, f) = p.feature_std * rng.normal() + mean;
        }
    }
    return Graph(std::move(x), std::move(edges), std::move(labels));
}

std::vector<Edge> read_edge_list(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open edge list " + path.string());
    std::vector<Edge> edges;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        std::istringstream fields(line);
        std::string a;
        if (!(fields >> a)) continue;
        std::string b, extra;
        if (!(fields >> b) || (fields >> extra)) {
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected 'src dst'");
        }
        try {
            edges.push_back({parse_int(a), parse_int(b)});
        } catch (const ParseError& e) {
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return edges;
}

Matrix read_features_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open feature file " + path.string());
    std::vector<std::vector<double>> rows;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        std::vector<double> row;
        std::istringstream cells(line);
        std::string cell;
        while (std::getline(cells, cell, ',')) {
            try {
                row.push_back(parse_double(cell));
            } catch (const ParseError& e) {
                throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
            }
        }
        if (!rows.empty() && row.size() != rows.front().size()) {
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                             std::to_string(rows.front().size()) + " columns");
        }
        rows.push_back(std::move(row));
    }
    const auto cols = rows.empty() ? 0 : static_cast<Eigen::Index>(rows.front().size());
    Matrix x(static_cast<Eigen::Index>(rows.size()), cols);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) x(static_cast<Eigen::Index>(i), j) = rows[i][j];
    }
    return x;
}

std::vector<int> read_labels(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open label file " + path.string());
    std::vector<int> labels;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream fields(line);
        std::string token, extra;
        if (!(fields >> token)) continue;
        if (fields >> extra) throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected one integer");
        try {
            labels.push_back(parse_int(token));
        } catch (const ParseError& e) {
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
    return labels;
}

Graph load_graph(const std::filesystem::path& edge_path, const std::filesystem::path& feature_path,
                 const std::optional<std::filesystem::path>& label_path) {
    Matrix x = read_features_csv(feature_path);
    std::vector<Edge> edges = read_edge_list(edge_path);
    std::optional<std::vector<int>> labels;
    if (label_path) labels = read_labels(*label_path);
    return Graph(std::move(x), std::move(edges), std::move(labels));
}

void write_edge_list(const std::filesystem::path& path, std::span<const Edge> edges) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    for (const auto& e : edges) out << e.u << ' ' << e.v << '\n';
}

void write_features_csv(const std::filesystem::path& path, const Matrix& features) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    for (Eigen::Index i = 0; i < features.rows(); ++i) {
        for (Eigen::Index j = 0; j < features.cols(); ++j) {
            if (j) out << ',';
            out << format_double(features(i, j));
        }
        out << '\n';
    }
}

void write_labels(const std::filesystem::path& path, std::span<const int> labels) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    for (int y : labels) out << y << '\n';
}

}  // namespace gchs
