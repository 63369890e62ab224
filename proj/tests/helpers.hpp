#pragma once

#include "gchs/graph.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace testing {

// Random graph with uniform features in [-1, 1] and labels in [0, k).
inline gchs::Graph random_graph(int n, double p_edge, int dim, int k, std::uint64_t seed) {
    gchs::Rng rng(seed);
    std::vector<gchs::Edge> edges;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            if (rng.uniform() < p_edge) edges.push_back({i, j});
        }
    }
    gchs::Matrix x(n, dim);
    for (int i = 0; i < x.size(); ++i) x(i) = 2.0 * rng.uniform() - 1.0;
    std::vector<int> y(static_cast<std::size_t>(n));
    for (auto& v : y) v = static_cast<int>(rng.below(static_cast<std::uint64_t>(k)));
    return gchs::Graph(std::move(x), std::move(edges), std::move(y));
}

inline std::vector<double> to_std(const gchs::Vector& v) { return {v.data(), v.data() + v.size()}; }

// Fresh scratch directory under the build tree's temp area.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("gchs_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace testing
