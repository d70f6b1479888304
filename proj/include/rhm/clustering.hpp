#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rhm/tuple_map.hpp"

// Small dense clustering utilities. Everything here is deterministic given
// the seeds in the config; ties always break toward the lowest index.

namespace rhm {

struct ClusterConfig {
    std::uint32_t k = 2;
    std::uint32_t restarts = 32;
    std::uint32_t max_iters = 100;
    double tol = 1e-6;           // relative inertia improvement threshold
    std::uint64_t cluster_seed = 0;
    unsigned threads = 1;        // restarts run in parallel when > 1
};

struct ClusterResult {
    std::vector<std::uint32_t> assignments;  // size n, values in 0..k-1
    std::vector<std::vector<double>> centers;
    double inertia = 0.0;
    std::uint32_t best_restart = 0;
    std::uint32_t iterations = 0;            // of the winning restart
    std::vector<double> inertia_history;     // per iteration, winning restart
};

// Lloyd iterations with distance-squared-proportional greedy seeding. Each
// restart r is a pure function of (cluster_seed, r); the winner is the
// lowest (inertia, restart index). Empty clusters are repaired by moving in
// the farthest point. On return the assignments are nearest-center
// consistent with the returned centers.
ClusterResult kmeans(const std::vector<std::vector<double>>& points,
                     const ClusterConfig& config);

// Permutation sigma maximizing sum_i counts[i][sigma(i)] over a square
// matrix (Kuhn-Munkres). Entries must be finite.
std::vector<std::uint32_t> hungarian_match(
    const std::vector<std::vector<double>>& counts);

// Fraction of positions where predicted == relabeled truth under the best
// label permutation. Predictions may carry kNoSymbol, which never matches
// but stays in the denominator. Truth labels must be < k.
double permuted_accuracy(std::span<const Symbol> predicted,
                         std::span<const Symbol> truth, std::uint32_t k);

}  // namespace rhm
