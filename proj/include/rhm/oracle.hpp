#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "rhm/generator.hpp"
#include "rhm/grammar.hpp"

// Exact distributions on one grammar instance. Two independent routes are
// provided: dynamic programming down the fixed tree, and full enumeration of
// every derivation. They must agree to floating-point accuracy; tests lean
// on that.

namespace rhm {

// --- dynamic programming ---------------------------------------------------

// Distribution of the symbol at the node reached from the root by `path`
// (entries are child positions in 0..s-1; empty = root). Marginals below the
// root depend on the path: position within a rule matters in a fixed
// instance.
std::vector<double> node_marginal(const GrammarInstance& g,
                                  std::span<const std::uint32_t> path);

// Marginals of every node at `level`, in left-to-right node order.
std::vector<std::vector<double>> level_marginals(const GrammarInstance& g,
                                                 std::uint32_t level);

// P[children of the node at parent_path equal `tuple`]; zero when the tuple
// is not grammatical. parent_path addresses a node at tuple level + 1.
double tuple_marginal(const GrammarInstance& g, std::uint32_t level,
                      std::span<const std::uint32_t> parent_path,
                      std::span<const Symbol> tuple);

struct ContextGeometry {
    std::uint32_t tuple_pos = 0;   // r: tuple's slot under its grandparent
    std::uint32_t cousin_pos = 1;  // r' != r: cousin tuple's slot
    std::uint32_t target_pos = 0;  // t: token inside the cousin tuple
    // When true the chain runs from the average marginal over all
    // level-(l+2) nodes, the large-sample limit of pooling grandparent
    // positions. When false it runs at one node: grandparent_path, or the
    // leftmost node when the path is empty.
    bool aggregate_nodes = true;
    std::vector<std::uint32_t> grandparent_path;
};

struct ContextOracle {
    std::uint32_t level = 0;
    ContextGeometry geometry;
    std::vector<Tuple> tuples;             // grammatical tuples, sorted
    std::vector<std::vector<double>> phi;  // phi[i] pairs with tuples[i]
    // reachable[i]: the tuple's parent can occupy slot r at all; phi is a
    // distribution iff reachable.
    std::vector<bool> reachable;
    std::vector<std::vector<double>> centers;  // per parent symbol
    std::vector<bool> center_defined;
    std::vector<double> target_marginal;  // distribution of Z itself
};

// phi[nu](z) = P[cousin token = z | tuple = nu] through the exact chain:
// posterior of the grandparent given the parent at slot r, cousin parent at
// slot r', token at slot t. Requires level <= L-2.
ContextOracle exact_context_vectors(const GrammarInstance& g,
                                    std::uint32_t level,
                                    const ContextGeometry& geometry = {});

struct DiagnosticsReport {
    std::uint32_t level = 0;
    double f = 0.0;
    bool learnable = false;
    // Range of v*m*P[T=nu] over grammatical tuples, averaged over nodes.
    double balance_min = 0.0;
    double balance_max = 0.0;
    // Context-side fields; absent for level = L-1 where no cousin exists.
    bool has_context = false;
    double min_center_distance = 0.0;     // min over defined parent pairs
    std::uint32_t undefined_centers = 0;  // parents unreachable at slot r
    // min_center_distance / (sqrt(1-f)/m); meaningless when f = 1.
    double separation_ratio = 0.0;
    bool separation_defined = false;
};

DiagnosticsReport diagnostics(const GrammarInstance& g, std::uint32_t level,
                              const ContextGeometry& geometry = {});

// --- enumeration -----------------------------------------------------------

// Number of derivations: v * m^((s^L-1)/(s-1)), saturated at 2^63.
std::uint64_t derivation_count(const GrammarParams& params);

// Visits every derivation exactly once; all derivations are equiprobable
// with probability 1/derivation_count. Throws when the count exceeds the
// budget.
void enumerate_derivations(const GrammarInstance& g, std::uint64_t budget,
                           const std::function<void(const AnnotatedSample&)>& fn);

// Enumeration-based counterparts of the DP quantities above.
std::vector<double> brute_node_marginal(const GrammarInstance& g,
                                        std::span<const std::uint32_t> path,
                                        std::uint64_t budget);
double brute_tuple_marginal(const GrammarInstance& g, std::uint32_t level,
                            std::span<const std::uint32_t> parent_path,
                            std::span<const Symbol> tuple, std::uint64_t budget);
ContextOracle brute_context_vectors(const GrammarInstance& g,
                                    std::uint32_t level,
                                    const ContextGeometry& geometry,
                                    std::uint64_t budget);

}  // namespace rhm
