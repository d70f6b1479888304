#include "rhm/oracle.hpp"

#include <cmath>
#include <stdexcept>

namespace rhm {
namespace {

// counts[a][pos][c]: how many expansions of level-(l+1) symbol a carry
// level-l symbol c at slot pos.
std::vector<std::vector<std::vector<std::uint32_t>>> slot_counts(
    const GrammarInstance& g, std::uint32_t level) {
    const std::uint32_t s = g.params.branching;
    const std::uint32_t v = g.params.vocab;
    std::vector<std::vector<std::vector<std::uint32_t>>> counts(
        v, std::vector<std::vector<std::uint32_t>>(s, std::vector<std::uint32_t>(v, 0)));
    for (std::uint32_t a = 0; a < v; ++a)
        for (const Tuple& t : g.rules[level][a])
            for (std::uint32_t pos = 0; pos < s; ++pos) ++counts[a][pos][t[pos]];
    return counts;
}

std::vector<double> descend(const GrammarInstance& g, std::vector<double> pi,
                            std::uint32_t from_level, std::uint32_t slot) {
    // One step down: from a node at from_level to its child at `slot`.
    const std::uint32_t v = g.params.vocab;
    const double m = g.params.rules_per_symbol;
    std::vector<double> out(v, 0.0);
    for (std::uint32_t a = 0; a < v; ++a) {
        if (pi[a] == 0.0) continue;
        for (const Tuple& t : g.rules[from_level - 1][a])
            out[t[slot]] += pi[a] / m;
    }
    return out;
}

void check_geometry(const GrammarInstance& g, std::uint32_t level,
                    const ContextGeometry& geom) {
    const std::uint32_t s = g.params.branching;
    if (level + 2 > g.params.depth)
        throw std::invalid_argument("no cousin exists: level must be at most L-2");
    if (geom.tuple_pos >= s || geom.cousin_pos >= s || geom.target_pos >= s)
        throw std::invalid_argument("geometry slot out of range");
    if (geom.tuple_pos == geom.cousin_pos)
        throw std::invalid_argument("cousin slot must differ from tuple slot");
}

std::vector<double> grandparent_marginal(const GrammarInstance& g,
                                         std::uint32_t level,
                                         const ContextGeometry& geom) {
    const std::uint32_t gp_level = level + 2;
    if (geom.aggregate_nodes) {
        const auto all = level_marginals(g, gp_level);
        std::vector<double> mean(g.params.vocab, 0.0);
        for (const auto& pi : all)
            for (std::uint32_t a = 0; a < g.params.vocab; ++a)
                mean[a] += pi[a] / static_cast<double>(all.size());
        return mean;
    }
    std::vector<std::uint32_t> path = geom.grandparent_path;
    if (path.empty()) path.assign(g.params.depth - gp_level, 0);
    if (path.size() != g.params.depth - gp_level)
        throw std::invalid_argument("grandparent path has wrong length");
    return node_marginal(g, path);
}

std::uint64_t node_index(std::span<const std::uint32_t> path, std::uint32_t s) {
    std::uint64_t idx = 0;
    for (std::uint32_t r : path) idx = idx * s + r;
    return idx;
}

}  // namespace

std::vector<double> node_marginal(const GrammarInstance& g,
                                  std::span<const std::uint32_t> path) {
    const std::uint32_t L = g.params.depth;
    if (path.size() > L) throw std::invalid_argument("path longer than the tree");
    for (std::uint32_t r : path)
        if (r >= g.params.branching)
            throw std::invalid_argument("path step out of range");
    std::vector<double> pi(g.params.vocab, 1.0 / g.params.vocab);
    std::uint32_t level = L;
    for (std::uint32_t r : path) {
        pi = descend(g, std::move(pi), level, r);
        --level;
    }
    return pi;
}

std::vector<std::vector<double>> level_marginals(const GrammarInstance& g,
                                                 std::uint32_t level) {
    const std::uint32_t L = g.params.depth;
    if (level > L) throw std::invalid_argument("level exceeds depth");
    std::vector<std::vector<double>> current = {
        std::vector<double>(g.params.vocab, 1.0 / g.params.vocab)};
    for (std::uint32_t lvl = L; lvl > level; --lvl) {
        std::vector<std::vector<double>> next;
        next.reserve(current.size() * g.params.branching);
        for (const auto& pi : current)
            for (std::uint32_t r = 0; r < g.params.branching; ++r)
                next.push_back(descend(g, pi, lvl, r));
        current = std::move(next);
    }
    return current;
}

double tuple_marginal(const GrammarInstance& g, std::uint32_t level,
                      std::span<const std::uint32_t> parent_path,
                      std::span<const Symbol> tuple) {
    if (level >= g.params.depth)
        throw std::invalid_argument("tuple level must be below the root");
    if (parent_path.size() != g.params.depth - level - 1)
        throw std::invalid_argument("parent path must address a level+1 node");
    if (tuple.size() != g.params.branching)
        throw std::invalid_argument("tuple has wrong arity");
    const TupleLocation* loc = g.parent_index[level].find(tuple);
    if (!loc) return 0.0;
    const auto pi = node_marginal(g, parent_path);
    return pi[loc->parent] / g.params.rules_per_symbol;
}

ContextOracle exact_context_vectors(const GrammarInstance& g,
                                    std::uint32_t level,
                                    const ContextGeometry& geometry) {
    check_geometry(g, level, geometry);
    const std::uint32_t v = g.params.vocab;
    const double m = g.params.rules_per_symbol;
    const auto counts_up = slot_counts(g, level + 1);
    const auto counts_lo = slot_counts(g, level);
    const auto pi_g = grandparent_marginal(g, level, geometry);

    ContextOracle oracle;
    oracle.level = level;
    oracle.geometry = geometry;
    oracle.centers.assign(v, std::vector<double>(v, 0.0));
    oracle.center_defined.assign(v, false);
    oracle.target_marginal.assign(v, 0.0);

    const std::uint32_t r = geometry.tuple_pos;
    const std::uint32_t rp = geometry.cousin_pos;
    const std::uint32_t t = geometry.target_pos;

    // Both slots are read off the same rule of the grandparent, so the
    // cousin's parent is tied to ours through the joint slot occupancy, not
    // through independent marginals.
    std::vector<std::vector<double>> pair_mass(v, std::vector<double>(v, 0.0));
    for (std::uint32_t gp = 0; gp < v; ++gp) {
        if (pi_g[gp] == 0.0) continue;
        for (const Tuple& rule : g.rules[level + 1][gp])
            pair_mass[rule[r]][rule[rp]] += pi_g[gp];
    }

    for (std::uint32_t a = 0; a < v; ++a) {
        double w = 0.0;
        for (std::uint32_t b = 0; b < v; ++b) w += pair_mass[a][b];
        if (w == 0.0) continue;  // parent never occupies slot r
        oracle.center_defined[a] = true;
        auto& center = oracle.centers[a];
        for (std::uint32_t b = 0; b < v; ++b) {
            if (pair_mass[a][b] == 0.0) continue;
            const double post = pair_mass[a][b] / w;
            for (std::uint32_t z = 0; z < v; ++z)
                center[z] += post * counts_lo[b][t][z] / m;
        }
    }

    for (std::uint32_t gp = 0; gp < v; ++gp) {
        if (pi_g[gp] == 0.0) continue;
        for (std::uint32_t b = 0; b < v; ++b) {
            if (counts_up[gp][rp][b] == 0) continue;
            const double w = pi_g[gp] * counts_up[gp][rp][b] / m;
            for (std::uint32_t z = 0; z < v; ++z)
                oracle.target_marginal[z] += w * counts_lo[b][t][z] / m;
        }
    }

    for (const auto& [tuple, loc] : g.parent_index[level].items()) {
        oracle.tuples.push_back(tuple);
        oracle.phi.push_back(oracle.centers[loc.parent]);
        oracle.reachable.push_back(oracle.center_defined[loc.parent]);
    }
    return oracle;
}

DiagnosticsReport diagnostics(const GrammarInstance& g, std::uint32_t level,
                              const ContextGeometry& geometry) {
    if (level >= g.params.depth)
        throw std::invalid_argument("tuple level must be below the root");
    DiagnosticsReport report;
    report.level = level;
    report.f = g.params.fraction_valid();
    report.learnable = g.params.learnable();

    // Balance: v*m*P[T=nu], with P averaged over the level's parent nodes.
    const auto parents = level_marginals(g, level + 1);
    std::vector<double> mean(g.params.vocab, 0.0);
    for (const auto& pi : parents)
        for (std::uint32_t a = 0; a < g.params.vocab; ++a)
            mean[a] += pi[a] / static_cast<double>(parents.size());
    const double vm = static_cast<double>(g.params.vocab) * g.params.rules_per_symbol;
    bool first = true;
    for (const auto& [tuple, loc] : g.parent_index[level].items()) {
        const double p = vm * mean[loc.parent] / g.params.rules_per_symbol;
        if (first || p < report.balance_min) report.balance_min = p;
        if (first || p > report.balance_max) report.balance_max = p;
        first = false;
    }

    report.has_context = level + 2 <= g.params.depth;
    if (!report.has_context) return report;

    const auto oracle = exact_context_vectors(g, level, geometry);
    double min_d2 = -1.0;
    std::uint32_t defined = 0;
    for (std::uint32_t a = 0; a < g.params.vocab; ++a) {
        if (!oracle.center_defined[a]) continue;
        ++defined;
        for (std::uint32_t b = a + 1; b < g.params.vocab; ++b) {
            if (!oracle.center_defined[b]) continue;
            double d2 = 0.0;
            for (std::uint32_t z = 0; z < g.params.vocab; ++z) {
                const double d = oracle.centers[a][z] - oracle.centers[b][z];
                d2 += d * d;
            }
            if (min_d2 < 0.0 || d2 < min_d2) min_d2 = d2;
        }
    }
    report.undefined_centers = g.params.vocab - defined;
    if (min_d2 >= 0.0) report.min_center_distance = std::sqrt(min_d2);
    if (min_d2 >= 0.0 && report.f < 1.0) {
        report.separation_ratio =
            report.min_center_distance /
            (std::sqrt(1.0 - report.f) / g.params.rules_per_symbol);
        report.separation_defined = true;
    }
    return report;
}

std::uint64_t derivation_count(const GrammarParams& params) {
    const std::uint64_t cap = std::uint64_t(1) << 63;
    std::uint64_t internal = 0;
    std::uint64_t width = 1;
    for (std::uint32_t level = 0; level < params.depth; ++level) {
        internal += width;
        if (internal >= cap) return cap;
        width *= params.branching;
    }
    std::uint64_t count = params.vocab;
    for (std::uint64_t i = 0; i < internal; ++i) {
        if (count > cap / params.rules_per_symbol) return cap;
        count *= params.rules_per_symbol;
    }
    return count;
}

void enumerate_derivations(const GrammarInstance& g, std::uint64_t budget,
                           const std::function<void(const AnnotatedSample&)>& fn) {
    const std::uint64_t total = derivation_count(g.params);
    if (total > budget)
        throw std::runtime_error("derivation enumeration exceeds budget");

    const std::uint32_t L = g.params.depth;
    const std::uint32_t s = g.params.branching;
    const std::uint32_t m = g.params.rules_per_symbol;

    AnnotatedSample sample;
    sample.levels.resize(L + 1);
    sample.rule_choices.resize(L);
    for (std::uint32_t level = 0; level <= L; ++level)
        sample.levels[level].resize(g.params.nodes_at_level(level));
    std::uint64_t slots = 0;
    for (std::uint32_t level = 0; level < L; ++level) {
        sample.rule_choices[level].resize(g.params.nodes_at_level(level + 1));
        slots += sample.rule_choices[level].size();
    }

    std::vector<std::uint32_t> odometer(slots, 0);
    for (std::uint32_t root = 0; root < g.params.vocab; ++root) {
        std::fill(odometer.begin(), odometer.end(), 0);
        while (true) {
            sample.levels[L][0] = static_cast<Symbol>(root);
            std::size_t slot = 0;
            for (std::uint32_t level = L; level >= 1; --level) {
                const auto& parents = sample.levels[level];
                auto& children = sample.levels[level - 1];
                auto& choices = sample.rule_choices[level - 1];
                for (std::size_t u = 0; u < parents.size(); ++u) {
                    const std::uint32_t j = odometer[slot++];
                    choices[u] = j;
                    const Tuple& t = g.rules[level - 1][parents[u]][j];
                    for (std::uint32_t k = 0; k < s; ++k) children[u * s + k] = t[k];
                }
            }
            fn(sample);
            // Mixed-radix increment, last slot fastest.
            std::size_t i = slots;
            while (i > 0) {
                if (++odometer[i - 1] < m) break;
                odometer[i - 1] = 0;
                --i;
            }
            if (i == 0) break;
        }
    }
}

std::vector<double> brute_node_marginal(const GrammarInstance& g,
                                        std::span<const std::uint32_t> path,
                                        std::uint64_t budget) {
    if (path.size() > g.params.depth)
        throw std::invalid_argument("path longer than the tree");
    const std::uint32_t level = g.params.depth - static_cast<std::uint32_t>(path.size());
    const std::uint64_t idx = node_index(path, g.params.branching);
    std::vector<double> tally(g.params.vocab, 0.0);
    std::uint64_t total = 0;
    enumerate_derivations(g, budget, [&](const AnnotatedSample& sample) {
        tally[sample.levels[level][idx]] += 1.0;
        ++total;
    });
    for (auto& x : tally) x /= static_cast<double>(total);
    return tally;
}

double brute_tuple_marginal(const GrammarInstance& g, std::uint32_t level,
                            std::span<const std::uint32_t> parent_path,
                            std::span<const Symbol> tuple, std::uint64_t budget) {
    if (level >= g.params.depth)
        throw std::invalid_argument("tuple level must be below the root");
    if (parent_path.size() != g.params.depth - level - 1)
        throw std::invalid_argument("parent path must address a level+1 node");
    const std::uint32_t s = g.params.branching;
    const std::uint64_t parent = node_index(parent_path, s);
    std::uint64_t hits = 0, total = 0;
    enumerate_derivations(g, budget, [&](const AnnotatedSample& sample) {
        ++total;
        const auto& seq = sample.levels[level];
        for (std::uint32_t k = 0; k < s; ++k)
            if (seq[parent * s + k] != tuple[k]) return;
        ++hits;
    });
    return static_cast<double>(hits) / static_cast<double>(total);
}

ContextOracle brute_context_vectors(const GrammarInstance& g,
                                    std::uint32_t level,
                                    const ContextGeometry& geometry,
                                    std::uint64_t budget) {
    check_geometry(g, level, geometry);
    const std::uint32_t s = g.params.branching;
    const std::uint32_t v = g.params.vocab;
    const std::uint32_t r = geometry.tuple_pos;
    const std::uint32_t rp = geometry.cousin_pos;
    const std::uint32_t t = geometry.target_pos;

    std::vector<std::uint64_t> gp_nodes;
    if (geometry.aggregate_nodes) {
        const std::uint64_t n = g.params.nodes_at_level(level + 2);
        for (std::uint64_t i = 0; i < n; ++i) gp_nodes.push_back(i);
    } else {
        std::vector<std::uint32_t> path = geometry.grandparent_path;
        if (path.empty()) path.assign(g.params.depth - level - 2, 0);
        if (path.size() != g.params.depth - level - 2)
            throw std::invalid_argument("grandparent path has wrong length");
        gp_nodes.push_back(node_index(path, s));
    }

    // Per-parent joint tallies; per-tuple tallies follow by the shared-center
    // property but are accumulated directly to keep this route independent.
    const auto& items = g.parent_index[level].items();
    std::vector<std::vector<double>> tuple_joint(items.size(),
                                                 std::vector<double>(v, 0.0));
    std::vector<double> tuple_mass(items.size(), 0.0);
    std::vector<double> target(v, 0.0);
    double target_mass = 0.0;

    TupleMap<std::uint32_t> ordinal([&] {
        std::vector<std::pair<Tuple, std::uint32_t>> entries;
        for (std::uint32_t i = 0; i < items.size(); ++i)
            entries.emplace_back(items[i].first, i);
        return entries;
    }());

    enumerate_derivations(g, budget, [&](const AnnotatedSample& sample) {
        const auto& seq = sample.levels[level];
        for (std::uint64_t n : gp_nodes) {
            const std::uint64_t tuple_node = n * s + r;
            const std::uint64_t cousin_node = n * s + rp;
            const Symbol z = seq[cousin_node * s + t];
            target[z] += 1.0;
            target_mass += 1.0;
            const std::span<const Symbol> tuple(seq.data() + tuple_node * s, s);
            const std::uint32_t* ord = ordinal.find(tuple);
            tuple_joint[*ord][z] += 1.0;
            tuple_mass[*ord] += 1.0;
        }
    });

    ContextOracle oracle;
    oracle.level = level;
    oracle.geometry = geometry;
    oracle.centers.assign(v, std::vector<double>(v, 0.0));
    oracle.center_defined.assign(v, false);
    oracle.target_marginal.assign(v, 0.0);
    for (std::uint32_t z = 0; z < v; ++z) oracle.target_marginal[z] = target[z] / target_mass;

    std::vector<std::vector<double>> parent_joint(v, std::vector<double>(v, 0.0));
    std::vector<double> parent_mass(v, 0.0);
    for (std::uint32_t i = 0; i < items.size(); ++i) {
        const Symbol a = items[i].second.parent;
        parent_mass[a] += tuple_mass[i];
        for (std::uint32_t z = 0; z < v; ++z) parent_joint[a][z] += tuple_joint[i][z];
    }
    for (std::uint32_t a = 0; a < v; ++a) {
        if (parent_mass[a] == 0.0) continue;
        oracle.center_defined[a] = true;
        for (std::uint32_t z = 0; z < v; ++z)
            oracle.centers[a][z] = parent_joint[a][z] / parent_mass[a];
    }
    for (std::uint32_t i = 0; i < items.size(); ++i) {
        oracle.tuples.push_back(items[i].first);
        std::vector<double> phi(v, 0.0);
        if (tuple_mass[i] > 0.0)
            for (std::uint32_t z = 0; z < v; ++z) phi[z] = tuple_joint[i][z] / tuple_mass[i];
        oracle.phi.push_back(std::move(phi));
        oracle.reachable.push_back(tuple_mass[i] > 0.0);
    }
    return oracle;
}

}  // namespace rhm
