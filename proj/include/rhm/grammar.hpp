#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rhm/tuple_map.hpp"

// Random hierarchy grammars: each symbol at a level expands into exactly m
// distinct s-tuples of next-level symbols, and no tuple is shared between
// two parents, so every derivation tree is recoverable from its leaves.

namespace rhm {

struct GrammarParams {
    std::uint32_t depth = 2;             // L: number of production levels
    std::uint32_t branching = 2;         // s: children per node
    std::uint32_t vocab = 2;             // v: symbols per level
    std::uint32_t rules_per_symbol = 1;  // m: expansions per symbol
    std::uint64_t grammar_seed = 0;

    // Throws std::invalid_argument when the tuple space cannot host v*m
    // distinct tuples or a bound is out of range.
    void validate() const;

    // f = m / v^(s-1): the chance a uniform random tuple is grammatical.
    double fraction_valid() const;

    // Strict inequality: f = 1 yields a valid instance that no context
    // statistic can disambiguate.
    bool learnable() const { return fraction_valid() < 1.0; }

    std::uint64_t visible_length() const;  // s^L
    std::uint64_t nodes_at_level(std::uint32_t level) const;  // s^(L-level)
};

struct TupleLocation {
    Symbol parent = 0;
    std::uint32_t rule = 0;
};

struct GrammarInstance {
    GrammarParams params;
    // rules[l][a][j]: j-th s-tuple of level-l symbols produced by level-(l+1)
    // symbol a, for l in 0..L-1.
    std::vector<std::vector<std::vector<Tuple>>> rules;
    // Inverse of rules per level; rebuilt, never serialized.
    std::vector<TupleMap<TupleLocation>> parent_index;

    // Level is the tuple's own level (children side). Null when the tuple is
    // not grammatical there.
    std::optional<Symbol> parent_of(std::uint32_t level,
                                    std::span<const Symbol> tuple) const;
    const TupleLocation* locate(std::uint32_t level,
                                std::span<const Symbol> tuple) const;
};

struct ValidationReport {
    bool ok = false;
    double f = 0.0;
    bool learnable = false;
    std::uint64_t tuples_per_level = 0;  // v*m
    std::vector<std::string> errors;     // empty iff ok
};

// Draws v*m distinct tuples per level without replacement (rejection against
// a seen-set; the tuple space is never materialized) and assigns them m per
// parent in draw order. Deterministic in params.grammar_seed.
GrammarInstance sample_grammar(const GrammarParams& params);

ValidationReport validate(const GrammarInstance& g);

// Versioned JSON payload; round-trips bit-exactly through deserialize.
std::string serialize(const GrammarInstance& g);
GrammarInstance deserialize(const std::string& payload);

void save_grammar(const GrammarInstance& g, const std::string& path);
GrammarInstance load_grammar(const std::string& path);

}  // namespace rhm
