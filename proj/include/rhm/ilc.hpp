#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "rhm/clustering.hpp"
#include "rhm/generator.hpp"
#include "rhm/grammar.hpp"
#include "rhm/tuple_map.hpp"

// Bottom-up recovery of the latent levels from visible strings alone: at
// each level, tuples are embedded by the empirical distribution of a cousin
// token (same grandparent, different parent), clustered into v groups, and
// the group ids become the next level's sequence. The grammar is never
// consulted; only evaluate() sees the truth.

namespace rhm {

// Tree shape of the input sequences; all a recovery needs to know.
struct CorpusShape {
    std::uint32_t depth = 2;      // L
    std::uint32_t branching = 2;  // s
    std::uint32_t vocab = 2;      // v
};

enum class ContextMode {
    // One cousin token per grandparent: tuple at slot 0, cousin tuple at
    // slot 1, its token 0. The lightest statistic that identifies parents.
    kFixed,
    // Every slot's tuple, embedded by all s-1 cousin tuples x s token
    // positions, concatenated per-block. More signal per sample; the blocks
    // share the parent-only dependence, so clusters are unchanged in the
    // limit.
    kAllCousins,
};

struct IlcConfig {
    ContextMode mode = ContextMode::kFixed;
    // Restrict statistics to the leftmost grandparent of each sample instead
    // of pooling all grandparent positions.
    bool single_position = false;
    std::uint64_t min_count = 1;  // tuples below this are left unlabeled
    std::uint32_t restarts = 32;
    std::uint32_t max_iters = 100;
    double tol = 1e-6;
    std::uint64_t ilc_seed = 0;
    unsigned cluster_threads = 1;
};

struct ContextTable {
    std::uint32_t level = 0;
    std::uint32_t dim = 0;                 // v, or v*s*(s-1) pooled over blocks
    std::vector<Tuple> tuples;             // estimated support, sorted
    std::vector<std::uint64_t> counts;     // observations behind each row
    std::vector<std::vector<double>> phi;  // each v-block sums to 1
};

// Empirical context vectors of the level-`level` tuples found in
// `sequences` (one sequence per sample, length s^(L-level), kNoSymbol
// allowed). Tuples containing kNoSymbol are skipped; so are unreadable
// targets. Requires level <= L-2.
ContextTable accumulate_context(
    const std::vector<std::vector<Symbol>>& sequences, const CorpusShape& shape,
    std::uint32_t level, const IlcConfig& config);

struct RecoveredLevel {
    std::uint32_t level = 0;  // 1..L-1
    bool failed = false;      // support fell short of v clusters
    std::uint64_t support_size = 0;
    TupleMap<std::uint32_t> cluster_map;      // level-1 tuple -> label
    std::vector<std::vector<Symbol>> decoded; // kNoSymbol marks holes
};

struct RecoveredHierarchy {
    CorpusShape shape;
    std::vector<RecoveredLevel> levels;  // levels[i] is level i+1

    const RecoveredLevel& at(std::uint32_t level) const;
};

// Full bottom-up pass over visible strings. A level that cannot be
// clustered (fewer than v observed tuples) fails, and every level above it
// fails with it; failures surface as all-hole decodes, never as throws.
RecoveredHierarchy run_ilc(const std::vector<std::vector<Symbol>>& tokens,
                           const CorpusShape& shape, const IlcConfig& config);

// Decodes one visible string through the recovered maps, returning levels
// 1..up_to_level (kNoSymbol where a tuple is unknown).
std::vector<std::vector<Symbol>> decode_levels(std::span<const Symbol> tokens,
                                               const RecoveredHierarchy& h,
                                               std::uint32_t up_to_level);

struct LevelEvaluation {
    std::uint32_t level = 0;
    bool failed = false;
    double accuracy = 0.0;  // permutation-invariant, holes count as wrong
    std::uint64_t support_size = 0;
    double support_precision = 0.0;  // clustered tuples that are grammatical
    double support_recall = 0.0;     // grammatical tuples that got clustered
};

struct EvaluationReport {
    std::vector<LevelEvaluation> levels;
};

// Scores a recovery against the annotations. The grammar supplies the true
// tuple supports; label permutations are resolved per level by maximum
// matching.
EvaluationReport evaluate(const RecoveredHierarchy& h, const Corpus& corpus,
                          const GrammarInstance& g);

}  // namespace rhm
