#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "rhm/generator.hpp"
#include "rhm/grammar.hpp"
#include "rhm/ilc.hpp"

// Probe of what a representation keeps: swap a sample against a
// same-ancestry paraphrase and against an unrelated sample, and compare how
// far the representation moves. A representation that has abstracted level
// l ignores paraphrases at that level entirely.

namespace rhm {

// Maps a visible string to a feature vector. All probes of one score call
// see the same map.
using RepresentationMap =
    std::function<std::vector<double>(std::span<const Symbol>)>;

// One-hot of the tokens themselves; the no-abstraction baseline.
RepresentationMap identity_representation(std::uint32_t vocab);

// One-hot of the labels decoded at `level` through the recovered maps
// (holes contribute zero blocks).
RepresentationMap ilc_representation(const RecoveredHierarchy& h,
                                     std::uint32_t level);

struct ScoreConfig {
    std::uint32_t probes = 256;
    std::uint64_t score_seed = 0;
    // Compare mean squared distances instead of mean distances.
    bool squared = false;
};

struct ClusterScore {
    double score = 0.0;        // 1 - synonym / generic displacement
    double synonym_mean = 0.0;
    double generic_mean = 0.0;
    bool degenerate = false;   // generic displacement was zero
};

// score = 1 exactly when every paraphrase at `level` maps to the same
// point; 0 when paraphrases move the representation as much as unrelated
// samples. Deterministic in score_seed.
ClusterScore synonym_clustering_score(const RepresentationMap& rep,
                                      const GrammarInstance& g,
                                      std::uint32_t level,
                                      const ScoreConfig& config = {});

}  // namespace rhm
