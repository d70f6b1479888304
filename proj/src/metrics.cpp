#include "rhm/metrics.hpp"

#include <cmath>
#include <stdexcept>

#include "rhm/rng.hpp"

namespace rhm {
namespace {

constexpr std::uint64_t kProbeTag = 0x50;

double displacement(const std::vector<double>& a, const std::vector<double>& b,
                    bool squared) {
    if (a.size() != b.size())
        throw std::runtime_error("representation changed dimension between calls");
    double d2 = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        d2 += d * d;
    }
    return squared ? d2 : std::sqrt(d2);
}

}  // namespace

RepresentationMap identity_representation(std::uint32_t vocab) {
    return [vocab](std::span<const Symbol> tokens) {
        std::vector<double> out(tokens.size() * vocab, 0.0);
        for (std::size_t i = 0; i < tokens.size(); ++i)
            if (tokens[i] != kNoSymbol && tokens[i] < vocab)
                out[i * vocab + tokens[i]] = 1.0;
        return out;
    };
}

RepresentationMap ilc_representation(const RecoveredHierarchy& h,
                                     std::uint32_t level) {
    if (level < 1 || level > h.levels.size())
        throw std::invalid_argument("no such recovered level");
    const std::uint32_t vocab = h.shape.vocab;
    return [&h, level, vocab](std::span<const Symbol> tokens) {
        const auto decoded = decode_levels(tokens, h, level);
        const auto& labels = decoded.back();
        std::vector<double> out(labels.size() * vocab, 0.0);
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] != kNoSymbol) out[i * vocab + labels[i]] = 1.0;
        return out;
    };
}

ClusterScore synonym_clustering_score(const RepresentationMap& rep,
                                      const GrammarInstance& g,
                                      std::uint32_t level,
                                      const ScoreConfig& config) {
    if (config.probes < 1) throw std::invalid_argument("need at least one probe");
    if (level < 1 || level > g.params.depth - 1)
        throw std::invalid_argument("swap level must be in 1..L-1");

    double syn = 0.0, gen = 0.0;
    for (std::uint32_t p = 0; p < config.probes; ++p) {
        const std::uint64_t base =
            seed_chain(seed_chain(config.score_seed, kProbeTag), p);
        const AnnotatedSample x = generate(g, p, base);
        const AnnotatedSample x_syn =
            synonym_swap(g, x, level, derive_stream(base, 1));
        const AnnotatedSample x_gen = generic_swap(g, derive_stream(base, 2));

        const auto r0 = rep(x.levels[0]);
        syn += displacement(r0, rep(x_syn.levels[0]), config.squared);
        gen += displacement(r0, rep(x_gen.levels[0]), config.squared);
    }

    ClusterScore out;
    out.synonym_mean = syn / config.probes;
    out.generic_mean = gen / config.probes;
    if (out.generic_mean == 0.0) {
        out.degenerate = true;  // representation is constant across samples
        return out;
    }
    out.score = 1.0 - out.synonym_mean / out.generic_mean;
    return out;
}

}  // namespace rhm
