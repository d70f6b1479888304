#include "rhm/ilc.hpp"

#include <map>
#include <stdexcept>

#include "rhm/rng.hpp"

namespace rhm {
namespace {

std::uint64_t ipow(std::uint64_t base, std::uint32_t exp) {
    std::uint64_t r = 1;
    while (exp--) r *= base;
    return r;
}

struct Accumulator {
    std::uint64_t count = 0;             // tuple occurrences
    std::vector<double> sums;            // one-hot sums per block
    std::vector<std::uint64_t> block_n;  // readable targets per block
};

bool tuple_observed(std::span<const Symbol> t) {
    for (Symbol s : t)
        if (s == kNoSymbol) return false;
    return true;
}

// (accuracy, pred-label -> truth-label permutation) for one level.
std::pair<double, std::vector<std::uint32_t>> matched_accuracy(
    const std::vector<std::vector<Symbol>>& pred,
    const std::vector<std::vector<Symbol>>& truth, std::uint32_t v) {
    std::vector<std::vector<double>> confusion(v, std::vector<double>(v, 0.0));
    std::uint64_t total = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        for (std::size_t u = 0; u < pred[i].size(); ++u) {
            ++total;
            if (pred[i][u] == kNoSymbol) continue;
            confusion[pred[i][u]][truth[i][u]] += 1.0;
        }
    }
    const auto sigma = hungarian_match(confusion);
    double matched = 0.0;
    for (std::uint32_t c = 0; c < v; ++c) matched += confusion[c][sigma[c]];
    return {matched / static_cast<double>(total), sigma};
}

}  // namespace

const RecoveredLevel& RecoveredHierarchy::at(std::uint32_t level) const {
    if (level < 1 || level > levels.size())
        throw std::invalid_argument("no such recovered level");
    return levels[level - 1];
}

ContextTable accumulate_context(
    const std::vector<std::vector<Symbol>>& sequences, const CorpusShape& shape,
    std::uint32_t level, const IlcConfig& config) {
    const std::uint32_t L = shape.depth;
    const std::uint32_t s = shape.branching;
    const std::uint32_t v = shape.vocab;
    if (level + 2 > L)
        throw std::invalid_argument("context needs a grandparent: level <= L-2");
    const std::uint64_t len = ipow(s, L - level);
    const std::uint64_t groups = len / (std::uint64_t(s) * s);

    const bool all = config.mode == ContextMode::kAllCousins;
    const std::uint32_t blocks = all ? s * (s - 1) : 1;
    const std::uint32_t dim = blocks * v;

    std::map<Tuple, Accumulator> table;
    Tuple key(s);
    for (const auto& seq : sequences) {
        if (seq.size() != len)
            throw std::invalid_argument("sequence length is not s^(L-level)");
        const std::uint64_t gp_end = config.single_position ? 1 : groups;
        for (std::uint64_t gp = 0; gp < gp_end; ++gp) {
            const std::uint64_t base = gp * s * s;
            for (std::uint32_t r = 0; r < (all ? s : 1u); ++r) {
                const std::span<const Symbol> tuple(seq.data() + base + r * s, s);
                if (!tuple_observed(tuple)) continue;
                key.assign(tuple.begin(), tuple.end());
                auto& acc = table[key];
                if (acc.sums.empty()) {
                    acc.sums.assign(dim, 0.0);
                    acc.block_n.assign(blocks, 0);
                }
                if (!all) {
                    const Symbol z = seq[base + 1 * s + 0];
                    if (z == kNoSymbol) continue;
                    ++acc.count;
                    ++acc.block_n[0];
                    acc.sums[z] += 1.0;
                } else {
                    ++acc.count;
                    std::uint32_t rho = 0;
                    for (std::uint32_t rc = 0; rc < s; ++rc) {
                        if (rc == r) continue;
                        for (std::uint32_t t = 0; t < s; ++t) {
                            const Symbol z = seq[base + rc * s + t];
                            if (z != kNoSymbol) {
                                const std::uint32_t block = rho * s + t;
                                ++acc.block_n[block];
                                acc.sums[block * v + z] += 1.0;
                            }
                        }
                        ++rho;
                    }
                }
            }
        }
    }

    ContextTable out;
    out.level = level;
    out.dim = dim;
    for (auto& [tuple, acc] : table) {
        if (acc.count < config.min_count) continue;
        std::vector<double> phi(dim, 0.0);
        for (std::uint32_t b = 0; b < blocks; ++b) {
            if (acc.block_n[b] > 0) {
                for (std::uint32_t z = 0; z < v; ++z)
                    phi[b * v + z] =
                        acc.sums[b * v + z] / static_cast<double>(acc.block_n[b]);
            } else {
                // Nothing readable behind this block; fall back to the prior
                // so the row stays a distribution per block.
                for (std::uint32_t z = 0; z < v; ++z) phi[b * v + z] = 1.0 / v;
            }
        }
        out.tuples.push_back(tuple);
        out.counts.push_back(acc.count);
        out.phi.push_back(std::move(phi));
    }
    return out;
}

RecoveredHierarchy run_ilc(const std::vector<std::vector<Symbol>>& tokens,
                           const CorpusShape& shape, const IlcConfig& config) {
    const std::uint32_t L = shape.depth;
    const std::uint32_t s = shape.branching;
    const std::uint32_t v = shape.vocab;
    if (L < 2) throw std::invalid_argument("depth must be at least 2");

    RecoveredHierarchy h;
    h.shape = shape;

    const std::vector<std::vector<Symbol>>* current = &tokens;
    bool dead = false;

    for (std::uint32_t level = 0; level < L - 1; ++level) {
        RecoveredLevel rec;
        rec.level = level + 1;
        const std::uint64_t parent_len = ipow(s, L - level - 1);

        if (!dead) {
            ContextTable table = accumulate_context(*current, shape, level, config);
            if (table.tuples.size() < v) {
                dead = true;  // not enough support to form v clusters
            } else {
                ClusterConfig cc;
                cc.k = v;
                cc.restarts = config.restarts;
                cc.max_iters = config.max_iters;
                cc.tol = config.tol;
                cc.cluster_seed = derive_stream(config.ilc_seed, level);
                cc.threads = config.cluster_threads;
                const ClusterResult clusters = kmeans(table.phi, cc);

                std::vector<std::pair<Tuple, std::uint32_t>> entries;
                entries.reserve(table.tuples.size());
                for (std::size_t i = 0; i < table.tuples.size(); ++i)
                    entries.emplace_back(table.tuples[i], clusters.assignments[i]);
                rec.cluster_map = TupleMap<std::uint32_t>(std::move(entries));
                rec.support_size = rec.cluster_map.size();

                rec.decoded.resize(current->size());
                for (std::size_t i = 0; i < current->size(); ++i) {
                    const auto& seq = (*current)[i];
                    auto& out = rec.decoded[i];
                    out.resize(parent_len);
                    for (std::uint64_t u = 0; u < parent_len; ++u) {
                        const std::span<const Symbol> tuple(seq.data() + u * s, s);
                        const std::uint32_t* label =
                            tuple_observed(tuple) ? rec.cluster_map.find(tuple)
                                                  : nullptr;
                        out[u] = label ? static_cast<Symbol>(*label) : kNoSymbol;
                    }
                }
            }
        }
        if (dead) {
            rec.failed = true;
            rec.decoded.assign(current->size(),
                               std::vector<Symbol>(parent_len, kNoSymbol));
        }
        h.levels.push_back(std::move(rec));
        current = &h.levels.back().decoded;  // next level reads these
    }
    return h;
}

std::vector<std::vector<Symbol>> decode_levels(std::span<const Symbol> tokens,
                                               const RecoveredHierarchy& h,
                                               std::uint32_t up_to_level) {
    const std::uint32_t s = h.shape.branching;
    if (up_to_level < 1 || up_to_level > h.levels.size())
        throw std::invalid_argument("no such recovered level");
    if (tokens.size() != ipow(s, h.shape.depth))
        throw std::invalid_argument("token string has wrong length");

    std::vector<std::vector<Symbol>> out;
    std::vector<Symbol> current(tokens.begin(), tokens.end());
    for (std::uint32_t level = 1; level <= up_to_level; ++level) {
        const RecoveredLevel& rec = h.at(level);
        std::vector<Symbol> next(current.size() / s, kNoSymbol);
        if (!rec.failed) {
            for (std::size_t u = 0; u < next.size(); ++u) {
                const std::span<const Symbol> tuple(current.data() + u * s, s);
                if (!tuple_observed(tuple)) continue;
                const std::uint32_t* label = rec.cluster_map.find(tuple);
                if (label) next[u] = static_cast<Symbol>(*label);
            }
        }
        out.push_back(next);
        current = std::move(next);
    }
    return out;
}

EvaluationReport evaluate(const RecoveredHierarchy& h, const Corpus& corpus,
                          const GrammarInstance& g) {
    const std::uint32_t L = h.shape.depth;
    const std::uint32_t v = h.shape.vocab;
    if (corpus.params.depth != L || corpus.params.branching != h.shape.branching ||
        corpus.params.vocab != v)
        throw std::invalid_argument("corpus shape does not match the recovery");
    if (g.params.depth != corpus.params.depth ||
        g.params.branching != corpus.params.branching ||
        g.params.vocab != corpus.params.vocab)
        throw std::invalid_argument("grammar does not match the corpus");
    if (!corpus.annotated)
        throw std::invalid_argument("evaluation needs an annotated corpus");
    if (!corpus.samples.empty() &&
        corpus.samples[0].levels.size() != L + 1)
        throw std::invalid_argument("corpus samples lack annotation levels");

    EvaluationReport report;
    // Truth-label permutation of the layer below, for mapping decoded tuples
    // into the grammar's alphabet. Level 0 is decoded as itself.
    std::vector<std::uint32_t> sigma_below(v);
    for (std::uint32_t a = 0; a < v; ++a) sigma_below[a] = a;

    for (const RecoveredLevel& rec : h.levels) {
        LevelEvaluation out;
        out.level = rec.level;
        out.failed = rec.failed;
        out.support_size = rec.support_size;

        std::vector<std::vector<Symbol>> truth(corpus.samples.size());
        for (std::size_t i = 0; i < corpus.samples.size(); ++i)
            truth[i] = corpus.samples[i].levels[rec.level];

        std::vector<std::uint32_t> sigma(v);
        if (!rec.failed && !corpus.samples.empty()) {
            auto [accuracy, perm] = matched_accuracy(rec.decoded, truth, v);
            out.accuracy = accuracy;
            sigma = std::move(perm);
        }

        // Support recovery: translate each clustered tuple through the
        // below-level permutation and test grammaticality at level-1.
        const std::uint64_t vm =
            std::uint64_t(v) * g.params.rules_per_symbol;
        if (!rec.failed && rec.cluster_map.size() > 0) {
            std::uint64_t grammatical = 0;
            Tuple mapped(h.shape.branching);
            for (const auto& [tuple, label] : rec.cluster_map.items()) {
                bool ok = true;
                for (std::size_t k = 0; k < tuple.size(); ++k) {
                    if (tuple[k] >= v) {
                        ok = false;
                        break;
                    }
                    mapped[k] = static_cast<Symbol>(sigma_below[tuple[k]]);
                }
                if (ok && g.parent_index[rec.level - 1].contains(mapped))
                    ++grammatical;
            }
            out.support_precision =
                static_cast<double>(grammatical) / rec.cluster_map.size();
            out.support_recall = static_cast<double>(grammatical) / vm;
        }

        sigma_below = sigma;
        report.levels.push_back(out);
    }
    return report;
}

}  // namespace rhm
