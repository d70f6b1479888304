#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "rhm/grammar.hpp"

// Top-down sampling from a grammar instance. Each sample's randomness comes
// from (data_seed, sample_index) only, so corpora are reproducible and
// order-independent under any parallel schedule, and the corpus for a given
// data_seed is a prefix of any longer one.

namespace rhm {

struct AnnotatedSample {
    // levels[l] holds the s^(L-l) symbols of level l; levels[0] is the
    // visible string, levels[L] the root. Unannotated samples keep only
    // levels[0].
    std::vector<std::vector<Symbol>> levels;
    // rule_choices[l][u]: rule expanding node u of level l+1 into its
    // level-l children; length s^(L-l-1).
    std::vector<std::vector<std::uint32_t>> rule_choices;
};

struct Corpus {
    GrammarParams params;
    std::uint64_t data_seed = 0;
    bool annotated = true;
    std::vector<AnnotatedSample> samples;
};

struct CorpusLimits {
    // Hard cap on count * s^L visible tokens per corpus.
    std::uint64_t max_total_tokens = std::uint64_t(1) << 32;
};

AnnotatedSample generate(const GrammarInstance& g, std::uint64_t sample_index,
                         std::uint64_t data_seed);

Corpus generate_corpus(const GrammarInstance& g, std::uint64_t count,
                       std::uint64_t data_seed, const CorpusLimits& limits = {},
                       unsigned threads = 1);

// Streaming visit in index order; nothing is retained.
void for_each_sample(const GrammarInstance& g, std::uint64_t count,
                     std::uint64_t data_seed,
                     const std::function<void(std::uint64_t, const AnnotatedSample&)>& fn);

// Replaces every level-l production choice with a fresh uniform one and
// regenerates everything below; levels l..L are untouched. The visible
// string becomes a same-ancestry paraphrase of the input.
// Requires 1 <= level <= L-1 and a fully annotated sample.
AnnotatedSample synonym_swap(const GrammarInstance& g,
                             const AnnotatedSample& sample, std::uint32_t level,
                             std::uint64_t swap_seed);

// Unrelated fresh sample; the null counterpart of synonym_swap.
AnnotatedSample generic_swap(const GrammarInstance& g, std::uint64_t swap_seed);

// Binary corpus file. Header: magic "RHM1", then little-endian u32
// L,s,v,m, u64 count, u64 data_seed, u8 annotated flag. Per sample the
// levels are stored lowest first as u16 symbols; annotated corpora append
// the rule choices as u8 (so m must fit in a byte to be written).
void write_corpus(const Corpus& corpus, std::ostream& out,
                  bool keep_annotations = true);
Corpus read_corpus(std::istream& in);

void save_corpus(const Corpus& corpus, const std::string& path,
                 bool keep_annotations = true);
Corpus load_corpus(const std::string& path);

}  // namespace rhm
