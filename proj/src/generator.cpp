#include "rhm/generator.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "rhm/rng.hpp"

namespace rhm {
namespace {

constexpr std::uint64_t kSynonymTag = 0x53;
constexpr std::uint64_t kGenericTag = 0x47;

// Fills levels below `from_level` with fresh draws; levels[from_level] must
// already be set. Draws go level by level, left to right.
void expand_below(const GrammarInstance& g, std::uint32_t from_level,
                  SplitMix64& rng, AnnotatedSample& sample) {
    const std::uint32_t s = g.params.branching;
    const std::uint32_t m = g.params.rules_per_symbol;
    for (std::uint32_t level = from_level; level >= 1; --level) {
        const auto& parents = sample.levels[level];
        auto& children = sample.levels[level - 1];
        auto& choices = sample.rule_choices[level - 1];
        children.resize(parents.size() * s);
        choices.resize(parents.size());
        for (std::size_t u = 0; u < parents.size(); ++u) {
            const auto j = static_cast<std::uint32_t>(rng.next_below(m));
            choices[u] = j;
            const Tuple& t = g.rules[level - 1][parents[u]][j];
            for (std::uint32_t k = 0; k < s; ++k) children[u * s + k] = t[k];
        }
    }
}

AnnotatedSample generate_with_rng(const GrammarInstance& g, SplitMix64& rng) {
    const std::uint32_t L = g.params.depth;
    AnnotatedSample sample;
    sample.levels.resize(L + 1);
    sample.rule_choices.resize(L);
    sample.levels[L] = {static_cast<Symbol>(rng.next_below(g.params.vocab))};
    expand_below(g, L, rng, sample);
    return sample;
}

void put_u32(std::ostream& out, std::uint32_t x) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(x >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, std::uint64_t x) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(x >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw std::runtime_error("corpus truncated");
    std::uint32_t x = 0;
    for (int i = 0; i < 4; ++i) x |= std::uint32_t(b[i]) << (8 * i);
    return x;
}

std::uint64_t get_u64(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (!in) throw std::runtime_error("corpus truncated");
    std::uint64_t x = 0;
    for (int i = 0; i < 8; ++i) x |= std::uint64_t(b[i]) << (8 * i);
    return x;
}

}  // namespace

AnnotatedSample generate(const GrammarInstance& g, std::uint64_t sample_index,
                         std::uint64_t data_seed) {
    SplitMix64 rng(derive_stream(data_seed, sample_index));
    return generate_with_rng(g, rng);
}

Corpus generate_corpus(const GrammarInstance& g, std::uint64_t count,
                       std::uint64_t data_seed, const CorpusLimits& limits,
                       unsigned threads) {
    if (count < 1) throw std::invalid_argument("corpus needs at least one sample");
    const std::uint64_t tokens = g.params.visible_length();
    if (count > limits.max_total_tokens / tokens)
        throw std::runtime_error("corpus exceeds token budget");

    Corpus corpus;
    corpus.params = g.params;
    corpus.data_seed = data_seed;
    corpus.annotated = true;
    corpus.samples.resize(count);

    auto fill = [&](std::uint64_t lo, std::uint64_t hi) {
        for (std::uint64_t i = lo; i < hi; ++i)
            corpus.samples[i] = generate(g, i, data_seed);
    };
    if (threads <= 1 || count < 2) {
        fill(0, count);
    } else {
        // Samples are independent slots, so any partition yields the same
        // corpus bit for bit.
        const unsigned n = static_cast<unsigned>(
            std::min<std::uint64_t>(threads, count));
        std::vector<std::thread> pool;
        pool.reserve(n);
        for (unsigned t = 0; t < n; ++t) {
            const std::uint64_t lo = count * t / n;
            const std::uint64_t hi = count * (t + 1) / n;
            pool.emplace_back(fill, lo, hi);
        }
        for (auto& th : pool) th.join();
    }
    return corpus;
}

void for_each_sample(const GrammarInstance& g, std::uint64_t count,
                     std::uint64_t data_seed,
                     const std::function<void(std::uint64_t, const AnnotatedSample&)>& fn) {
    for (std::uint64_t i = 0; i < count; ++i) fn(i, generate(g, i, data_seed));
}

AnnotatedSample synonym_swap(const GrammarInstance& g,
                             const AnnotatedSample& sample, std::uint32_t level,
                             std::uint64_t swap_seed) {
    const std::uint32_t L = g.params.depth;
    if (level < 1 || level > L - 1)
        throw std::invalid_argument("swap level must be in 1..L-1");
    if (sample.levels.size() != L + 1)
        throw std::invalid_argument("synonym_swap needs an annotated sample");

    AnnotatedSample out = sample;
    SplitMix64 rng(derive_stream(swap_seed, kSynonymTag));
    // Fresh rule for every level-`level` node (independent of the old one),
    // then a fresh subtree under each new tuple.
    expand_below(g, level, rng, out);
    return out;
}

AnnotatedSample generic_swap(const GrammarInstance& g, std::uint64_t swap_seed) {
    SplitMix64 rng(derive_stream(swap_seed, kGenericTag));
    return generate_with_rng(g, rng);
}

void write_corpus(const Corpus& corpus, std::ostream& out, bool keep_annotations) {
    const GrammarParams& p = corpus.params;
    p.validate();
    const bool annotated = keep_annotations && corpus.annotated;
    if (annotated && p.rules_per_symbol > 0xFF)
        throw std::runtime_error(
            "rule choices are stored as bytes: m must be at most 255");

    out.write("RHM1", 4);
    put_u32(out, p.depth);
    put_u32(out, p.branching);
    put_u32(out, p.vocab);
    put_u32(out, p.rules_per_symbol);
    put_u64(out, corpus.samples.size());
    put_u64(out, corpus.data_seed);
    out.put(annotated ? '\x01' : '\x00');

    const std::uint32_t top = annotated ? p.depth : 0;
    for (const auto& sample : corpus.samples) {
        if (sample.levels.size() <= top)
            throw std::runtime_error("sample lacks the annotation levels");
        for (std::uint32_t level = 0; level <= top; ++level) {
            for (Symbol sym : sample.levels[level]) {
                out.put(static_cast<char>(sym & 0xFF));
                out.put(static_cast<char>(sym >> 8));
            }
        }
        if (annotated) {
            for (std::uint32_t level = 0; level < p.depth; ++level)
                for (std::uint32_t j : sample.rule_choices[level])
                    out.put(static_cast<char>(j));
        }
    }
    if (!out) throw std::runtime_error("corpus write failed");
}

Corpus read_corpus(std::istream& in) {
    char magic[4];
    in.read(magic, 4);
    if (!in || std::string(magic, 4) != "RHM1")
        throw std::runtime_error("corrupt corpus: bad magic");

    Corpus corpus;
    corpus.params.depth = get_u32(in);
    corpus.params.branching = get_u32(in);
    corpus.params.vocab = get_u32(in);
    corpus.params.rules_per_symbol = get_u32(in);
    const std::uint64_t count = get_u64(in);
    corpus.data_seed = get_u64(in);
    const int flag = in.get();
    if (flag != 0 && flag != 1)
        throw std::runtime_error("corrupt corpus: bad annotation flag");
    corpus.annotated = flag == 1;
    corpus.params.validate();

    const GrammarParams& p = corpus.params;
    const std::uint64_t tokens = p.visible_length();
    if (count > (CorpusLimits{}.max_total_tokens) / std::max<std::uint64_t>(tokens, 1))
        throw std::runtime_error("corpus exceeds token budget");

    const std::uint32_t top = corpus.annotated ? p.depth : 0;
    corpus.samples.resize(count);
    for (auto& sample : corpus.samples) {
        sample.levels.resize(top + 1);
        for (std::uint32_t level = 0; level <= top; ++level) {
            auto& seq = sample.levels[level];
            seq.resize(p.nodes_at_level(level));
            for (auto& sym : seq) {
                const int lo = in.get();
                const int hi = in.get();
                if (lo < 0 || hi < 0) throw std::runtime_error("corpus truncated");
                sym = static_cast<Symbol>(lo | (hi << 8));
                if (sym >= p.vocab)
                    throw std::runtime_error("corrupt corpus: symbol out of range");
            }
        }
        if (corpus.annotated) {
            sample.rule_choices.resize(p.depth);
            for (std::uint32_t level = 0; level < p.depth; ++level) {
                auto& choices = sample.rule_choices[level];
                choices.resize(p.nodes_at_level(level + 1));
                for (auto& j : choices) {
                    const int b = in.get();
                    if (b < 0) throw std::runtime_error("corpus truncated");
                    j = static_cast<std::uint32_t>(b);
                    if (j >= p.rules_per_symbol)
                        throw std::runtime_error(
                            "corrupt corpus: rule choice out of range");
                }
            }
        }
    }
    return corpus;
}

void save_corpus(const Corpus& corpus, const std::string& path,
                 bool keep_annotations) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    write_corpus(corpus, out, keep_annotations);
}

Corpus load_corpus(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    return read_corpus(in);
}

}  // namespace rhm
