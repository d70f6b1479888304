#include "rhm/grammar.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "rhm/rng.hpp"

namespace rhm {
namespace {

// v^e saturated at 2^63; enough to decide "fits" questions exactly.
std::uint64_t pow_saturated(std::uint64_t base, std::uint32_t exp) {
    const std::uint64_t cap = std::uint64_t(1) << 63;
    std::uint64_t r = 1;
    for (std::uint32_t i = 0; i < exp; ++i) {
        if (r > cap / base) return cap;
        r *= base;
    }
    return r;
}

long double pow_ld(std::uint64_t base, std::uint32_t exp) {
    long double r = 1.0L;
    for (std::uint32_t i = 0; i < exp; ++i) r *= static_cast<long double>(base);
    return r;
}

}  // namespace

void GrammarParams::validate() const {
    if (depth < 2) throw std::invalid_argument("depth must be at least 2");
    if (branching < 2) throw std::invalid_argument("branching must be at least 2");
    if (vocab < 2) throw std::invalid_argument("vocab must be at least 2");
    // Symbols are stored as u16 and 0xFFFF is reserved for decode holes.
    if (vocab > 0xFFFF)
        throw std::invalid_argument("vocab exceeds 16-bit symbol storage");
    if (rules_per_symbol < 1)
        throw std::invalid_argument("rules_per_symbol must be at least 1");
    const std::uint64_t space = pow_saturated(vocab, branching - 1);
    if (rules_per_symbol > space)
        throw std::invalid_argument(
            "rules_per_symbol exceeds v^(s-1): tuple space too small");
}

double GrammarParams::fraction_valid() const {
    return static_cast<double>(static_cast<long double>(rules_per_symbol) /
                               pow_ld(vocab, branching - 1));
}

std::uint64_t GrammarParams::visible_length() const {
    return nodes_at_level(0);
}

std::uint64_t GrammarParams::nodes_at_level(std::uint32_t level) const {
    if (level > depth) throw std::invalid_argument("level exceeds depth");
    const std::uint64_t n = pow_saturated(branching, depth - level);
    if (n >= (std::uint64_t(1) << 63))
        throw std::invalid_argument("tree width overflows 64-bit count");
    return n;
}

std::optional<Symbol> GrammarInstance::parent_of(
    std::uint32_t level, std::span<const Symbol> tuple) const {
    const TupleLocation* loc = locate(level, tuple);
    if (!loc) return std::nullopt;
    return loc->parent;
}

const TupleLocation* GrammarInstance::locate(
    std::uint32_t level, std::span<const Symbol> tuple) const {
    if (level >= params.depth)
        throw std::invalid_argument("tuple level must be below the root");
    return parent_index[level].find(tuple);
}

GrammarInstance sample_grammar(const GrammarParams& params) {
    params.validate();
    const std::uint32_t s = params.branching;
    const std::uint32_t v = params.vocab;
    const std::uint32_t m = params.rules_per_symbol;
    const std::uint64_t need = std::uint64_t(v) * m;

    // Expected rejection cost: sum over draws of N/(N-i) with N = v^s.
    // Cap at 8x expected plus slack; exceeding it means the generator is
    // broken, not that we were unlucky.
    const long double space = pow_ld(v, s);
    long double expected = 0.0L;
    for (std::uint64_t i = 0; i < need; ++i) {
        const long double remaining = space - static_cast<long double>(i);
        expected += space / remaining;
    }
    const std::uint64_t cap =
        64 + 8 * static_cast<std::uint64_t>(std::ceil(static_cast<double>(expected)));

    GrammarInstance g;
    g.params = params;
    g.rules.resize(params.depth);
    g.parent_index.resize(params.depth);

    for (std::uint32_t level = 0; level < params.depth; ++level) {
        SplitMix64 rng(derive_stream(params.grammar_seed, level));
        std::set<Tuple> seen;
        std::vector<Tuple> drawn;
        drawn.reserve(need);
        std::uint64_t attempts = 0;
        while (drawn.size() < need) {
            if (++attempts > cap)
                throw std::runtime_error("tuple sampling attempt cap exceeded");
            Tuple t(s);
            for (std::uint32_t k = 0; k < s; ++k)
                t[k] = static_cast<Symbol>(rng.next_below(v));
            if (seen.insert(t).second) drawn.push_back(std::move(t));
        }

        // Draw order fixes the partition: tuple i belongs to parent i/m.
        auto& level_rules = g.rules[level];
        level_rules.resize(v);
        std::vector<std::pair<Tuple, TupleLocation>> entries;
        entries.reserve(need);
        for (std::uint64_t i = 0; i < need; ++i) {
            const Symbol parent = static_cast<Symbol>(i / m);
            const std::uint32_t rule = static_cast<std::uint32_t>(i % m);
            level_rules[parent].push_back(drawn[i]);
            entries.emplace_back(drawn[i], TupleLocation{parent, rule});
        }
        g.parent_index[level] = TupleMap<TupleLocation>(std::move(entries));
    }
    return g;
}

ValidationReport validate(const GrammarInstance& g) {
    ValidationReport report;
    try {
        g.params.validate();
    } catch (const std::exception& e) {
        report.errors.emplace_back(e.what());
        return report;
    }
    const std::uint32_t L = g.params.depth;
    const std::uint32_t s = g.params.branching;
    const std::uint32_t v = g.params.vocab;
    const std::uint32_t m = g.params.rules_per_symbol;
    report.f = g.params.fraction_valid();
    report.learnable = g.params.learnable();
    report.tuples_per_level = std::uint64_t(v) * m;

    auto fail = [&report](std::uint32_t level, const std::string& what) {
        report.errors.push_back("level " + std::to_string(level) + ": " + what);
    };

    if (g.rules.size() != L) {
        report.errors.push_back("rule table has wrong number of levels");
        return report;
    }
    if (g.parent_index.size() != L) {
        report.errors.push_back("parent index has wrong number of levels");
        return report;
    }
    for (std::uint32_t level = 0; level < L; ++level) {
        const auto& table = g.rules[level];
        if (table.size() != v) {
            fail(level, "wrong parent count");
            continue;
        }
        std::set<Tuple> distinct;
        for (std::uint32_t a = 0; a < v; ++a) {
            if (table[a].size() != m) {
                fail(level, "wrong rule count for parent " + std::to_string(a));
                continue;
            }
            for (std::uint32_t j = 0; j < m; ++j) {
                const Tuple& t = table[a][j];
                if (t.size() != s) {
                    fail(level, "tuple of wrong arity");
                    continue;
                }
                for (Symbol sym : t)
                    if (sym >= v) fail(level, "symbol out of range");
                if (!distinct.insert(t).second)
                    fail(level, "injectivity violated: duplicate tuple");
                const TupleLocation* loc = g.parent_index[level].find(t);
                if (!loc || loc->parent != a || loc->rule != j)
                    fail(level, "parent index inconsistent with rules");
            }
        }
        if (g.parent_index[level].size() != distinct.size())
            fail(level, "parent index size mismatch");
    }
    report.ok = report.errors.empty();
    return report;
}

std::string serialize(const GrammarInstance& g) {
    nlohmann::json j;
    j["format"] = "rhm-grammar/1";
    j["params"] = {{"L", g.params.depth},
                   {"s", g.params.branching},
                   {"v", g.params.vocab},
                   {"m", g.params.rules_per_symbol},
                   {"grammar_seed", g.params.grammar_seed}};
    nlohmann::json levels = nlohmann::json::array();
    for (const auto& level_rules : g.rules) {
        nlohmann::json parents = nlohmann::json::array();
        for (const auto& parent_rules : level_rules) {
            nlohmann::json tuples = nlohmann::json::array();
            for (const auto& t : parent_rules)
                tuples.push_back(std::vector<std::uint32_t>(t.begin(), t.end()));
            parents.push_back(std::move(tuples));
        }
        levels.push_back(std::move(parents));
    }
    j["rules"] = std::move(levels);
    return j.dump(2);
}

GrammarInstance deserialize(const std::string& payload) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(payload);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("grammar payload is not valid JSON: ") +
                                 e.what());
    }
    if (!j.contains("format") || j["format"] != "rhm-grammar/1")
        throw std::runtime_error("unsupported grammar format version");
    if (!j.contains("params") || !j.contains("rules"))
        throw std::runtime_error("grammar payload missing params or rules");

    GrammarInstance g;
    try {
        const auto& p = j["params"];
        g.params.depth = p.at("L").get<std::uint32_t>();
        g.params.branching = p.at("s").get<std::uint32_t>();
        g.params.vocab = p.at("v").get<std::uint32_t>();
        g.params.rules_per_symbol = p.at("m").get<std::uint32_t>();
        g.params.grammar_seed = p.at("grammar_seed").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("bad grammar params: ") + e.what());
    }
    try {
        g.params.validate();
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("bad grammar params: ") + e.what());
    }

    const auto& levels = j["rules"];
    if (!levels.is_array() || levels.size() != g.params.depth)
        throw std::runtime_error("rule table has wrong number of levels");
    g.rules.resize(g.params.depth);
    g.parent_index.resize(g.params.depth);
    for (std::uint32_t level = 0; level < g.params.depth; ++level) {
        const auto& parents = levels[level];
        if (!parents.is_array() || parents.size() != g.params.vocab)
            throw std::runtime_error("wrong parent count at level " +
                                     std::to_string(level));
        auto& level_rules = g.rules[level];
        level_rules.resize(g.params.vocab);
        std::vector<std::pair<Tuple, TupleLocation>> entries;
        for (std::uint32_t a = 0; a < g.params.vocab; ++a) {
            const auto& tuples = parents[a];
            if (!tuples.is_array() || tuples.size() != g.params.rules_per_symbol)
                throw std::runtime_error("wrong rule count at level " +
                                         std::to_string(level));
            for (std::uint32_t r = 0; r < g.params.rules_per_symbol; ++r) {
                const auto& arr = tuples[r];
                if (!arr.is_array() || arr.size() != g.params.branching)
                    throw std::runtime_error("tuple of wrong arity at level " +
                                             std::to_string(level));
                Tuple t(g.params.branching);
                for (std::uint32_t k = 0; k < g.params.branching; ++k) {
                    const std::uint64_t sym = arr[k].get<std::uint64_t>();
                    if (sym >= g.params.vocab)
                        throw std::runtime_error("symbol out of range at level " +
                                                 std::to_string(level));
                    t[k] = static_cast<Symbol>(sym);
                }
                level_rules[a].push_back(t);
                entries.emplace_back(std::move(t),
                                     TupleLocation{static_cast<Symbol>(a), r});
            }
        }
        try {
            g.parent_index[level] = TupleMap<TupleLocation>(std::move(entries));
        } catch (const std::invalid_argument&) {
            throw std::runtime_error("injectivity violated at level " +
                                     std::to_string(level));
        }
    }
    return g;
}

void save_grammar(const GrammarInstance& g, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << serialize(g) << '\n';
    if (!out) throw std::runtime_error("write failed: " + path);
}

GrammarInstance load_grammar(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return deserialize(buf.str());
}

}  // namespace rhm
