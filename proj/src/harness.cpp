#include "rhm/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "rhm/rng.hpp"
#include "rhm/svg.hpp"

namespace rhm {
namespace {

constexpr std::uint64_t kGrammarTag = 0x47;
constexpr std::uint64_t kDataTag = 0x44;
constexpr std::uint64_t kClusterTag = 0x43;

std::uint64_t cell_seed(std::uint64_t tag, const CellKey& key) {
    std::uint64_t h = seed_chain(key.master_seed, tag);
    h = seed_chain(h, key.depth);
    h = seed_chain(h, key.branching);
    h = seed_chain(h, key.vocab);
    h = seed_chain(h, key.rules);
    h = seed_chain(h, key.seed_index);
    return h;
}

std::string fmt_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

struct FamilyKey {
    std::uint32_t depth, branching, vocab, rules;
    bool operator<(const FamilyKey& o) const {
        return std::tie(depth, branching, vocab, rules) <
               std::tie(o.depth, o.branching, o.vocab, o.rules);
    }
};

ContextMode mode_from_string(const std::string& name) {
    if (name == "fixed") return ContextMode::kFixed;
    if (name == "all-cousins") return ContextMode::kAllCousins;
    throw std::invalid_argument("unknown context mode: " + name);
}

std::string mode_to_string(ContextMode mode) {
    return mode == ContextMode::kFixed ? "fixed" : "all-cousins";
}

}  // namespace

std::vector<std::uint64_t> resolve_p_grid(const PGrid& grid, std::uint32_t v,
                                          std::uint32_t m) {
    if (!grid.explicit_values.empty()) {
        auto values = grid.explicit_values;
        for (std::size_t i = 1; i < values.size(); ++i)
            if (values[i] <= values[i - 1])
                throw std::invalid_argument("P grid must be strictly increasing");
        return values;
    }
    if (grid.points < 2) throw std::invalid_argument("P grid needs >= 2 points");
    if (!(grid.lo_factor > 0.0) || !(grid.hi_factor > grid.lo_factor))
        throw std::invalid_argument("P grid span is empty");
    const double scale = static_cast<double>(v) * std::pow(static_cast<double>(m), 3);
    const double lo = std::log10(grid.lo_factor * scale);
    const double hi = std::log10(grid.hi_factor * scale);
    std::vector<std::uint64_t> values;
    values.reserve(grid.points);
    for (std::uint32_t i = 0; i < grid.points; ++i) {
        const double t = static_cast<double>(i) / (grid.points - 1);
        const double p = std::pow(10.0, lo + (hi - lo) * t);
        auto rounded = static_cast<std::uint64_t>(std::llround(p));
        if (rounded < 1) rounded = 1;
        if (!values.empty() && rounded <= values.back())
            rounded = values.back() + 1;  // keep the grid strictly increasing
        values.push_back(rounded);
    }
    return values;
}

ExperimentRecord run_cell(const CellKey& key) {
    ExperimentRecord rec;
    rec.depth = key.depth;
    rec.branching = key.branching;
    rec.vocab = key.vocab;
    rec.rules = key.rules;
    rec.samples = key.samples;
    rec.seed_index = key.seed_index;
    rec.grammar_seed = cell_seed(kGrammarTag, key);
    rec.data_seed = cell_seed(kDataTag, key);
    rec.ilc_seed = cell_seed(kClusterTag, key);

    const auto t0 = std::chrono::steady_clock::now();
    try {
        GrammarParams params;
        params.depth = key.depth;
        params.branching = key.branching;
        params.vocab = key.vocab;
        params.rules_per_symbol = key.rules;
        params.grammar_seed = rec.grammar_seed;
        const GrammarInstance g = sample_grammar(params);

        if (key.samples == 0) throw std::runtime_error("empty corpus");
        Corpus corpus = generate_corpus(g, key.samples, rec.data_seed);
        std::vector<std::vector<Symbol>> tokens(corpus.samples.size());
        for (std::size_t i = 0; i < corpus.samples.size(); ++i)
            tokens[i] = std::move(corpus.samples[i].levels[0]);

        IlcConfig ilc = key.ilc;
        ilc.ilc_seed = rec.ilc_seed;
        const CorpusShape shape{key.depth, key.branching, key.vocab};
        const RecoveredHierarchy h = run_ilc(tokens, shape, ilc);
        rec.levels = evaluate(h, corpus, g).levels;
    } catch (const std::exception& e) {
        rec.error = e.what();
    }
    if (rec.levels.empty()) {
        // A cell that failed outright still reports every level, as misses.
        for (std::uint32_t level = 1; level < key.depth; ++level) {
            LevelEvaluation out;
            out.level = level;
            out.failed = true;
            rec.levels.push_back(out);
        }
    }
    rec.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    return rec;
}

std::vector<ExperimentRecord> run_sweep(const SweepSpec& spec) {
    if (spec.seeds < 1) throw std::invalid_argument("need at least one seed");
    std::vector<CellKey> cells;
    for (std::uint32_t L : spec.depths)
        for (std::uint32_t s : spec.branchings)
            for (std::uint32_t v : spec.vocabs)
                for (std::uint32_t m : spec.rule_counts) {
                    const auto grid = resolve_p_grid(spec.p_grid, v, m);
                    for (std::uint64_t P : grid)
                        for (std::uint32_t seed = 0; seed < spec.seeds; ++seed) {
                            CellKey key;
                            key.depth = L;
                            key.branching = s;
                            key.vocab = v;
                            key.rules = m;
                            key.samples = P;
                            key.seed_index = seed;
                            key.master_seed = spec.master_seed;
                            key.ilc = spec.ilc;
                            cells.push_back(key);
                        }
                }

    std::vector<ExperimentRecord> records(cells.size());
    if (spec.workers <= 1) {
        for (std::size_t i = 0; i < cells.size(); ++i)
            records[i] = run_cell(cells[i]);
    } else {
        // Cells are claimed off a shared counter but always written to their
        // own slot, so the output order never depends on scheduling.
        std::atomic<std::size_t> next{0};
        const unsigned n =
            std::min<std::size_t>(spec.workers, std::max<std::size_t>(cells.size(), 1));
        std::vector<std::thread> pool;
        pool.reserve(n);
        for (unsigned t = 0; t < n; ++t) {
            pool.emplace_back([&] {
                while (true) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= cells.size()) break;
                    records[i] = run_cell(cells[i]);
                }
            });
        }
        for (auto& th : pool) th.join();
    }
    return records;
}

std::optional<double> estimate_pstar(
    const std::vector<std::pair<double, double>>& curve, double threshold) {
    if (curve.size() < 2)
        throw std::invalid_argument("P* needs at least two curve points");
    for (std::size_t i = 1; i < curve.size(); ++i)
        if (!(curve[i].first > curve[i - 1].first))
            throw std::invalid_argument("curve must be sorted by P, ascending");
    if (curve.front().second >= threshold) return curve.front().first;
    for (std::size_t i = 1; i < curve.size(); ++i) {
        const auto [p0, a0] = curve[i - 1];
        const auto [p1, a1] = curve[i];
        if (a0 < threshold && a1 >= threshold) {
            const double t = (threshold - a0) / (a1 - a0);
            const double lp = std::log10(p0) + t * (std::log10(p1) - std::log10(p0));
            return std::pow(10.0, lp);
        }
    }
    return std::nullopt;
}

CollapseReport collapse_report(const std::vector<ExperimentRecord>& records) {
    CollapseReport report;
    if (records.empty()) return report;

    std::map<FamilyKey, std::map<std::uint64_t, std::vector<const ExperimentRecord*>>>
        families;
    for (const auto& rec : records)
        families[{rec.depth, rec.branching, rec.vocab, rec.rules}][rec.samples]
            .push_back(&rec);

    for (const auto& [key, by_p] : families) {
        FamilySummary fam;
        fam.depth = key.depth;
        fam.branching = key.branching;
        fam.vocab = key.vocab;
        fam.rules = key.rules;
        const std::uint32_t n_levels = key.depth - 1;
        std::vector<std::vector<std::pair<double, double>>> curves(n_levels);
        for (const auto& [P, cell_records] : by_p) {
            std::vector<double> mean(n_levels, 0.0);
            for (const ExperimentRecord* rec : cell_records) {
                if (rec->levels.size() != n_levels)
                    throw std::invalid_argument("record has wrong level count");
                for (std::uint32_t l = 0; l < n_levels; ++l)
                    mean[l] += rec->levels[l].accuracy;
            }
            for (std::uint32_t l = 0; l < n_levels; ++l) {
                mean[l] /= static_cast<double>(cell_records.size());
                curves[l].emplace_back(static_cast<double>(P), mean[l]);
            }
        }
        for (std::uint32_t l = 0; l < n_levels; ++l)
            fam.pstar_per_level.push_back(
                curves[l].size() >= 2 ? estimate_pstar(curves[l]) : std::nullopt);
        fam.top_curve = curves[n_levels - 1];
        fam.pstar_top = fam.pstar_per_level[n_levels - 1];
        report.families.push_back(std::move(fam));
    }

    // Crossing positions against m on log-log axes.
    std::vector<std::pair<double, double>> pts;
    std::size_t crossed = 0;
    double ratio_min = 0.0, ratio_max = 0.0;
    for (const auto& fam : report.families) {
        if (!fam.pstar_top) continue;
        ++crossed;
        pts.emplace_back(std::log10(static_cast<double>(fam.rules)),
                         std::log10(*fam.pstar_top));
        const double scale = static_cast<double>(fam.vocab) *
                             std::pow(static_cast<double>(fam.rules), 3);
        const double ratio = *fam.pstar_top / scale;
        if (crossed == 1) {
            ratio_min = ratio_max = ratio;
        } else {
            ratio_min = std::min(ratio_min, ratio);
            ratio_max = std::max(ratio_max, ratio);
        }
        report.per_depth.emplace_back(fam.depth, *fam.pstar_top);
    }
    report.failure_rate =
        1.0 - static_cast<double>(crossed) /
                  static_cast<double>(report.families.size());
    if (crossed > 0) {
        report.spread = ratio_max / ratio_min;
        report.collapsed = *report.spread <= 4.0;
    }

    if (pts.size() >= 3) {
        double mx = 0, my = 0;
        for (const auto& [x, y] : pts) {
            mx += x;
            my += y;
        }
        mx /= pts.size();
        my /= pts.size();
        double sxx = 0, sxy = 0;
        for (const auto& [x, y] : pts) {
            sxx += (x - mx) * (x - mx);
            sxy += (x - mx) * (y - my);
        }
        if (sxx > 1e-12) {
            const double slope = sxy / sxx;
            report.slope = slope;
            double ssr = 0;
            for (const auto& [x, y] : pts) {
                const double e = y - my - slope * (x - mx);
                ssr += e * e;
            }
            const double stderr_ =
                std::sqrt(ssr / static_cast<double>(pts.size() - 2) / sxx);
            report.slope_stderr = stderr_;
            report.slope_ci_low = slope - 1.96 * stderr_;
            report.slope_ci_high = slope + 1.96 * stderr_;
        }
    }
    return report;
}

std::string records_to_json(const std::vector<ExperimentRecord>& records) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& rec : records) {
        nlohmann::json levels = nlohmann::json::array();
        for (const auto& lvl : rec.levels)
            levels.push_back({{"level", lvl.level},
                              {"failed", lvl.failed},
                              {"accuracy", lvl.accuracy},
                              {"support_size", lvl.support_size},
                              {"support_precision", lvl.support_precision},
                              {"support_recall", lvl.support_recall}});
        arr.push_back({{"version", rec.version},
                       {"L", rec.depth},
                       {"s", rec.branching},
                       {"v", rec.vocab},
                       {"m", rec.rules},
                       {"P", rec.samples},
                       {"seed_index", rec.seed_index},
                       {"grammar_seed", rec.grammar_seed},
                       {"data_seed", rec.data_seed},
                       {"ilc_seed", rec.ilc_seed},
                       {"wall_ms", rec.wall_ms},
                       {"error", rec.error},
                       {"levels", std::move(levels)}});
    }
    return arr.dump(2);
}

std::vector<ExperimentRecord> records_from_json(const std::string& payload) {
    nlohmann::json arr;
    try {
        arr = nlohmann::json::parse(payload);
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error(std::string("records payload is not valid JSON: ") +
                                 e.what());
    }
    if (!arr.is_array()) throw std::runtime_error("records payload must be a list");
    std::vector<ExperimentRecord> records;
    for (const auto& j : arr) {
        ExperimentRecord rec;
        rec.version = j.at("version").get<std::string>();
        if (rec.version != kRecordVersion)
            throw std::runtime_error("unsupported record version: " + rec.version);
        rec.depth = j.at("L").get<std::uint32_t>();
        rec.branching = j.at("s").get<std::uint32_t>();
        rec.vocab = j.at("v").get<std::uint32_t>();
        rec.rules = j.at("m").get<std::uint32_t>();
        rec.samples = j.at("P").get<std::uint64_t>();
        rec.seed_index = j.at("seed_index").get<std::uint32_t>();
        rec.grammar_seed = j.at("grammar_seed").get<std::uint64_t>();
        rec.data_seed = j.at("data_seed").get<std::uint64_t>();
        rec.ilc_seed = j.at("ilc_seed").get<std::uint64_t>();
        rec.wall_ms = j.at("wall_ms").get<double>();
        rec.error = j.at("error").get<std::string>();
        for (const auto& l : j.at("levels")) {
            LevelEvaluation lvl;
            lvl.level = l.at("level").get<std::uint32_t>();
            lvl.failed = l.at("failed").get<bool>();
            lvl.accuracy = l.at("accuracy").get<double>();
            lvl.support_size = l.at("support_size").get<std::uint64_t>();
            lvl.support_precision = l.at("support_precision").get<double>();
            lvl.support_recall = l.at("support_recall").get<double>();
            rec.levels.push_back(lvl);
        }
        records.push_back(std::move(rec));
    }
    return records;
}

std::string records_to_csv(const std::vector<ExperimentRecord>& records) {
    std::string csv =
        "L,s,v,m,P,seed_index,level,failed,accuracy,"
        "support_precision,support_recall,support_size\n";
    char buf[256];
    for (const auto& rec : records) {
        for (const auto& lvl : rec.levels) {
            std::snprintf(buf, sizeof buf, "%u,%u,%u,%u,%llu,%u,%u,%d,",
                          rec.depth, rec.branching, rec.vocab, rec.rules,
                          static_cast<unsigned long long>(rec.samples),
                          rec.seed_index, lvl.level, lvl.failed ? 1 : 0);
            csv += buf;
            csv += fmt_double(lvl.accuracy);
            csv += ',';
            csv += fmt_double(lvl.support_precision);
            csv += ',';
            csv += fmt_double(lvl.support_recall);
            csv += ',';
            std::snprintf(buf, sizeof buf, "%llu\n",
                          static_cast<unsigned long long>(lvl.support_size));
            csv += buf;
        }
    }
    return csv;
}

std::string report_to_json(const CollapseReport& report) {
    nlohmann::json j;
    nlohmann::json fams = nlohmann::json::array();
    for (const auto& fam : report.families) {
        nlohmann::json pstars = nlohmann::json::array();
        for (const auto& p : fam.pstar_per_level)
            pstars.push_back(p ? nlohmann::json(*p) : nlohmann::json());
        nlohmann::json curve = nlohmann::json::array();
        for (const auto& [P, acc] : fam.top_curve) curve.push_back({P, acc});
        fams.push_back({{"L", fam.depth},
                        {"s", fam.branching},
                        {"v", fam.vocab},
                        {"m", fam.rules},
                        {"pstar_per_level", std::move(pstars)},
                        {"pstar_top", fam.pstar_top ? nlohmann::json(*fam.pstar_top)
                                                    : nlohmann::json()},
                        {"top_curve", std::move(curve)}});
    }
    j["families"] = std::move(fams);
    j["slope"] = report.slope ? nlohmann::json(*report.slope) : nlohmann::json();
    j["slope_stderr"] =
        report.slope_stderr ? nlohmann::json(*report.slope_stderr) : nlohmann::json();
    j["slope_ci95"] =
        report.slope_ci_low
            ? nlohmann::json::array({*report.slope_ci_low, *report.slope_ci_high})
            : nlohmann::json();
    j["spread"] = report.spread ? nlohmann::json(*report.spread) : nlohmann::json();
    j["collapsed"] = report.collapsed;
    nlohmann::json depths = nlohmann::json::array();
    for (const auto& [L, pstar] : report.per_depth)
        depths.push_back({{"L", L}, {"pstar_top", pstar}});
    j["per_depth"] = std::move(depths);
    j["failure_rate"] = report.failure_rate;
    return j.dump(2);
}

void emit(const std::vector<ExperimentRecord>& records,
          const CollapseReport* report, const std::string& outdir) {
    std::filesystem::create_directories(outdir);
    const auto path = [&](const char* name) {
        return (std::filesystem::path(outdir) / name).string();
    };
    auto write = [](const std::string& file, const std::string& content) {
        std::ofstream out(file, std::ios::binary);
        if (!out) throw std::runtime_error("cannot open " + file + " for writing");
        out << content;
        if (!out) throw std::runtime_error("write failed: " + file);
    };
    write(path("records.json"), records_to_json(records));
    write(path("records.csv"), records_to_csv(records));
    if (!report) return;

    write(path("report.json"), report_to_json(*report));
    const bool multi_depth = [&] {
        for (const auto& fam : report->families)
            if (fam.depth != report->families.front().depth) return true;
        return false;
    }();
    std::vector<PlotSeries> raw, rescaled;
    for (const auto& fam : report->families) {
        std::string label = "m=" + std::to_string(fam.rules);
        if (multi_depth) label = "L=" + std::to_string(fam.depth) + " " + label;
        PlotSeries a{label, fam.top_curve};
        PlotSeries b{label, {}};
        const double scale = static_cast<double>(fam.vocab) *
                             std::pow(static_cast<double>(fam.rules), 3);
        for (const auto& [P, acc] : fam.top_curve)
            b.points.emplace_back(P / scale, acc);
        raw.push_back(std::move(a));
        rescaled.push_back(std::move(b));
    }
    write(path("accuracy_vs_samples.svg"),
          line_plot_svg("Top-level accuracy", "samples P", "accuracy", raw, true));
    write(path("accuracy_rescaled.svg"),
          line_plot_svg("Top-level accuracy, rescaled", "P / (v m^3)", "accuracy",
                        rescaled, true));
}

SweepSpec sweep_spec_from_json(const std::string& payload) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(payload);
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("sweep spec is not valid JSON: ") +
                                    e.what());
    }
    SweepSpec spec;
    try {
        if (j.contains("L")) spec.depths = j["L"].get<std::vector<std::uint32_t>>();
        if (j.contains("s"))
            spec.branchings = j["s"].get<std::vector<std::uint32_t>>();
        if (j.contains("v")) spec.vocabs = j["v"].get<std::vector<std::uint32_t>>();
        if (j.contains("m"))
            spec.rule_counts = j["m"].get<std::vector<std::uint32_t>>();
        if (j.contains("P"))
            spec.p_grid.explicit_values = j["P"].get<std::vector<std::uint64_t>>();
        if (j.contains("p_points"))
            spec.p_grid.points = j["p_points"].get<std::uint32_t>();
        if (j.contains("p_lo_factor"))
            spec.p_grid.lo_factor = j["p_lo_factor"].get<double>();
        if (j.contains("p_hi_factor"))
            spec.p_grid.hi_factor = j["p_hi_factor"].get<double>();
        if (j.contains("seeds")) spec.seeds = j["seeds"].get<std::uint32_t>();
        if (j.contains("master_seed"))
            spec.master_seed = j["master_seed"].get<std::uint64_t>();
        if (j.contains("mode"))
            spec.ilc.mode = mode_from_string(j["mode"].get<std::string>());
        if (j.contains("single_position"))
            spec.ilc.single_position = j["single_position"].get<bool>();
        if (j.contains("min_count"))
            spec.ilc.min_count = j["min_count"].get<std::uint64_t>();
        if (j.contains("restarts"))
            spec.ilc.restarts = j["restarts"].get<std::uint32_t>();
        if (j.contains("max_iters"))
            spec.ilc.max_iters = j["max_iters"].get<std::uint32_t>();
        if (j.contains("tol")) spec.ilc.tol = j["tol"].get<double>();
        if (j.contains("workers")) spec.workers = j["workers"].get<unsigned>();
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("bad sweep spec field: ") + e.what());
    }
    if (spec.depths.empty() || spec.branchings.empty() || spec.vocabs.empty() ||
        spec.rule_counts.empty())
        throw std::invalid_argument("sweep spec has an empty parameter axis");
    return spec;
}

std::string sweep_spec_to_json(const SweepSpec& spec) {
    nlohmann::json j;
    j["L"] = spec.depths;
    j["s"] = spec.branchings;
    j["v"] = spec.vocabs;
    j["m"] = spec.rule_counts;
    if (!spec.p_grid.explicit_values.empty()) {
        j["P"] = spec.p_grid.explicit_values;
    } else {
        j["p_points"] = spec.p_grid.points;
        j["p_lo_factor"] = spec.p_grid.lo_factor;
        j["p_hi_factor"] = spec.p_grid.hi_factor;
    }
    j["seeds"] = spec.seeds;
    j["master_seed"] = spec.master_seed;
    j["mode"] = mode_to_string(spec.ilc.mode);
    j["single_position"] = spec.ilc.single_position;
    j["min_count"] = spec.ilc.min_count;
    j["restarts"] = spec.ilc.restarts;
    j["max_iters"] = spec.ilc.max_iters;
    j["tol"] = spec.ilc.tol;
    j["workers"] = spec.workers;
    return j.dump(2);
}

}  // namespace rhm
