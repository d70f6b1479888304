#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "rhm/generator.hpp"
#include "rhm/grammar.hpp"
#include "rhm/harness.hpp"
#include "rhm/ilc.hpp"
#include "rhm/metrics.hpp"
#include "rhm/oracle.hpp"

namespace {

using namespace rhm;

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void spill(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << content;
    if (!out) throw std::runtime_error("write failed: " + path);
}

void print_or_write(const std::string& out_path, const std::string& content) {
    if (out_path.empty())
        std::cout << content << "\n";
    else
        spill(out_path, content);
}

nlohmann::json level_json(const LevelEvaluation& lvl) {
    return {{"level", lvl.level},
            {"failed", lvl.failed},
            {"accuracy", lvl.accuracy},
            {"support_size", lvl.support_size},
            {"support_precision", lvl.support_precision},
            {"support_recall", lvl.support_recall}};
}

int cmd_grammar(std::uint32_t L, std::uint32_t s, std::uint32_t v,
                std::uint32_t m, std::uint64_t seed, const std::string& out) {
    GrammarParams params;
    params.depth = L;
    params.branching = s;
    params.vocab = v;
    params.rules_per_symbol = m;
    params.grammar_seed = seed;
    const GrammarInstance g = sample_grammar(params);
    save_grammar(g, out);
    std::cout << "wrote " << out << "  f=" << params.fraction_valid()
              << (params.learnable() ? "  learnable" : "  not learnable")
              << "\n";
    return 0;
}

int cmd_validate(const std::string& path) {
    const GrammarInstance g = load_grammar(path);
    const ValidationReport report = validate(g);
    nlohmann::json j;
    j["ok"] = report.ok;
    j["f"] = report.f;
    j["learnable"] = report.learnable;
    j["tuples_per_level"] = report.tuples_per_level;
    j["errors"] = report.errors;
    std::cout << j.dump(2) << "\n";
    return report.ok ? 0 : 1;
}

int cmd_sample(const std::string& grammar_path, std::uint64_t count,
               std::uint64_t seed, bool no_annotations, const std::string& out) {
    const GrammarInstance g = load_grammar(grammar_path);
    Corpus corpus = generate_corpus(g, count, seed);
    if (no_annotations) {
        corpus.annotated = false;
        for (auto& sample : corpus.samples) {
            sample.levels.resize(1);
            sample.rule_choices.clear();
        }
    }
    save_corpus(corpus, out);
    std::cout << "wrote " << out << "  samples=" << count
              << "  tokens/sample=" << g.params.visible_length() << "\n";
    return 0;
}

int cmd_oracle(const std::string& grammar_path, std::uint32_t level,
               const ContextGeometry& geom, const std::string& out) {
    const GrammarInstance g = load_grammar(grammar_path);
    const DiagnosticsReport d = diagnostics(g, level, geom);
    nlohmann::json j;
    j["level"] = d.level;
    j["f"] = d.f;
    j["learnable"] = d.learnable;
    j["balance_min"] = d.balance_min;
    j["balance_max"] = d.balance_max;
    j["has_context"] = d.has_context;
    if (d.has_context) {
        j["min_center_distance"] = d.min_center_distance;
        j["undefined_centers"] = d.undefined_centers;
        if (d.separation_defined) j["separation_ratio"] = d.separation_ratio;
    }
    print_or_write(out, j.dump(2));
    return 0;
}

int cmd_ilc(const std::string& corpus_path, const std::string& grammar_path,
            const IlcConfig& config, const std::string& out) {
    const Corpus corpus = load_corpus(corpus_path);
    std::vector<std::vector<Symbol>> tokens;
    tokens.reserve(corpus.samples.size());
    for (const auto& sample : corpus.samples) tokens.push_back(sample.levels[0]);
    const CorpusShape shape{corpus.params.depth, corpus.params.branching,
                            corpus.params.vocab};
    const RecoveredHierarchy h = run_ilc(tokens, shape, config);

    nlohmann::json j;
    j["depth"] = shape.depth;
    j["samples"] = tokens.size();
    nlohmann::json levels = nlohmann::json::array();
    for (const auto& lvl : h.levels) {
        nlohmann::json lj;
        lj["level"] = lvl.level;
        lj["failed"] = lvl.failed;
        lj["support_size"] = lvl.support_size;
        nlohmann::json clusters = nlohmann::json::array();
        for (const auto& [tuple, label] : lvl.cluster_map.items())
            clusters.push_back({{"tuple", tuple}, {"label", label}});
        lj["clusters"] = std::move(clusters);
        levels.push_back(std::move(lj));
    }
    j["levels"] = std::move(levels);

    if (!grammar_path.empty()) {
        const GrammarInstance g = load_grammar(grammar_path);
        const EvaluationReport eval = evaluate(h, corpus, g);
        nlohmann::json ej = nlohmann::json::array();
        for (const auto& lvl : eval.levels) ej.push_back(level_json(lvl));
        j["evaluation"] = std::move(ej);
    }
    print_or_write(out, j.dump(2));
    return 0;
}

int cmd_score(const std::string& grammar_path, const std::string& corpus_path,
              std::uint32_t level, const IlcConfig& ilc_config,
              const ScoreConfig& score_config, const std::string& out) {
    const GrammarInstance g = load_grammar(grammar_path);
    RepresentationMap rep;
    RecoveredHierarchy h;  // keeps the decoded maps alive while scoring
    std::string rep_name;
    if (corpus_path.empty()) {
        rep = identity_representation(g.params.vocab);
        rep_name = "identity";
    } else {
        const Corpus corpus = load_corpus(corpus_path);
        std::vector<std::vector<Symbol>> tokens;
        tokens.reserve(corpus.samples.size());
        for (const auto& sample : corpus.samples)
            tokens.push_back(sample.levels[0]);
        const CorpusShape shape{corpus.params.depth, corpus.params.branching,
                                corpus.params.vocab};
        h = run_ilc(tokens, shape, ilc_config);
        rep = ilc_representation(h, level);
        rep_name = "ilc";
    }
    const ClusterScore score = synonym_clustering_score(rep, g, level, score_config);
    nlohmann::json j;
    j["level"] = level;
    j["representation"] = rep_name;
    j["score"] = score.score;
    j["synonym_mean"] = score.synonym_mean;
    j["generic_mean"] = score.generic_mean;
    j["degenerate"] = score.degenerate;
    print_or_write(out, j.dump(2));
    return 0;
}

int cmd_sweep(const std::string& spec_path, const std::string& out_dir,
              unsigned workers_override) {
    SweepSpec spec = sweep_spec_from_json(slurp(spec_path));
    if (workers_override > 0) spec.workers = workers_override;
    const auto records = run_sweep(spec);
    const CollapseReport report = collapse_report(records);
    emit(records, &report, out_dir);
    std::size_t failures = 0;
    for (const auto& rec : records)
        if (!rec.error.empty()) ++failures;
    std::cout << "wrote " << out_dir << "  cells=" << records.size()
              << "  errors=" << failures;
    if (report.slope) std::cout << "  slope=" << *report.slope;
    if (report.spread) std::cout << "  spread=" << *report.spread;
    std::cout << "\n";
    return 0;
}

int cmd_collapse(const std::string& in_dir, const std::string& out_path) {
    const auto records =
        records_from_json(slurp(in_dir + "/records.json"));
    const CollapseReport report = collapse_report(records);
    spill(out_path, report_to_json(report));
    std::cout << "wrote " << out_path;
    if (report.slope) std::cout << "  slope=" << *report.slope;
    if (report.spread) std::cout << "  spread=" << *report.spread;
    std::cout << "  failure_rate=" << report.failure_rate << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Random hierarchy grammars: sampling, recovery, scaling"};
    app.require_subcommand(1);

    std::uint32_t L = 3, s = 2, v = 4, m = 2, level = 1;
    std::uint64_t seed = 0, count = 1000;
    std::string grammar_path, corpus_path, out_path, spec_path, in_dir;
    bool no_annotations = false;

    IlcConfig ilc_config;
    bool all_cousins = false;
    ScoreConfig score_config;

    auto* grammar = app.add_subcommand("grammar", "Sample a grammar and save it");
    grammar->add_option("-L,--depth", L, "Tree depth")->required();
    grammar->add_option("-s,--branching", s, "Branching factor")->required();
    grammar->add_option("-v,--vocab", v, "Symbols per level")->required();
    grammar->add_option("-m,--rules", m, "Rules per symbol")->required();
    grammar->add_option("--seed", seed, "Grammar seed");
    grammar->add_option("-o,--out", out_path, "Output path")->required();

    auto* validate_cmd = app.add_subcommand("validate", "Check a saved grammar");
    validate_cmd->add_option("-g,--grammar", grammar_path, "Grammar file")
        ->required();

    auto* sample = app.add_subcommand("sample", "Generate an annotated corpus");
    sample->add_option("-g,--grammar", grammar_path, "Grammar file")->required();
    sample->add_option("-n,--count", count, "Number of samples")->required();
    sample->add_option("--seed", seed, "Data seed");
    sample->add_flag("--no-annotations", no_annotations,
                     "Store visible tokens only");
    sample->add_option("-o,--out", out_path, "Output path")->required();

    auto* oracle = app.add_subcommand("oracle", "Exact diagnostics for a level");
    ContextGeometry geom;
    bool single_node = false;
    oracle->add_option("-g,--grammar", grammar_path, "Grammar file")->required();
    oracle->add_option("-l,--level", level, "Level whose tuples are probed");
    oracle->add_option("--tuple-pos", geom.tuple_pos, "Tuple slot r");
    oracle->add_option("--cousin-pos", geom.cousin_pos, "Cousin slot r'");
    oracle->add_option("--target-pos", geom.target_pos, "Token slot t");
    oracle->add_flag("--single-node", single_node,
                     "Probe the leftmost node instead of averaging");
    oracle->add_option("-o,--out", out_path, "Output path (default stdout)");

    auto add_ilc_options = [&](CLI::App* cmd) {
        cmd->add_flag("--all-cousins", all_cousins,
                      "Context over every cousin slot, not just one");
        cmd->add_flag("--single-position", ilc_config.single_position,
                      "Use only the leftmost grandparent of each sample");
        cmd->add_option("--min-count", ilc_config.min_count,
                        "Leave tuples with fewer occurrences unlabeled");
        cmd->add_option("--restarts", ilc_config.restarts, "k-means restarts");
        cmd->add_option("--cluster-seed", ilc_config.ilc_seed, "Clustering seed");
    };

    auto* ilc = app.add_subcommand("ilc", "Recover the hierarchy from a corpus");
    ilc->add_option("-c,--corpus", corpus_path, "Corpus file")->required();
    ilc->add_option("-g,--grammar", grammar_path,
                    "Grammar file, for scoring the recovery");
    add_ilc_options(ilc);
    ilc->add_option("-o,--out", out_path, "Output path (default stdout)");

    auto* score = app.add_subcommand("score", "Synonym-invariance score");
    score->add_option("-g,--grammar", grammar_path, "Grammar file")->required();
    score->add_option("-c,--corpus", corpus_path,
                      "Corpus to fit a recovery on; omit to score raw tokens");
    score->add_option("-l,--level", level, "Paraphrase level")->required();
    score->add_option("--probes", score_config.probes, "Probe pairs");
    score->add_option("--seed", score_config.score_seed, "Probe seed");
    score->add_flag("--squared", score_config.squared,
                    "Compare mean squared displacements");
    add_ilc_options(score);
    score->add_option("-o,--out", out_path, "Output path (default stdout)");

    auto* sweep = app.add_subcommand("sweep", "Run a scaling sweep");
    unsigned workers = 0;
    sweep->add_option("--spec", spec_path, "Sweep spec (JSON)")->required();
    sweep->add_option("-o,--out", out_path, "Output directory")->required();
    sweep->add_option("-j,--workers", workers, "Worker threads");

    auto* collapse = app.add_subcommand("collapse", "Re-analyze saved records");
    collapse->add_option("-i,--in", in_dir, "Directory holding records.json")
        ->required();
    collapse->add_option("-o,--out", out_path, "Report path")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        ilc_config.mode =
            all_cousins ? ContextMode::kAllCousins : ContextMode::kFixed;
        geom.aggregate_nodes = !single_node;
        if (grammar->parsed()) return cmd_grammar(L, s, v, m, seed, out_path);
        if (validate_cmd->parsed()) return cmd_validate(grammar_path);
        if (sample->parsed())
            return cmd_sample(grammar_path, count, seed, no_annotations, out_path);
        if (oracle->parsed()) return cmd_oracle(grammar_path, level, geom, out_path);
        if (ilc->parsed())
            return cmd_ilc(corpus_path, grammar_path, ilc_config, out_path);
        if (score->parsed())
            return cmd_score(grammar_path, corpus_path, level, ilc_config,
                             score_config, out_path);
        if (sweep->parsed()) return cmd_sweep(spec_path, out_path, workers);
        if (collapse->parsed()) return cmd_collapse(in_dir, out_path);
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
