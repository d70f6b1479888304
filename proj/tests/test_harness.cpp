#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "rhm/harness.hpp"

using namespace rhm;

namespace {

// Records for one synthetic family whose top-level curve crosses one half
// exactly at pstar; two seeds per point to exercise averaging.
void add_family(std::vector<ExperimentRecord>& records, std::uint32_t depth,
                std::uint32_t vocab, std::uint32_t rules, double pstar) {
    const double ps[] = {pstar / 10, pstar, pstar * 10};
    const double accs[] = {0.1, 0.5, 0.9};
    for (int i = 0; i < 3; ++i)
        for (std::uint32_t seed = 0; seed < 2; ++seed) {
            ExperimentRecord rec;
            rec.depth = depth;
            rec.branching = 3;
            rec.vocab = vocab;
            rec.rules = rules;
            rec.samples = static_cast<std::uint64_t>(ps[i]);
            rec.seed_index = seed;
            for (std::uint32_t level = 1; level < depth; ++level) {
                LevelEvaluation lvl;
                lvl.level = level;
                lvl.accuracy = accs[i];
                rec.levels.push_back(lvl);
            }
            records.push_back(std::move(rec));
        }
}

std::string temp_dir(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("generated sample grids are log-spaced and strictly increasing") {
    PGrid grid;
    const auto values = resolve_p_grid(grid, 8, 4);
    REQUIRE(values.size() == 12);
    const double scale = 8.0 * 64.0;
    CHECK(static_cast<double>(values.front()) ==
          doctest::Approx(scale / 30.0).epsilon(0.05));
    CHECK(static_cast<double>(values.back()) ==
          doctest::Approx(scale * 30.0).epsilon(0.05));
    for (std::size_t i = 1; i < values.size(); ++i)
        CHECK(values[i] > values[i - 1]);

    // Tiny families collapse to small integers; the bump keeps strictness.
    const auto tiny = resolve_p_grid(grid, 2, 1);
    for (std::size_t i = 1; i < tiny.size(); ++i)
        CHECK(tiny[i] > tiny[i - 1]);

    PGrid fixed;
    fixed.explicit_values = {10, 20, 40};
    CHECK(resolve_p_grid(fixed, 8, 4) == std::vector<std::uint64_t>{10, 20, 40});
    fixed.explicit_values = {10, 10};
    CHECK_THROWS_AS(resolve_p_grid(fixed, 8, 4), std::invalid_argument);
}

TEST_CASE("crossing estimation interpolates in log sample size") {
    const std::vector<std::pair<double, double>> curve{{100, 0.2}, {1000, 0.8}};
    const auto pstar = estimate_pstar(curve);
    REQUIRE(pstar.has_value());
    CHECK(*pstar == doctest::Approx(std::pow(10.0, 2.5)).epsilon(1e-9));

    // Starting at or above the threshold pins the first grid point.
    const std::vector<std::pair<double, double>> high{{50, 0.6}, {500, 0.9}};
    CHECK(*estimate_pstar(high) == 50.0);

    const std::vector<std::pair<double, double>> flat{{50, 0.1}, {500, 0.2}};
    CHECK_FALSE(estimate_pstar(flat).has_value());

    // Points beyond the first crossing cannot move the estimate.
    std::vector<std::pair<double, double>> longer = curve;
    longer.emplace_back(10000, 0.4);
    longer.emplace_back(100000, 0.95);
    CHECK(*estimate_pstar(longer) == doctest::Approx(*pstar).epsilon(1e-12));

    CHECK_THROWS_AS(estimate_pstar({{100, 0.5}}), std::invalid_argument);
    CHECK_THROWS_AS(estimate_pstar({{100, 0.5}, {100, 0.6}}),
                    std::invalid_argument);
}

TEST_CASE("collapse analysis recovers a cubic law exactly") {
    std::vector<ExperimentRecord> records;
    for (const std::uint32_t m : {2u, 4u, 8u})
        add_family(records, 5, 8, m, 8.0 * m * m * m);

    const auto report = collapse_report(records);
    REQUIRE(report.families.size() == 3);
    REQUIRE(report.slope.has_value());
    CHECK(*report.slope == doctest::Approx(3.0).epsilon(1e-9));
    REQUIRE(report.spread.has_value());
    CHECK(*report.spread == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(report.collapsed);
    CHECK(report.failure_rate == 0.0);
    CHECK(report.per_depth.size() == 3);
    for (const auto& fam : report.families) {
        REQUIRE(fam.pstar_top.has_value());
        CHECK(*fam.pstar_top ==
              doctest::Approx(8.0 * std::pow(fam.rules, 3)).epsilon(1e-9));
        CHECK(fam.pstar_per_level.size() == 4);
    }
}

TEST_CASE("collapse analysis flags a non-cubic law") {
    std::vector<ExperimentRecord> records;
    for (const std::uint32_t m : {2u, 4u, 8u})
        add_family(records, 5, 8, m,
                   8.0 * std::pow(static_cast<double>(m), 6.0));
    const auto report = collapse_report(records);
    REQUIRE(report.slope.has_value());
    CHECK(*report.slope == doctest::Approx(6.0).epsilon(1e-6));
    REQUIRE(report.spread.has_value());
    CHECK(*report.spread > 4.0);
    CHECK_FALSE(report.collapsed);
}

TEST_CASE("curves that never cross count as failures") {
    std::vector<ExperimentRecord> records;
    add_family(records, 3, 8, 2, 64.0);
    // A second family stuck at low accuracy.
    for (const std::uint64_t P : {100ull, 1000ull}) {
        ExperimentRecord rec;
        rec.depth = 3;
        rec.branching = 3;
        rec.vocab = 8;
        rec.rules = 4;
        rec.samples = P;
        for (std::uint32_t level = 1; level < 3; ++level) {
            LevelEvaluation lvl;
            lvl.level = level;
            lvl.accuracy = 0.2;
            rec.levels.push_back(lvl);
        }
        records.push_back(std::move(rec));
    }
    const auto report = collapse_report(records);
    REQUIRE(report.families.size() == 2);
    CHECK(report.failure_rate == doctest::Approx(0.5));
    CHECK_FALSE(report.families[1].pstar_top.has_value());
    CHECK_FALSE(report.slope.has_value());  // two points cannot set a slope
}

TEST_CASE("record serialization round-trips") {
    std::vector<ExperimentRecord> records;
    add_family(records, 3, 8, 2, 64.0);
    records[0].error = "synthetic failure";
    records[0].wall_ms = 12.5;

    const auto payload = records_to_json(records);
    const auto back = records_from_json(payload);
    REQUIRE(back.size() == records.size());
    CHECK(records_to_json(back) == payload);
    CHECK(back[0].error == "synthetic failure");
    CHECK(back[0].wall_ms == 12.5);
    CHECK(back[2].levels[1].accuracy == records[2].levels[1].accuracy);

    CHECK_THROWS_AS(records_from_json("{"), std::runtime_error);
    CHECK_THROWS_AS(records_from_json("{}"), std::runtime_error);
}

TEST_CASE("csv is deterministic and excludes timing") {
    std::vector<ExperimentRecord> records;
    add_family(records, 3, 8, 2, 64.0);
    records[0].wall_ms = 1.0;
    auto tampered = records;
    tampered[0].wall_ms = 999.0;

    const auto csv = records_to_csv(records);
    CHECK(csv == records_to_csv(tampered));  // timing never leaks into csv

    std::size_t rows = 0;
    for (const char c : csv) rows += c == '\n';
    // Header plus (levels per record) lines.
    CHECK(rows == 1 + records.size() * 2);
    CHECK(csv.find("wall") == std::string::npos);
    CHECK(csv.rfind("L,s,v,m,P,seed_index,level,failed,accuracy,", 0) == 0);
}

TEST_CASE("cells derive their seeds independent of sample count") {
    CellKey a;
    a.depth = 3;
    a.branching = 2;
    a.vocab = 4;
    a.rules = 2;
    a.samples = 100;
    a.seed_index = 1;
    a.master_seed = 99;
    auto b = a;
    b.samples = 100000;

    const auto ra = run_cell(a);
    const auto rb = run_cell(b);
    CHECK(ra.grammar_seed == rb.grammar_seed);
    CHECK(ra.data_seed == rb.data_seed);
    CHECK(ra.ilc_seed == rb.ilc_seed);

    auto c = a;
    c.seed_index = 2;
    CHECK(run_cell(c).grammar_seed != ra.grammar_seed);
}

TEST_CASE("failed cells report an error instead of throwing") {
    CellKey key;
    key.depth = 3;
    key.branching = 2;
    key.vocab = 4;
    key.rules = 2;
    key.samples = 0;  // no corpus to learn from
    const auto rec = run_cell(key);
    CHECK_FALSE(rec.error.empty());
    REQUIRE(rec.levels.size() == 2);
    for (const auto& lvl : rec.levels) {
        CHECK(lvl.failed);
        CHECK(lvl.accuracy == 0.0);
    }
}

TEST_CASE("sweeps are worker-count invariant") {
    SweepSpec spec;
    spec.depths = {3};
    spec.branchings = {2};
    spec.vocabs = {4};
    spec.rule_counts = {2};
    spec.p_grid.explicit_values = {60, 600};
    spec.seeds = 2;
    spec.master_seed = 7;
    spec.ilc.mode = ContextMode::kAllCousins;
    spec.ilc.restarts = 8;

    spec.workers = 1;
    const auto serial = run_sweep(spec);
    spec.workers = 3;
    const auto threaded = run_sweep(spec);
    REQUIRE(serial.size() == 4);
    REQUIRE(threaded.size() == 4);
    CHECK(records_to_csv(serial) == records_to_csv(threaded));
    for (std::size_t i = 0; i < serial.size(); ++i) {
        CHECK(serial[i].samples == threaded[i].samples);
        CHECK(serial[i].seed_index == threaded[i].seed_index);
        CHECK(serial[i].grammar_seed == threaded[i].grammar_seed);
    }
}

TEST_CASE("sweep specs parse with defaults and reject junk") {
    const auto spec = sweep_spec_from_json(
        R"({"L":[4],"m":[2,3],"P":[10,100],"seeds":2,"mode":"all-cousins"})");
    CHECK(spec.depths == std::vector<std::uint32_t>{4});
    CHECK(spec.rule_counts == std::vector<std::uint32_t>{2, 3});
    CHECK(spec.branchings == std::vector<std::uint32_t>{3});  // default
    CHECK(spec.vocabs == std::vector<std::uint32_t>{8});      // default
    CHECK(spec.seeds == 2);
    CHECK(spec.ilc.mode == ContextMode::kAllCousins);
    CHECK(spec.p_grid.explicit_values == std::vector<std::uint64_t>{10, 100});

    const auto round = sweep_spec_from_json(sweep_spec_to_json(spec));
    CHECK(round.rule_counts == spec.rule_counts);
    CHECK(round.ilc.mode == spec.ilc.mode);

    CHECK_THROWS_AS(sweep_spec_from_json("nope"), std::invalid_argument);
    CHECK_THROWS_AS(sweep_spec_from_json(R"({"L":[]})"), std::invalid_argument);
    CHECK_THROWS_AS(sweep_spec_from_json(R"({"mode":"banana"})"),
                    std::invalid_argument);
    CHECK_THROWS_AS(sweep_spec_from_json(R"({"L":"five"})"),
                    std::invalid_argument);
}

TEST_CASE("emit writes the full artifact set") {
    std::vector<ExperimentRecord> records;
    for (const std::uint32_t m : {2u, 4u})
        add_family(records, 3, 8, m, 8.0 * m * m * m);
    const auto report = collapse_report(records);

    const auto dir = temp_dir("rhm_emit_test");
    std::filesystem::remove_all(dir);
    emit(records, &report, dir);
    for (const char* name : {"records.json", "records.csv", "report.json",
                             "accuracy_vs_samples.svg", "accuracy_rescaled.svg"}) {
        const auto path = std::filesystem::path(dir) / name;
        INFO(name);
        CHECK(std::filesystem::exists(path));
        CHECK(std::filesystem::file_size(path) > 0);
    }

    std::ifstream svg_in(std::filesystem::path(dir) / "accuracy_vs_samples.svg");
    std::stringstream buf;
    buf << svg_in.rdbuf();
    const auto svg = buf.str();
    CHECK(svg.rfind("<?xml", 0) == 0);
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("</svg>") != std::string::npos);
    CHECK(svg.find("m=2") != std::string::npos);
    std::filesystem::remove_all(dir);
}
