#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rhm/ilc.hpp"

// Scaling experiments: run recovery over a (L, s, v, m, P, seed) grid, read
// off where each accuracy curve crosses one half, and check how that
// crossing moves with m. Everything is reproducible from the master seed;
// re-running with a different worker count changes nothing in the output.

namespace rhm {

inline constexpr const char* kRecordVersion = "rhm-record/1";

struct PGrid {
    // Explicit values win when non-empty. Otherwise `points` log-spaced
    // values spanning [lo_factor, hi_factor] * v*m^3, rounded up to stay
    // strictly increasing.
    std::vector<std::uint64_t> explicit_values;
    std::uint32_t points = 12;
    double lo_factor = 1.0 / 30.0;
    double hi_factor = 30.0;
};

std::vector<std::uint64_t> resolve_p_grid(const PGrid& grid, std::uint32_t v,
                                          std::uint32_t m);

struct SweepSpec {
    std::vector<std::uint32_t> depths{5};      // L
    std::vector<std::uint32_t> branchings{3};  // s
    std::vector<std::uint32_t> vocabs{8};      // v
    std::vector<std::uint32_t> rule_counts{4}; // m
    PGrid p_grid;
    std::uint32_t seeds = 3;
    std::uint64_t master_seed = 0;
    IlcConfig ilc;
    unsigned workers = 1;
};

SweepSpec sweep_spec_from_json(const std::string& payload);
std::string sweep_spec_to_json(const SweepSpec& spec);

struct CellKey {
    std::uint32_t depth = 2, branching = 2, vocab = 2, rules = 1;
    std::uint64_t samples = 1;
    std::uint32_t seed_index = 0;
    std::uint64_t master_seed = 0;
    IlcConfig ilc;
};

struct ExperimentRecord {
    std::uint32_t depth = 2, branching = 2, vocab = 2, rules = 1;
    std::uint64_t samples = 0;
    std::uint32_t seed_index = 0;
    std::uint64_t grammar_seed = 0, data_seed = 0, ilc_seed = 0;
    std::vector<LevelEvaluation> levels;  // one per level 1..L-1
    std::string error;                    // nonempty when the cell blew up
    double wall_ms = 0.0;                 // excluded from CSV on purpose
    std::string version = kRecordVersion;
};

// Grammar and data seeds depend on (master, L, s, v, m, seed_index) but not
// on P, so a longer corpus extends a shorter one and curves over P track
// one grammar per seed. Failures land in record.error, not in a throw.
ExperimentRecord run_cell(const CellKey& key);

std::vector<ExperimentRecord> run_sweep(const SweepSpec& spec);

// First crossing of the threshold, interpolated linearly in (log P,
// accuracy); the first grid point when the curve starts at or above it;
// nothing when it never crosses. Curve must be sorted by P, ascending.
std::optional<double> estimate_pstar(
    const std::vector<std::pair<double, double>>& curve, double threshold = 0.5);

struct FamilySummary {
    std::uint32_t depth = 2, branching = 2, vocab = 2, rules = 1;
    // Seed-averaged accuracy per grid P, top level (L-1).
    std::vector<std::pair<double, double>> top_curve;
    std::vector<std::optional<double>> pstar_per_level;  // level 1..L-1
    std::optional<double> pstar_top;
};

struct CollapseReport {
    std::vector<FamilySummary> families;
    std::optional<double> slope;         // d log P* / d log m
    std::optional<double> slope_stderr;
    std::optional<double> slope_ci_low, slope_ci_high;  // 95%, normal approx
    std::optional<double> spread;  // max/min of P* / (v m^3) across families
    bool collapsed = false;        // spread present and at most 4
    std::vector<std::pair<std::uint32_t, double>> per_depth;  // (L, P*_top)
    double failure_rate = 0.0;     // families that never crossed
};

CollapseReport collapse_report(const std::vector<ExperimentRecord>& records);

std::string records_to_json(const std::vector<ExperimentRecord>& records);
std::vector<ExperimentRecord> records_from_json(const std::string& payload);
// Deterministic digits, no timing columns: safe to diff across runs.
std::string records_to_csv(const std::vector<ExperimentRecord>& records);
std::string report_to_json(const CollapseReport& report);

// Writes records.json, records.csv, and when a report is given report.json
// plus the two accuracy plots, into `outdir` (created if needed).
void emit(const std::vector<ExperimentRecord>& records,
          const CollapseReport* report, const std::string& outdir);

}  // namespace rhm
