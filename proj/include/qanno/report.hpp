#pragma once

#include <filesystem>
#include <optional>

#include "qanno/annotation_loop.hpp"
#include "qanno/config.hpp"

namespace qanno {

// batches.csv / summary.csv / sweep.csv cell format: 6 decimal places, dot separator.
std::string format_real(double value);

void write_batches_csv(const std::filesystem::path& path, const std::vector<BatchStats>& batches);

// Per-level totals against the all-manual equivalent; the overall row is the exact
// sum of the document and span rows.
void write_summary_csv(const std::filesystem::path& path, const Ledger& ledger,
                       const CostMatrix& costs);

void write_annotations_jsonl(const std::filesystem::path& path,
                             const std::vector<AnnotationSample>& samples, LevelScope scope);

// Saved run ledger: one JSON header line (costs, scope, run parameters), then one
// line per entry. Everything needed to regenerate the CSV reports byte for byte.
void save_ledger(const std::filesystem::path& path, const Ledger& ledger, const RunConfig& config);

struct SavedLedger {
    Ledger ledger;
    CostMatrix costs;
    LevelScope scope = LevelScope::Both;
};

SavedLedger load_ledger(const std::filesystem::path& path);

// Writes batches.csv, summary.csv, annotations.jsonl and ledger.jsonl. Files are
// staged with a .tmp suffix and renamed once everything succeeded, so a failure
// leaves no partial reports behind.
void emit_report(const RunResult& result, const RunConfig& config,
                 const std::filesystem::path& out_dir);

// The `report` subcommand: regenerate batches.csv and summary.csv from a saved ledger.
void emit_from_saved_ledger(const std::filesystem::path& ledger_path,
                            const std::filesystem::path& out_dir);

struct SweepRow {
    double ratio = 0.0;
    double avg_cost_per_sample = 0.0;
    double annotated_under_budget = 0.0;  // mean over repetitions
};

struct SweepResult {
    std::vector<SweepRow> rows;
};

// One experiment per (ratio, repetition) with c0 pinned to 1 price unit and both
// c1 values set to the ratio. Points run concurrently up to `jobs` threads, each
// writing its own subdirectory of out_dir (when given); sweep.csv is aggregated
// afterwards. The budget column uses config.budget when present, otherwise half
// the manual-equivalent cost of the question set.
SweepResult run_sweep(const RunConfig& base, const SweepSpec& spec,
                      const std::vector<Question>& questions, int jobs,
                      const std::optional<std::filesystem::path>& out_dir);

void write_sweep_csv(const std::filesystem::path& path, const SweepResult& sweep);

}  // namespace qanno
