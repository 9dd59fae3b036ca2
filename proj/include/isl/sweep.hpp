#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "isl/corpus.hpp"
#include "isl/eval.hpp"
#include "isl/signal.hpp"
#include "isl/synth.hpp"
#include "isl/trainer.hpp"

namespace isl {

inline constexpr std::string_view kCodeVersion = "isl-0.1.0";

/// An experimental condition. Components compose in a fixed order on the
/// baseline split: dilution removal, then upsampling; DRO swaps the objective.
struct Setting {
  std::string name;
  bool no_dilution = false;
  std::optional<std::size_t> fixed_ratio;
  bool adaptive = false;
  bool dro = false;
};

/// "baseline", "no-dilution", "upsample-fixed[:R]" (R defaults to 32),
/// "upsample-adaptive", "dro", or a '+'-joined combination.
Setting parse_setting(const std::string& text);

struct TriggerSource {
  enum class Kind { bundled, synth, inline_sets, mined } kind = Kind::bundled;
  std::vector<TriggerSet> sets;  // inline_sets
  std::size_t mine_min_count = 2;
  std::size_t mine_top_k = 3;
};

struct Manifest {
  // Corpus: a JSONL file or a synthetic spec.
  std::optional<std::filesystem::path> corpus_path;
  TaskKind task_kind = TaskKind::single_label;
  std::optional<SynthSpec> synth;
  std::map<std::string, std::size_t> synth_counts;

  double dev_fraction = 0.1;
  double test_fraction = 0.2;
  std::uint64_t carve_seed = 0;

  std::vector<std::string> symbols;
  std::size_t k = 30;
  std::vector<std::optional<std::size_t>> n_grid;  // nullopt = max setting
  std::vector<Setting> settings;
  std::vector<std::uint64_t> seeds{0, 1, 2};
  TriggerSource triggers;
  TrainConfig trainer;
  FeatureConfig features;
  BootstrapConfig bootstrap;

  std::filesystem::path output_dir = "sweep-out";
  int workers = 1;
  bool save_artifacts = true;
};

/// Relative paths in the manifest resolve against base_dir.
Manifest manifest_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
Manifest load_manifest(const std::filesystem::path& path);
nlohmann::ordered_json to_json(const Manifest& manifest);

struct ResultRow {
  std::string symbol;
  std::size_t n = 0;  // nominal N (sweep axis)
  std::string setting;
  std::string seed;   // seed value, or "mean" for summary rows
  double overall_acc = 0.0;
  std::optional<double> new_symbol_acc;
  std::optional<double> competing_acc;
  std::optional<double> strength;
  std::optional<double> coverage;
  double imbalance = 0.0;
  std::size_t n_train = 0;  // training entries after interventions
  std::size_t n_test_new = 0;
  std::size_t n_test_competing = 0;
  std::optional<double> new_ci_low;
  std::optional<double> new_ci_high;
  double wall_time_s = 0.0;

  bool operator==(const ResultRow&) const = default;
};

struct CellFailure {
  std::string symbol;
  std::size_t n = 0;
  std::string setting;
  std::uint64_t seed = 0;
  std::string reason;
};

struct SweepResult {
  std::vector<ResultRow> rows;     // one per completed cell, deterministic order
  std::vector<ResultRow> summary;  // seed means per (symbol, N, setting)
  std::vector<CellFailure> failures;
  std::size_t cells_computed = 0;  // excludes cells restored from disk
  std::size_t cells_resumed = 0;
};

/// Builds the corpus described by the manifest.
Corpus materialize_corpus(const Manifest& manifest);

/// Runs every (symbol, N, setting, seed) cell and writes results.csv,
/// summary.csv and per-cell artifacts under the output directory. Cells
/// whose row.json already exists are restored instead of recomputed.
SweepResult run_sweep(const Manifest& manifest);

/// Seed means per (symbol, N, setting); an optional field is averaged only
/// when every seed row has it.
std::vector<ResultRow> summarize(const std::vector<ResultRow>& rows);

std::string rows_csv_header();
std::string write_rows_csv(const std::vector<ResultRow>& rows);
std::vector<ResultRow> read_rows_csv(const std::string& text);
nlohmann::ordered_json to_json(const ResultRow& row);
ResultRow row_from_json(const nlohmann::json& j);

/// Renders the figure-shaped tables: "accuracy", "strength" or "competing".
std::string report_csv(const std::vector<ResultRow>& rows, const std::string& kind);
const std::vector<std::string>& report_kinds();
/// Writes <out_dir>/<kind>.csv and returns the path.
std::filesystem::path report(const std::vector<ResultRow>& rows, const std::string& kind,
                             const std::filesystem::path& out_dir);

/// Reads a CSV into rows of fields (RFC 4180 quoting).
std::vector<std::vector<std::string>> parse_csv(const std::string& text);
std::string format_double(double value);

}  // namespace isl
