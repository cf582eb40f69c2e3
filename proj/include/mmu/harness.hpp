#pragma once

// Experiment orchestration: config file -> bundles, original model, every
// (method, deletion size, seed) cell, results CSV and a run manifest.
// Artifacts are cached under MMUNLEARN_CACHE_DIR (default
// <output_dir>/cache), keyed by a hash of exactly the inputs that produce
// them.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "mmu/baselines.hpp"
#include "mmu/eval.hpp"
#include "mmu/io.hpp"
#include "mmu/model.hpp"
#include "mmu/synthdata.hpp"
#include "mmu/unlearn.hpp"

namespace mmu {

inline constexpr int kExperimentSchemaVersion = 1;
inline constexpr const char* kToolVersion = "0.1.0";

struct ExperimentConfig {
  int schema_version = kExperimentSchemaVersion;
  SynthConfig synth;
  ModelConfig model;
  TrainConfig train;
  UnlearnConfig unlearn;
  bool multidelete = true;        // MultiDelete with `unlearn`
  bool multidelete_fusion = false; // also its fusion-only variant
  bool ablation = false;          // also the four ablation variants
  std::vector<BaselineConfig> baselines;
  std::vector<std::size_t> deletion_sizes{200};
  // Each run seed replaces the seed fields of synth, train, unlearn and
  // every baseline.
  std::vector<std::uint64_t> seeds{0};
  // timing_sweep: |D_f| values, and MultiDelete run for sweep_epochs passes
  // over D_f with batches of sweep_batch_f.
  std::vector<std::size_t> sweep_sizes{50, 100, 150, 200, 250};
  int sweep_epochs = 30;
  int sweep_batch_f = 25;
  std::string output_dir = "out";

  void validate() const;  // throws ConfigError with the field path
  ExperimentConfig for_seed(std::uint64_t seed) const;
};

Json to_json(const ExperimentConfig& c);
ExperimentConfig experiment_config_from(const Json& j);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

// One method column of the results table.
struct MethodSpec {
  std::string method;   // multidelete | retrain | finetune | neggrad | dtd
  std::string variant;  // std | F | full | -MD | -UKR | -MKR
  std::variant<UnlearnConfig, BaselineConfig> config;
};
std::vector<MethodSpec> method_specs(const ExperimentConfig& c);

struct CellResult {
  MetricsReport metrics;
  std::filesystem::path model_path;
  std::filesystem::path trace_path;
  bool cached = false;
};

// Cached access to the artifacts of one experiment config.
class Experiment {
 public:
  explicit Experiment(ExperimentConfig config, std::optional<std::filesystem::path> cache_root = std::nullopt);

  const ExperimentConfig& config() const { return config_; }
  const std::string& config_hash() const { return hash_; }
  const std::filesystem::path& cache_root() const { return cache_root_; }

  // Bundle for `seed` with a deletion set of `deletion_size` (0 = none).
  DatasetBundle bundle(std::uint64_t seed, std::size_t deletion_size, bool* cached = nullptr);
  std::filesystem::path bundle_path(std::uint64_t seed, std::size_t deletion_size) const;
  MultimodalModel original(std::uint64_t seed, bool* cached = nullptr);
  std::filesystem::path original_path(std::uint64_t seed) const;

  // Runs (or loads) one unlearning cell and evaluates it.
  CellResult run_cell(const MethodSpec& spec, std::uint64_t seed, std::size_t deletion_size);

  // Runs a method without caching; returns (f', trace).
  UnlearnResult unlearn(const MethodSpec& spec, const MultimodalModel& f, const DatasetBundle& bundle,
                        std::uint64_t seed) const;

 private:
  Json bundle_key(std::uint64_t seed, std::size_t deletion_size) const;
  Json original_key(std::uint64_t seed) const;

  ExperimentConfig config_;
  std::string hash_;
  std::filesystem::path cache_root_;
};

std::filesystem::path default_cache_root(const ExperimentConfig& c);

struct CellRecord {
  std::string method;
  std::string variant;
  std::size_t deletion_size = 0;
  std::uint64_t seed = 0;
  std::string status;  // ok | cached | failed
  std::string model_path;
  std::string trace_path;
  std::string error;
};

struct RunManifest {
  std::string config_hash;
  std::string tool_version = kToolVersion;
  std::string started_at;
  std::string finished_at;
  std::string status;  // ok | partial | failed
  std::string error;
  std::vector<std::string> bundles;
  std::vector<std::string> originals;
  std::vector<CellRecord> cells;
  std::string results_csv;
  std::string manifest_path;
};
Json to_json(const RunManifest& m);

struct RunOptions {
  std::optional<std::uint64_t> seed;            // replaces config.seeds
  std::optional<std::filesystem::path> out_dir;  // replaces config.output_dir
  std::optional<std::filesystem::path> cache_root;
};

// Throws ConfigError/ParseError/SchemaError for a bad config (no manifest
// can be written without an output dir). Later failures are recorded in
// the manifest, which is always written.
RunManifest run_experiment(const std::filesystem::path& config_path, const RunOptions& options = {});
RunManifest run_experiment(ExperimentConfig config, const RunOptions& options = {});

// ---- timing sweep --------------------------------------------------------------

struct TimingRow {
  std::string method;
  std::size_t size = 0;
  double seconds = 0.0;
};

// MultiDelete (epoch mode, see ExperimentConfig) and Retrain at every size
// with the first configured seed. Sizes must be strictly increasing.
std::vector<TimingRow> timing_sweep(Experiment& experiment, const std::vector<std::size_t>& sizes);
std::string timing_to_csv(const std::vector<TimingRow>& rows);
std::vector<TimingRow> timing_from_csv(std::string_view text);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};
LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

// ---- report ----------------------------------------------------------------------

struct ReportFiles {
  std::vector<std::filesystem::path> written;
  std::string methods_table;  // plain text
  std::string ablation_table;
};

// Reads the results CSV (SchemaError names the bad row) and writes per-method
// and ablation tables (text + CSV) and a bar chart into out_dir. With a
// timing CSV it also writes the timing line plot and its data.
ReportFiles report(const std::filesystem::path& results_csv, const std::filesystem::path& out_dir,
                   const std::optional<std::filesystem::path>& timing_csv = std::nullopt);

}  // namespace mmu
