#pragma once

// Artifact formats.
//
//   bundle      JSON, schema "synthdata/1"
//   model       JSON, schema "model/1": {schema, config, params: {name: [shape, flat]}}
//   trace       CSV  step,l_md,l_mkr,l_ukr,total,seconds
//   results     CSV  method,variant,d_test,d_f,mean_recall,mi_ratio,probe_orig,
//                    probe_unlearned,seconds,config_hash,seed
//
// JSON is written with sorted keys and shortest round-trip doubles, so
// save -> load -> save is byte-identical. Readers throw ParseError (with the
// byte offset) on malformed JSON and SchemaError on a wrong schema tag.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "mmu/baselines.hpp"
#include "mmu/eval.hpp"
#include "mmu/model.hpp"
#include "mmu/synthdata.hpp"
#include "mmu/unlearn.hpp"

namespace mmu {

using Json = nlohmann::json;

inline constexpr std::string_view kBundleSchema = "synthdata/1";
inline constexpr std::string_view kModelSchema = "model/1";

// Config <-> JSON. Readers take the field path used in error messages,
// accept missing fields (defaults), reject unknown ones and run validate().
Json to_json(const SynthConfig& c);
Json to_json(const ModelConfig& c);
Json to_json(const TrainConfig& c);
Json to_json(const UnlearnConfig& c);
Json to_json(const BaselineConfig& c);
SynthConfig synth_config_from(const Json& j, const std::string& path = "synth");
ModelConfig model_config_from(const Json& j, const std::string& path = "model");
TrainConfig train_config_from(const Json& j, const std::string& path = "train");
UnlearnConfig unlearn_config_from(const Json& j, const std::string& path = "unlearn");
BaselineConfig baseline_config_from(const Json& j, const std::string& path = "baseline");

// Parses text, mapping syntax errors to ParseError with a byte offset.
Json parse_json(std::string_view text);
Json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);
std::string read_text_file(const std::filesystem::path& path);

Json bundle_to_json(const DatasetBundle& bundle);
DatasetBundle bundle_from_json(const Json& j);
std::string serialize_bundle(const DatasetBundle& bundle);
DatasetBundle deserialize_bundle(std::string_view text);
void save_bundle(const std::filesystem::path& path, const DatasetBundle& bundle);
DatasetBundle load_bundle(const std::filesystem::path& path);

Json model_to_json(const MultimodalModel& model);
MultimodalModel model_from_json(const Json& j);
std::string serialize_model(const MultimodalModel& model);
MultimodalModel deserialize_model(std::string_view text);
void save_model(const std::filesystem::path& path, const MultimodalModel& model);
MultimodalModel load_model(const std::filesystem::path& path);

std::string trace_to_csv(const UnlearnTrace& trace);
std::vector<TraceRow> trace_from_csv(std::string_view text);
void save_trace(const std::filesystem::path& path, const UnlearnTrace& trace);

extern const std::vector<std::string> kResultsColumns;
std::string results_header();
std::string results_row(const MetricsReport& r);
std::string results_to_csv(const std::vector<MetricsReport>& rows);
// Throws SchemaError naming the offending row (1-based, header excluded).
std::vector<MetricsReport> results_from_csv(std::string_view text);

Json report_to_json(const MetricsReport& r);
MetricsReport report_from_json(const Json& j);

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);
// Hash of the canonical JSON text.
std::string config_hash(const Json& j);
std::string bundle_hash(const DatasetBundle& bundle);

}  // namespace mmu
