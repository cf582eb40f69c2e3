#include "mmu/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <map>
#include <set>

#include <spdlog/spdlog.h>

#include "config_fields.hpp"
#include "mmu/errors.hpp"
#include "mmu/plot.hpp"

namespace fs = std::filesystem;

namespace mmu {
namespace {

using detail::Fields;

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

Json spec_config_json(const MethodSpec& spec) {
  return std::visit([](const auto& c) { return to_json(c); }, spec.config);
}

// A cached artifact is valid only if its stored key equals the requested one.
bool key_matches(const fs::path& key_path, const Json& key) {
  if (!fs::exists(key_path)) return false;
  try {
    return read_json_file(key_path) == key;
  } catch (const Error&) {
    return false;
  }
}

std::string fmt(double v, const char* spec = "%.2f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::string pad(const std::string& s, std::size_t w) { return s.size() >= w ? s : s + std::string(w - s.size(), ' '); }

int method_rank(const std::string& m) {
  static const std::vector<std::string> order = {"multidelete", "retrain", "finetune", "neggrad", "dtd"};
  const auto it = std::find(order.begin(), order.end(), m);
  return it == order.end() ? static_cast<int>(order.size()) : static_cast<int>(it - order.begin());
}

}  // namespace

// ---- config ------------------------------------------------------------------------

void ExperimentConfig::validate() const {
  if (schema_version != kExperimentSchemaVersion)
    throw ConfigError("schema_version: unsupported value " + std::to_string(schema_version) + " (expected " +
                      std::to_string(kExperimentSchemaVersion) + ")");
  auto sub = [](const char* path, auto&& fn) {
    try {
      fn();
    } catch (const ConfigError& e) {
      const std::string what = e.what();
      if (what.rfind(std::string(path) + ".", 0) == 0) throw;
      throw ConfigError(std::string(path) + ": " + what);
    }
  };
  sub("synth", [&] { synth.validate(); });
  sub("model", [&] { model.validate(); });
  sub("unlearn", [&] { unlearn.validate(); });
  for (std::size_t i = 0; i < baselines.size(); ++i)
    sub(("baselines[" + std::to_string(i) + "]").c_str(), [&] { baselines[i].validate(); });
  if (!(train.lr > 0.0) || train.epochs < 0 || train.batch_size < 1)
    throw ConfigError("train: needs lr > 0, epochs >= 0, batch_size >= 1");
  if (model.dim_a != synth.dim_a) throw ConfigError("model.dim_a: must equal synth.dim_a");
  if (model.dim_b != synth.dim_b) throw ConfigError("model.dim_b: must equal synth.dim_b");
  const std::size_t n_train = train_pair_count(synth);
  for (std::size_t i = 0; i < deletion_sizes.size(); ++i)
    if (deletion_sizes[i] == 0 || deletion_sizes[i] >= n_train)
      throw ConfigError("deletion_sizes[" + std::to_string(i) + "]: must lie in (0, " + std::to_string(n_train) +
                        ")");
  if (seeds.empty()) throw ConfigError("seeds: must not be empty");
  for (std::size_t i = 0; i < sweep_sizes.size(); ++i) {
    if (sweep_sizes[i] == 0 || sweep_sizes[i] >= n_train)
      throw ConfigError("sweep_sizes[" + std::to_string(i) + "]: must lie in (0, " + std::to_string(n_train) + ")");
    if (i > 0 && sweep_sizes[i] <= sweep_sizes[i - 1])
      throw ConfigError("sweep_sizes[" + std::to_string(i) + "]: sizes must be strictly increasing");
  }
  if (sweep_epochs < 1) throw ConfigError("sweep_epochs: must be >= 1");
  if (sweep_batch_f < 1) throw ConfigError("sweep_batch_f: must be >= 1");
  if (output_dir.empty()) throw ConfigError("output_dir: must not be empty");
}

ExperimentConfig ExperimentConfig::for_seed(std::uint64_t seed) const {
  ExperimentConfig c = *this;
  c.synth.seed = seed;
  c.train.seed = seed;
  c.unlearn.seed = seed;
  for (auto& b : c.baselines) b.seed = seed;
  c.seeds = {seed};
  return c;
}

Json to_json(const ExperimentConfig& c) {
  Json baselines = Json::array();
  for (const auto& b : c.baselines) baselines.push_back(to_json(b));
  return Json{{"schema_version", c.schema_version},
              {"synth", to_json(c.synth)},
              {"model", to_json(c.model)},
              {"train", to_json(c.train)},
              {"unlearn", to_json(c.unlearn)},
              {"multidelete", c.multidelete},
              {"multidelete_fusion", c.multidelete_fusion},
              {"ablation", c.ablation},
              {"baselines", baselines},
              {"deletion_sizes", c.deletion_sizes},
              {"seeds", c.seeds},
              {"sweep_sizes", c.sweep_sizes},
              {"sweep_epochs", c.sweep_epochs},
              {"sweep_batch_f", c.sweep_batch_f},
              {"output_dir", c.output_dir}};
}

ExperimentConfig experiment_config_from(const Json& j) {
  ExperimentConfig c;
  Fields f(j, "config");
  if (!j.contains("schema_version")) throw ConfigError("schema_version: missing");
  f.get("schema_version", c.schema_version);
  if (c.schema_version != kExperimentSchemaVersion)
    throw ConfigError("schema_version: unsupported value " + std::to_string(c.schema_version));
  Json synth = Json::object(), model = Json::object(), train = Json::object(), unlearn = Json::object();
  Json baselines = Json::array();
  f.get("synth", synth);
  f.get("model", model);
  f.get("train", train);
  f.get("unlearn", unlearn);
  f.get("baselines", baselines);
  f.get("multidelete", c.multidelete);
  f.get("multidelete_fusion", c.multidelete_fusion);
  f.get("ablation", c.ablation);
  f.get("deletion_sizes", c.deletion_sizes);
  f.get("seeds", c.seeds);
  f.get("sweep_sizes", c.sweep_sizes);
  f.get("sweep_epochs", c.sweep_epochs);
  f.get("sweep_batch_f", c.sweep_batch_f);
  f.get("output_dir", c.output_dir);
  f.finish();
  c.synth = synth_config_from(synth, "synth");
  c.model = model_config_from(model, "model");
  c.train = train_config_from(train, "train");
  c.unlearn = unlearn_config_from(unlearn, "unlearn");
  if (!baselines.is_array()) throw ConfigError("baselines: expected an array");
  for (std::size_t i = 0; i < baselines.size(); ++i)
    c.baselines.push_back(baseline_config_from(baselines[i], "baselines[" + std::to_string(i) + "]"));
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const fs::path& path) { return experiment_config_from(read_json_file(path)); }

std::vector<MethodSpec> method_specs(const ExperimentConfig& c) {
  std::vector<MethodSpec> specs;
  if (c.multidelete) specs.push_back({"multidelete", "std", c.unlearn});
  if (c.multidelete_fusion) {
    UnlearnConfig u = c.unlearn;
    u.fusion_only = true;
    specs.push_back({"multidelete", "F", u});
  }
  for (const auto& b : c.baselines) specs.push_back({to_string(b.method), b.fusion_only ? "F" : "std", b});
  if (c.ablation) {
    struct V {
      const char* name;
      double alpha, beta, gamma;
    };
    const UnlearnConfig& u = c.unlearn;
    for (const V& v : {V{"full", u.alpha, u.beta, u.gamma}, V{"-MD", 0.0, u.beta, u.gamma},
                       V{"-UKR", u.alpha, u.beta, 0.0}, V{"-MKR", u.alpha, 0.0, u.gamma}}) {
      UnlearnConfig a = u;
      a.alpha = v.alpha;
      a.beta = v.beta;
      a.gamma = v.gamma;
      specs.push_back({"multidelete", v.name, a});
    }
  }
  return specs;
}

// ---- cached artifacts ----------------------------------------------------------------

fs::path default_cache_root(const ExperimentConfig& c) {
  if (const char* env = std::getenv("MMUNLEARN_CACHE_DIR"); env && *env) return fs::path(env);
  return fs::path(c.output_dir) / "cache";
}

namespace {

// Where results are written does not change them, so output_dir is not hashed.
std::string experiment_hash(const ExperimentConfig& c) {
  Json j = to_json(c);
  j.erase("output_dir");
  return mmu::config_hash(j);
}

}  // namespace

Experiment::Experiment(ExperimentConfig config, std::optional<fs::path> cache_root)
    : config_(std::move(config)),
      hash_(experiment_hash(config_)),
      cache_root_(cache_root ? *cache_root : default_cache_root(config_)) {
  config_.validate();
}

Json Experiment::bundle_key(std::uint64_t seed, std::size_t deletion_size) const {
  return Json{{"synth", to_json(config_.for_seed(seed).synth)}, {"deletion_size", deletion_size}, {"seed", seed}};
}

Json Experiment::original_key(std::uint64_t seed) const {
  const auto c = config_.for_seed(seed);
  return Json{{"synth", to_json(c.synth)}, {"model", to_json(c.model)}, {"train", to_json(c.train)}};
}

fs::path Experiment::bundle_path(std::uint64_t seed, std::size_t deletion_size) const {
  return cache_root_ / "bundles" / (mmu::config_hash(bundle_key(seed, deletion_size)) + ".json");
}

fs::path Experiment::original_path(std::uint64_t seed) const {
  return cache_root_ / "models" / ("f-" + mmu::config_hash(original_key(seed)) + ".json");
}

DatasetBundle Experiment::bundle(std::uint64_t seed, std::size_t deletion_size, bool* cached) {
  const auto path = bundle_path(seed, deletion_size);
  auto key_path = path;
  key_path += ".key";
  const Json key = bundle_key(seed, deletion_size);
  if (fs::exists(path) && key_matches(key_path, key)) {
    if (cached) *cached = true;
    return load_bundle(path);
  }
  if (cached) *cached = false;
  DatasetBundle b = generate_dataset(config_.for_seed(seed).synth);
  if (deletion_size > 0) sample_deletion_set(b, deletion_size, seed);
  save_bundle(path, b);
  write_text_file(key_path, key.dump() + "\n");
  return b;
}

MultimodalModel Experiment::original(std::uint64_t seed, bool* cached) {
  const auto path = original_path(seed);
  auto key_path = path;
  key_path += ".key";
  const Json key = original_key(seed);
  if (fs::exists(path) && key_matches(key_path, key)) {
    if (cached) *cached = true;
    return load_model(path);
  }
  if (cached) *cached = false;
  const auto c = config_.for_seed(seed);
  const DatasetBundle b = bundle(seed, 0);
  MultimodalModel f = train_original(b, c.model, c.train).model;
  save_model(path, f);
  write_text_file(key_path, key.dump() + "\n");
  return f;
}

UnlearnResult Experiment::unlearn(const MethodSpec& spec, const MultimodalModel& f, const DatasetBundle& bundle,
                                  std::uint64_t seed) const {
  const auto c = config_.for_seed(seed);
  if (const auto* u = std::get_if<UnlearnConfig>(&spec.config)) {
    UnlearnConfig cfg = *u;
    cfg.seed = seed;
    return multidelete_unlearn(f, bundle, cfg);
  }
  BaselineConfig cfg = std::get<BaselineConfig>(spec.config);
  cfg.seed = seed;
  return run_baseline(f, bundle, cfg, c.train);
}

CellResult Experiment::run_cell(const MethodSpec& spec, std::uint64_t seed, std::size_t deletion_size) {
  const Json key{{"original", original_key(seed)},
                 {"deletion_size", deletion_size},
                 {"method", spec.method},
                 {"variant", spec.variant},
                 {"config", spec_config_json(spec)},
                 {"seed", seed}};
  const fs::path dir = cache_root_ / "cells" / mmu::config_hash(key);
  CellResult out;
  out.model_path = dir / "model.json";
  out.trace_path = dir / "trace.csv";
  const fs::path metrics_path = dir / "metrics.json";
  if (fs::exists(metrics_path) && fs::exists(out.model_path) && fs::exists(out.trace_path)) {
    try {
      const Json stored = read_json_file(metrics_path);
      if (stored.at("key") == key) {
        out.metrics = report_from_json(stored.at("metrics"));
        out.metrics.config_hash = hash_;
        out.cached = true;
        return out;
      }
    } catch (const std::exception& e) {
      spdlog::warn("ignoring unreadable cache entry {}: {}", metrics_path.string(), e.what());
    }
  }

  const DatasetBundle b = bundle(seed, deletion_size);
  const MultimodalModel f = original(seed);
  const UnlearnResult r = unlearn(spec, f, b, seed);
  out.metrics = evaluate_model(f, r.model, b, seed);
  out.metrics.method = spec.method;
  out.metrics.variant = spec.variant;
  out.metrics.seconds = r.trace.wall_seconds;
  out.metrics.config_hash = hash_;
  save_model(out.model_path, r.model);
  save_trace(out.trace_path, r.trace);
  write_text_file(metrics_path, Json{{"key", key}, {"metrics", report_to_json(out.metrics)}}.dump(2) + "\n");
  return out;
}

// ---- run ---------------------------------------------------------------------------------

Json to_json(const RunManifest& m) {
  Json cells = Json::array();
  for (const auto& c : m.cells)
    cells.push_back({{"method", c.method},
                     {"variant", c.variant},
                     {"deletion_size", c.deletion_size},
                     {"seed", c.seed},
                     {"status", c.status},
                     {"model", c.model_path},
                     {"trace", c.trace_path},
                     {"error", c.error}});
  return Json{{"config_hash", m.config_hash}, {"tool_version", m.tool_version}, {"started_at", m.started_at},
              {"finished_at", m.finished_at}, {"status", m.status},              {"error", m.error},
              {"bundles", m.bundles},         {"originals", m.originals},        {"cells", cells},
              {"results_csv", m.results_csv}};
}

namespace {

void write_manifest(RunManifest& m, const fs::path& out_dir) {
  m.finished_at = utc_now();
  m.manifest_path = (out_dir / "manifest.json").string();
  try {
    write_text_file(m.manifest_path, to_json(m).dump(2) + "\n");
  } catch (const std::exception& e) {
    spdlog::error("could not write manifest {}: {}", m.manifest_path, e.what());
  }
}

}  // namespace

RunManifest run_experiment(ExperimentConfig config, const RunOptions& options) {
  if (options.seed) config.seeds = {*options.seed};
  if (options.out_dir) config.output_dir = options.out_dir->string();
  config.validate();

  RunManifest m;
  m.started_at = utc_now();
  const fs::path out_dir(config.output_dir);
  try {
    Experiment exp(config, options.cache_root);
    m.config_hash = exp.config_hash();
    const auto specs = method_specs(config);
    std::vector<MetricsReport> rows;
    std::set<std::string> seen_bundles, seen_originals;
    for (std::uint64_t seed : config.seeds) {
      exp.original(seed);
      if (seen_originals.insert(exp.original_path(seed).string()).second)
        m.originals.push_back(exp.original_path(seed).string());
      for (std::size_t size : config.deletion_sizes) {
        exp.bundle(seed, size);
        if (seen_bundles.insert(exp.bundle_path(seed, size).string()).second)
          m.bundles.push_back(exp.bundle_path(seed, size).string());
        for (const auto& spec : specs) {
          CellRecord rec{spec.method, spec.variant, size, seed, "", "", "", ""};
          try {
            const CellResult r = exp.run_cell(spec, seed, size);
            rec.status = r.cached ? "cached" : "ok";
            rec.model_path = r.model_path.string();
            rec.trace_path = r.trace_path.string();
            rows.push_back(r.metrics);
          } catch (const std::exception& e) {
            rec.status = "failed";
            rec.error = e.what();
            spdlog::error("{}/{} size {} seed {} failed: {}", spec.method, spec.variant, size, seed, e.what());
          }
          m.cells.push_back(std::move(rec));
        }
      }
    }
    m.results_csv = (out_dir / "results.csv").string();
    write_text_file(m.results_csv, results_to_csv(rows));
    const bool any_failed =
        std::any_of(m.cells.begin(), m.cells.end(), [](const CellRecord& c) { return c.status == "failed"; });
    m.status = any_failed ? "partial" : "ok";
  } catch (const std::exception& e) {
    m.status = "failed";
    m.error = e.what();
    spdlog::error("run failed: {}", e.what());
  }
  write_manifest(m, out_dir);
  return m;
}

RunManifest run_experiment(const fs::path& config_path, const RunOptions& options) {
  return run_experiment(load_experiment_config(config_path), options);
}

// ---- timing sweep ------------------------------------------------------------------

std::vector<TimingRow> timing_sweep(Experiment& experiment, const std::vector<std::size_t>& sizes) {
  if (sizes.empty()) throw ConfigError("timing_sweep: no sizes");
  for (std::size_t i = 1; i < sizes.size(); ++i)
    if (sizes[i] <= sizes[i - 1]) throw ConfigError("timing_sweep: sizes must be strictly increasing");
  const auto& cfg = experiment.config();
  const std::uint64_t seed = cfg.seeds.front();
  const MultimodalModel f = experiment.original(seed);

  UnlearnConfig u = cfg.for_seed(seed).unlearn;
  u.epochs = cfg.sweep_epochs;
  u.batch_f = cfg.sweep_batch_f;
  BaselineConfig r;
  r.method = BaselineMethod::retrain;
  r.seed = seed;

  // Each time is the minimum over kRepeats identical runs.
  constexpr int kRepeats = 3;
  std::vector<TimingRow> rows;
  for (std::size_t size : sizes) {
    const DatasetBundle b = experiment.bundle(seed, size);
    double md = INFINITY, rt = INFINITY;
    for (int rep = 0; rep < kRepeats; ++rep) {
      md = std::min(md, multidelete_unlearn(f, b, u).trace.wall_seconds);
      rt = std::min(rt, run_baseline(f, b, r, cfg.for_seed(seed).train).trace.wall_seconds);
    }
    rows.push_back({"multidelete", size, md});
    rows.push_back({"retrain", size, rt});
    spdlog::info("sweep |D_f|={} multidelete {:.3f}s retrain {:.3f}s", size, md, rt);
  }
  return rows;
}

std::string timing_to_csv(const std::vector<TimingRow>& rows) {
  std::string out = "method,size,seconds\n";
  for (const auto& r : rows) out += r.method + "," + std::to_string(r.size) + "," + fmt(r.seconds, "%.6f") + "\n";
  return out;
}

std::vector<TimingRow> timing_from_csv(std::string_view text) {
  std::vector<TimingRow> rows;
  std::size_t line_no = 0, start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string line(text.substr(start, end - start));
    start = end + 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no++ == 0) {
      if (line != "method,size,seconds") throw SchemaError("timing csv: unexpected header");
      continue;
    }
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = c1 == std::string::npos ? c1 : line.find(',', c1 + 1);
    if (c2 == std::string::npos) throw SchemaError("timing csv row " + std::to_string(line_no - 1) + ": 3 fields");
    TimingRow r;
    r.method = line.substr(0, c1);
    try {
      r.size = std::stoul(line.substr(c1 + 1, c2 - c1 - 1));
      r.seconds = std::stod(line.substr(c2 + 1));
    } catch (const std::exception&) {
      throw SchemaError("timing csv row " + std::to_string(line_no - 1) + ": bad number");
    }
    rows.push_back(r);
  }
  return rows;
}

LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw InvalidInput("fit_line: need >= 2 matching points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0) throw InvalidInput("fit_line: x values are all equal");
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - (fit.intercept + fit.slope * x[i]);
    ss_res += e * e;
  }
  fit.r2 = syy == 0.0 ? (ss_res == 0.0 ? 1.0 : 0.0) : 1.0 - ss_res / syy;
  return fit;
}

// ---- report ----------------------------------------------------------------------------

ReportFiles report(const fs::path& results_csv, const fs::path& out_dir,
                   const std::optional<fs::path>& timing_csv) {
  const auto rows = results_from_csv(read_text_file(results_csv));
  if (rows.empty()) spdlog::warn("report: {} has no result rows", results_csv.string());

  // Mean over seeds and deletion sizes per (method, variant).
  struct Agg {
    std::string method, variant;
    double d_test = 0, d_f = 0, mean_recall = 0, mi_ratio = 0, probe_orig = 0, probe_unlearned = 0, seconds = 0;
    int n = 0;
  };
  std::vector<Agg> groups;
  for (const auto& r : rows) {
    auto it = std::find_if(groups.begin(), groups.end(),
                           [&](const Agg& g) { return g.method == r.method && g.variant == r.variant; });
    if (it == groups.end()) {
      groups.push_back({r.method, r.variant});
      it = groups.end() - 1;
    }
    it->d_test += r.d_test;
    it->d_f += r.d_f;
    it->mean_recall += r.mean_recall;
    it->mi_ratio += r.mi_ratio;
    it->probe_orig += r.probe_orig;
    it->probe_unlearned += r.probe_unlearned;
    it->seconds += r.seconds;
    ++it->n;
  }
  for (auto& g : groups)
    for (double* v : {&g.d_test, &g.d_f, &g.mean_recall, &g.mi_ratio, &g.probe_orig, &g.probe_unlearned, &g.seconds})
      *v /= g.n;
  std::stable_sort(groups.begin(), groups.end(),
                   [](const Agg& a, const Agg& b) { return method_rank(a.method) < method_rank(b.method); });

  static const std::vector<std::string> ablation_order = {"full", "-MD", "-UKR", "-MKR"};
  auto is_ablation = [&](const Agg& g) {
    return g.method == "multidelete" &&
           std::find(ablation_order.begin(), ablation_order.end(), g.variant) != ablation_order.end();
  };

  ReportFiles files;
  std::string methods_csv = "method,variant,d_test,d_f,mean_recall,mi_ratio,probe_orig,probe_unlearned,seconds,n\n";
  std::string& txt = files.methods_table;
  txt = pad("method", 14) + pad("variant", 9) + pad("D_Test", 9) + pad("D_f", 9) + pad("MR", 9) + pad("MI", 9) +
        pad("probe_f", 9) + pad("probe_f'", 10) + pad("seconds", 10) + "n\n";
  std::vector<std::string> cats;
  std::vector<std::vector<double>> bars;
  for (const auto& g : groups) {
    if (is_ablation(g)) continue;
    methods_csv += g.method + "," + g.variant + "," + fmt(g.d_test, "%.4f") + "," + fmt(g.d_f, "%.4f") + "," +
                   fmt(g.mean_recall, "%.4f") + "," + fmt(g.mi_ratio, "%.4f") + "," + fmt(g.probe_orig, "%.4f") +
                   "," + fmt(g.probe_unlearned, "%.4f") + "," + fmt(g.seconds, "%.4f") + "," + std::to_string(g.n) +
                   "\n";
    txt += pad(g.method, 14) + pad(g.variant, 9) + pad(fmt(g.d_test), 9) + pad(fmt(g.d_f), 9) +
           pad(fmt(g.mean_recall), 9) + pad(fmt(g.mi_ratio, "%.3f"), 9) + pad(fmt(g.probe_orig), 9) +
           pad(fmt(g.probe_unlearned), 10) + pad(fmt(g.seconds, "%.3f"), 10) + std::to_string(g.n) + "\n";
    cats.push_back(g.variant == "std" ? g.method : g.method + "-" + g.variant);
    bars.push_back({g.d_test, g.d_f});
  }

  // Objective ablation: one row per variant, columns D_Test then D_f.
  std::string ablation_csv = "variant,d_test,d_f\n";
  std::string& atxt = files.ablation_table;
  atxt = pad("objective", 11) + pad("D_Test", 9) + "D_f\n";
  for (const auto& name : ablation_order)
    for (const auto& g : groups)
      if (is_ablation(g) && g.variant == name) {
        ablation_csv += g.variant + "," + fmt(g.d_test, "%.4f") + "," + fmt(g.d_f, "%.4f") + "\n";
        atxt += pad(g.variant, 11) + pad(fmt(g.d_test), 9) + fmt(g.d_f) + "\n";
      }

  auto emit = [&](const char* name, const std::string& text) {
    const fs::path p = out_dir / name;
    write_text_file(p, text);
    files.written.push_back(p);
  };
  emit("methods.txt", txt);
  emit("methods.csv", methods_csv);
  emit("ablation.txt", atxt);
  emit("ablation.csv", ablation_csv);
  emit("methods.svg", svg_bar_chart(cats, {"D_Test", "D_f"}, bars, "Matching accuracy by method", "accuracy (%)"));

  if (timing_csv) {
    auto timing = timing_from_csv(read_text_file(*timing_csv));
    std::map<std::string, Series> by_method;
    for (const auto& t : timing) {
      auto& s = by_method[t.method];
      s.name = t.method;
      s.points.emplace_back(static_cast<double>(t.size), t.seconds);
    }
    std::vector<Series> series;
    std::string data = "method,size,seconds\n";
    for (auto& [name, s] : by_method) {
      std::sort(s.points.begin(), s.points.end());
      for (const auto& [x, y] : s.points) data += name + "," + fmt(x, "%.0f") + "," + fmt(y, "%.6f") + "\n";
      series.push_back(s);
    }
    emit("timing_plot.csv", data);
    emit("timing.svg", svg_line_plot(series, "Unlearning time vs |D_f|", "|D_f|", "seconds"));
  }
  return files;
}

}  // namespace mmu
