#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "mmu/errors.hpp"
#include "mmu/harness.hpp"
#include "test_util.hpp"

using namespace mmu;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small_config(const fs::path& out) {
  ExperimentConfig c;
  c.synth = fixtures::small_synth(0);
  c.model = fixtures::small_model_config();
  c.train.epochs = 4;
  c.unlearn.steps = 20;
  c.unlearn.batch_f = 8;
  c.unlearn.batch_r = 16;
  c.unlearn.eval_every = 10;
  BaselineConfig ft;
  ft.method = BaselineMethod::finetune;
  ft.steps = 10;
  c.baselines = {ft};
  c.deletion_sizes = {20};
  c.seeds = {0};
  c.sweep_sizes = {20};
  c.sweep_epochs = 2;
  c.sweep_batch_f = 10;
  c.output_dir = out.string();
  return c;
}

RunOptions options(const fs::path& cache) {
  RunOptions o;
  o.cache_root = cache;
  return o;
}

// Drops the wall-time column.
std::string without_seconds(const std::string& csv) {
  std::istringstream in(csv);
  std::string line, out;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    for (std::size_t i = 0; i < cells.size(); ++i)
      if (i != 8) out += cells[i] + ",";
    out += "\n";
  }
  return out;
}

void write(const fs::path& p, const std::string& text) { write_text_file(p, text); }

}  // namespace

TEST(Harness, EmptyMethodListGivesBundleAndOriginalOnly) {
  const fs::path dir = fixtures::temp_dir("h_empty");
  ExperimentConfig c = small_config(dir / "out");
  c.multidelete = false;
  c.baselines.clear();
  const RunManifest m = run_experiment(c, options(dir / "cache"));
  EXPECT_EQ(m.status, "ok");
  EXPECT_TRUE(m.cells.empty());
  ASSERT_EQ(m.bundles.size(), 1u);
  ASSERT_EQ(m.originals.size(), 1u);
  EXPECT_TRUE(fs::exists(m.bundles[0]));
  EXPECT_TRUE(fs::exists(m.originals[0]));
  EXPECT_TRUE(fs::exists(dir / "out" / "manifest.json"));
  EXPECT_EQ(results_from_csv(read_text_file(m.results_csv)).size(), 0u);
}

TEST(Harness, CachedRerunIsIdenticalAndFreshRunMatches) {
  const fs::path dir = fixtures::temp_dir("h_cache");
  const ExperimentConfig c = small_config(dir / "out");
  const RunManifest first = run_experiment(c, options(dir / "cache"));
  ASSERT_EQ(first.status, "ok");
  ASSERT_EQ(first.cells.size(), 2u);
  for (const auto& cell : first.cells) {
    EXPECT_EQ(cell.status, "ok");
    EXPECT_TRUE(fs::exists(cell.model_path));
    EXPECT_TRUE(fs::exists(cell.trace_path));
  }
  const std::string csv1 = read_text_file(first.results_csv);
  const auto model_time = fs::last_write_time(first.originals[0]);

  const RunManifest second = run_experiment(c, options(dir / "cache"));
  for (const auto& cell : second.cells) EXPECT_EQ(cell.status, "cached");
  EXPECT_EQ(read_text_file(second.results_csv), csv1);
  EXPECT_EQ(fs::last_write_time(second.originals[0]), model_time);

  // A cold cache reproduces everything but wall time.
  const RunManifest cold = run_experiment(c, options(dir / "cache2"));
  EXPECT_EQ(without_seconds(read_text_file(cold.results_csv)), without_seconds(csv1));
}

TEST(Harness, ChangedConfigMissesCache) {
  const fs::path dir = fixtures::temp_dir("h_miss");
  ExperimentConfig c = small_config(dir / "out");
  c.baselines.clear();
  run_experiment(c, options(dir / "cache"));
  c.unlearn.lr = 0.02;
  const RunManifest m = run_experiment(c, options(dir / "cache"));
  ASSERT_EQ(m.cells.size(), 1u);
  EXPECT_EQ(m.cells[0].status, "ok");
}

TEST(Harness, FailedCellIsRecordedAndOthersContinue) {
  const fs::path dir = fixtures::temp_dir("h_fail");
  ExperimentConfig c = small_config(dir / "out");
  c.unlearn.lr = 1e300;  // diverges
  c.unlearn.steps = 5;
  const RunManifest m = run_experiment(c, options(dir / "cache"));
  EXPECT_EQ(m.status, "partial");
  ASSERT_EQ(m.cells.size(), 2u);
  EXPECT_EQ(m.cells[0].status, "failed");
  EXPECT_FALSE(m.cells[0].error.empty());
  EXPECT_EQ(m.cells[1].status, "ok");
  EXPECT_TRUE(fs::exists(m.manifest_path));
}

TEST(Harness, InvalidConfigNamesField) {
  const fs::path dir = fixtures::temp_dir("h_bad");
  ExperimentConfig c = small_config(dir / "out");
  c.deletion_sizes = {5000};
  try {
    run_experiment(c, options(dir / "cache"));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("deletion_sizes[0]"), std::string::npos) << e.what();
  }
  Json j = to_json(small_config(dir / "out"));
  j["unlearn"]["batch_f"] = 0;
  write(dir / "bad.json", j.dump());
  try {
    run_experiment(dir / "bad.json", options(dir / "cache"));
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("unlearn"), std::string::npos) << e.what();
  }
  write(dir / "broken.json", "{\"schema_version\": 1,");
  EXPECT_THROW(run_experiment(dir / "broken.json", options(dir / "cache")), ParseError);
}

TEST(Harness, ConfigJsonRoundTrip) {
  const ExperimentConfig c = small_config("x");
  const ExperimentConfig back = experiment_config_from(to_json(c));
  EXPECT_EQ(to_json(back).dump(), to_json(c).dump());
  Json missing = to_json(c);
  missing.erase("schema_version");
  EXPECT_THROW(experiment_config_from(missing), ConfigError);
}

TEST(Harness, ShippedConfigLoads) {
  const ExperimentConfig c = load_experiment_config(fs::path(MMU_SOURCE_DIR) / "configs" / "default.json");
  EXPECT_NO_THROW(c.validate());
  EXPECT_EQ(c.deletion_sizes, std::vector<std::size_t>{200});
  EXPECT_EQ(c.baselines.size(), 4u);
}

TEST(Harness, MethodSpecs) {
  ExperimentConfig c = small_config("x");
  c.multidelete_fusion = true;
  c.ablation = true;
  const auto specs = method_specs(c);
  std::vector<std::string> names;
  for (const auto& s : specs) names.push_back(s.method + "/" + s.variant);
  const std::vector<std::string> expected{"multidelete/std", "multidelete/F",    "finetune/std",    "multidelete/full",
                                          "multidelete/-MD", "multidelete/-UKR", "multidelete/-MKR"};
  EXPECT_EQ(names, expected);
}

TEST(Harness, SingleSizeSweepHasOneRowPerMethod) {
  const fs::path dir = fixtures::temp_dir("h_sweep");
  Experiment exp(small_config(dir / "out"), dir / "cache");
  const auto rows = timing_sweep(exp, {20});
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].method, "multidelete");
  EXPECT_EQ(rows[1].method, "retrain");
  for (const auto& r : rows) EXPECT_GT(r.seconds, 0.0);
  const auto back = timing_from_csv(timing_to_csv(rows));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].size, 20u);
  EXPECT_THROW(timing_sweep(exp, {20, 10}), ConfigError);
}

TEST(Harness, FitLine) {
  const LinearFit exact = fit_line({1, 2, 3, 4}, {3, 5, 7, 9});
  EXPECT_NEAR(exact.slope, 2.0, 1e-12);
  EXPECT_NEAR(exact.intercept, 1.0, 1e-12);
  EXPECT_NEAR(exact.r2, 1.0, 1e-12);
  // Hand value: y = (1, 3, 2) on x = (1, 2, 3): slope 0.5, R^2 = 0.25.
  const LinearFit noisy = fit_line({1, 2, 3}, {1, 3, 2});
  EXPECT_NEAR(noisy.slope, 0.5, 1e-12);
  EXPECT_NEAR(noisy.r2, 0.25, 1e-12);
  EXPECT_THROW(fit_line({1}, {1}), InvalidInput);
}

TEST(Harness, ReportOnEmptyCsv) {
  const fs::path dir = fixtures::temp_dir("h_rep_empty");
  write(dir / "results.csv", "");
  const ReportFiles f = report(dir / "results.csv", dir);
  EXPECT_EQ(f.methods_table.find('\n'), f.methods_table.size() - 1);  // header only
  EXPECT_TRUE(fs::exists(dir / "methods.csv"));
  EXPECT_TRUE(fs::exists(dir / "ablation.txt"));
}

TEST(Harness, ReportPassesRowsThroughInMethodOrder) {
  const fs::path dir = fixtures::temp_dir("h_rep_two");
  MetricsReport a, b;
  a.method = "dtd";
  a.variant = "std";
  a.d_test = 80;
  b.method = "multidelete";
  b.variant = "std";
  b.d_test = 90;
  write(dir / "results.csv", results_to_csv({a, b}));
  report(dir / "results.csv", dir);
  const std::string csv = read_text_file(dir / "methods.csv");
  const auto md = csv.find("multidelete,std,90"), dt = csv.find("dtd,std,80");
  ASSERT_NE(md, std::string::npos);
  ASSERT_NE(dt, std::string::npos);
  EXPECT_LT(md, dt);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
}

TEST(Harness, AblationTableColumnOrder) {
  const fs::path dir = fixtures::temp_dir("h_rep_abl");
  std::vector<MetricsReport> rows;
  for (const char* v : {"-MKR", "full", "-UKR", "-MD"}) {
    MetricsReport r;
    r.method = "multidelete";
    r.variant = v;
    r.d_test = 70;
    r.d_f = 30;
    rows.push_back(r);
  }
  write(dir / "results.csv", results_to_csv(rows));
  report(dir / "results.csv", dir);
  const std::string csv = read_text_file(dir / "ablation.csv");
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "variant,d_test,d_f");
  EXPECT_LT(csv.find("full"), csv.find("-MD"));
  EXPECT_LT(csv.find("-MD"), csv.find("-UKR"));
  EXPECT_LT(csv.find("-UKR"), csv.find("-MKR"));
}

TEST(Harness, ReportRejectsMalformedCsvWithRow) {
  const fs::path dir = fixtures::temp_dir("h_rep_bad");
  write(dir / "results.csv", results_header() + "\nmultidelete,std,1,2\n");
  try {
    report(dir / "results.csv", dir);
    FAIL();
  } catch (const SchemaError& e) {
    EXPECT_NE(std::string(e.what()).find("row 1"), std::string::npos) << e.what();
  }
}

TEST(Harness, ReportWritesTimingPlot) {
  const fs::path dir = fixtures::temp_dir("h_rep_timing");
  write(dir / "results.csv", "");
  write(dir / "timing.csv", timing_to_csv({{"multidelete", 50, 0.1}, {"retrain", 50, 2.0}}));
  report(dir / "results.csv", dir, dir / "timing.csv");
  EXPECT_TRUE(fs::exists(dir / "timing_plot.csv"));
  EXPECT_TRUE(fs::exists(dir / "timing.svg"));
}

TEST(Harness, CacheDirEnvironmentOverride) {
  const fs::path dir = fixtures::temp_dir("h_env");
  const ExperimentConfig c = small_config(dir / "out");
  ::setenv("MMUNLEARN_CACHE_DIR", (dir / "envcache").c_str(), 1);
  EXPECT_EQ(default_cache_root(c), dir / "envcache");
  Experiment exp(c);
  EXPECT_EQ(exp.cache_root(), dir / "envcache");
  ::unsetenv("MMUNLEARN_CACHE_DIR");
  EXPECT_EQ(default_cache_root(c), fs::path(c.output_dir) / "cache");
}

TEST(Harness, BundleCacheKeyedByExactInputs) {
  const fs::path dir = fixtures::temp_dir("h_key");
  Experiment exp(small_config(dir / "out"), dir / "cache");
  bool cached = true;
  const DatasetBundle a = exp.bundle(0, 20, &cached);
  EXPECT_FALSE(cached);
  const DatasetBundle b = exp.bundle(0, 20, &cached);
  EXPECT_TRUE(cached);
  EXPECT_EQ(a, b);
  EXPECT_NE(exp.bundle_path(0, 20), exp.bundle_path(0, 21));
  EXPECT_NE(exp.bundle_path(0, 20), exp.bundle_path(1, 20));
}
