// mmunlearn: command line front end for the experiment harness.
//
// Every subcommand accepts --config FILE (defaults when omitted), --seed N
// (replaces the config's seed list) and --out DIR (replaces output_dir).
// Exit codes: 0 success, 1 invalid config or arguments, 2 run failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include <spdlog/spdlog.h>

#include "mmu/errors.hpp"
#include "mmu/harness.hpp"
#include "mmu/plot.hpp"

namespace fs = std::filesystem;
using namespace mmu;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "experiment config JSON");
  cmd->add_option("--seed", c.seed, "run seed (replaces the config's seeds)");
  cmd->add_option("--out", c.out, "output directory (replaces output_dir)");
}

ExperimentConfig load(const Common& c) {
  ExperimentConfig cfg = c.config.empty() ? ExperimentConfig{} : load_experiment_config(c.config);
  if (c.seed) cfg.seeds = {*c.seed};
  if (!c.out.empty()) cfg.output_dir = c.out;
  cfg.validate();
  return cfg;
}

MethodSpec multidelete_spec(const ExperimentConfig& cfg) { return {"multidelete", "std", cfg.unlearn}; }

MethodSpec baseline_spec(const ExperimentConfig& cfg, const std::string& name) {
  const BaselineMethod m = baseline_method_from(name);
  for (const auto& b : cfg.baselines)
    if (b.method == m) return {name, b.fusion_only ? "F" : "std", b};
  BaselineConfig b;
  b.method = m;
  return {name, "std", b};
}

void print_report(const MetricsReport& r) {
  std::printf("%s/%s  D_Test %.2f  D_f %.2f  unrelated %.2f  gap %.2f  MR %.2f  MI %.3f  probe %.2f -> %.2f  %.3fs\n",
              r.method.c_str(), r.variant.c_str(), r.d_test, r.d_f, r.unrelated, r.gap, r.mean_recall, r.mi_ratio,
              r.probe_orig, r.probe_unlearned, r.seconds);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multimodal unlearning experiments"};
  app.require_subcommand(1);

  Common gen_o, train_o, unl_o, base_o, eval_o, mi_o, abl_o, sweep_o, rep_o, run_o;
  std::string base_method, eval_model, mi_model, rep_results, rep_timing;

  auto* gen = app.add_subcommand("gen", "generate the synthetic bundle with its deletion set");
  add_common(gen, gen_o);
  auto* train = app.add_subcommand("train", "train the original model f");
  add_common(train, train_o);
  auto* unl = app.add_subcommand("unlearn", "run MultiDelete");
  add_common(unl, unl_o);
  auto* base = app.add_subcommand("baseline", "run one baseline method");
  add_common(base, base_o);
  base->add_option("--method", base_method, "retrain|finetune|neggrad|dtd")->required();
  auto* ev = app.add_subcommand("eval", "evaluate an unlearned model (MultiDelete when --model is omitted)");
  add_common(ev, eval_o);
  ev->add_option("--model", eval_model, "model checkpoint to evaluate");
  auto* mi = app.add_subcommand("mi", "membership-inference ratio of a model against f");
  add_common(mi, mi_o);
  mi->add_option("--model", mi_model, "model checkpoint (MultiDelete when omitted)");
  auto* abl = app.add_subcommand("ablate", "objective ablation grid");
  add_common(abl, abl_o);
  auto* sweep = app.add_subcommand("sweep", "timing sweep over |D_f|");
  add_common(sweep, sweep_o);
  auto* rep = app.add_subcommand("report", "tables and plots from a results CSV");
  add_common(rep, rep_o);
  rep->add_option("--results", rep_results, "results CSV (default <out>/results.csv)");
  rep->add_option("--timing", rep_timing, "timing CSV from `sweep`");
  auto* run = app.add_subcommand("run", "full experiment with caching and a manifest");
  add_common(run, run_o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*gen) {
      Experiment exp(load(gen_o));
      const auto& c = exp.config();
      const DatasetBundle b = exp.bundle(c.seeds.front(), c.deletion_sizes.front());
      const fs::path p = fs::path(c.output_dir) / "bundle.json";
      save_bundle(p, b);
      std::printf("bundle: %zu pairs, |D_f| = %zu -> %s\n", b.pairs.size(), b.deletion_mask.size(), p.c_str());
    } else if (*train) {
      Experiment exp(load(train_o));
      const fs::path p = fs::path(exp.config().output_dir) / "f.json";
      save_model(p, exp.original(exp.config().seeds.front()));
      std::printf("f -> %s\n", p.c_str());
    } else if (*unl || *base) {
      Experiment exp(load(*unl ? unl_o : base_o));
      const auto& c = exp.config();
      const std::uint64_t seed = c.seeds.front();
      const MethodSpec spec = *unl ? multidelete_spec(c) : baseline_spec(c, base_method);
      const DatasetBundle b = exp.bundle(seed, c.deletion_sizes.front());
      const MultimodalModel f = exp.original(seed);
      const UnlearnResult r = exp.unlearn(spec, f, b, seed);
      const std::string stem = *unl ? "" : "_" + spec.method;
      const fs::path dir(c.output_dir);
      save_model(dir / ("f_prime" + stem + ".json"), r.model);
      save_trace(dir / ("trace" + stem + ".csv"), r.trace);
      std::printf("%s: %zu steps, %.3fs, selected step %d -> %s\n", spec.method.c_str(), r.trace.rows.size(),
                  r.trace.wall_seconds, r.trace.selected_step, (dir / ("f_prime" + stem + ".json")).c_str());
    } else if (*ev || *mi) {
      Experiment exp(load(*ev ? eval_o : mi_o));
      const auto& c = exp.config();
      const std::uint64_t seed = c.seeds.front();
      const DatasetBundle b = exp.bundle(seed, c.deletion_sizes.front());
      const MultimodalModel f = exp.original(seed);
      const std::string& model_path = *ev ? eval_model : mi_model;
      MultimodalModel fp;
      double seconds = 0.0;
      if (model_path.empty()) {
        const auto r = exp.unlearn(multidelete_spec(c), f, b, seed);
        fp = r.model;
        seconds = r.trace.wall_seconds;
      } else {
        fp = load_model(model_path);
      }
      if (*mi) {
        std::printf("mi_ratio %.6f\n", mi_ratio(f, fp, b, seed));
      } else {
        MetricsReport r = evaluate_model(f, fp, b, seed);
        r.method = model_path.empty() ? "multidelete" : fs::path(model_path).stem().string();
        r.variant = "std";
        r.seconds = seconds;
        r.config_hash = exp.config_hash();
        print_report(r);
        const fs::path p = fs::path(c.output_dir) / "eval.csv";
        write_text_file(p, results_to_csv({r}));
      }
    } else if (*abl) {
      Experiment exp(load(abl_o));
      const auto& c = exp.config();
      const std::uint64_t seed = c.seeds.front();
      const DatasetBundle b = exp.bundle(seed, c.deletion_sizes.front());
      UnlearnConfig u = c.for_seed(seed).unlearn;
      const auto rows = run_ablation(exp.original(seed), b, u, exp.config_hash());
      for (const auto& r : rows) print_report(r);
      write_text_file(fs::path(c.output_dir) / "ablation_results.csv", results_to_csv(rows));
    } else if (*sweep) {
      Experiment exp(load(sweep_o));
      const auto rows = timing_sweep(exp, exp.config().sweep_sizes);
      const fs::path dir(exp.config().output_dir);
      write_text_file(dir / "timing.csv", timing_to_csv(rows));
      std::vector<double> x, y;
      for (const auto& r : rows)
        if (r.method == "multidelete") {
          x.push_back(static_cast<double>(r.size));
          y.push_back(r.seconds);
        }
      if (x.size() >= 2) std::printf("multidelete linear fit R^2 = %.4f\n", fit_line(x, y).r2);
      Series md{"multidelete", {}}, rt{"retrain", {}};
      for (const auto& r : rows) (r.method == "multidelete" ? md : rt).points.emplace_back(double(r.size), r.seconds);
      write_text_file(dir / "timing.svg", svg_line_plot({md, rt}, "Unlearning time vs |D_f|", "|D_f|", "seconds"));
    } else if (*rep) {
      const ExperimentConfig c = load(rep_o);
      const fs::path dir(c.output_dir);
      const fs::path results = rep_results.empty() ? dir / "results.csv" : fs::path(rep_results);
      std::optional<fs::path> timing;
      if (!rep_timing.empty()) timing = rep_timing;
      const auto files = report(results, dir, timing);
      std::cout << files.methods_table << "\n" << files.ablation_table;
    } else if (*run) {
      RunOptions opts;
      opts.seed = run_o.seed;
      if (!run_o.out.empty()) opts.out_dir = run_o.out;
      const RunManifest m = run_o.config.empty() ? run_experiment(ExperimentConfig{}, opts)
                                                 : run_experiment(fs::path(run_o.config), opts);
      std::printf("run %s: %zu cells, results %s, manifest %s\n", m.status.c_str(), m.cells.size(),
                  m.results_csv.c_str(), m.manifest_path.c_str());
      return m.status == "ok" ? 0 : 2;
    }
  } catch (const ConfigError& e) {
    spdlog::error("invalid config: {}", e.what());
    return 1;
  } catch (const ParseError& e) {
    spdlog::error("{}", e.what());
    return 1;
  } catch (const SchemaError& e) {
    spdlog::error("{}", e.what());
    return 1;
  } catch (const std::exception& e) {
    spdlog::error("run failed: {}", e.what());
    return 2;
  }
  return 0;
}
