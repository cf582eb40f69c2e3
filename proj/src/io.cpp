#include "mmu/io.hpp"

#include <cerrno>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>
#include <type_traits>
#include <utility>

#include "config_fields.hpp"
#include "mmu/errors.hpp"

namespace mmu {
namespace {

using detail::Fields;
using detail::validated;

const char* split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

Split split_from(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw SchemaError("bundle: unknown split '" + s + "'");
}

Json matrix_to_json(const Matrix& m) { return Json{{"rows", m.rows}, {"cols", m.cols}, {"data", m.data}}; }

Matrix matrix_from_json(const Json& j) {
  Matrix m;
  m.rows = j.at("rows").get<std::size_t>();
  m.cols = j.at("cols").get<std::size_t>();
  m.data = j.at("data").get<std::vector<double>>();
  if (m.data.size() != m.rows * m.cols) throw SchemaError("matrix: data length does not match rows x cols");
  return m;
}

void check_schema(const Json& j, std::string_view expected) {
  if (!j.is_object() || !j.contains("schema") || !j["schema"].is_string())
    throw SchemaError("missing schema tag (expected " + std::string(expected) + ")");
  const auto got = j["schema"].get<std::string>();
  if (got != expected)
    throw SchemaError("unsupported schema version '" + got + "' (expected " + std::string(expected) + ")");
}

// Wraps nlohmann's structural errors (missing keys, wrong types).
template <class F>
auto structural(const char* what, F&& fn) {
  try {
    return fn();
  } catch (const Json::exception& e) {
    throw SchemaError(std::string(what) + ": " + e.what());
  }
}

std::string fmt_double(double v, const char* spec) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

std::vector<std::string> split_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.emplace_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::vector<std::string_view> lines_of(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = end + 1;
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

bool parse_number(const std::string& s, double& out) {
  if (s.empty()) return false;
  errno = 0;
  char* end = nullptr;
  out = std::strtod(s.c_str(), &end);
  return errno == 0 && end == s.c_str() + s.size();
}

}  // namespace

// ---- configs ----------------------------------------------------------------

Json to_json(const SynthConfig& c) {
  return Json{{"n_concepts", c.n_concepts},
              {"pairs_per_concept", c.pairs_per_concept},
              {"latent_dim", c.latent_dim},
              {"dim_a", c.dim_a},
              {"dim_b", c.dim_b},
              {"noise_std", c.noise_std},
              {"split_fractions", c.split_fractions},
              {"n_classes", c.n_classes},
              {"class_separation", c.class_separation},
              {"seed", c.seed}};
}

SynthConfig synth_config_from(const Json& j, const std::string& path) {
  SynthConfig c;
  Fields f(j, path);
  f.get("n_concepts", c.n_concepts);
  f.get("pairs_per_concept", c.pairs_per_concept);
  f.get("latent_dim", c.latent_dim);
  f.get("dim_a", c.dim_a);
  f.get("dim_b", c.dim_b);
  f.get("noise_std", c.noise_std);
  f.get("split_fractions", c.split_fractions);
  f.get("n_classes", c.n_classes);
  f.get("class_separation", c.class_separation);
  f.get("seed", c.seed);
  f.finish();
  validated(c, path);
  return c;
}

Json to_json(const ModelConfig& c) {
  return Json{{"dim_a", c.dim_a},
              {"dim_b", c.dim_b},
              {"emb_dim", c.emb_dim},
              {"hidden_a", c.hidden_a},
              {"hidden_b", c.hidden_b},
              {"fusion_kind", c.fusion_kind == FusionKind::parametric ? "parametric" : "dot_product"},
              {"fusion_dims", c.fusion_dims}};
}

ModelConfig model_config_from(const Json& j, const std::string& path) {
  ModelConfig c;
  Fields f(j, path);
  f.get("dim_a", c.dim_a);
  f.get("dim_b", c.dim_b);
  f.get("emb_dim", c.emb_dim);
  f.get("hidden_a", c.hidden_a);
  f.get("hidden_b", c.hidden_b);
  f.get_enum("fusion_kind", c.fusion_kind,
             {{"parametric", FusionKind::parametric}, {"dot_product", FusionKind::dot_product}});
  f.get("fusion_dims", c.fusion_dims);
  f.finish();
  validated(c, path);
  return c;
}

Json to_json(const TrainConfig& c) {
  return Json{{"lr", c.lr}, {"epochs", c.epochs}, {"batch_size", c.batch_size}, {"seed", c.seed}};
}

TrainConfig train_config_from(const Json& j, const std::string& path) {
  TrainConfig c;
  Fields f(j, path);
  f.get("lr", c.lr);
  f.get("epochs", c.epochs);
  f.get("batch_size", c.batch_size);
  f.get("seed", c.seed);
  f.finish();
  if (!(c.lr > 0.0)) throw ConfigError(f.where("lr") + ": must be > 0");
  if (c.epochs < 0) throw ConfigError(f.where("epochs") + ": must be >= 0");
  if (c.batch_size < 1) throw ConfigError(f.where("batch_size") + ": must be >= 1");
  return c;
}

Json to_json(const UnlearnConfig& c) {
  return Json{{"alpha", c.alpha},
              {"beta", c.beta},
              {"gamma", c.gamma},
              {"distance", "mse"},
              {"readout", "concatenation"},
              {"lr", c.lr},
              {"steps", c.steps},
              {"epochs", c.epochs},
              {"batch_f", c.batch_f},
              {"batch_r", c.batch_r},
              {"unrelated_per_deleted", c.unrelated_per_deleted},
              {"fusion_only", c.fusion_only},
              {"seed", c.seed},
              {"decoupling_tolerance", c.decoupling_tolerance},
              {"eval_every", c.eval_every}};
}

UnlearnConfig unlearn_config_from(const Json& j, const std::string& path) {
  UnlearnConfig c;
  Fields f(j, path);
  f.get("alpha", c.alpha);
  f.get("beta", c.beta);
  f.get("gamma", c.gamma);
  f.get_enum("distance", c.distance, {{"mse", Distance::mse}});
  f.get_enum("readout", c.readout, {{"concatenation", Readout::concatenation}});
  f.get("lr", c.lr);
  f.get("steps", c.steps);
  f.get("epochs", c.epochs);
  f.get("batch_f", c.batch_f);
  f.get("batch_r", c.batch_r);
  f.get("unrelated_per_deleted", c.unrelated_per_deleted);
  f.get("fusion_only", c.fusion_only);
  f.get("seed", c.seed);
  f.get("decoupling_tolerance", c.decoupling_tolerance);
  f.get("eval_every", c.eval_every);
  f.finish();
  validated(c, path);
  return c;
}

Json to_json(const BaselineConfig& c) {
  return Json{{"method", to_string(c.method)},
              {"lr", c.lr},
              {"steps", c.steps},
              {"batch_size", c.batch_size},
              {"lr_multiplier", c.lr_multiplier},
              {"noise_std", c.noise_std},
              {"finetune_target", c.finetune_target == FinetuneTarget::retained ? "D_r" : "D_f"},
              {"neggrad_floor", c.neggrad_floor},
              {"fusion_only", c.fusion_only},
              {"seed", c.seed}};
}

BaselineConfig baseline_config_from(const Json& j, const std::string& path) {
  BaselineConfig c;
  Fields f(j, path);
  f.get_enum("method", c.method,
             {{"retrain", BaselineMethod::retrain},
              {"finetune", BaselineMethod::finetune},
              {"neggrad", BaselineMethod::neggrad},
              {"dtd", BaselineMethod::dtd}});
  f.get("lr", c.lr);
  f.get("steps", c.steps);
  f.get("batch_size", c.batch_size);
  f.get("lr_multiplier", c.lr_multiplier);
  f.get("noise_std", c.noise_std);
  f.get_enum("finetune_target", c.finetune_target,
             {{"D_r", FinetuneTarget::retained}, {"D_f", FinetuneTarget::deleted}});
  f.get("neggrad_floor", c.neggrad_floor);
  f.get("fusion_only", c.fusion_only);
  f.get("seed", c.seed);
  f.finish();
  validated(c, path);
  return c;
}

// ---- files ----------------------------------------------------------------------

Json parse_json(std::string_view text) {
  try {
    return Json::parse(text.begin(), text.end());
  } catch (const Json::parse_error& e) {
    throw ParseError("JSON parse error at byte " + std::to_string(e.byte) + ": " + e.what(), e.byte);
  }
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidInput("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  // Write to a sibling temp file first so readers never see a partial file.
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InvalidInput("cannot write " + tmp);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw InvalidInput("write failed for " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

Json read_json_file(const std::filesystem::path& path) { return parse_json(read_text_file(path)); }

// ---- bundle ------------------------------------------------------------------------

Json bundle_to_json(const DatasetBundle& b) {
  Json pairs = Json::array();
  for (const auto& p : b.pairs) pairs.push_back({p.pair_id, p.a_id, p.b_id, p.related, p.concept_id});
  Json split = Json::array();
  for (Split s : b.split) split.push_back(split_name(s));
  return Json{{"schema", kBundleSchema},
              {"config", to_json(b.config)},
              {"samples_a", matrix_to_json(b.samples_a)},
              {"samples_b", matrix_to_json(b.samples_b)},
              {"concept_a", b.concept_a},
              {"concept_b", b.concept_b},
              {"pairs", pairs},
              {"split", split},
              {"deletion_mask", b.deletion_mask}};
}

DatasetBundle bundle_from_json(const Json& j) {
  check_schema(j, kBundleSchema);
  return structural("bundle", [&] {
    DatasetBundle b;
    try {
      b.config = synth_config_from(j.at("config"), "config");
    } catch (const ConfigError& e) {
      throw SchemaError(std::string("bundle: ") + e.what());
    }
    b.samples_a = matrix_from_json(j.at("samples_a"));
    b.samples_b = matrix_from_json(j.at("samples_b"));
    b.concept_a = j.at("concept_a").get<std::vector<std::size_t>>();
    b.concept_b = j.at("concept_b").get<std::vector<std::size_t>>();
    for (const auto& p : j.at("pairs")) {
      if (!p.is_array() || p.size() != 5) throw SchemaError("bundle: pair records have 5 fields");
      b.pairs.push_back({p[0].get<std::size_t>(), p[1].get<std::size_t>(), p[2].get<std::size_t>(),
                         p[3].get<bool>(), p[4].get<std::size_t>()});
    }
    for (const auto& s : j.at("split")) b.split.push_back(split_from(s.get<std::string>()));
    b.deletion_mask = j.at("deletion_mask").get<std::vector<std::size_t>>();
    if (b.split.size() != b.pairs.size()) throw SchemaError("bundle: split and pairs differ in length");
    if (b.concept_a.size() != b.samples_a.rows || b.concept_b.size() != b.samples_b.rows)
      throw SchemaError("bundle: concept labels do not match sample rows");
    for (std::size_t i = 0; i < b.pairs.size(); ++i) {
      const auto& p = b.pairs[i];
      if (p.pair_id != i || p.a_id >= b.samples_a.rows || p.b_id >= b.samples_b.rows)
        throw SchemaError("bundle: pair " + std::to_string(i) + " is inconsistent");
    }
    for (std::size_t id : b.deletion_mask)
      if (id >= b.pairs.size() || b.split[id] != Split::train)
        throw SchemaError("bundle: deletion mask holds a non-train pair " + std::to_string(id));
    return b;
  });
}

std::string serialize_bundle(const DatasetBundle& bundle) { return bundle_to_json(bundle).dump() + "\n"; }
DatasetBundle deserialize_bundle(std::string_view text) { return bundle_from_json(parse_json(text)); }
void save_bundle(const std::filesystem::path& path, const DatasetBundle& bundle) {
  write_text_file(path, serialize_bundle(bundle));
}
DatasetBundle load_bundle(const std::filesystem::path& path) { return deserialize_bundle(read_text_file(path)); }

// ---- model ----------------------------------------------------------------------------

Json model_to_json(const MultimodalModel& model) {
  Json params = Json::object();
  for (const auto& p : parameters(model))
    params[p.name] = Json::array({p.shape, std::vector<double>(p.values.begin(), p.values.end())});
  return Json{{"schema", kModelSchema}, {"config", to_json(model.config)}, {"params", params}};
}

MultimodalModel model_from_json(const Json& j) {
  check_schema(j, kModelSchema);
  return structural("model", [&] {
    ModelConfig cfg;
    try {
      cfg = model_config_from(j.at("config"), "config");
    } catch (const ConfigError& e) {
      throw SchemaError(std::string("model: ") + e.what());
    }
    MultimodalModel model = init_model(cfg, 0);
    const Json& params = j.at("params");
    auto views = parameters(model);
    if (params.size() != views.size())
      throw SchemaError("model: expected " + std::to_string(views.size()) + " parameter tensors, found " +
                        std::to_string(params.size()));
    for (auto& v : views) {
      if (!params.contains(v.name)) throw SchemaError("model: missing parameter " + v.name);
      const Json& entry = params[v.name];
      if (!entry.is_array() || entry.size() != 2) throw SchemaError("model: " + v.name + " must be [shape, values]");
      if (entry[0].get<std::vector<std::size_t>>() != v.shape) throw SchemaError("model: shape mismatch for " + v.name);
      const auto values = entry[1].get<std::vector<double>>();
      if (values.size() != v.values.size()) throw SchemaError("model: value count mismatch for " + v.name);
      std::copy(values.begin(), values.end(), v.values.begin());
    }
    return model;
  });
}

std::string serialize_model(const MultimodalModel& model) { return model_to_json(model).dump() + "\n"; }
MultimodalModel deserialize_model(std::string_view text) { return model_from_json(parse_json(text)); }
void save_model(const std::filesystem::path& path, const MultimodalModel& model) {
  write_text_file(path, serialize_model(model));
}
MultimodalModel load_model(const std::filesystem::path& path) { return deserialize_model(read_text_file(path)); }

// ---- trace --------------------------------------------------------------------------

std::string trace_to_csv(const UnlearnTrace& trace) {
  std::string out = "step,l_md,l_mkr,l_ukr,total,seconds\n";
  for (const auto& r : trace.rows) {
    out += std::to_string(r.step);
    for (double v : {r.l_md, r.l_mkr, r.l_ukr, r.total, r.seconds}) out += "," + fmt_double(v, "%.17g");
    out += "\n";
  }
  return out;
}

std::vector<TraceRow> trace_from_csv(std::string_view text) {
  const auto lines = lines_of(text);
  if (lines.empty() || lines[0] != "step,l_md,l_mkr,l_ukr,total,seconds")
    throw SchemaError("trace csv: unexpected header");
  std::vector<TraceRow> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto cells = split_line(lines[i]);
    double v[6];
    bool ok = cells.size() == 6;
    for (std::size_t c = 0; ok && c < 6; ++c) ok = parse_number(cells[c], v[c]);
    if (!ok) throw SchemaError("trace csv: malformed row " + std::to_string(i));
    rows.push_back({static_cast<int>(v[0]), v[1], v[2], v[3], v[4], v[5]});
  }
  return rows;
}

void save_trace(const std::filesystem::path& path, const UnlearnTrace& trace) {
  write_text_file(path, trace_to_csv(trace));
}

// ---- results ------------------------------------------------------------------------------

const std::vector<std::string> kResultsColumns = {"method",       "variant",   "d_test",     "d_f",
                                                  "mean_recall",  "mi_ratio",  "probe_orig", "probe_unlearned",
                                                  "seconds",      "config_hash", "seed"};

std::string results_header() {
  std::string h;
  for (const auto& c : kResultsColumns) h += (h.empty() ? "" : ",") + c;
  return h + "\n";
}

std::string results_row(const MetricsReport& r) {
  for (const auto* s : {&r.method, &r.variant, &r.config_hash})
    if (s->find_first_of(",\n\r") != std::string::npos)
      throw InvalidInput("results csv: field '" + *s + "' contains a separator");
  std::string out = r.method + "," + r.variant;
  for (double v : {r.d_test, r.d_f, r.mean_recall, r.mi_ratio, r.probe_orig, r.probe_unlearned, r.seconds})
    out += "," + fmt_double(v, "%.6f");
  out += "," + r.config_hash + "," + std::to_string(r.seed) + "\n";
  return out;
}

std::string results_to_csv(const std::vector<MetricsReport>& rows) {
  std::string out = results_header();
  for (const auto& r : rows) out += results_row(r);
  return out;
}

std::vector<MetricsReport> results_from_csv(std::string_view text) {
  const auto lines = lines_of(text);
  std::vector<MetricsReport> rows;
  if (lines.empty()) return rows;
  if (std::string(lines[0]) + "\n" != results_header())
    throw SchemaError("results csv: header does not match " + results_header().substr(0, results_header().size() - 1));
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto where = "results csv row " + std::to_string(i) + " (line " + std::to_string(i + 1) + ")";
    const auto cells = split_line(lines[i]);
    if (cells.size() != kResultsColumns.size())
      throw SchemaError(where + ": expected " + std::to_string(kResultsColumns.size()) + " fields, found " +
                        std::to_string(cells.size()));
    MetricsReport r;
    r.method = cells[0];
    r.variant = cells[1];
    if (r.method.empty()) throw SchemaError(where + ": empty method");
    double* numeric[] = {&r.d_test, &r.d_f, &r.mean_recall, &r.mi_ratio, &r.probe_orig, &r.probe_unlearned,
                         &r.seconds};
    for (std::size_t c = 0; c < 7; ++c)
      if (!parse_number(cells[2 + c], *numeric[c]))
        throw SchemaError(where + ": column " + kResultsColumns[2 + c] + " is not a number");
    r.config_hash = cells[9];
    const auto& s = cells[10];
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), r.seed);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
      throw SchemaError(where + ": column seed is not an unsigned integer");
    rows.push_back(std::move(r));
  }
  return rows;
}

Json report_to_json(const MetricsReport& r) {
  return Json{{"method", r.method},         {"variant", r.variant},
              {"d_test", r.d_test},         {"d_f", r.d_f},
              {"unrelated", r.unrelated},   {"gap", r.gap},
              {"mean_recall", r.mean_recall}, {"mi_ratio", r.mi_ratio},
              {"probe_orig", r.probe_orig}, {"probe_unlearned", r.probe_unlearned},
              {"seconds", r.seconds},       {"config_hash", r.config_hash},
              {"seed", r.seed}};
}

MetricsReport report_from_json(const Json& j) {
  return structural("metrics", [&] {
    MetricsReport r;
    r.method = j.at("method").get<std::string>();
    r.variant = j.at("variant").get<std::string>();
    r.d_test = j.at("d_test").get<double>();
    r.d_f = j.at("d_f").get<double>();
    r.unrelated = j.at("unrelated").get<double>();
    r.gap = j.at("gap").get<double>();
    r.mean_recall = j.at("mean_recall").get<double>();
    r.mi_ratio = j.at("mi_ratio").get<double>();
    r.probe_orig = j.at("probe_orig").get<double>();
    r.probe_unlearned = j.at("probe_unlearned").get<double>();
    r.seconds = j.at("seconds").get<double>();
    r.config_hash = j.at("config_hash").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    return r;
  });
}

// ---- hashing -------------------------------------------------------------------------

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t h) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::string config_hash(const Json& j) { return hex64(fnv1a64(j.dump())); }

std::string bundle_hash(const DatasetBundle& bundle) { return hex64(fnv1a64(serialize_bundle(bundle))); }

}  // namespace mmu
