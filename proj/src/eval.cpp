#include "mmu/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <spdlog/spdlog.h>

#include "mmu/errors.hpp"
#include "mmu/metrics.hpp"
#include "mmu/rng.hpp"

namespace mmu {
namespace {

enum StreamTag : std::uint64_t { kTestNeg = 401, kDfNeg, kUnrel, kMembers, kSvm, kProbe };

double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

std::vector<std::size_t> unique_samples(const DatasetBundle& bundle, Split s) {
  std::vector<std::size_t> ids;
  for (std::size_t p : bundle.pair_ids(s)) ids.push_back(bundle.pairs[p].a_id);
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

void column_stats(const Matrix& x, std::vector<double>& mean, std::vector<double>& scale) {
  mean.assign(x.cols, 0.0);
  scale.assign(x.cols, 0.0);
  for (std::size_t r = 0; r < x.rows; ++r)
    for (std::size_t c = 0; c < x.cols; ++c) mean[c] += x(r, c);
  for (double& m : mean) m /= static_cast<double>(x.rows);
  for (std::size_t r = 0; r < x.rows; ++r)
    for (std::size_t c = 0; c < x.cols; ++c) scale[c] += (x(r, c) - mean[c]) * (x(r, c) - mean[c]);
  for (double& s : scale) {
    s = std::sqrt(s / static_cast<double>(x.rows));
    if (s < 1e-12) s = 1.0;
  }
}

void standardize(Matrix& x, const std::vector<double>& mean, const std::vector<double>& scale) {
  for (std::size_t r = 0; r < x.rows; ++r)
    for (std::size_t c = 0; c < x.cols; ++c) x(r, c) = (x(r, c) - mean[c]) / scale[c];
}

// Fits sigmoid(a*m + b) to smoothed 0/1 targets by damped Newton steps.
void calibrate(const std::vector<double>& margins, const std::vector<int>& labels, double& a, double& b) {
  const double n_pos = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
  const double n_neg = static_cast<double>(labels.size()) - n_pos;
  const double hi = (n_pos + 1.0) / (n_pos + 2.0);
  const double lo = 1.0 / (n_neg + 2.0);
  auto objective = [&](double aa, double bb) {
    double f = 0.0;
    for (std::size_t i = 0; i < margins.size(); ++i) {
      const double z = aa * margins[i] + bb;
      const double t = labels[i] == 1 ? hi : lo;
      f += t * softplus(-z) + (1.0 - t) * softplus(z);
    }
    return f;
  };
  a = 1.0;
  b = 0.0;
  double fval = objective(a, b);
  for (int it = 0; it < 100; ++it) {
    double ga = 0.0, gb = 0.0, haa = 1e-12, hab = 0.0, hbb = 1e-12;
    for (std::size_t i = 0; i < margins.size(); ++i) {
      const double p = logistic(a * margins[i] + b);
      const double t = labels[i] == 1 ? hi : lo;
      const double w = p * (1.0 - p);
      ga += (p - t) * margins[i];
      gb += p - t;
      haa += w * margins[i] * margins[i];
      hab += w * margins[i];
      hbb += w;
    }
    if (std::abs(ga) < 1e-10 && std::abs(gb) < 1e-10) break;
    const double det = haa * hbb - hab * hab;
    const double da = -(hbb * ga - hab * gb) / det;
    const double db = -(haa * gb - hab * ga) / det;
    double step = 1.0;
    while (step > 1e-10) {
      const double cand = objective(a + step * da, b + step * db);
      if (cand < fval + 1e-4 * step * (ga * da + gb * db)) {
        a += step * da;
        b += step * db;
        fval = cand;
        break;
      }
      step /= 2.0;
    }
    if (step <= 1e-10) break;
  }
}

}  // namespace

// ---- matching sets -----------------------------------------------------------

EvalSets make_eval_sets(const DatasetBundle& bundle, std::uint64_t seed) {
  EvalSets s;
  const auto test = bundle.pair_ids(Split::test);
  const auto deleted = bundle.deleted_ids();
  s.test_pos = bundle.refs(test);
  Rng r1 = make_stream(seed, kTestNeg);
  s.test_neg = sample_unrelated_from(bundle, test, s.test_pos.size(), r1);
  s.df_pos = bundle.refs(deleted);
  Rng r2 = make_stream(seed, kDfNeg);
  s.df_neg = sample_unrelated_from(bundle, deleted, s.df_pos.size(), r2);
  Rng r3 = make_stream(seed, kUnrel);
  s.unrelated = sample_unrelated_from(bundle, bundle.retained_ids(), s.df_pos.size(), r3);
  return s;
}

ForgettingMetrics eval_forgetting(const MultimodalModel& model, const DatasetBundle& bundle, const EvalSets& sets) {
  ForgettingMetrics m;
  m.d_test = eval_matching(model, bundle, sets.test_pos, sets.test_neg);
  m.d_f = eval_matching(model, bundle, sets.df_pos, sets.df_neg);
  m.unrelated = eval_matching(model, bundle, sets.unrelated, sets.df_neg);
  m.gap = std::abs(m.d_f - m.unrelated);
  return m;
}

RetrievalSet make_retrieval_set(const DatasetBundle& bundle, Split split) {
  std::vector<std::size_t> a_ids, b_ids;
  std::vector<bool> seen;
  for (std::size_t p : bundle.pair_ids(split)) {
    const auto& rec = bundle.pairs[p];
    if (rec.concept_id >= seen.size()) seen.resize(rec.concept_id + 1, false);
    if (seen[rec.concept_id]) continue;
    seen[rec.concept_id] = true;
    a_ids.push_back(rec.a_id);
    b_ids.push_back(rec.b_id);
  }
  RetrievalSet rs;
  rs.queries = gather_rows(bundle.samples_a, a_ids);
  rs.candidates = gather_rows(bundle.samples_b, b_ids);
  for (std::size_t i = 0; i < a_ids.size(); ++i) rs.relevant.push_back({i});
  return rs;
}

// ---- membership inference --------------------------------------------------------

Matrix mi_features(const MultimodalModel& model, const DatasetBundle& bundle, std::span<const PairRef> pairs) {
  const auto z = match_logits(model, bundle, pairs);
  Matrix x(pairs.size(), 3);
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const double p = logistic(z[i]);
    x(i, 0) = p;
    x(i, 1) = 1.0 - p;
    x(i, 2) = softplus(-z[i]);
  }
  return x;
}

double MIAttacker::margin(std::span<const double> feature) const {
  if (feature.size() != weights.size()) throw ShapeError("MIAttacker: feature length mismatch");
  double m = bias;
  for (std::size_t j = 0; j < weights.size(); ++j) m += weights[j] * (feature[j] - mean[j]) / scale[j];
  return m;
}

double MIAttacker::membership(std::span<const double> feature) const {
  return logistic(calib_a * margin(feature) + calib_b);
}

MIAttacker fit_mi_attacker(const Matrix& features, const std::vector<int>& labels, std::uint64_t seed, double c) {
  if (features.rows != labels.size()) throw ShapeError("fit_mi_attacker: label count mismatch");
  const auto members = std::count(labels.begin(), labels.end(), 1);
  if (members == 0 || members == static_cast<std::ptrdiff_t>(labels.size()))
    throw TrainingFailure("fit_mi_attacker: need both members and non-members");

  MIAttacker at;
  column_stats(features, at.mean, at.scale);
  Matrix x = features;
  standardize(x, at.mean, at.scale);

  // Dual coordinate descent for the L1-loss SVM; the bias is an extra
  // constant-1 feature.
  const std::size_t n = x.rows, d = x.cols;
  std::vector<double> w(d + 1, 0.0), alpha(n, 0.0), qii(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 1.0;
    for (std::size_t j = 0; j < d; ++j) s += x(i, j) * x(i, j);
    qii[i] = s;
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = make_stream(seed, kSvm);
  for (int epoch = 0; epoch < 1000; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double max_pg = 0.0;
    for (std::size_t i : order) {
      const double y = labels[i] == 1 ? 1.0 : -1.0;
      double wx = w[d];
      for (std::size_t j = 0; j < d; ++j) wx += w[j] * x(i, j);
      const double g = y * wx - 1.0;
      double pg = g;
      if (alpha[i] == 0.0) pg = std::min(g, 0.0);
      else if (alpha[i] == c) pg = std::max(g, 0.0);
      max_pg = std::max(max_pg, std::abs(pg));
      if (pg == 0.0) continue;
      const double old = alpha[i];
      alpha[i] = std::clamp(old - g / qii[i], 0.0, c);
      const double delta = (alpha[i] - old) * y;
      for (std::size_t j = 0; j < d; ++j) w[j] += delta * x(i, j);
      w[d] += delta;
    }
    if (max_pg < 1e-6) break;
  }
  at.weights.assign(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(d));
  at.bias = w[d];

  std::vector<double> margins(n);
  for (std::size_t i = 0; i < n; ++i) margins[i] = at.margin(features.row(i));
  calibrate(margins, labels, at.calib_a, at.calib_b);
  return at;
}

MIAttacker train_mi_attacker(const MultimodalModel& model, const DatasetBundle& bundle, std::uint64_t seed) {
  const auto val = bundle.refs(bundle.pair_ids(Split::val));
  if (val.empty()) throw InvalidInput("train_mi_attacker: validation split is empty");
  auto retained = bundle.retained_ids();
  if (retained.size() < val.size()) throw InsufficientData("train_mi_attacker: D_r smaller than validation split");
  Rng rng = make_stream(seed, kMembers);
  std::shuffle(retained.begin(), retained.end(), rng);
  retained.resize(val.size());
  std::sort(retained.begin(), retained.end());
  const auto members = bundle.refs(retained);

  std::vector<PairRef> all(members.begin(), members.end());
  all.insert(all.end(), val.begin(), val.end());
  std::vector<int> labels(all.size(), 0);
  std::fill(labels.begin(), labels.begin() + static_cast<std::ptrdiff_t>(members.size()), 1);
  return fit_mi_attacker(mi_features(model, bundle, all), labels, seed);
}

double existence_probability(const MIAttacker& attacker, const MultimodalModel& model, const DatasetBundle& bundle,
                             std::span<const PairRef> pairs) {
  if (pairs.empty()) throw InvalidInput("existence_probability: no pairs");
  const Matrix x = mi_features(model, bundle, pairs);
  double sum = 0.0;
  for (std::size_t i = 0; i < x.rows; ++i) sum += attacker.membership(x.row(i));
  return sum / static_cast<double>(x.rows);
}

double mi_ratio_from(double prior, double post) {
  if (post < 1e-6) {
    spdlog::warn("mi_ratio: post existence probability {} clamped to 1e-6", post);
    post = 1e-6;
  }
  return prior / post;
}

double mi_ratio(const MultimodalModel& f, const MultimodalModel& f_prime, const DatasetBundle& bundle,
                std::uint64_t seed) {
  const auto deleted = bundle.refs(bundle.deleted_ids());
  if (deleted.empty()) throw InvalidInput("mi_ratio: D_f is empty");
  const double prior = existence_probability(train_mi_attacker(f, bundle, seed), f, bundle, deleted);
  const double post = existence_probability(train_mi_attacker(f_prime, bundle, seed), f_prime, bundle, deleted);
  return mi_ratio_from(prior, post);
}

// ---- unimodal probe -------------------------------------------------------------

ProbeResult unimodal_probe(const MultimodalModel& f, const MultimodalModel& f_prime, const DatasetBundle& bundle,
                           std::uint64_t seed) {
  const int n_classes = bundle.config.n_classes;
  const auto train_ids = unique_samples(bundle, Split::train);
  const auto test_ids = unique_samples(bundle, Split::test);
  if (train_ids.empty() || test_ids.empty()) throw InvalidInput("unimodal_probe: empty train or test split");
  auto labels_of = [&](const std::vector<std::size_t>& ids) {
    std::vector<std::size_t> y;
    for (std::size_t id : ids) y.push_back(concept_class(bundle.concept_a[id], n_classes));
    return y;
  };
  const auto y_train = labels_of(train_ids);
  const auto y_test = labels_of(test_ids);
  std::vector<std::size_t> distinct = y_train;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  if (n_classes < 2 || distinct.size() < 2) throw InvalidInput("unimodal_probe: fewer than 2 classes");

  Matrix x = encode(f, Modality::A, gather_rows(bundle.samples_a, train_ids));
  std::vector<double> mean, scale;
  column_stats(x, mean, scale);
  standardize(x, mean, scale);

  const std::size_t d = x.cols, k = static_cast<std::size_t>(n_classes);
  Matrix w(k, d);
  std::vector<double> b(k, 0.0);
  constexpr double kLr = 0.1;
  constexpr int kEpochs = 50;
  constexpr std::size_t kBatch = 32;
  std::vector<std::size_t> order(x.rows);
  std::iota(order.begin(), order.end(), 0);
  Rng rng = make_stream(seed, kProbe);
  std::vector<double> logits(k);
  for (int epoch = 0; epoch < kEpochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += kBatch) {
      const std::size_t end = std::min(order.size(), start + kBatch);
      Matrix gw(k, d);
      std::vector<double> gb(k, 0.0);
      for (std::size_t t = start; t < end; ++t) {
        const auto row = x.row(order[t]);
        double mx = -INFINITY;
        for (std::size_t c = 0; c < k; ++c) {
          logits[c] = b[c];
          for (std::size_t j = 0; j < d; ++j) logits[c] += w(c, j) * row[j];
          mx = std::max(mx, logits[c]);
        }
        double z = 0.0;
        for (double& l : logits) z += (l = std::exp(l - mx));
        for (std::size_t c = 0; c < k; ++c) {
          const double g = logits[c] / z - (c == y_train[order[t]] ? 1.0 : 0.0);
          gb[c] += g;
          for (std::size_t j = 0; j < d; ++j) gw(c, j) += g * row[j];
        }
      }
      const double scale_lr = kLr / static_cast<double>(end - start);
      for (std::size_t i = 0; i < w.data.size(); ++i) w.data[i] -= scale_lr * gw.data[i];
      for (std::size_t c = 0; c < k; ++c) b[c] -= scale_lr * gb[c];
    }
  }

  auto accuracy = [&](const MultimodalModel& model) {
    Matrix xt = encode(model, Modality::A, gather_rows(bundle.samples_a, test_ids));
    standardize(xt, mean, scale);
    std::size_t correct = 0;
    for (std::size_t r = 0; r < xt.rows; ++r) {
      std::size_t best = 0;
      double best_v = -INFINITY;
      for (std::size_t c = 0; c < k; ++c) {
        double v = b[c];
        for (std::size_t j = 0; j < d; ++j) v += w(c, j) * xt(r, j);
        if (v > best_v) {
          best_v = v;
          best = c;
        }
      }
      correct += best == y_test[r];
    }
    return 100.0 * static_cast<double>(correct) / static_cast<double>(xt.rows);
  };
  return {accuracy(f), accuracy(f_prime)};
}

// ---- reports ------------------------------------------------------------------------

MetricsReport evaluate_model(const MultimodalModel& f, const MultimodalModel& f_prime, const DatasetBundle& bundle,
                             std::uint64_t seed) {
  MetricsReport r;
  r.seed = seed;
  const auto fm = eval_forgetting(f_prime, bundle, make_eval_sets(bundle, seed));
  r.d_test = fm.d_test;
  r.d_f = fm.d_f;
  r.unrelated = fm.unrelated;
  r.gap = fm.gap;
  const auto rs = make_retrieval_set(bundle);
  r.mean_recall = eval_mean_recall(f_prime, rs.queries, rs.candidates, rs.relevant);
  r.mi_ratio = mi_ratio(f, f_prime, bundle, seed);
  const auto probe = unimodal_probe(f, f_prime, bundle, seed);
  r.probe_orig = probe.acc_original;
  r.probe_unlearned = probe.acc_unlearned;
  return r;
}

std::vector<MetricsReport> run_ablation(const MultimodalModel& f, const DatasetBundle& bundle,
                                        const UnlearnConfig& base_config, const std::string& config_hash) {
  base_config.validate();
  struct Variant {
    const char* name;
    double alpha, beta, gamma;
  };
  const Variant variants[] = {{"full", base_config.alpha, base_config.beta, base_config.gamma},
                              {"-MD", 0.0, base_config.beta, base_config.gamma},
                              {"-UKR", base_config.alpha, base_config.beta, 0.0},
                              {"-MKR", base_config.alpha, 0.0, base_config.gamma}};
  std::vector<MetricsReport> rows;
  for (const auto& v : variants) {
    UnlearnConfig cfg = base_config;
    cfg.alpha = v.alpha;
    cfg.beta = v.beta;
    cfg.gamma = v.gamma;
    const auto result = multidelete_unlearn(f, bundle, cfg);
    MetricsReport r = evaluate_model(f, result.model, bundle, base_config.seed);
    r.method = "multidelete";
    r.variant = v.name;
    r.seconds = result.trace.wall_seconds;
    r.config_hash = config_hash;
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace mmu
