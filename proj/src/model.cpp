#include "mmu/model.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

#include "mmu/errors.hpp"
#include "mmu/kernels.hpp"
#include "mmu/rng.hpp"

namespace mmu {

namespace {

enum StreamTag : std::uint64_t { kInit = 101, kShuffle, kNegatives, kValNegatives, kProbe };

DenseLayer make_layer(std::size_t in, std::size_t out, Rng& rng) {
  DenseLayer layer{Matrix(out, in), std::vector<double>(out)};
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& w : layer.weight.data) w = dist(rng);
  for (double& b : layer.bias) b = dist(rng);
  return layer;
}

Mlp make_mlp(std::size_t in, const std::vector<int>& hidden, std::size_t out, bool activate_last, Rng& rng) {
  Mlp mlp;
  mlp.activate_last = activate_last;
  std::size_t width = in;
  for (int h : hidden) {
    mlp.layers.push_back(make_layer(width, static_cast<std::size_t>(h), rng));
    width = static_cast<std::size_t>(h);
  }
  if (out > 0) mlp.layers.push_back(make_layer(width, out, rng));
  return mlp;
}

Mlp zeros_mlp(const Mlp& m) {
  Mlp z = m;
  for (auto& l : z.layers) {
    std::fill(l.weight.data.begin(), l.weight.data.end(), 0.0);
    std::fill(l.bias.begin(), l.bias.end(), 0.0);
  }
  return z;
}

template <class View, class Model>
std::vector<View> collect_params(Model& model) {
  std::vector<View> out;
  auto add_mlp = [&](auto& mlp, const std::string& prefix, ParamGroup g) {
    for (std::size_t i = 0; i < mlp.layers.size(); ++i) {
      auto& l = mlp.layers[i];
      const std::string base = prefix + "." + std::to_string(i);
      out.push_back({base + ".weight", g, {l.weight.rows, l.weight.cols}, {l.weight.data.data(), l.weight.data.size()}});
      out.push_back({base + ".bias", g, {l.bias.size()}, {l.bias.data(), l.bias.size()}});
    }
  };
  add_mlp(model.enc_a, "enc_A", ParamGroup::enc_a);
  add_mlp(model.enc_b, "enc_B", ParamGroup::enc_b);
  add_mlp(model.fusion, "fusion", ParamGroup::fusion);
  auto& h = model.head;
  out.push_back({"head.weight", ParamGroup::head, {h.weight.rows, h.weight.cols}, {h.weight.data.data(), h.weight.data.size()}});
  out.push_back({"head.bias", ParamGroup::head, {h.bias.size()}, {h.bias.data(), h.bias.size()}});
  return out;
}

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

std::vector<double> flatten(const MultimodalModel& m) {
  std::vector<double> flat;
  for (const auto& p : parameters(m)) flat.insert(flat.end(), p.values.begin(), p.values.end());
  return flat;
}

void unflatten(std::span<const double> flat, MultimodalModel& m) {
  std::size_t pos = 0;
  for (auto& p : parameters(m)) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(pos), p.values.size(), p.values.begin());
    pos += p.values.size();
  }
}

}  // namespace

// ---- config ---------------------------------------------------------------

void ModelConfig::validate() const {
  if (dim_a < 1 || dim_b < 1) throw ConfigError("model input dims must be >= 1");
  if (emb_dim < 1) throw ConfigError("model.emb_dim must be >= 1");
  for (int h : hidden_a)
    if (h < 1) throw ConfigError("model.hidden_a widths must be >= 1");
  for (int h : hidden_b)
    if (h < 1) throw ConfigError("model.hidden_b widths must be >= 1");
  if (fusion_kind == FusionKind::parametric) {
    if (fusion_dims.empty()) throw ConfigError("model.fusion_dims must be nonempty for parametric fusion");
    for (int h : fusion_dims)
      if (h < 1) throw ConfigError("model.fusion_dims widths must be >= 1");
  }
}

std::size_t ModelConfig::fused_dim() const {
  return fusion_kind == FusionKind::dot_product ? 1 : static_cast<std::size_t>(fusion_dims.back());
}

bool GroupMask::allows(ParamGroup g) const {
  switch (g) {
    case ParamGroup::enc_a: return enc_a;
    case ParamGroup::enc_b: return enc_b;
    case ParamGroup::fusion: return fusion;
    case ParamGroup::head: return head;
  }
  return false;
}

// ---- MLP ------------------------------------------------------------------

Matrix mlp_forward(const Mlp& mlp, const Matrix& x, MlpCache* cache) {
  if (cache) {
    cache->inputs.clear();
    cache->pre.clear();
  }
  Matrix cur = x;
  for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
    const auto& layer = mlp.layers[l];
    Matrix y;
    kernels::dense_forward(cur, layer.weight, layer.bias, y);
    if (cache) {
      cache->inputs.push_back(std::move(cur));
      cache->pre.push_back(y);
    }
    const bool last = l + 1 == mlp.layers.size();
    if (!last || mlp.activate_last) kernels::tanh_inplace(y);
    cur = std::move(y);
  }
  if (cache) cache->output = cur;
  return cur;
}

Matrix mlp_backward(const Mlp& mlp, const MlpCache& cache, Matrix d_out, Mlp& grad) {
  for (std::size_t l = mlp.layers.size(); l-- > 0;) {
    const bool last = l + 1 == mlp.layers.size();
    if (!last || mlp.activate_last) {
      const Matrix& out = last ? cache.output : cache.inputs[l + 1];
      kernels::tanh_backward_inplace(out, d_out);
    }
    auto& g = grad.layers[l];
    kernels::dense_backward_params(d_out, cache.inputs[l], g.weight, g.bias);
    Matrix d_in;
    kernels::dense_backward_input(d_out, mlp.layers[l].weight, d_in);
    d_out = std::move(d_in);
  }
  return d_out;
}

// ---- model construction ---------------------------------------------------

MultimodalModel init_model(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng = make_stream(seed, kInit);
  MultimodalModel m;
  m.config = config;
  const auto emb = static_cast<std::size_t>(config.emb_dim);
  m.enc_a = make_mlp(static_cast<std::size_t>(config.dim_a), config.hidden_a, emb, false, rng);
  m.enc_b = make_mlp(static_cast<std::size_t>(config.dim_b), config.hidden_b, emb, false, rng);
  if (config.fusion_kind == FusionKind::parametric) {
    std::vector<int> hidden(config.fusion_dims.begin(), config.fusion_dims.end() - 1);
    m.fusion = make_mlp(2 * emb, hidden, static_cast<std::size_t>(config.fusion_dims.back()), true, rng);
    m.head = make_layer(config.fused_dim(), 1, rng);
  } else {
    m.fusion.activate_last = false;
    m.head = DenseLayer{Matrix(1, 1, 1.0), {0.0}};
  }
  return m;
}

MultimodalModel zeros_like(const MultimodalModel& model) {
  MultimodalModel z;
  z.config = model.config;
  z.enc_a = zeros_mlp(model.enc_a);
  z.enc_b = zeros_mlp(model.enc_b);
  z.fusion = zeros_mlp(model.fusion);
  z.head = model.head;
  std::fill(z.head.weight.data.begin(), z.head.weight.data.end(), 0.0);
  std::fill(z.head.bias.begin(), z.head.bias.end(), 0.0);
  return z;
}

std::vector<ParamView> parameters(MultimodalModel& model) { return collect_params<ParamView>(model); }
std::vector<ConstParamView> parameters(const MultimodalModel& model) {
  return collect_params<ConstParamView>(model);
}

std::size_t parameter_count(const MultimodalModel& model) {
  std::size_t n = 0;
  for (const auto& p : parameters(model)) n += p.values.size();
  return n;
}

void sgd_update(MultimodalModel& model, const MultimodalModel& grad, double lr, GroupMask mask) {
  auto params = parameters(model);
  const auto grads = parameters(grad);
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!mask.allows(params[i].group)) continue;
    auto& p = params[i].values;
    const auto& g = grads[i].values;
    for (std::size_t k = 0; k < p.size(); ++k) p[k] -= lr * g[k];
  }
}

bool all_finite(const MultimodalModel& model) {
  for (const auto& p : parameters(model))
    for (double v : p.values)
      if (!std::isfinite(v)) return false;
  return true;
}

// ---- forward / backward ---------------------------------------------------

Matrix encode(const MultimodalModel& model, Modality modality, const Matrix& features) {
  const int expected = modality == Modality::A ? model.config.dim_a : model.config.dim_b;
  if (features.cols != static_cast<std::size_t>(expected))
    throw ShapeError("encode: expected " + std::to_string(expected) + " input columns, got " +
                     std::to_string(features.cols));
  return mlp_forward(modality == Modality::A ? model.enc_a : model.enc_b, features);
}

Matrix fuse(const MultimodalModel& model, const Matrix& emb_a, const Matrix& emb_b) {
  const auto emb = static_cast<std::size_t>(model.config.emb_dim);
  if (emb_a.cols != emb || emb_b.cols != emb || emb_a.rows != emb_b.rows)
    throw ShapeError("fuse: embeddings must both be (n x emb_dim)");
  if (model.config.fusion_kind == FusionKind::dot_product) {
    Matrix out;
    kernels::rowwise_dot(emb_a, emb_b, out);
    return out;
  }
  return mlp_forward(model.fusion, hconcat(emb_a, emb_b));
}

PairCache forward_pairs(const MultimodalModel& model, const Matrix& xa, const Matrix& xb) {
  if (xa.cols != static_cast<std::size_t>(model.config.dim_a) || xb.cols != static_cast<std::size_t>(model.config.dim_b))
    throw ShapeError("forward_pairs: input dims do not match the model");
  if (xa.rows != xb.rows) throw ShapeError("forward_pairs: batch sizes differ");
  PairCache c;
  c.emb_a = mlp_forward(model.enc_a, xa, &c.enc_a);
  c.emb_b = mlp_forward(model.enc_b, xb, &c.enc_b);
  if (model.config.fusion_kind == FusionKind::dot_product) {
    kernels::rowwise_dot(c.emb_a, c.emb_b, c.fused);
  } else {
    c.fused = mlp_forward(model.fusion, hconcat(c.emb_a, c.emb_b), &c.fusion);
  }
  kernels::dense_forward(c.fused, model.head.weight, model.head.bias, c.logits);
  return c;
}

PairCache forward_pairs(const MultimodalModel& model, const DatasetBundle& bundle, std::span<const PairRef> pairs) {
  std::vector<std::size_t> ia, ib;
  ia.reserve(pairs.size());
  ib.reserve(pairs.size());
  for (const auto& p : pairs) {
    ia.push_back(p.a_id);
    ib.push_back(p.b_id);
  }
  return forward_pairs(model, gather_rows(bundle.samples_a, ia), gather_rows(bundle.samples_b, ib));
}

void backward_pairs(const MultimodalModel& model, const PairCache& cache, const PairGrads& up, MultimodalModel& grad) {
  const std::size_t n = cache.fused.rows;
  Matrix d_fused(n, cache.fused.cols);
  if (!up.d_fused.empty()) add_inplace(d_fused, up.d_fused);
  if (!up.d_logits.empty()) {
    kernels::dense_backward_params(up.d_logits, cache.fused, grad.head.weight, grad.head.bias);
    Matrix d;
    kernels::dense_backward_input(up.d_logits, model.head.weight, d);
    add_inplace(d_fused, d);
  }

  Matrix d_ea, d_eb;
  if (model.config.fusion_kind == FusionKind::dot_product) {
    d_ea = Matrix(n, cache.emb_a.cols);
    d_eb = Matrix(n, cache.emb_b.cols);
    for (std::size_t i = 0; i < n; ++i) {
      const double g = d_fused.data[i];
      for (std::size_t k = 0; k < d_ea.cols; ++k) {
        d_ea(i, k) = g * cache.emb_b(i, k);
        d_eb(i, k) = g * cache.emb_a(i, k);
      }
    }
  } else {
    const Matrix d_concat = mlp_backward(model.fusion, cache.fusion, std::move(d_fused), grad.fusion);
    hsplit(d_concat, cache.emb_a.cols, d_ea, d_eb);
  }
  if (!up.d_emb_a.empty()) add_inplace(d_ea, up.d_emb_a);
  if (!up.d_emb_b.empty()) add_inplace(d_eb, up.d_emb_b);
  mlp_backward(model.enc_a, cache.enc_a, std::move(d_ea), grad.enc_a);
  mlp_backward(model.enc_b, cache.enc_b, std::move(d_eb), grad.enc_b);
}

double logistic(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

std::vector<double> match_logits(const MultimodalModel& model, const DatasetBundle& bundle,
                                 std::span<const PairRef> pairs) {
  return forward_pairs(model, bundle, pairs).logits.data;
}

std::vector<double> predict_match(const MultimodalModel& model, const DatasetBundle& bundle,
                                  std::span<const PairRef> pairs) {
  auto out = match_logits(model, bundle, pairs);
  for (double& v : out) v = logistic(v);
  return out;
}

Matrix score_matrix(const MultimodalModel& model, const Matrix& queries_a, const Matrix& candidates_b) {
  if (queries_a.rows == 0 || candidates_b.rows == 0) throw InvalidInput("score_matrix: empty query or candidate set");
  const Matrix ea = encode(model, Modality::A, queries_a);
  const Matrix eb = encode(model, Modality::B, candidates_b);
  const std::size_t nq = ea.rows, nc = eb.rows;
  Matrix scores(nq, nc);
  // One query row at a time keeps the fused batch at nc rows.
  std::vector<std::size_t> rep(nc);
  std::vector<std::size_t> all(nc);
  std::iota(all.begin(), all.end(), 0);
  for (std::size_t q = 0; q < nq; ++q) {
    std::fill(rep.begin(), rep.end(), q);
    const Matrix fused = fuse(model, gather_rows(ea, rep), eb);
    Matrix logits;
    kernels::dense_forward(fused, model.head.weight, model.head.bias, logits);
    std::copy(logits.data.begin(), logits.data.end(), scores.row(q).begin());
  }
  return scores;
}

// ---- training -------------------------------------------------------------

double bce_loss(const MultimodalModel& model, const DatasetBundle& bundle, std::span<const PairRef> positives,
                std::span<const PairRef> negatives, MultimodalModel* grad) {
  const std::size_t n = positives.size() + negatives.size();
  if (n == 0) throw InvalidInput("bce_loss: no pairs");
  std::vector<PairRef> all(positives.begin(), positives.end());
  all.insert(all.end(), negatives.begin(), negatives.end());
  const PairCache c = forward_pairs(model, bundle, all);
  double loss = 0.0;
  Matrix d_logits(n, 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double z = c.logits.data[i];
    const bool pos = i < positives.size();
    loss += pos ? softplus(-z) : softplus(z);
    d_logits.data[i] = (logistic(z) - (pos ? 1.0 : 0.0)) / static_cast<double>(n);
  }
  loss /= static_cast<double>(n);
  if (grad) backward_pairs(model, c, PairGrads{std::move(d_logits), {}, {}, {}}, *grad);
  return loss;
}

std::vector<double> pair_bce(const MultimodalModel& model, const DatasetBundle& bundle,
                             std::span<const PairRef> pairs, bool related) {
  auto z = match_logits(model, bundle, pairs);
  for (double& v : z) v = related ? softplus(-v) : softplus(v);
  return z;
}

TrainResult train_matching(const MultimodalModel& init, const DatasetBundle& bundle,
                           std::span<const std::size_t> pool, const TrainConfig& config) {
  if (pool.empty()) throw InvalidInput("train_matching: empty training pool");
  if (config.epochs < 0 || config.batch_size < 1 || !(config.lr > 0.0))
    throw ConfigError("train config needs epochs >= 0, batch_size >= 1, lr > 0");
  const auto start = std::chrono::steady_clock::now();

  TrainResult result;
  result.model = init;
  if (config.epochs == 0) return result;

  const auto val_ids = bundle.pair_ids(Split::val);
  const auto val_pos = bundle.refs(val_ids);
  Rng val_rng = make_stream(config.seed, kValNegatives);
  const auto val_neg = sample_unrelated_from(bundle, val_ids, val_pos.size(), val_rng);

  Rng shuffle_rng = make_stream(config.seed, kShuffle);
  Rng neg_rng = make_stream(config.seed, kNegatives);
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);

  MultimodalModel model = init;
  double best_val = bce_loss(model, bundle, val_pos, val_neg);
  std::vector<std::size_t> order(pool.begin(), pool.end());
  const auto batch = static_cast<std::size_t>(config.batch_size);

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    std::size_t batches = 0;
    for (std::size_t start_i = 0; start_i < order.size(); start_i += batch) {
      const std::size_t end_i = std::min(order.size(), start_i + batch);
      std::vector<PairRef> pos, neg;
      for (std::size_t i = start_i; i < end_i; ++i) {
        const auto& p = bundle.pairs[order[i]];
        pos.push_back({p.a_id, p.b_id});
        // Fails only when the whole pool is one concept.
        for (int tries = 0;; ++tries) {
          const auto& q = bundle.pairs[pool[pick(neg_rng)]];
          if (q.concept_id != p.concept_id) {
            neg.push_back({p.a_id, q.b_id});
            break;
          }
          if (tries > 10000) throw InsufficientData("train_matching: no unrelated negative available");
        }
      }
      MultimodalModel grad = zeros_like(model);
      const double loss = bce_loss(model, bundle, pos, neg, &grad);
      if (!std::isfinite(loss)) throw TrainingFailure("train_matching: non-finite loss at epoch " + std::to_string(epoch));
      sgd_update(model, grad, config.lr, GroupMask::all());
      epoch_loss += loss;
      ++batches;
    }
    result.epoch_loss.push_back(epoch_loss / static_cast<double>(batches));
    const double v = bce_loss(model, bundle, val_pos, val_neg);
    if (!std::isfinite(v)) throw TrainingFailure("train_matching: non-finite validation loss");
    result.val_loss.push_back(v);
    result.epoch_seconds.push_back(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
    if (v < best_val) {
      best_val = v;
      result.model = model;
      result.best_epoch = epoch;
    }
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

TrainResult train_original(const DatasetBundle& bundle, const ModelConfig& model_config, const TrainConfig& config) {
  const auto train = bundle.pair_ids(Split::train);
  if (train.empty()) throw InvalidInput("train_original: empty train split");
  return train_matching(init_model(model_config, config.seed), bundle, train, config);
}

// ---- gradient checking ----------------------------------------------------

double grad_check(std::span<const double> theta, const std::function<double(std::span<const double>)>& loss,
                  std::span<const double> analytic, std::size_t probe_points, std::uint64_t seed) {
  if (theta.size() != analytic.size()) throw ShapeError("grad_check: gradient length differs from theta");
  if (theta.empty()) return 0.0;
  constexpr double kStep = 1e-5;
  constexpr double kFloor = 1e-6;
  Rng rng = make_stream(seed, kProbe);
  std::uniform_int_distribution<std::size_t> pick(0, theta.size() - 1);
  std::vector<double> work(theta.begin(), theta.end());
  double worst = 0.0;
  for (std::size_t p = 0; p < probe_points; ++p) {
    const std::size_t i = pick(rng);
    const double orig = work[i];
    work[i] = orig + kStep;
    const double up = loss(work);
    work[i] = orig - kStep;
    const double down = loss(work);
    work[i] = orig;
    const double numeric = (up - down) / (2.0 * kStep);
    const double a = analytic[i];
    const double denom = std::max({std::abs(a), std::abs(numeric), kFloor});
    const double diff = std::abs(a - numeric);
    worst = std::max(worst, diff == 0.0 ? 0.0 : diff / denom);
  }
  return worst;
}

double grad_check(const MultimodalModel& model, const ModelLoss& loss, std::size_t probe_points, std::uint64_t seed) {
  const auto theta = flatten(model);
  const auto analytic = flatten(loss(model).grad);
  MultimodalModel scratch = model;
  auto value = [&](std::span<const double> flat) {
    unflatten(flat, scratch);
    return loss(scratch).value;
  };
  return grad_check(theta, value, analytic, probe_points, seed);
}

}  // namespace mmu
