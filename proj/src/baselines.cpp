#include "mmu/baselines.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>

#include "mmu/errors.hpp"
#include "mmu/metrics.hpp"
#include "mmu/rng.hpp"

namespace mmu {
namespace {

enum StreamTag : std::uint64_t { kRetrainInit = 301, kOrder, kNegatives, kNoise, kFloorNegatives };

using Clock = std::chrono::steady_clock;

double since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// `steps` SGD steps of BCE over `pool`, cycling through shuffled passes.
// sign = +1 descends, -1 ascends. With negatives=false only the positive
// term is used. `stop` is checked after every step.
UnlearnTrace bce_steps(MultimodalModel& model, const DatasetBundle& bundle, std::span<const std::size_t> pool,
                       int steps, double lr, double sign, int batch_size, bool negatives, GroupMask mask,
                       std::uint64_t seed, const std::function<bool()>& stop = {}) {
  UnlearnTrace trace;
  const auto t0 = Clock::now();
  if (steps == 0) return trace;
  if (pool.empty()) throw InvalidInput("baseline: empty target set");

  Rng order_rng = make_stream(seed, kOrder);
  Rng neg_rng = make_stream(seed, kNegatives);
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  std::vector<std::size_t> order(pool.begin(), pool.end());
  std::size_t cursor = order.size();
  const auto batch = static_cast<std::size_t>(batch_size);

  for (int step = 1; step <= steps; ++step) {
    if (cursor >= order.size()) {
      std::shuffle(order.begin(), order.end(), order_rng);
      cursor = 0;
    }
    const std::size_t end = std::min(order.size(), cursor + batch);
    std::vector<PairRef> pos, neg;
    for (std::size_t i = cursor; i < end; ++i) {
      const auto& p = bundle.pairs[order[i]];
      pos.push_back({p.a_id, p.b_id});
      if (!negatives) continue;
      for (int tries = 0;; ++tries) {
        const auto& q = bundle.pairs[pool[pick(neg_rng)]];
        if (q.concept_id != p.concept_id) {
          neg.push_back({p.a_id, q.b_id});
          break;
        }
        if (tries > 10000) throw InsufficientData("baseline: no unrelated negative available");
      }
    }
    cursor = end;

    MultimodalModel grad = zeros_like(model);
    const double loss = bce_loss(model, bundle, pos, neg, &grad);
    trace.rows.push_back({step, 0.0, 0.0, 0.0, loss, since(t0)});
    if (!std::isfinite(loss)) {
      trace.wall_seconds = since(t0);
      throw UnlearnFailure("baseline: non-finite loss at step " + std::to_string(step), trace);
    }
    sgd_update(model, grad, sign * lr, mask);
    if (!all_finite(model)) {
      trace.wall_seconds = since(t0);
      throw UnlearnFailure("baseline: non-finite parameters at step " + std::to_string(step), trace);
    }
    if (stop && stop()) break;
  }
  trace.selected_step = trace.rows.empty() ? 0 : trace.rows.back().step;
  trace.wall_seconds = since(t0);
  return trace;
}

GroupMask mask_for(const BaselineConfig& config) {
  return config.fusion_only ? GroupMask::fusion_only() : GroupMask::all();
}

}  // namespace

std::string to_string(BaselineMethod m) {
  switch (m) {
    case BaselineMethod::retrain: return "retrain";
    case BaselineMethod::finetune: return "finetune";
    case BaselineMethod::neggrad: return "neggrad";
    case BaselineMethod::dtd: return "dtd";
  }
  return "?";
}

BaselineMethod baseline_method_from(const std::string& name) {
  for (auto m : {BaselineMethod::retrain, BaselineMethod::finetune, BaselineMethod::neggrad, BaselineMethod::dtd})
    if (to_string(m) == name) return m;
  throw ConfigError("unknown baseline method '" + name + "'");
}

void BaselineConfig::validate() const {
  if (!(lr > 0.0)) throw ConfigError("baseline.lr must be > 0");
  if (steps < 0) throw ConfigError("baseline.steps must be >= 0");
  if (batch_size < 1) throw ConfigError("baseline.batch_size must be >= 1");
  if (method == BaselineMethod::finetune && !(lr_multiplier >= 1.0))
    throw ConfigError("baseline.lr_multiplier must be >= 1");
  if (method == BaselineMethod::dtd && !(noise_std >= 0.0)) throw ConfigError("baseline.noise_std must be >= 0");
  if (method == BaselineMethod::neggrad && !(neggrad_floor >= 0.0 && neggrad_floor <= 1.0))
    throw ConfigError("baseline.neggrad_floor must be in [0, 1]");
  if (method == BaselineMethod::retrain && fusion_only)
    throw ConfigError("baseline: retrain has no fusion_only variant");
}

void ascent_step(std::span<double> theta, std::span<const double> grad, double lr) {
  if (theta.size() != grad.size()) throw ShapeError("ascent_step: size mismatch");
  for (std::size_t i = 0; i < theta.size(); ++i) theta[i] += lr * grad[i];
}

TrainResult retrain(const DatasetBundle& bundle, const ModelConfig& model_config, const TrainConfig& config) {
  const auto retained = bundle.retained_ids();
  if (retained.empty()) throw InvalidInput("retrain: D_r is empty");
  const std::uint64_t init_seed = mix64(config.seed ^ mix64(kRetrainInit));
  return train_matching(init_model(model_config, init_seed), bundle, retained, config);
}

UnlearnResult finetune(const MultimodalModel& f, const DatasetBundle& bundle, const BaselineConfig& config) {
  config.validate();
  const auto target =
      config.finetune_target == FinetuneTarget::retained ? bundle.retained_ids() : bundle.deleted_ids();
  UnlearnResult out{f, {}};
  out.trace = bce_steps(out.model, bundle, target, config.steps, config.lr * config.lr_multiplier, 1.0,
                        config.batch_size, true, mask_for(config), config.seed);
  return out;
}

UnlearnResult neggrad(const MultimodalModel& f, const DatasetBundle& bundle, const BaselineConfig& config) {
  config.validate();
  const auto deleted = bundle.deleted_ids();
  if (deleted.empty()) throw InvalidInput("neggrad: D_f is empty");
  const auto deleted_refs = bundle.refs(deleted);
  Rng floor_rng = make_stream(config.seed, kFloorNegatives);
  const auto deleted_neg = sample_unrelated_from(bundle, deleted, deleted_refs.size(), floor_rng);
  UnlearnResult out{f, {}};
  auto floor_reached = [&] {
    return eval_matching(out.model, bundle, deleted_refs, deleted_neg) <= 100.0 * config.neggrad_floor;
  };
  out.trace = bce_steps(out.model, bundle, deleted, config.steps, config.lr, -1.0, config.batch_size, true,
                        mask_for(config), config.seed, floor_reached);
  return out;
}

UnlearnResult dtd(const MultimodalModel& f, const DatasetBundle& bundle, const BaselineConfig& config) {
  config.validate();
  const auto t0 = Clock::now();
  UnlearnResult out{f, {}};
  out.trace = bce_steps(out.model, bundle, bundle.retained_ids(), config.steps, config.lr, 1.0, config.batch_size,
                        true, mask_for(config), config.seed);
  if (config.noise_std > 0.0) {
    const GroupMask mask = mask_for(config);
    Rng rng = make_stream(config.seed, kNoise);
    std::normal_distribution<double> noise(0.0, config.noise_std);
    for (auto& p : parameters(out.model)) {
      if (!mask.allows(p.group)) continue;
      for (double& v : p.values) v += noise(rng);
    }
  }
  out.trace.wall_seconds = since(t0);
  return out;
}

UnlearnResult run_baseline(const MultimodalModel& f, const DatasetBundle& bundle, const BaselineConfig& config,
                           const TrainConfig& train_config) {
  config.validate();
  switch (config.method) {
    case BaselineMethod::retrain: {
      TrainConfig tc = train_config;
      tc.seed = config.seed;
      TrainResult r = retrain(bundle, f.config, tc);
      UnlearnResult out{std::move(r.model), {}};
      for (std::size_t e = 0; e < r.epoch_loss.size(); ++e)
        out.trace.rows.push_back({static_cast<int>(e + 1), 0.0, 0.0, 0.0, r.epoch_loss[e], r.epoch_seconds[e]});
      out.trace.selected_step = r.best_epoch;
      out.trace.wall_seconds = r.seconds;
      return out;
    }
    case BaselineMethod::finetune: return finetune(f, bundle, config);
    case BaselineMethod::neggrad: return neggrad(f, bundle, config);
    case BaselineMethod::dtd: return dtd(f, bundle, config);
  }
  throw ConfigError("run_baseline: unknown method");
}

}  // namespace mmu
