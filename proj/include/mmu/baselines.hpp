#pragma once

// Comparison unlearning methods sharing one entry point with MultiDelete:
// every method maps (f, bundle, config) to (f', trace).
//
//   retrain   fresh model trained on D_r only
//   finetune  continued BCE training on D_r (or D_f) with a larger lr
//   neggrad   gradient ascent on the matching BCE restricted to D_f
//   dtd       a few BCE steps on D_r, then Gaussian noise on the weights

#include <cstdint>
#include <span>
#include <string>

#include "mmu/model.hpp"
#include "mmu/synthdata.hpp"
#include "mmu/unlearn.hpp"

namespace mmu {

enum class BaselineMethod { retrain, finetune, neggrad, dtd };
enum class FinetuneTarget { retained, deleted };

std::string to_string(BaselineMethod m);
BaselineMethod baseline_method_from(const std::string& name);  // throws ConfigError

struct BaselineConfig {
  BaselineMethod method = BaselineMethod::finetune;
  double lr = 0.1;
  int steps = 100;
  int batch_size = 64;
  double lr_multiplier = 2.0;  // finetune
  double noise_std = 0.05;     // dtd
  FinetuneTarget finetune_target = FinetuneTarget::retained;
  // neggrad stops once its balanced accuracy on D_f (D_f pairs against
  // unrelated combinations inside D_f), as a fraction, is <= this.
  double neggrad_floor = 0.25;
  bool fusion_only = false;
  std::uint64_t seed = 0;

  void validate() const;  // throws ConfigError
  friend bool operator==(const BaselineConfig&, const BaselineConfig&) = default;
};

// theta <- theta + lr * grad
void ascent_step(std::span<double> theta, std::span<const double> grad, double lr);

// Fresh initialization (seed derived from config.seed, never equal to f's
// init stream) trained with the original objective on D_r.
TrainResult retrain(const DatasetBundle& bundle, const ModelConfig& model_config, const TrainConfig& config);

UnlearnResult finetune(const MultimodalModel& f, const DatasetBundle& bundle, const BaselineConfig& config);
UnlearnResult neggrad(const MultimodalModel& f, const DatasetBundle& bundle, const BaselineConfig& config);
UnlearnResult dtd(const MultimodalModel& f, const DatasetBundle& bundle, const BaselineConfig& config);

// Dispatch on config.method. Retrain uses model_config/train_config (with
// the seed taken from config.seed) and rejects fusion_only.
UnlearnResult run_baseline(const MultimodalModel& f, const DatasetBundle& bundle, const BaselineConfig& config,
                           const TrainConfig& train_config);

}  // namespace mmu
