#pragma once

// Dual-encoder matching model: two tanh MLP encoders, a fusion module
// (feedforward over the concatenated embeddings, or a parameter-free dot
// product) and a logistic matching head over the fused representation.
// Gradients are hand-derived backprop; grad_check() verifies them.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mmu/matrix.hpp"
#include "mmu/synthdata.hpp"

namespace mmu {

enum class FusionKind { parametric, dot_product };

struct ModelConfig {
  int dim_a = 24;
  int dim_b = 16;
  int emb_dim = 16;
  std::vector<int> hidden_a{32};
  std::vector<int> hidden_b{32};
  FusionKind fusion_kind = FusionKind::parametric;
  std::vector<int> fusion_dims{32};  // ignored for dot_product

  void validate() const;  // throws ConfigError
  std::size_t fused_dim() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct DenseLayer {
  Matrix weight;  // out x in
  std::vector<double> bias;
  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

struct Mlp {
  std::vector<DenseLayer> layers;
  bool activate_last = false;  // tanh after the final layer
  friend bool operator==(const Mlp&, const Mlp&) = default;
};

struct MlpCache {
  std::vector<Matrix> inputs;  // inputs[l] feeds layer l
  std::vector<Matrix> pre;     // pre-activations of layer l
  Matrix output;
};

Matrix mlp_forward(const Mlp& mlp, const Matrix& x, MlpCache* cache = nullptr);
// Accumulates parameter gradients into `grad`, returns d(loss)/d(input).
Matrix mlp_backward(const Mlp& mlp, const MlpCache& cache, Matrix d_out, Mlp& grad);

enum class ParamGroup { enc_a, enc_b, fusion, head };

struct MultimodalModel {
  ModelConfig config;
  Mlp enc_a;
  Mlp enc_b;
  Mlp fusion;  // empty for dot_product
  DenseLayer head;  // fused_dim -> 1

  friend bool operator==(const MultimodalModel&, const MultimodalModel&) = default;
};

// Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)]. A dot-product head starts
// as the identity (weight 1, bias 0) so the score is the logit.
MultimodalModel init_model(const ModelConfig& config, std::uint64_t seed);
MultimodalModel zeros_like(const MultimodalModel& model);

struct ParamView {
  std::string name;
  ParamGroup group;
  std::vector<std::size_t> shape;
  std::span<double> values;
};
struct ConstParamView {
  std::string name;
  ParamGroup group;
  std::vector<std::size_t> shape;
  std::span<const double> values;
};

// Stable order and names, e.g. "enc_A.0.weight", "fusion.0.bias", "head.weight".
std::vector<ParamView> parameters(MultimodalModel& model);
std::vector<ConstParamView> parameters(const MultimodalModel& model);
std::size_t parameter_count(const MultimodalModel& model);

// Which parameter groups an update may touch.
struct GroupMask {
  bool enc_a = true;
  bool enc_b = true;
  bool fusion = true;
  bool head = true;
  static GroupMask all() { return {}; }
  static GroupMask fusion_only() { return {false, false, true, true}; }
  bool allows(ParamGroup g) const;
};

void sgd_update(MultimodalModel& model, const MultimodalModel& grad, double lr, GroupMask mask);
bool all_finite(const MultimodalModel& model);

// ---- forward ------------------------------------------------------------

Matrix encode(const MultimodalModel& model, Modality modality, const Matrix& features);
Matrix fuse(const MultimodalModel& model, const Matrix& emb_a, const Matrix& emb_b);

struct PairCache {
  MlpCache enc_a;
  MlpCache enc_b;
  MlpCache fusion;
  Matrix emb_a;
  Matrix emb_b;
  Matrix fused;
  Matrix logits;  // n x 1
};

// Full forward over row-aligned feature batches.
PairCache forward_pairs(const MultimodalModel& model, const Matrix& xa, const Matrix& xb);
PairCache forward_pairs(const MultimodalModel& model, const DatasetBundle& bundle, std::span<const PairRef> pairs);

// Upstream gradients; any may be left empty (0 x 0) meaning zero.
struct PairGrads {
  Matrix d_logits;
  Matrix d_fused;
  Matrix d_emb_a;
  Matrix d_emb_b;
};
void backward_pairs(const MultimodalModel& model, const PairCache& cache, const PairGrads& upstream,
                    MultimodalModel& grad);

double logistic(double z);
std::vector<double> match_logits(const MultimodalModel& model, const DatasetBundle& bundle,
                                 std::span<const PairRef> pairs);
std::vector<double> predict_match(const MultimodalModel& model, const DatasetBundle& bundle,
                                  std::span<const PairRef> pairs);

// Entry (i, j) is the matching logit of (queries row i, candidates row j).
Matrix score_matrix(const MultimodalModel& model, const Matrix& queries_a, const Matrix& candidates_b);

// ---- training -----------------------------------------------------------

struct TrainConfig {
  double lr = 0.1;
  int epochs = 60;
  int batch_size = 64;
  std::uint64_t seed = 0;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct TrainResult {
  MultimodalModel model;
  std::vector<double> epoch_loss;
  std::vector<double> val_loss;
  std::vector<double> epoch_seconds;  // elapsed at the end of each epoch
  int best_epoch = 0;  // 0 = initialization
  double seconds = 0.0;
};

// Mean binary cross-entropy with logits over positives (label 1) and
// negatives (label 0). Accumulates d(loss)/d(params) into grad if given.
double bce_loss(const MultimodalModel& model, const DatasetBundle& bundle, std::span<const PairRef> positives,
                std::span<const PairRef> negatives, MultimodalModel* grad = nullptr);

// Per-pair BCE for a single label.
std::vector<double> pair_bce(const MultimodalModel& model, const DatasetBundle& bundle,
                             std::span<const PairRef> pairs, bool related);

// SGD on BCE matching over `pool` (pair ids) with one sampled unrelated
// negative per positive. Keeps the epoch with the lowest validation BCE.
TrainResult train_matching(const MultimodalModel& init, const DatasetBundle& bundle,
                           std::span<const std::size_t> pool, const TrainConfig& config);

// The original model f: fresh init from config.seed, trained on all train pairs.
TrainResult train_original(const DatasetBundle& bundle, const ModelConfig& model_config, const TrainConfig& config);

// ---- gradient checking --------------------------------------------------

// Central differences with step 1e-5 at `probe_points` random coordinates.
// Relative error per coordinate is |a - n| / max(|a|, |n|, 1e-6); returns the
// maximum (0 when every gradient is 0).
double grad_check(std::span<const double> theta, const std::function<double(std::span<const double>)>& loss,
                  std::span<const double> analytic, std::size_t probe_points, std::uint64_t seed);

struct LossAndGrad {
  double value = 0.0;
  MultimodalModel grad;
};
using ModelLoss = std::function<LossAndGrad(const MultimodalModel&)>;

double grad_check(const MultimodalModel& model, const ModelLoss& loss, std::size_t probe_points, std::uint64_t seed);

}  // namespace mmu
