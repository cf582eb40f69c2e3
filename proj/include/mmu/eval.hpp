#pragma once

// Evaluation of an unlearned model f' against the original f: matching
// accuracy on D_Test and D_f, retrieval mean recall, membership-inference
// ratio, unimodal probe accuracy, and the objective ablation grid.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mmu/matrix.hpp"
#include "mmu/model.hpp"
#include "mmu/synthdata.hpp"
#include "mmu/unlearn.hpp"

namespace mmu {

// Fixed pair sets so every model is scored on the same combinations.
struct EvalSets {
  std::vector<PairRef> test_pos;
  std::vector<PairRef> test_neg;   // unrelated combinations inside the test split
  std::vector<PairRef> df_pos;
  std::vector<PairRef> df_neg;     // unrelated combinations inside D_f
  std::vector<PairRef> unrelated;  // fresh unrelated combinations from D_r, |D_f| of them
};
EvalSets make_eval_sets(const DatasetBundle& bundle, std::uint64_t seed);

struct ForgettingMetrics {
  double d_test = 0.0;     // balanced accuracy on test_pos vs test_neg
  double d_f = 0.0;        // balanced accuracy on df_pos vs df_neg
  double unrelated = 0.0;  // same, with `unrelated` taking the place of df_pos
  double gap = 0.0;        // |d_f - unrelated|
};
ForgettingMetrics eval_forgetting(const MultimodalModel& model, const DatasetBundle& bundle, const EvalSets& sets);

// One pair per test concept: A rows query, B rows are candidates, the hit
// for query i is candidate i.
struct RetrievalSet {
  Matrix queries;
  Matrix candidates;
  std::vector<std::vector<std::size_t>> relevant;
};
RetrievalSet make_retrieval_set(const DatasetBundle& bundle, Split split = Split::test);

// ---- membership inference --------------------------------------------------

// Per pair (scored as related): [p, 1 - p, BCE].
Matrix mi_features(const MultimodalModel& model, const DatasetBundle& bundle, std::span<const PairRef> pairs);

// Linear max-margin classifier (hinge-loss SVM fitted by dual coordinate
// descent on standardized features) with a logistic calibration of the margin.
struct MIAttacker {
  std::vector<double> mean;
  std::vector<double> scale;
  std::vector<double> weights;
  double bias = 0.0;
  double calib_a = 1.0;
  double calib_b = 0.0;

  double margin(std::span<const double> feature) const;
  double membership(std::span<const double> feature) const;  // in [0,1]
};

// labels: 1 member, 0 non-member. Throws TrainingFailure on single-class data.
MIAttacker fit_mi_attacker(const Matrix& features, const std::vector<int>& labels, std::uint64_t seed,
                           double c = 1.0);

// Members: |val| pairs drawn from D_r; non-members: the validation split.
MIAttacker train_mi_attacker(const MultimodalModel& model, const DatasetBundle& bundle, std::uint64_t seed);

// Mean membership probability over `pairs`.
double existence_probability(const MIAttacker& attacker, const MultimodalModel& model, const DatasetBundle& bundle,
                             std::span<const PairRef> pairs);

// prior / post existence probability of D_f; post is clamped at 1e-6.
double mi_ratio(const MultimodalModel& f, const MultimodalModel& f_prime, const DatasetBundle& bundle,
                std::uint64_t seed);
double mi_ratio_from(double prior, double post);

// ---- unimodal probe -------------------------------------------------------

struct ProbeResult {
  double acc_original = 0.0;
  double acc_unlearned = 0.0;
};

// Softmax regression on standardized modality-A embeddings of f over the
// train-split samples; labels are concept_class(concept, n_classes). Scored
// on the test-split samples embedded by f and by f'.
ProbeResult unimodal_probe(const MultimodalModel& f, const MultimodalModel& f_prime, const DatasetBundle& bundle,
                           std::uint64_t seed);

// ---- reports ----------------------------------------------------------------

struct MetricsReport {
  std::string method;
  std::string variant;
  double d_test = 0.0;
  double d_f = 0.0;
  double unrelated = 0.0;
  double gap = 0.0;
  double mean_recall = 0.0;
  double mi_ratio = 0.0;
  double probe_orig = 0.0;
  double probe_unlearned = 0.0;
  double seconds = 0.0;
  std::string config_hash;
  std::uint64_t seed = 0;
  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

// Every metric of f' (relative to f where needed); method, variant,
// seconds and config_hash are left for the caller.
MetricsReport evaluate_model(const MultimodalModel& f, const MultimodalModel& f_prime, const DatasetBundle& bundle,
                             std::uint64_t seed);

// Variants "full", "-MD" (alpha=0), "-UKR" (gamma=0), "-MKR" (beta=0), all
// with base_config's seed; each row carries config_hash.
std::vector<MetricsReport> run_ablation(const MultimodalModel& f, const DatasetBundle& bundle,
                                        const UnlearnConfig& base_config, const std::string& config_hash = "");

}  // namespace mmu
