#pragma once

// MultiDelete unlearning.
//
// The unlearned model f' starts as a copy of the trained model f, which then
// serves as a frozen teacher. Each SGD step minimizes
//
//   L = alpha * L_MD + beta * L_MKR + gamma * L_UKR
//
//   L_MD   fused reps of deleted pairs under f'  vs  fused reps of freshly
//          sampled unrelated D_r combinations under f (k per deleted pair)
//   L_MKR  fused reps of retained pairs under f' vs under f
//   L_UKR  [emb_A; emb_B] of deleted items under f' vs under f
//
// with mean squared error as the distance and concatenation as the readout.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mmu/errors.hpp"
#include "mmu/matrix.hpp"
#include "mmu/model.hpp"
#include "mmu/synthdata.hpp"

namespace mmu {

enum class Distance { mse };
enum class Readout { concatenation };

struct UnlearnConfig {
  double alpha = 1.0;
  double beta = 1.0;
  double gamma = 1.0;
  Distance distance = Distance::mse;
  Readout readout = Readout::concatenation;
  double lr = 0.01;
  int steps = 500;
  // When > 0, overrides steps with epochs * ceil(|D_f| / batch_f) so the
  // amount of work follows the deletion volume.
  int epochs = 0;
  int batch_f = 32;
  int batch_r = 64;
  int unrelated_per_deleted = 1;
  bool fusion_only = false;
  std::uint64_t seed = 0;
  // Checkpoints count as decoupled when decoupling_statistic <= this.
  double decoupling_tolerance = 0.1;
  int eval_every = 25;

  void validate() const;  // throws ConfigError
  friend bool operator==(const UnlearnConfig&, const UnlearnConfig&) = default;
};

struct TraceRow {
  int step = 0;
  double l_md = 0.0;
  double l_mkr = 0.0;
  double l_ukr = 0.0;
  double total = 0.0;
  double seconds = 0.0;  // elapsed since the loop started
  friend bool operator==(const TraceRow&, const TraceRow&) = default;
};

struct UnlearnTrace {
  std::vector<TraceRow> rows;
  double wall_seconds = 0.0;
  int selected_step = 0;
};

struct UnlearnResult {
  MultimodalModel model;
  UnlearnTrace trace;
};

// Thrown when the loop meets a non-finite loss; carries the partial trace.
class UnlearnFailure : public TrainingFailure {
 public:
  UnlearnFailure(const std::string& what, UnlearnTrace trace) : TrainingFailure(what), trace_(std::move(trace)) {}
  const UnlearnTrace& trace() const noexcept { return trace_; }

 private:
  UnlearnTrace trace_;
};

// Readout over a tuple of row-aligned representations: per-row concatenation.
Matrix readout(Readout kind, std::span<const Matrix* const> parts);

// Mean over all elements of (a - b)^2; writes d/da into d_a when given.
double distance(Distance kind, const Matrix& a, const Matrix& b, Matrix* d_a = nullptr);

// The frozen model f. With a bundle it precomputes the embeddings of every
// sample once; results are bitwise equal to running f directly.
class Teacher {
 public:
  explicit Teacher(const MultimodalModel& f);
  Teacher(const MultimodalModel& f, const DatasetBundle& bundle);

  const MultimodalModel& model() const { return *f_; }
  Matrix fused(const DatasetBundle& bundle, std::span<const PairRef> pairs) const;
  Matrix embeddings(const DatasetBundle& bundle, std::span<const PairRef> pairs, Matrix* emb_b) const;

 private:
  const MultimodalModel* f_;
  bool cached_ = false;
  Matrix emb_a_;
  Matrix emb_b_;
};

// Individual property losses. |unrelated| must be k * |deleted|; unrelated
// rows [i*k, (i+1)*k) are the targets of deleted pair i. Gradients (when
// `grad` is given) are accumulated for f' only.
double loss_md(const MultimodalModel& f_prime, const Teacher& f, const DatasetBundle& bundle,
               std::span<const PairRef> deleted, std::span<const PairRef> unrelated, Distance dist = Distance::mse,
               Readout ro = Readout::concatenation, MultimodalModel* grad = nullptr);
double loss_mkr(const MultimodalModel& f_prime, const Teacher& f, const DatasetBundle& bundle,
                std::span<const PairRef> retained, Distance dist = Distance::mse, Readout ro = Readout::concatenation,
                MultimodalModel* grad = nullptr);
double loss_ukr(const MultimodalModel& f_prime, const Teacher& f, const DatasetBundle& bundle,
                std::span<const PairRef> deleted, Distance dist = Distance::mse, MultimodalModel* grad = nullptr);

double total_loss(double l_md, double l_mkr, double l_ukr, double alpha, double beta, double gamma);

struct UnlearnBatch {
  std::vector<PairRef> deleted;
  std::vector<PairRef> unrelated;
  std::vector<PairRef> retained;
};

struct LossBreakdown {
  double md = 0.0;
  double mkr = 0.0;
  double ukr = 0.0;
  double total = 0.0;
};

// All three terms from shared forward passes. Terms with zero weight are
// reported but contribute nothing to `grad`.
LossBreakdown multidelete_loss(const MultimodalModel& f_prime, const Teacher& f, const DatasetBundle& bundle,
                               const UnlearnBatch& batch, const UnlearnConfig& config, MultimodalModel* grad);

UnlearnResult multidelete_unlearn(const MultimodalModel& f, const DatasetBundle& bundle, const UnlearnConfig& config);

// || mean_{D_f} phi(f'(I_i,T_i)) - mean_{unrelated} phi(f(I_p,T_q)) ||_2 over
// n_unrelated combinations sampled from D_r.
double decoupling_statistic(const MultimodalModel& f_prime, const MultimodalModel& f, const DatasetBundle& bundle,
                            std::size_t n_unrelated, std::uint64_t seed);

}  // namespace mmu
