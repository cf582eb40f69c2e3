#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mmu/matrix.hpp"
#include "mmu/model.hpp"
#include "mmu/synthdata.hpp"

namespace mmu {

// Balanced accuracy in percent. A pair is predicted "related" iff its logit
// is strictly positive (probability exactly 0.5 counts as unrelated).
double balanced_accuracy(std::span<const double> positive_logits, std::span<const double> negative_logits);

// Balanced accuracy of `model` over positives (label related) and negatives
// (label unrelated). Throws InvalidInput if either side is empty.
double eval_matching(const MultimodalModel& model, const DatasetBundle& bundle, std::span<const PairRef> positives,
                     std::span<const PairRef> negatives);

// Fraction of pairs predicted related, in [0,1].
double positive_rate(const MultimodalModel& model, const DatasetBundle& bundle, std::span<const PairRef> pairs);

// relevant[q] lists the candidate columns that count as hits for query q.
// Ranking is by descending score, ties by ascending candidate index. Percent.
double recall_at_k(const Matrix& scores, const std::vector<std::vector<std::size_t>>& relevant, std::size_t k);

// Mean of recall@1, @3, @10 in percent. With fewer than 10 candidates each k
// is truncated to the candidate count and a warning is logged.
double mean_recall(const Matrix& scores, const std::vector<std::vector<std::size_t>>& relevant);

double eval_mean_recall(const MultimodalModel& model, const Matrix& queries_a, const Matrix& candidates_b,
                        const std::vector<std::vector<std::size_t>>& relevant);

}  // namespace mmu
