#include "mmu/metrics.hpp"

#include <algorithm>

#include <spdlog/spdlog.h>

#include "mmu/errors.hpp"

namespace mmu {

double balanced_accuracy(std::span<const double> positive_logits, std::span<const double> negative_logits) {
  if (positive_logits.empty() || negative_logits.empty())
    throw InvalidInput("balanced accuracy needs both positives and negatives");
  const auto hits_pos = std::count_if(positive_logits.begin(), positive_logits.end(), [](double z) { return z > 0.0; });
  const auto hits_neg = std::count_if(negative_logits.begin(), negative_logits.end(), [](double z) { return !(z > 0.0); });
  const double tpr = static_cast<double>(hits_pos) / static_cast<double>(positive_logits.size());
  const double tnr = static_cast<double>(hits_neg) / static_cast<double>(negative_logits.size());
  return 50.0 * (tpr + tnr);
}

double eval_matching(const MultimodalModel& model, const DatasetBundle& bundle, std::span<const PairRef> positives,
                     std::span<const PairRef> negatives) {
  if (positives.empty() || negatives.empty()) throw InvalidInput("eval_matching: empty positives or negatives");
  const auto pos = match_logits(model, bundle, positives);
  const auto neg = match_logits(model, bundle, negatives);
  return balanced_accuracy(pos, neg);
}

double positive_rate(const MultimodalModel& model, const DatasetBundle& bundle, std::span<const PairRef> pairs) {
  if (pairs.empty()) throw InvalidInput("positive_rate: no pairs");
  const auto z = match_logits(model, bundle, pairs);
  return static_cast<double>(std::count_if(z.begin(), z.end(), [](double v) { return v > 0.0; })) /
         static_cast<double>(z.size());
}

double recall_at_k(const Matrix& scores, const std::vector<std::vector<std::size_t>>& relevant, std::size_t k) {
  if (scores.rows == 0 || scores.cols == 0) throw InvalidInput("recall_at_k: empty score matrix");
  if (relevant.size() != scores.rows) throw ShapeError("recall_at_k: one relevance list per query required");
  std::size_t hits = 0;
  for (std::size_t q = 0; q < scores.rows; ++q) {
    const auto row = scores.row(q);
    std::size_t best_rank = scores.cols;
    for (std::size_t t : relevant[q]) {
      if (t >= scores.cols) throw ShapeError("recall_at_k: relevant index out of range");
      std::size_t rank = 0;
      for (std::size_t j = 0; j < scores.cols; ++j)
        if (row[j] > row[t] || (row[j] == row[t] && j < t)) ++rank;
      best_rank = std::min(best_rank, rank);
    }
    if (best_rank < k) ++hits;
  }
  return 100.0 * static_cast<double>(hits) / static_cast<double>(scores.rows);
}

double mean_recall(const Matrix& scores, const std::vector<std::vector<std::size_t>>& relevant) {
  if (scores.rows == 0 || scores.cols == 0) throw InvalidInput("mean_recall: empty score matrix");
  if (scores.cols < 10)
    spdlog::warn("mean_recall: only {} candidates; recall@k truncated to k <= {}", scores.cols, scores.cols);
  double total = 0.0;
  for (std::size_t k : {std::size_t{1}, std::size_t{3}, std::size_t{10}})
    total += recall_at_k(scores, relevant, std::min(k, scores.cols));
  return total / 3.0;
}

double eval_mean_recall(const MultimodalModel& model, const Matrix& queries_a, const Matrix& candidates_b,
                        const std::vector<std::vector<std::size_t>>& relevant) {
  if (queries_a.rows == 0 || candidates_b.rows == 0) throw InvalidInput("eval_mean_recall: empty inputs");
  return mean_recall(score_matrix(model, queries_a, candidates_b), relevant);
}

}  // namespace mmu
