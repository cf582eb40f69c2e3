#include "mmu/unlearn.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

#include "mmu/metrics.hpp"
#include "mmu/rng.hpp"

namespace mmu {

namespace {

enum StreamTag : std::uint64_t { kDeleted = 201, kUnrelated, kRetained, kValNeg, kReference, kStatistic };

Matrix repeat_rows(const Matrix& m, std::size_t k) {
  Matrix out(m.rows * k, m.cols);
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t j = 0; j < k; ++j) std::copy(m.row(i).begin(), m.row(i).end(), out.row(i * k + j).begin());
  return out;
}

// Sums each run of k consecutive rows.
Matrix fold_rows(const Matrix& m, std::size_t k) {
  Matrix out(m.rows / k, m.cols);
  for (std::size_t i = 0; i < out.rows; ++i)
    for (std::size_t j = 0; j < k; ++j) {
      const auto src = m.row(i * k + j);
      auto dst = out.row(i);
      for (std::size_t c = 0; c < m.cols; ++c) dst[c] += src[c];
    }
  return out;
}

void scale(Matrix& m, double s) {
  for (double& v : m.data) v *= s;
}

std::size_t unrelated_ratio(std::size_t deleted, std::size_t unrelated) {
  if (deleted == 0) throw InvalidInput("loss_md: empty deleted batch");
  if (unrelated == 0 || unrelated % deleted != 0)
    throw InvalidInput("loss_md: unrelated batch must hold k >= 1 targets per deleted pair");
  return unrelated / deleted;
}

std::vector<double> column_mean(const Matrix& m) {
  std::vector<double> mean(m.cols, 0.0);
  for (std::size_t i = 0; i < m.rows; ++i)
    for (std::size_t c = 0; c < m.cols; ++c) mean[c] += m(i, c);
  for (double& v : mean) v /= static_cast<double>(m.rows);
  return mean;
}

double distance_between(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

}  // namespace

void UnlearnConfig::validate() const {
  if (!(alpha >= 0.0) || !(beta >= 0.0) || !(gamma >= 0.0)) throw ConfigError("unlearn weights must be >= 0");
  if (!(lr > 0.0)) throw ConfigError("unlearn.lr must be > 0");
  if (steps < 0 || epochs < 0) throw ConfigError("unlearn.steps and unlearn.epochs must be >= 0");
  if (batch_f < 1 || batch_r < 1) throw ConfigError("unlearn batch sizes must be >= 1");
  if (unrelated_per_deleted < 1) throw ConfigError("unlearn.unrelated_per_deleted must be >= 1");
  if (!(decoupling_tolerance >= 0.0)) throw ConfigError("unlearn.decoupling_tolerance must be >= 0");
  if (eval_every < 1) throw ConfigError("unlearn.eval_every must be >= 1");
}

Matrix readout(Readout, std::span<const Matrix* const> parts) {
  if (parts.empty()) throw InvalidInput("readout: nothing to combine");
  Matrix out = *parts[0];
  for (std::size_t i = 1; i < parts.size(); ++i) out = hconcat(out, *parts[i]);
  return out;
}

double distance(Distance, const Matrix& a, const Matrix& b, Matrix* d_a) {
  if (a.rows != b.rows || a.cols != b.cols) throw ShapeError("distance: shape mismatch");
  if (a.empty()) throw InvalidInput("distance: empty representations");
  const double n = static_cast<double>(a.size());
  double sum = 0.0;
  if (d_a) *d_a = Matrix(a.rows, a.cols);
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double diff = a.data[i] - b.data[i];
    sum += diff * diff;
    if (d_a) d_a->data[i] = 2.0 * diff / n;
  }
  return sum / n;
}

// ---- teacher ---------------------------------------------------------------

Teacher::Teacher(const MultimodalModel& f) : f_(&f) {}

Teacher::Teacher(const MultimodalModel& f, const DatasetBundle& bundle) : f_(&f), cached_(true) {
  emb_a_ = encode(f, Modality::A, bundle.samples_a);
  emb_b_ = encode(f, Modality::B, bundle.samples_b);
}

Matrix Teacher::embeddings(const DatasetBundle& bundle, std::span<const PairRef> pairs, Matrix* emb_b) const {
  std::vector<std::size_t> ia, ib;
  for (const auto& p : pairs) {
    ia.push_back(p.a_id);
    ib.push_back(p.b_id);
  }
  if (cached_) {
    if (emb_b) *emb_b = gather_rows(emb_b_, ib);
    return gather_rows(emb_a_, ia);
  }
  if (emb_b) *emb_b = encode(*f_, Modality::B, gather_rows(bundle.samples_b, ib));
  return encode(*f_, Modality::A, gather_rows(bundle.samples_a, ia));
}

Matrix Teacher::fused(const DatasetBundle& bundle, std::span<const PairRef> pairs) const {
  Matrix eb;
  const Matrix ea = embeddings(bundle, pairs, &eb);
  return fuse(*f_, ea, eb);
}

// ---- losses ----------------------------------------------------------------

double loss_md(const MultimodalModel& f_prime, const Teacher& f, const DatasetBundle& bundle,
               std::span<const PairRef> deleted, std::span<const PairRef> unrelated, Distance dist, Readout ro,
               MultimodalModel* grad) {
  const std::size_t k = unrelated_ratio(deleted.size(), unrelated.size());
  const PairCache s = forward_pairs(f_prime, bundle, deleted);
  const Matrix target = f.fused(bundle, unrelated);
  const Matrix* sp[] = {&s.fused};
  const Matrix* tp[] = {&target};
  const Matrix student = repeat_rows(readout(ro, sp), k);
  Matrix d;
  const double value = distance(dist, student, readout(ro, tp), grad ? &d : nullptr);
  if (grad) backward_pairs(f_prime, s, PairGrads{{}, fold_rows(d, k), {}, {}}, *grad);
  return value;
}

double loss_mkr(const MultimodalModel& f_prime, const Teacher& f, const DatasetBundle& bundle,
                std::span<const PairRef> retained, Distance dist, Readout ro, MultimodalModel* grad) {
  if (retained.empty()) throw InvalidInput("loss_mkr: empty retained batch");
  const PairCache s = forward_pairs(f_prime, bundle, retained);
  const Matrix target = f.fused(bundle, retained);
  const Matrix* sp[] = {&s.fused};
  const Matrix* tp[] = {&target};
  Matrix d;
  const double value = distance(dist, readout(ro, sp), readout(ro, tp), grad ? &d : nullptr);
  if (grad) backward_pairs(f_prime, s, PairGrads{{}, std::move(d), {}, {}}, *grad);
  return value;
}

double loss_ukr(const MultimodalModel& f_prime, const Teacher& f, const DatasetBundle& bundle,
                std::span<const PairRef> deleted, Distance dist, MultimodalModel* grad) {
  if (deleted.empty()) throw InvalidInput("loss_ukr: empty deleted batch");
  const PairCache s = forward_pairs(f_prime, bundle, deleted);
  Matrix t_eb;
  const Matrix t_ea = f.embeddings(bundle, deleted, &t_eb);
  Matrix d;
  const double value = distance(dist, hconcat(s.emb_a, s.emb_b), hconcat(t_ea, t_eb), grad ? &d : nullptr);
  if (grad) {
    Matrix da, db;
    hsplit(d, s.emb_a.cols, da, db);
    backward_pairs(f_prime, s, PairGrads{{}, {}, std::move(da), std::move(db)}, *grad);
  }
  return value;
}

double total_loss(double l_md, double l_mkr, double l_ukr, double alpha, double beta, double gamma) {
  return alpha * l_md + beta * l_mkr + gamma * l_ukr;
}

LossBreakdown multidelete_loss(const MultimodalModel& f_prime, const Teacher& f, const DatasetBundle& bundle,
                               const UnlearnBatch& batch, const UnlearnConfig& config, MultimodalModel* grad) {
  const std::size_t k = unrelated_ratio(batch.deleted.size(), batch.unrelated.size());
  if (batch.retained.empty()) throw InvalidInput("multidelete_loss: empty retained batch");

  const PairCache s_del = forward_pairs(f_prime, bundle, batch.deleted);
  const PairCache s_ret = forward_pairs(f_prime, bundle, batch.retained);
  const Matrix t_unrel = f.fused(bundle, batch.unrelated);
  const Matrix t_ret = f.fused(bundle, batch.retained);
  Matrix t_eb;
  const Matrix t_ea = f.embeddings(bundle, batch.deleted, &t_eb);

  const Matrix* del_parts[] = {&s_del.fused};
  const Matrix* unrel_parts[] = {&t_unrel};
  const Matrix* ret_parts[] = {&s_ret.fused};
  const Matrix* tret_parts[] = {&t_ret};

  Matrix d_md, d_mkr, d_ukr;
  LossBreakdown out;
  out.md = distance(config.distance, repeat_rows(readout(config.readout, del_parts), k),
                    readout(config.readout, unrel_parts), &d_md);
  out.mkr = distance(config.distance, readout(config.readout, ret_parts), readout(config.readout, tret_parts), &d_mkr);
  out.ukr = distance(config.distance, hconcat(s_del.emb_a, s_del.emb_b), hconcat(t_ea, t_eb), &d_ukr);
  out.total = total_loss(out.md, out.mkr, out.ukr, config.alpha, config.beta, config.gamma);

  if (!grad) return out;
  PairGrads del_up;
  if (config.alpha != 0.0) {
    del_up.d_fused = fold_rows(d_md, k);
    scale(del_up.d_fused, config.alpha);
  }
  if (config.gamma != 0.0) {
    scale(d_ukr, config.gamma);
    hsplit(d_ukr, s_del.emb_a.cols, del_up.d_emb_a, del_up.d_emb_b);
  }
  if (config.alpha != 0.0 || config.gamma != 0.0) backward_pairs(f_prime, s_del, del_up, *grad);
  if (config.beta != 0.0) {
    scale(d_mkr, config.beta);
    backward_pairs(f_prime, s_ret, PairGrads{{}, std::move(d_mkr), {}, {}}, *grad);
  }
  return out;
}

// ---- unlearning loop ---------------------------------------------------------

UnlearnResult multidelete_unlearn(const MultimodalModel& f, const DatasetBundle& bundle, const UnlearnConfig& config) {
  config.validate();
  const auto deleted_ids = bundle.deleted_ids();
  const auto retained_ids = bundle.retained_ids();
  if (deleted_ids.empty()) throw InvalidInput("multidelete_unlearn: deletion mask is empty");
  if (retained_ids.size() < 2) throw InsufficientData("multidelete_unlearn: D_r needs at least 2 pairs");

  // Wall time covers the optimization only; checkpoint evaluation is excluded.
  const auto start = std::chrono::steady_clock::now();
  double eval_seconds = 0.0;
  auto raw = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };
  auto elapsed = [&] { return raw() - eval_seconds; };

  const Teacher teacher(f, bundle);
  MultimodalModel student = f;
  const GroupMask mask = config.fusion_only ? GroupMask::fusion_only() : GroupMask::all();

  const std::size_t bf = std::min<std::size_t>(static_cast<std::size_t>(config.batch_f), deleted_ids.size());
  const std::size_t br = static_cast<std::size_t>(config.batch_r);
  const std::size_t k = static_cast<std::size_t>(config.unrelated_per_deleted);
  const std::size_t per_epoch = (deleted_ids.size() + bf - 1) / bf;
  const int total_steps = config.epochs > 0 ? config.epochs * static_cast<int>(per_epoch) : config.steps;

  Rng del_rng = make_stream(config.seed, kDeleted);
  Rng unrel_rng = make_stream(config.seed, kUnrelated);
  Rng ret_rng = make_stream(config.seed, kRetained);
  std::uniform_int_distribution<std::size_t> pick_retained(0, retained_ids.size() - 1);

  // Checkpoint selection: validation matching accuracy among checkpoints
  // whose decoupling statistic is within tolerance.
  const auto val_ids = bundle.pair_ids(Split::val);
  const auto val_pos = bundle.refs(val_ids);
  Rng val_rng = make_stream(config.seed, kValNeg);
  const auto val_neg = sample_unrelated_from(bundle, val_ids, val_pos.size(), val_rng);
  const auto deleted_refs = bundle.refs(deleted_ids);
  Rng ref_rng = make_stream(config.seed, kReference);
  const auto ref_pairs =
      sample_unrelated_from(bundle, retained_ids, std::max<std::size_t>(256, deleted_ids.size()), ref_rng);
  const auto reference_mean = column_mean(teacher.fused(bundle, ref_pairs));

  UnlearnResult result;
  bool have_candidate = false;
  double best_acc = -1.0;
  auto evaluate = [&](int step) {
    const auto mean = column_mean(forward_pairs(student, bundle, deleted_refs).fused);
    if (distance_between(mean, reference_mean) > config.decoupling_tolerance) return;
    const double acc = eval_matching(student, bundle, val_pos, val_neg);
    if (acc >= best_acc) {
      best_acc = acc;
      result.model = student;
      result.trace.selected_step = step;
      have_candidate = true;
    }
  };
  auto consider = [&](int step) {
    const double t0 = raw();
    evaluate(step);
    eval_seconds += raw() - t0;
  };
  consider(0);

  std::vector<std::size_t> order = deleted_ids;
  std::size_t cursor = order.size();
  UnlearnBatch batch;
  for (int step = 1; step <= total_steps; ++step) {
    if (cursor >= order.size()) {
      std::shuffle(order.begin(), order.end(), del_rng);
      cursor = 0;
    }
    const std::size_t end = std::min(order.size(), cursor + bf);
    batch.deleted = bundle.refs(std::span(order).subspan(cursor, end - cursor));
    cursor = end;
    batch.unrelated = sample_unrelated_from(bundle, retained_ids, k * batch.deleted.size(), unrel_rng);
    batch.retained.clear();
    for (std::size_t i = 0; i < br; ++i) {
      const auto& p = bundle.pairs[retained_ids[pick_retained(ret_rng)]];
      batch.retained.push_back({p.a_id, p.b_id});
    }

    MultimodalModel grad = zeros_like(student);
    const LossBreakdown lb = multidelete_loss(student, teacher, bundle, batch, config, &grad);
    const TraceRow row{step, lb.md, lb.mkr, lb.ukr, lb.total, elapsed()};
    if (!std::isfinite(lb.total)) {
      result.trace.rows.push_back(row);
      result.trace.wall_seconds = elapsed();
      throw UnlearnFailure("multidelete_unlearn: non-finite loss at step " + std::to_string(step), result.trace);
    }
    sgd_update(student, grad, config.lr, mask);
    result.trace.rows.push_back(row);
    if (step % config.eval_every == 0 || step == total_steps) consider(step);
  }

  if (!have_candidate) {
    result.model = student;
    result.trace.selected_step = total_steps;
  }
  result.trace.wall_seconds = elapsed();
  return result;
}

double decoupling_statistic(const MultimodalModel& f_prime, const MultimodalModel& f, const DatasetBundle& bundle,
                            std::size_t n_unrelated, std::uint64_t seed) {
  const auto deleted = bundle.refs(bundle.deleted_ids());
  if (deleted.empty()) throw InvalidInput("decoupling_statistic: D_f is empty");
  if (n_unrelated == 0) throw InvalidInput("decoupling_statistic: n_unrelated must be >= 1");
  const auto retained = bundle.retained_ids();
  Rng rng = make_stream(seed, kStatistic);
  const auto unrelated = sample_unrelated_from(bundle, retained, n_unrelated, rng);
  const Teacher teacher(f);
  return distance_between(column_mean(forward_pairs(f_prime, bundle, deleted).fused),
                          column_mean(teacher.fused(bundle, unrelated)));
}

}  // namespace mmu
