#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "mmu/errors.hpp"
#include "mmu/unlearn.hpp"
#include "test_util.hpp"

using namespace mmu;

namespace {

struct Fixture {
  DatasetBundle bundle = fixtures::small_bundle();
  MultimodalModel f;
  MultimodalModel f_prime;
  explicit Fixture(FusionKind kind = FusionKind::parametric, std::uint64_t seed = 1) {
    f = init_model(fixtures::small_model_config(kind), seed);
    f_prime = init_model(fixtures::small_model_config(kind), seed + 100);
  }
  UnlearnBatch batch(std::size_t nf, std::size_t k, std::size_t nr, std::uint64_t seed = 0) const {
    UnlearnBatch b;
    const auto del = bundle.deleted_ids();
    b.deleted = bundle.refs(std::span(del).first(nf));
    b.unrelated = sample_unrelated_pairs(bundle, nf * k, seed);
    const auto ret = bundle.retained_ids();
    b.retained = bundle.refs(std::span(ret).subspan(seed, nr));
    return b;
  }
};

Matrix mat(std::size_t r, std::size_t c, std::initializer_list<double> v) {
  Matrix m(r, c);
  m.data.assign(v);
  return m;
}

double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

// Per-example forward of a single pair.
Matrix fused_one(const MultimodalModel& m, const DatasetBundle& b, PairRef p) {
  const std::vector<PairRef> one{p};
  return forward_pairs(m, b, one).fused;
}

bool encoders_equal(const MultimodalModel& a, const MultimodalModel& b) {
  return a.enc_a == b.enc_a && a.enc_b == b.enc_b;
}

UnlearnConfig short_config(int steps = 30) {
  UnlearnConfig c;
  c.steps = steps;
  c.batch_f = 8;
  c.batch_r = 16;
  c.eval_every = 10;
  c.seed = 4;
  return c;
}

}  // namespace

TEST(Unlearn, DistanceAndReadoutHandCases) {
  EXPECT_DOUBLE_EQ(distance(Distance::mse, mat(1, 2, {1, 0}), mat(1, 2, {0, 1})), 1.0);
  EXPECT_DOUBLE_EQ(distance(Distance::mse, mat(1, 1, {2}), mat(1, 1, {0})), 4.0);
  const Matrix a = mat(1, 2, {1, 1}), b = mat(1, 2, {0, 0});
  const Matrix* parts[] = {&a, &b};
  const Matrix cat = readout(Readout::concatenation, parts);
  EXPECT_EQ(cat.cols, 4u);
  EXPECT_DOUBLE_EQ(distance(Distance::mse, cat, Matrix(1, 4)), 0.5);
  EXPECT_THROW(distance(Distance::mse, a, Matrix(1, 3)), ShapeError);
}

TEST(Unlearn, TotalLoss) {
  EXPECT_DOUBLE_EQ(total_loss(0.5, 0.2, 0.3, 1, 1, 1), 1.0);
  EXPECT_DOUBLE_EQ(total_loss(0.5, 0.2, 0.3, 1, 1, 0), 0.7);
  EXPECT_DOUBLE_EQ(total_loss(0.5, 0.2, 0.3, 3, 3, 3), 3.0 * total_loss(0.5, 0.2, 0.3, 1, 1, 1));
}

TEST(Unlearn, LossesAreZeroForIdenticalModels) {
  const Fixture fx;
  const Teacher t(fx.f);
  const auto b = fx.batch(4, 1, 6);
  EXPECT_EQ(loss_mkr(fx.f, t, fx.bundle, b.retained), 0.0);
  EXPECT_EQ(loss_ukr(fx.f, t, fx.bundle, b.deleted), 0.0);
  EXPECT_GT(loss_mkr(fx.f_prime, t, fx.bundle, b.retained), 0.0);
  EXPECT_GT(loss_ukr(fx.f_prime, t, fx.bundle, b.deleted), 0.0);
  // L_MD is zero when the student's deleted reps equal the teacher's unrelated reps.
  EXPECT_EQ(loss_md(fx.f, t, fx.bundle, b.unrelated, b.unrelated), 0.0);
}

TEST(Unlearn, EmptyBatchesRejected) {
  const Fixture fx;
  const Teacher t(fx.f);
  const std::vector<PairRef> none, one{{0, 1}}, three{{0, 1}, {1, 2}, {2, 3}}, two{{0, 1}, {1, 2}};
  EXPECT_THROW(loss_md(fx.f, t, fx.bundle, none, one), InvalidInput);
  EXPECT_THROW(loss_md(fx.f, t, fx.bundle, two, three), InvalidInput);
  EXPECT_THROW(loss_mkr(fx.f, t, fx.bundle, none), InvalidInput);
  EXPECT_THROW(loss_ukr(fx.f, t, fx.bundle, none), InvalidInput);
}

TEST(Unlearn, DuplicatedUnrelatedTargetsLeaveMdUnchanged) {
  const Fixture fx;
  const Teacher t(fx.f);
  const auto b = fx.batch(4, 1, 4);
  std::vector<PairRef> doubled;
  for (const auto& u : b.unrelated) {
    doubled.push_back(u);
    doubled.push_back(u);
  }
  EXPECT_NEAR(loss_md(fx.f_prime, t, fx.bundle, b.deleted, b.unrelated),
              loss_md(fx.f_prime, t, fx.bundle, b.deleted, doubled), 1e-14);
}

TEST(Unlearn, MkrInvariantToBatchOrder) {
  const Fixture fx;
  const Teacher t(fx.f);
  auto b = fx.batch(2, 1, 8);
  const double v = loss_mkr(fx.f_prime, t, fx.bundle, b.retained);
  std::reverse(b.retained.begin(), b.retained.end());
  EXPECT_NEAR(loss_mkr(fx.f_prime, t, fx.bundle, b.retained), v, 1e-14);
}

// Batched losses against a per-example double loop.
TEST(Unlearn, BatchedLossesMatchNaiveDoubleLoop) {
  for (auto kind : {FusionKind::parametric, FusionKind::dot_product})
    for (std::size_t nf : {1u, 3u, 8u})
      for (std::size_t k : {1u, 2u}) {
        const Fixture fx(kind, nf + k);
        const Teacher t(fx.f);
        const auto b = fx.batch(nf, k, 8, nf);
        const std::size_t dim = fx.f.config.fused_dim();

        double md = 0;
        for (std::size_t i = 0; i < nf; ++i)
          for (std::size_t j = 0; j < k; ++j)
            md += sq_dist(fused_one(fx.f_prime, fx.bundle, b.deleted[i]).data,
                          fused_one(fx.f, fx.bundle, b.unrelated[i * k + j]).data);
        md /= static_cast<double>(nf * k * dim);

        double mkr = 0;
        for (const auto& r : b.retained)
          mkr += sq_dist(fused_one(fx.f_prime, fx.bundle, r).data, fused_one(fx.f, fx.bundle, r).data);
        mkr /= static_cast<double>(b.retained.size() * dim);

        double ukr = 0;
        const auto emb = static_cast<std::size_t>(fx.f.config.emb_dim);
        for (const auto& d : b.deleted) {
          const Matrix xa = gather_rows(fx.bundle.samples_a, std::vector<std::size_t>{d.a_id});
          const Matrix xb = gather_rows(fx.bundle.samples_b, std::vector<std::size_t>{d.b_id});
          ukr += sq_dist(encode(fx.f_prime, Modality::A, xa).data, encode(fx.f, Modality::A, xa).data);
          ukr += sq_dist(encode(fx.f_prime, Modality::B, xb).data, encode(fx.f, Modality::B, xb).data);
        }
        ukr /= static_cast<double>(nf * 2 * emb);

        EXPECT_NEAR(loss_md(fx.f_prime, t, fx.bundle, b.deleted, b.unrelated), md, 1e-10);
        EXPECT_NEAR(loss_mkr(fx.f_prime, t, fx.bundle, b.retained), mkr, 1e-10);
        EXPECT_NEAR(loss_ukr(fx.f_prime, t, fx.bundle, b.deleted), ukr, 1e-10);
        UnlearnConfig c;
        c.alpha = 0.5;
        c.beta = 2.0;
        c.gamma = 1.5;
        const LossBreakdown lb = multidelete_loss(fx.f_prime, t, fx.bundle, b, c, nullptr);
        EXPECT_NEAR(lb.md, md, 1e-10);
        EXPECT_NEAR(lb.mkr, mkr, 1e-10);
        EXPECT_NEAR(lb.ukr, ukr, 1e-10);
        EXPECT_NEAR(lb.total, 0.5 * md + 2.0 * mkr + 1.5 * ukr, 1e-10);
      }
}

TEST(Unlearn, GradientsPassGradCheck) {
  for (auto kind : {FusionKind::parametric, FusionKind::dot_product})
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      const Fixture fx(kind, seed);
      const Teacher t(fx.f);
      const auto b = fx.batch(4, 2, 6, seed);
      const ModelLoss md = [&](const MultimodalModel& m) {
        LossAndGrad r{0.0, zeros_like(m)};
        r.value = loss_md(m, t, fx.bundle, b.deleted, b.unrelated, Distance::mse, Readout::concatenation, &r.grad);
        return r;
      };
      const ModelLoss mkr = [&](const MultimodalModel& m) {
        LossAndGrad r{0.0, zeros_like(m)};
        r.value = loss_mkr(m, t, fx.bundle, b.retained, Distance::mse, Readout::concatenation, &r.grad);
        return r;
      };
      const ModelLoss ukr = [&](const MultimodalModel& m) {
        LossAndGrad r{0.0, zeros_like(m)};
        r.value = loss_ukr(m, t, fx.bundle, b.deleted, Distance::mse, &r.grad);
        return r;
      };
      UnlearnConfig c;
      c.alpha = 0.7;
      c.beta = 1.3;
      c.gamma = 0.4;
      const ModelLoss total = [&](const MultimodalModel& m) {
        LossAndGrad r{0.0, zeros_like(m)};
        r.value = multidelete_loss(m, t, fx.bundle, b, c, &r.grad).total;
        return r;
      };
      EXPECT_LE(grad_check(fx.f_prime, md, 80, seed), 1e-4);
      EXPECT_LE(grad_check(fx.f_prime, mkr, 80, seed), 1e-4);
      EXPECT_LE(grad_check(fx.f_prime, ukr, 80, seed), 1e-4);
      EXPECT_LE(grad_check(fx.f_prime, total, 80, seed), 1e-4);
    }
}

// A zero weight must behave exactly like leaving the term out.
TEST(Unlearn, ZeroWeightEqualsOmittedTerm) {
  const Fixture fx;
  const Teacher t(fx.f);
  const auto b = fx.batch(4, 1, 6);
  UnlearnConfig c;
  c.gamma = 0.0;
  MultimodalModel g = zeros_like(fx.f_prime);
  multidelete_loss(fx.f_prime, t, fx.bundle, b, c, &g);
  MultimodalModel parts = zeros_like(fx.f_prime);
  loss_md(fx.f_prime, t, fx.bundle, b.deleted, b.unrelated, Distance::mse, Readout::concatenation, &parts);
  loss_mkr(fx.f_prime, t, fx.bundle, b.retained, Distance::mse, Readout::concatenation, &parts);
  const auto pg = parameters(g), pp = parameters(parts);
  for (std::size_t i = 0; i < pg.size(); ++i)
    for (std::size_t j = 0; j < pg[i].values.size(); ++j) EXPECT_NEAR(pg[i].values[j], pp[i].values[j], 1e-14);
}

TEST(Unlearn, SmallStepDecreasesTotalLoss) {
  const Fixture fx;
  const Teacher t(fx.f);
  const UnlearnConfig c;
  for (std::uint64_t s : {0u, 1u, 2u}) {
    const auto b = fx.batch(6, 1, 10, s);
    MultimodalModel theta = init_model(fixtures::small_model_config(), 200 + s);
    MultimodalModel g = zeros_like(theta);
    const double before = multidelete_loss(theta, t, fx.bundle, b, c, &g).total;
    sgd_update(theta, g, 1e-4, GroupMask::all());
    EXPECT_LE(multidelete_loss(theta, t, fx.bundle, b, c, nullptr).total, before);
  }
}

TEST(Unlearn, TeacherCacheEqualsDirectEvaluation) {
  const Fixture fx;
  const Teacher direct(fx.f), cached(fx.f, fx.bundle);
  const auto b = fx.batch(5, 2, 9);
  EXPECT_EQ(direct.fused(fx.bundle, b.unrelated), cached.fused(fx.bundle, b.unrelated));
  Matrix eb1, eb2;
  EXPECT_EQ(direct.embeddings(fx.bundle, b.deleted, &eb1), cached.embeddings(fx.bundle, b.deleted, &eb2));
  EXPECT_EQ(eb1, eb2);
}

TEST(Unlearn, ZeroStepsReturnsF) {
  const Fixture fx;
  UnlearnConfig c = short_config(0);
  const UnlearnResult r = multidelete_unlearn(fx.f, fx.bundle, c);
  EXPECT_EQ(r.model, fx.f);
  EXPECT_TRUE(r.trace.rows.empty());
}

TEST(Unlearn, FusionOnlyFreezesEncodersAndUkrIsZero) {
  const Fixture fx;
  UnlearnConfig c = short_config(40);
  c.fusion_only = true;
  const MultimodalModel f_copy = fx.f;
  const UnlearnResult r = multidelete_unlearn(fx.f, fx.bundle, c);
  EXPECT_TRUE(encoders_equal(r.model, fx.f));
  for (const auto& row : r.trace.rows) EXPECT_EQ(row.l_ukr, 0.0);
  EXPECT_EQ(fx.f, f_copy);
}

TEST(Unlearn, TraceAndDeterminism) {
  const Fixture fx;
  const UnlearnConfig c = short_config(25);
  const MultimodalModel f_copy = fx.f;
  const UnlearnResult a = multidelete_unlearn(fx.f, fx.bundle, c);
  const UnlearnResult b = multidelete_unlearn(fx.f, fx.bundle, c);
  EXPECT_EQ(fx.f, f_copy);  // teacher untouched
  EXPECT_EQ(a.model, b.model);
  ASSERT_EQ(a.trace.rows.size(), 25u);
  ASSERT_EQ(b.trace.rows.size(), 25u);
  for (std::size_t i = 0; i < 25; ++i) {
    const auto& r = a.trace.rows[i];
    EXPECT_EQ(r.step, static_cast<int>(i + 1));
    EXPECT_EQ(r.l_md, b.trace.rows[i].l_md);
    EXPECT_EQ(r.total, b.trace.rows[i].total);
    for (double v : {r.l_md, r.l_mkr, r.l_ukr, r.total}) {
      EXPECT_TRUE(std::isfinite(v));
      EXPECT_GE(v, 0.0);
    }
    EXPECT_NEAR(r.total, total_loss(r.l_md, r.l_mkr, r.l_ukr, c.alpha, c.beta, c.gamma), 1e-12);
  }
  EXPECT_EQ(a.trace.selected_step, b.trace.selected_step);
  EXPECT_GE(a.trace.wall_seconds, 0.0);
}

TEST(Unlearn, EpochModeStepCount) {
  const Fixture fx;  // |D_f| = 20
  UnlearnConfig c = short_config();
  c.epochs = 3;
  c.batch_f = 8;
  EXPECT_EQ(multidelete_unlearn(fx.f, fx.bundle, c).trace.rows.size(), 9u);
}

TEST(Unlearn, NonFiniteLossThrowsWithTrace) {
  Fixture fx;
  fx.f.fusion.layers[0].weight(0, 0) = std::numeric_limits<double>::quiet_NaN();
  try {
    multidelete_unlearn(fx.f, fx.bundle, short_config(10));
    FAIL() << "expected UnlearnFailure";
  } catch (const UnlearnFailure& e) {
    EXPECT_EQ(e.trace().rows.size(), 1u);
  }
}

TEST(Unlearn, EmptyDeletionMaskRejected) {
  Fixture fx;
  fx.bundle.deletion_mask.clear();
  EXPECT_THROW(multidelete_unlearn(fx.f, fx.bundle, short_config()), InvalidInput);
  UnlearnConfig bad;
  bad.unrelated_per_deleted = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Unlearn, DecouplingStatistic) {
  const DatasetBundle& b = fixtures::default_bundle();
  const MultimodalModel& f = fixtures::default_f();
  const double before = decoupling_statistic(f, f, b, 2000, 1);
  const UnlearnResult r = multidelete_unlearn(f, b, UnlearnConfig{});
  const double after = decoupling_statistic(r.model, f, b, 2000, 1);
  EXPECT_GT(before, after);
}
