#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "mmu/errors.hpp"
#include "mmu/io.hpp"
#include "mmu/metrics.hpp"
#include "mmu/model.hpp"
#include "test_util.hpp"

using namespace mmu;
using fixtures::random_matrix;

namespace {

// Model with 2-dim inputs and embeddings whose encoders are single linear
// layers, so values can be set by hand.
MultimodalModel hand_model(FusionKind kind) {
  ModelConfig c;
  c.dim_a = 2;
  c.dim_b = 2;
  c.emb_dim = 2;
  c.hidden_a = {};
  c.hidden_b = {};
  c.fusion_kind = kind;
  c.fusion_dims = {4};
  MultimodalModel m = init_model(c, 0);
  for (auto& p : parameters(m)) std::fill(p.values.begin(), p.values.end(), 0.0);
  if (kind == FusionKind::dot_product) m.head = DenseLayer{Matrix(1, 1, 1.0), {0.0}};
  return m;
}

Matrix row(std::initializer_list<double> v) {
  Matrix m(1, v.size());
  m.data.assign(v);
  return m;
}

}  // namespace

TEST(Model, EncodeShapeError) {
  const MultimodalModel m = init_model(fixtures::small_model_config(), 1);
  EXPECT_THROW(encode(m, Modality::A, Matrix(3, 5)), ShapeError);
  EXPECT_THROW(encode(m, Modality::B, Matrix(3, 24)), ShapeError);
  EXPECT_THROW(fuse(m, Matrix(2, 4), Matrix(3, 4)), ShapeError);
}

TEST(Model, ZeroWeightEncoderGivesZeroEmbedding) {
  MultimodalModel m = init_model(fixtures::small_model_config(), 1);
  for (auto& l : m.enc_a.layers) {
    std::fill(l.weight.data.begin(), l.weight.data.end(), 0.0);
    std::fill(l.bias.begin(), l.bias.end(), 0.0);
  }
  Rng rng(0);
  const Matrix e = encode(m, Modality::A, random_matrix(3, 24, rng));
  for (double v : e.data) EXPECT_EQ(v, 0.0);
}

TEST(Model, HandSetLinearEncoder) {
  MultimodalModel m = hand_model(FusionKind::dot_product);
  m.enc_a.layers[0].weight.data = {1, 0, 0, 2};
  const Matrix e = encode(m, Modality::A, row({3, 4}));
  EXPECT_EQ(e(0, 0), 3.0);
  EXPECT_EQ(e(0, 1), 8.0);
}

TEST(Model, DotProductFusion) {
  const MultimodalModel m = hand_model(FusionKind::dot_product);
  EXPECT_EQ(fuse(m, row({1, 2}), row({3, 4}))(0, 0), 11.0);
  EXPECT_EQ(fuse(m, row({1, 0}), row({0, 1}))(0, 0), 0.0);
  Rng rng(4);
  const Matrix a = random_matrix(5, 2, rng), b = random_matrix(5, 2, rng);
  EXPECT_EQ(fuse(m, a, b), fuse(m, b, a));
}

TEST(Model, ParametricFusionConcatenates) {
  MultimodalModel m = hand_model(FusionKind::parametric);
  auto& w = m.fusion.layers[0].weight;
  for (std::size_t i = 0; i < 4; ++i) w(i, i) = 1.0;
  MlpCache cache;
  mlp_forward(m.fusion, hconcat(row({1, 0}), row({0, 1})), &cache);
  EXPECT_EQ(cache.pre[0].data, (std::vector<double>{1, 0, 0, 1}));
  const Matrix f = fuse(m, row({1, 0}), row({0, 1}));
  EXPECT_DOUBLE_EQ(f(0, 0), std::tanh(1.0));
  EXPECT_EQ(f(0, 1), 0.0);
}

TEST(Model, Logistic) {
  EXPECT_EQ(logistic(0.0), 0.5);
  EXPECT_GE(logistic(50.0), 1.0 - 1e-9);
  EXPECT_NEAR(logistic(-2.0), 1.0 / (1.0 + std::exp(2.0)), 1e-15);
  EXPECT_NEAR(logistic(-2.0), 0.1192, 1e-4);
  EXPECT_GE(logistic(-800.0), 0.0);
  EXPECT_LE(logistic(800.0), 1.0);
}

TEST(Model, BatchIndependenceAndDeterminism) {
  const DatasetBundle b = fixtures::small_bundle();
  const MultimodalModel m = init_model(fixtures::small_model_config(), 2);
  std::vector<PairRef> batch;
  for (std::size_t i = 0; i < 8; ++i) batch.push_back({i * 3, i * 5 % 40});
  const auto all = match_logits(m, b, batch);
  EXPECT_EQ(all, match_logits(m, b, batch));
  for (std::size_t i = 0; i < 8; ++i) {
    const std::vector<PairRef> one{batch[i]};
    EXPECT_EQ(match_logits(m, b, one)[0], all[i]);
  }
  for (double p : predict_match(m, b, batch)) {
    EXPECT_GT(p, 0.0);
    EXPECT_LT(p, 1.0);
  }
}

TEST(Model, ScoreMatrixEqualsEntrywiseLogits) {
  const DatasetBundle b = fixtures::small_bundle();
  for (auto kind : {FusionKind::parametric, FusionKind::dot_product}) {
    const MultimodalModel m = init_model(fixtures::small_model_config(kind), 3);
    const std::vector<std::size_t> qa{0, 5, 9}, cb{2, 7, 11};
    const Matrix q = gather_rows(b.samples_a, qa), c = gather_rows(b.samples_b, cb);
    const Matrix s = score_matrix(m, q, c);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 3; ++j) {
        const std::vector<PairRef> one{{qa[i], cb[j]}};
        EXPECT_NEAR(s(i, j), match_logits(m, b, one)[0], 1e-12);
      }
    // 1x1 and candidate permutation.
    const std::vector<std::size_t> q1{0}, c1{2};
    EXPECT_NEAR(score_matrix(m, gather_rows(b.samples_a, q1), gather_rows(b.samples_b, c1))(0, 0), s(0, 0), 1e-12);
    const std::vector<std::size_t> perm{11, 2, 7};
    const Matrix sp = score_matrix(m, q, gather_rows(b.samples_b, perm));
    for (std::size_t i = 0; i < 3; ++i) {
      EXPECT_EQ(sp(i, 0), s(i, 2));
      EXPECT_EQ(sp(i, 1), s(i, 0));
      EXPECT_EQ(sp(i, 2), s(i, 1));
    }
  }
  const MultimodalModel m = init_model(fixtures::small_model_config(), 3);
  EXPECT_THROW(score_matrix(m, Matrix(0, 24), Matrix(2, 16)), InvalidInput);
}

TEST(Model, GradCheckQuadraticAndConstant) {
  const std::vector<double> theta{1, 2};
  auto quad = [](std::span<const double> t) { return t[0] * t[0] + t[1] * t[1]; };
  const std::vector<double> analytic{2, 4};
  EXPECT_LE(grad_check(theta, quad, analytic, 2, 0), 1e-6);
  auto constant = [](std::span<const double>) { return 3.0; };
  const std::vector<double> zero{0, 0};
  EXPECT_EQ(grad_check(theta, constant, zero, 2, 0), 0.0);
  const std::vector<double> wrong{2, 5};
  EXPECT_GT(grad_check(theta, quad, wrong, 2, 0), 0.1);
}

TEST(Model, BceGradientsPassGradCheck) {
  const DatasetBundle b = fixtures::small_bundle();
  const auto train = b.pair_ids(Split::train);
  const auto pos = b.refs(std::span(train).first(6));
  const auto neg = sample_unrelated_pairs(b, 6, 1);
  for (auto kind : {FusionKind::parametric, FusionKind::dot_product})
    for (std::uint64_t seed : {1u, 2u, 3u}) {
      const MultimodalModel m = init_model(fixtures::small_model_config(kind), seed);
      const ModelLoss loss = [&](const MultimodalModel& mm) {
        LossAndGrad r{0.0, zeros_like(mm)};
        r.value = bce_loss(mm, b, pos, neg, &r.grad);
        return r;
      };
      EXPECT_LE(grad_check(m, loss, 60, seed), 1e-4);
    }
}

TEST(Model, ZeroEpochsReturnsInit) {
  const DatasetBundle b = fixtures::small_bundle();
  TrainConfig t;
  t.epochs = 0;
  const TrainResult r = train_original(b, fixtures::small_model_config(), t);
  EXPECT_EQ(r.model, init_model(fixtures::small_model_config(), t.seed));
}

TEST(Model, TrainingIsDeterministic) {
  const DatasetBundle b = fixtures::small_bundle();
  TrainConfig t;
  t.epochs = 3;
  t.seed = 5;
  EXPECT_EQ(train_original(b, fixtures::small_model_config(), t).model,
            train_original(b, fixtures::small_model_config(), t).model);
}

TEST(Model, DefaultTrainingReachesHighTrainAccuracy) {
  const DatasetBundle& b = fixtures::default_bundle();
  const MultimodalModel& f = fixtures::default_f();
  const auto train = b.pair_ids(Split::train);
  const auto pos = b.refs(train);
  Rng rng = make_stream(0, 77);
  const auto neg = sample_unrelated_from(b, train, train.size(), rng);
  EXPECT_GE(eval_matching(f, b, pos, neg), 95.0);
}

TEST(Model, SaveLoadForwardIsExact) {
  const DatasetBundle b = fixtures::small_bundle();
  const MultimodalModel m = init_model(fixtures::small_model_config(), 9);
  const MultimodalModel back = deserialize_model(serialize_model(m));
  EXPECT_EQ(back, m);
  const auto refs = b.refs(b.pair_ids(Split::test));
  EXPECT_EQ(match_logits(back, b, refs), match_logits(m, b, refs));
}

TEST(Model, ParameterNamesAreStable) {
  const MultimodalModel m = init_model(fixtures::small_model_config(), 1);
  const auto p = parameters(m);
  EXPECT_EQ(p.front().name, "enc_A.0.weight");
  EXPECT_EQ(p.back().name, "head.bias");
  std::size_t n = 0;
  for (const auto& v : p) n += std::accumulate(v.shape.begin(), v.shape.end(), std::size_t{1}, std::multiplies<>());
  EXPECT_EQ(n, parameter_count(m));
}

TEST(Model, InitRangeAndDotHeadIdentity) {
  const MultimodalModel m = init_model(fixtures::small_model_config(), 4);
  const double bound = 1.0 / std::sqrt(24.0);
  for (double v : m.enc_a.layers[0].weight.data) EXPECT_LE(std::abs(v), bound);
  const MultimodalModel d = init_model(fixtures::small_model_config(FusionKind::dot_product), 4);
  EXPECT_EQ(d.head.weight(0, 0), 1.0);
  EXPECT_EQ(d.head.bias[0], 0.0);
  EXPECT_TRUE(d.fusion.layers.empty());
}
