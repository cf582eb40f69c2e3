#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "mmu/errors.hpp"
#include "mmu/io.hpp"
#include "mmu/synthdata.hpp"
#include "test_util.hpp"

using namespace mmu;

namespace {

double cosine(std::span<const double> a, std::span<const double> b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return ab / std::sqrt(aa * bb);
}

// One pair per concept: 5 train, 1 val, 1 test.
DatasetBundle tiny_bundle(std::size_t deleted, std::uint64_t seed = 1) {
  SynthConfig c;
  c.n_concepts = 7;
  c.pairs_per_concept = 1;
  c.seed = seed;
  DatasetBundle b = generate_dataset(c);
  sample_deletion_set(b, deleted, seed);
  return b;
}

}  // namespace

TEST(Synthdata, DefaultSplitSizes) {
  const DatasetBundle b = generate_dataset(SynthConfig{});
  EXPECT_EQ(b.pair_ids(Split::train).size(), 2000u);
  EXPECT_EQ(b.pair_ids(Split::val).size(), 400u);
  EXPECT_EQ(b.pair_ids(Split::test).size(), 400u);
  EXPECT_EQ(train_pair_count(SynthConfig{}), 2000u);
}

TEST(Synthdata, SplitsAreDisjointExhaustiveAndByConcept) {
  const DatasetBundle b = fixtures::small_bundle();
  std::set<std::size_t> all;
  std::map<std::size_t, Split> concept_split;
  for (auto s : {Split::train, Split::val, Split::test})
    for (auto id : b.pair_ids(s)) {
      EXPECT_TRUE(all.insert(id).second);
      const auto c = b.pairs[id].concept_id;
      auto [it, fresh] = concept_split.emplace(c, s);
      if (!fresh) EXPECT_EQ(it->second, s);
    }
  EXPECT_EQ(all.size(), b.pairs.size());
}

TEST(Synthdata, ZeroConceptsIsConfigError) {
  SynthConfig c;
  c.n_concepts = 0;
  EXPECT_THROW(generate_dataset(c), ConfigError);
  c = SynthConfig{};
  c.split_fractions = {0.5, 0.6, -0.1};
  EXPECT_THROW(generate_dataset(c), ConfigError);
  c = SynthConfig{};
  c.noise_std = -1;
  EXPECT_THROW(generate_dataset(c), ConfigError);
}

TEST(Synthdata, ZeroNoiseGivesIdenticalSamplesPerConcept) {
  SynthConfig c = fixtures::small_synth();
  c.noise_std = 0.0;
  const DatasetBundle b = generate_dataset(c);
  const auto per = static_cast<std::size_t>(c.pairs_per_concept);
  for (std::size_t concept_id = 0; concept_id < 5; ++concept_id) {
    const auto r0 = b.samples_a.row(concept_id * per);
    const auto r1 = b.samples_a.row(concept_id * per + 1);
    EXPECT_TRUE(std::equal(r0.begin(), r0.end(), r1.begin()));
  }
}

TEST(Synthdata, RegenerationIsByteIdentical) {
  SynthConfig c;
  c.n_concepts = 100;
  c.pairs_per_concept = 4;
  c.seed = 7;
  EXPECT_EQ(serialize_bundle(generate_dataset(c)), serialize_bundle(generate_dataset(c)));
  SynthConfig d = c;
  d.seed = 8;
  EXPECT_NE(generate_dataset(c), generate_dataset(d));
}

TEST(Synthdata, WithinConceptCloserThanAcrossOver20Seeds) {
  double within = 0, across = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    SynthConfig c = fixtures::small_synth(seed);
    c.noise_std = 0.0;
    const DatasetBundle b = generate_dataset(c);
    const auto per = static_cast<std::size_t>(c.pairs_per_concept);
    for (std::size_t k = 0; k + 1 < 30; ++k) {
      within += cosine(b.samples_a.row(k * per), b.samples_a.row(k * per + 1));
      across += cosine(b.samples_a.row(k * per), b.samples_a.row((k + 1) * per));
    }
  }
  EXPECT_GT(within, across);
}

TEST(Synthdata, DeletionSetSizeChecks) {
  DatasetBundle b = tiny_bundle(1);
  const auto n_train = b.pair_ids(Split::train).size();
  EXPECT_THROW(sample_deletion_set(b, n_train, 0), InvalidSize);
  EXPECT_THROW(sample_deletion_set(b, 0, 0), InvalidSize);
}

TEST(Synthdata, DeletionSetIsSubsetAndDeterministic) {
  SynthConfig c;
  c.n_concepts = 14;
  c.pairs_per_concept = 2;  // 20 train pairs
  DatasetBundle b = generate_dataset(c);
  ASSERT_EQ(b.pair_ids(Split::train).size(), 20u);
  const auto m1 = sample_deletion_set(b, 5, 3);
  const auto m2 = sample_deletion_set(b, 5, 3);
  EXPECT_EQ(m1, m2);
  const auto train = b.pair_ids(Split::train);
  for (std::uint64_t seed : {1u, 2u}) {
    const auto m = sample_deletion_set(b, 1, seed);
    ASSERT_EQ(m.size(), 1u);
    EXPECT_TRUE(std::binary_search(train.begin(), train.end(), m[0]));
  }
  // D_r and D_f partition train.
  sample_deletion_set(b, 5, 9);
  auto r = b.retained_ids();
  auto f = b.deleted_ids();
  std::vector<std::size_t> u;
  std::set_union(r.begin(), r.end(), f.begin(), f.end(), std::back_inserter(u));
  EXPECT_EQ(u, train);
  std::vector<std::size_t> inter;
  std::set_intersection(r.begin(), r.end(), f.begin(), f.end(), std::back_inserter(inter));
  EXPECT_TRUE(inter.empty());
}

TEST(Synthdata, UnrelatedNeedsTwoRetained) {
  DatasetBundle b = tiny_bundle(4);  // |D_r| = 1
  EXPECT_THROW(sample_unrelated_pairs(b, 3, 0), InsufficientData);
}

TEST(Synthdata, UnrelatedMatchesBruteForceEnumeration) {
  DatasetBundle b = tiny_bundle(2);  // |D_r| = 3
  const auto r = b.retained_ids();
  ASSERT_EQ(r.size(), 3u);
  std::set<PairRef> cross;
  for (auto p : r)
    for (auto q : r)
      if (p != q) cross.insert({b.pairs[p].a_id, b.pairs[q].b_id});
  ASSERT_EQ(cross.size(), 6u);
  std::set<PairRef> related;
  for (const auto& p : b.pairs) related.insert({p.a_id, p.b_id});
  for (const auto& u : sample_unrelated_pairs(b, 6, 5)) {
    EXPECT_TRUE(cross.count(u));
    EXPECT_FALSE(related.count(u));
  }
}

TEST(Synthdata, UnrelatedNeverRelatedAndDeterministic) {
  const DatasetBundle b = fixtures::small_bundle();
  EXPECT_EQ(sample_unrelated_pairs(b, 4, 11), sample_unrelated_pairs(b, 4, 11));
  for (const auto& u : sample_unrelated_pairs(b, 500, 2)) {
    EXPECT_NE(b.concept_a[u.a_id], b.concept_b[u.b_id]);
    EXPECT_NE(u.a_id, u.b_id);
  }
}

TEST(Synthdata, ConceptClassIsStableAndInRange) {
  for (std::size_t c = 0; c < 100; ++c) {
    EXPECT_LT(concept_class(c, 10), 10u);
    EXPECT_EQ(concept_class(c, 10), concept_class(c, 10));
  }
}
