#include "mmu/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "mmu/errors.hpp"

namespace mmu {

namespace {

enum StreamTag : std::uint64_t { kCentroids = 1, kLatents, kProjections, kNoise, kSplit, kDeletion, kUnrelated };

Matrix random_gaussian(std::size_t rows, std::size_t cols, double stddev, Rng& rng) {
  Matrix m(rows, cols);
  std::normal_distribution<double> dist(0.0, stddev);
  for (double& v : m.data) v = dist(rng);
  return m;
}

}  // namespace

void SynthConfig::validate() const {
  if (n_concepts < 1) throw ConfigError("synth.n_concepts must be >= 1");
  if (pairs_per_concept < 1) throw ConfigError("synth.pairs_per_concept must be >= 1");
  if (latent_dim < 1 || dim_a < 1 || dim_b < 1) throw ConfigError("synth dimensions must be >= 1");
  if (!(noise_std >= 0.0) || !std::isfinite(noise_std)) throw ConfigError("synth.noise_std must be >= 0");
  if (n_classes < 1) throw ConfigError("synth.n_classes must be >= 1");
  if (!(class_separation >= 0.0)) throw ConfigError("synth.class_separation must be >= 0");
  double total = 0.0;
  for (double f : split_fractions) {
    if (!(f > 0.0 && f < 1.0)) throw ConfigError("synth.split_fractions entries must lie in (0,1)");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("synth.split_fractions must sum to 1");
}

std::size_t concept_class(std::size_t concept_id, int n_classes) {
  return static_cast<std::size_t>(mix64(concept_id) % static_cast<std::uint64_t>(n_classes));
}

std::size_t train_pair_count(const SynthConfig& config) {
  config.validate();
  const auto n_train = static_cast<std::size_t>(std::llround(config.split_fractions[0] * config.n_concepts));
  return n_train * static_cast<std::size_t>(config.pairs_per_concept);
}

DatasetBundle generate_dataset(const SynthConfig& config) {
  config.validate();
  const auto n_concepts = static_cast<std::size_t>(config.n_concepts);
  const auto per = static_cast<std::size_t>(config.pairs_per_concept);
  const auto latent = static_cast<std::size_t>(config.latent_dim);

  // Splits are whole concepts; every split must receive at least one.
  const auto n_train = static_cast<std::size_t>(std::llround(config.split_fractions[0] * n_concepts));
  const auto n_val = static_cast<std::size_t>(std::llround(config.split_fractions[1] * n_concepts));
  if (n_train < 1 || n_val < 1 || n_train + n_val >= n_concepts)
    throw ConfigError("synth.split_fractions leave an empty split for n_concepts=" + std::to_string(n_concepts));

  Rng centroid_rng = make_stream(config.seed, kCentroids);
  Rng latent_rng = make_stream(config.seed, kLatents);
  Rng proj_rng = make_stream(config.seed, kProjections);
  Rng noise_rng = make_stream(config.seed, kNoise);
  Rng split_rng = make_stream(config.seed, kSplit);

  const Matrix centroids = random_gaussian(static_cast<std::size_t>(config.n_classes), latent, 1.0, centroid_rng);
  Matrix latents = random_gaussian(n_concepts, latent, 1.0, latent_rng);
  for (std::size_t c = 0; c < n_concepts; ++c) {
    const auto cls = concept_class(c, config.n_classes);
    for (std::size_t k = 0; k < latent; ++k) latents(c, k) += config.class_separation * centroids(cls, k);
  }

  const double proj_std = 1.0 / std::sqrt(static_cast<double>(latent));
  const Matrix proj_a = random_gaussian(static_cast<std::size_t>(config.dim_a), latent, proj_std, proj_rng);
  const Matrix proj_b = random_gaussian(static_cast<std::size_t>(config.dim_b), latent, proj_std, proj_rng);

  std::vector<std::size_t> order(n_concepts);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), split_rng);
  std::vector<Split> concept_split(n_concepts, Split::test);
  for (std::size_t i = 0; i < n_concepts; ++i)
    concept_split[order[i]] = i < n_train ? Split::train : (i < n_train + n_val ? Split::val : Split::test);

  DatasetBundle b;
  b.config = config;
  const std::size_t n = n_concepts * per;
  b.samples_a = Matrix(n, static_cast<std::size_t>(config.dim_a));
  b.samples_b = Matrix(n, static_cast<std::size_t>(config.dim_b));
  b.concept_a.resize(n);
  b.concept_b.resize(n);
  b.pairs.resize(n);
  b.split.resize(n);

  // Noise draws happen even when noise_std == 0 so the stream layout never
  // depends on the noise level.
  std::normal_distribution<double> noise(0.0, 1.0);
  auto project = [&](const Matrix& proj, std::size_t c, std::span<double> out) {
    for (std::size_t r = 0; r < proj.rows; ++r) {
      double acc = 0.0;
      for (std::size_t k = 0; k < latent; ++k) acc += proj(r, k) * latents(c, k);
      out[r] = acc + config.noise_std * noise(noise_rng);
    }
  };

  for (std::size_t c = 0; c < n_concepts; ++c) {
    for (std::size_t j = 0; j < per; ++j) {
      const std::size_t id = c * per + j;
      project(proj_a, c, b.samples_a.row(id));
      project(proj_b, c, b.samples_b.row(id));
      b.concept_a[id] = c;
      b.concept_b[id] = c;
      b.pairs[id] = PairRecord{id, id, id, true, c};
      b.split[id] = concept_split[c];
    }
  }
  return b;
}

std::vector<std::size_t> DatasetBundle::pair_ids(Split s) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < split.size(); ++i)
    if (split[i] == s) out.push_back(i);
  return out;
}

std::vector<std::size_t> DatasetBundle::retained_ids() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < split.size(); ++i)
    if (split[i] == Split::train && !std::binary_search(deletion_mask.begin(), deletion_mask.end(), i))
      out.push_back(i);
  return out;
}

std::vector<PairRef> DatasetBundle::refs(std::span<const std::size_t> ids) const {
  std::vector<PairRef> out;
  out.reserve(ids.size());
  for (auto id : ids) out.push_back({pairs.at(id).a_id, pairs.at(id).b_id});
  return out;
}

std::vector<std::size_t> sample_deletion_set(DatasetBundle& bundle, std::size_t size, std::uint64_t seed) {
  auto train = bundle.pair_ids(Split::train);
  if (size == 0 || size >= train.size())
    throw InvalidSize("deletion set size " + std::to_string(size) + " must lie in (0, " +
                      std::to_string(train.size()) + ")");
  Rng rng = make_stream(seed, kDeletion);
  std::shuffle(train.begin(), train.end(), rng);
  train.resize(size);
  std::sort(train.begin(), train.end());
  bundle.deletion_mask = train;
  return train;
}

std::vector<PairRef> sample_unrelated_from(const DatasetBundle& bundle, std::span<const std::size_t> pool,
                                           std::size_t n, Rng& rng) {
  if (pool.size() < 2) throw InsufficientData("unrelated-pair sampling needs at least 2 pairs in the pool");
  {
    std::set<std::size_t> concepts;
    for (auto id : pool) concepts.insert(bundle.pairs.at(id).concept_id);
    if (concepts.size() < 2) throw InsufficientData("unrelated-pair sampling needs at least 2 concepts in the pool");
  }
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  std::vector<PairRef> out;
  out.reserve(n);
  while (out.size() < n) {
    const auto& p = bundle.pairs[pool[pick(rng)]];
    const auto& q = bundle.pairs[pool[pick(rng)]];
    if (p.pair_id == q.pair_id || p.concept_id == q.concept_id) continue;
    out.push_back({p.a_id, q.b_id});
  }
  return out;
}

std::vector<PairRef> sample_unrelated_pairs(const DatasetBundle& bundle, std::size_t n, std::uint64_t seed) {
  const auto retained = bundle.retained_ids();
  Rng rng = make_stream(seed, kUnrelated);
  return sample_unrelated_from(bundle, retained, n, rng);
}

std::size_t shared_item_count(const DatasetBundle& bundle) {
  std::set<std::size_t> del_a, del_b;
  for (auto id : bundle.deletion_mask) {
    del_a.insert(bundle.pairs[id].a_id);
    del_b.insert(bundle.pairs[id].b_id);
  }
  std::size_t shared = 0;
  std::set<std::pair<int, std::size_t>> seen;
  for (auto id : bundle.retained_ids()) {
    const auto& p = bundle.pairs[id];
    if (del_a.count(p.a_id) && seen.insert({0, p.a_id}).second) ++shared;
    if (del_b.count(p.b_id) && seen.insert({1, p.b_id}).second) ++shared;
  }
  return shared;
}

}  // namespace mmu
