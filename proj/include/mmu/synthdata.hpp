#pragma once

// Deterministic synthetic two-modality paired data.
//
// Each concept c draws a latent z_c around the centroid of its class
// (class = stable hash of c, so a linear probe on embeddings has something
// to find). Modality-A rows are M_A z_c + noise, modality-B rows are
// M_B z_c + noise, with fixed random projections M_A, M_B. A related pair
// links one A row and one B row of the same concept. Splits are assigned
// per concept so test concepts never appear in training.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mmu/matrix.hpp"
#include "mmu/rng.hpp"

namespace mmu {

enum class Modality { A, B };
enum class Split { train, val, test };

struct SynthConfig {
  int n_concepts = 700;
  int pairs_per_concept = 4;
  int latent_dim = 8;
  int dim_a = 24;
  int dim_b = 16;
  double noise_std = 0.2;
  std::array<double, 3> split_fractions{5.0 / 7.0, 1.0 / 7.0, 1.0 / 7.0};
  int n_classes = 10;
  // Scale of the class centroids relative to the unit within-class spread.
  double class_separation = 1.5;
  std::uint64_t seed = 0;

  void validate() const;  // throws ConfigError
  friend bool operator==(const SynthConfig&, const SynthConfig&) = default;
};

struct PairRecord {
  std::size_t pair_id = 0;
  std::size_t a_id = 0;
  std::size_t b_id = 0;
  bool related = true;
  std::size_t concept_id = 0;
  friend bool operator==(const PairRecord&, const PairRecord&) = default;
};

// An (A sample, B sample) combination; not necessarily a stored pair.
struct PairRef {
  std::size_t a_id = 0;
  std::size_t b_id = 0;
  friend bool operator==(const PairRef&, const PairRef&) = default;
  friend auto operator<=>(const PairRef&, const PairRef&) = default;
};

struct DatasetBundle {
  SynthConfig config;
  Matrix samples_a;  // row = sample_id
  Matrix samples_b;
  std::vector<std::size_t> concept_a;  // concept of each A sample
  std::vector<std::size_t> concept_b;
  std::vector<PairRecord> pairs;       // pairs[i].pair_id == i
  std::vector<Split> split;            // indexed by pair_id
  std::vector<std::size_t> deletion_mask;  // sorted train pair ids (D_f)

  std::vector<std::size_t> pair_ids(Split s) const;
  std::vector<std::size_t> deleted_ids() const { return deletion_mask; }
  std::vector<std::size_t> retained_ids() const;  // train \ D_f
  std::vector<PairRef> refs(std::span<const std::size_t> pair_ids) const;

  const Matrix& samples(Modality m) const { return m == Modality::A ? samples_a : samples_b; }

  friend bool operator==(const DatasetBundle&, const DatasetBundle&) = default;
};

DatasetBundle generate_dataset(const SynthConfig& config);

// |train| that generate_dataset(config) will produce.
std::size_t train_pair_count(const SynthConfig& config);

// Draws |D_f| = size train pairs uniformly without replacement and stores the
// sorted result in bundle.deletion_mask. Throws InvalidSize unless
// 0 < size < |train|.
std::vector<std::size_t> sample_deletion_set(DatasetBundle& bundle, std::size_t size, std::uint64_t seed);

// n cross-combinations (A of pair p, B of pair q), p != q, both from D_r,
// never sharing a concept. Drawn with replacement.
std::vector<PairRef> sample_unrelated_pairs(const DatasetBundle& bundle, std::size_t n, std::uint64_t seed);

// Same sampler over an arbitrary pool of pair ids, drawing from `rng`.
std::vector<PairRef> sample_unrelated_from(const DatasetBundle& bundle, std::span<const std::size_t> pool,
                                           std::size_t n, Rng& rng);

// Class label used by the unimodal probe and by the generator's centroids.
std::size_t concept_class(std::size_t concept_id, int n_classes);

// Number of A or B samples that occur both in a D_f pair and in a D_r pair.
std::size_t shared_item_count(const DatasetBundle& bundle);

}  // namespace mmu
