#pragma once

// Shared fixtures. Expensive objects (default bundle, trained f) are built
// once per test binary.

#include <filesystem>
#include <random>
#include <string>

#include "mmu/model.hpp"
#include "mmu/rng.hpp"
#include "mmu/synthdata.hpp"

namespace mmu::fixtures {

inline SynthConfig small_synth(std::uint64_t seed = 3) {
  SynthConfig c;
  c.n_concepts = 70;
  c.seed = seed;
  return c;
}

// 200 train pairs, |D_f| = 20.
inline DatasetBundle small_bundle(std::uint64_t seed = 3) {
  DatasetBundle b = generate_dataset(small_synth(seed));
  sample_deletion_set(b, 20, seed);
  return b;
}

inline ModelConfig small_model_config(FusionKind kind = FusionKind::parametric) {
  ModelConfig m;
  m.hidden_a = {6};
  m.hidden_b = {5};
  m.emb_dim = 4;
  m.fusion_kind = kind;
  m.fusion_dims = {5};
  return m;
}

// Default synthetic data (2000 train pairs) with |D_f| = 200, seed 0.
inline const DatasetBundle& default_bundle() {
  static const DatasetBundle b = [] {
    SynthConfig c;
    DatasetBundle out = generate_dataset(c);
    sample_deletion_set(out, 200, 0);
    return out;
  }();
  return b;
}

inline const MultimodalModel& default_f() {
  static const MultimodalModel f = train_original(default_bundle(), ModelConfig{}, TrainConfig{}).model;
  return f;
}

inline Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Matrix m(r, c);
  for (double& v : m.data) v = n(rng);
  return m;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("mmu_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace mmu::fixtures
