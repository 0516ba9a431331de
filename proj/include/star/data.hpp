#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "star/types.hpp"

namespace star {

/// One sample. `fine_hidden` is the evaluation-only fine category; -1 when
/// absent. Training code must never read it.
struct LabeledSample {
  SampleId id = -1;
  Vectord features;
  int coarse = -1;
  int fine_hidden = -1;
};

struct Dataset {
  std::vector<LabeledSample> samples;

  Index size() const { return static_cast<Index>(samples.size()); }
  Index dim() const {
    return samples.empty() ? 0 : samples.front().features.size();
  }
  SampleMatrix feature_matrix() const;
  std::vector<int> coarse_labels() const;
  std::vector<int> fine_labels() const;  // -1 entries allowed
  std::vector<SampleId> ids() const;
};

struct DatasetManifest {
  Index n_train = 0;
  Index n_test = 0;
  int coarse_m = 0;
  int fine_k = 0;
  Index d_in = 0;
  std::uint64_t seed = 0;
  std::string source;  // generator parameters or external description
};

/// Latent-space byproducts of generation, kept for sanity oracles.
struct GeneratorDebug {
  Matrixd coarse_centers;  // M x d_latent
  Matrixd fine_centers;    // K x d_latent
  SampleMatrix latents;    // (train+test) x d_latent, row index = sample id
};

struct GeneratedData {
  Dataset train;
  Dataset test;
  DatasetManifest manifest;
  GeneratorDebug debug;
};

/// Fine category f belongs to coarse category f*M/K; the map is total,
/// surjective, and balanced (sizes differ by at most one).
int fine_to_coarse(int fine, int coarse_m, int fine_k);

/// Hierarchical Gaussian generator. Coarse centers are drawn at scale
/// `coarse_sep` in latent space, fine centers offset from their parent at
/// scale `fine_sep`, samples jittered at scale `noise`, and everything is
/// pushed through one fixed random linear map to d_in dimensions. The split
/// is 80/20 stratified by fine category. Training samples keep fine_hidden
/// for evaluation only.
GeneratedData generate_synthetic(int coarse_m, int fine_k, int n_per_fine,
                                 Index d_latent, Index d_in,
                                 double coarse_sep, double fine_sep,
                                 double noise, std::uint64_t seed);

/// Directory layout: train.csv, test.csv, manifest.json. Round-trip exact.
void save_dataset(const GeneratedData& data, const std::string& dir);
struct LoadedData {
  Dataset train;
  Dataset test;
  DatasetManifest manifest;
};
LoadedData load_dataset(const std::string& dir);

}  // namespace star
