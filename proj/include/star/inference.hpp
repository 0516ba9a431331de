#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "star/types.hpp"

namespace star {

struct KMeansOptions {
  int restarts = 10;
  int max_iters = 100;
  double tol = 1e-6;  // relative inertia change
};

/// Result of one k-means run (best of all restarts). `inertia_history`
/// tracks the winning restart's inertia after every Lloyd iteration;
/// `restart_inertias` holds the final inertia of every restart.
struct ClusterModel {
  Matrixd centroids;  // K x d
  std::vector<int> assignments;
  double inertia = 0.0;
  std::vector<double> inertia_history;
  std::vector<double> restart_inertias;

  int k() const { return static_cast<int>(centroids.rows()); }
};

/// K unit-norm centroid embeddings plus the predominant coarse label of the
/// source cluster each one was built from.
struct CentroidBank {
  Matrixd centroids;  // K x d, rows unit-norm
  std::vector<int> coarse_labels;

  int k() const { return static_cast<int>(centroids.rows()); }
};

/// Lloyd's algorithm with k-means++ seeding. Keeps the lowest-inertia model
/// across restarts; empty clusters are reseeded from the point farthest from
/// its assigned centroid; nearest-centroid ties break toward the smaller
/// index. Deterministic given the seed.
ClusterModel kmeans(const SampleMatrix& embeddings, int k, std::uint64_t seed,
                    const KMeansOptions& options = {});

/// Fine pseudo-labels for a test batch: k-means assignments.
std::vector<int> clustering_inference(const SampleMatrix& test_embeddings,
                                      int k, std::uint64_t seed,
                                      const KMeansOptions& options = {});

/// Clusters the training embeddings, keeps each cluster's predominant coarse
/// label (ties toward the smaller label), and averages only that label's
/// member embeddings. The mean is renormalized to the unit sphere unless
/// `renormalize` is off.
CentroidBank build_centroids(const SampleMatrix& train_embeddings,
                             const std::vector<int>& coarse_labels, int k,
                             std::uint64_t seed, bool renormalize = true,
                             const KMeansOptions& options = {});

/// Nearest centroid by cosine similarity; ties toward the smaller index.
/// Pure and O(K*d): the per-request path.
int centroid_inference(const Vectord& test_embedding,
                       const CentroidBank& bank);
std::vector<int> centroid_inference(const SampleMatrix& test_embeddings,
                                    const CentroidBank& bank);

/// Versioned JSON round-trip for the bank.
void save_centroid_bank(const CentroidBank& bank, const std::string& path);
CentroidBank load_centroid_bank(const std::string& path);

}  // namespace star
