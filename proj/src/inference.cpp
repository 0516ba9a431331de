#include "star/inference.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>

#include <json.hpp>

#include "star/error.hpp"
#include "star/rng.hpp"
#include "star/vecmath.hpp"

namespace star {

namespace {

Matrixd kmeanspp_init(const SampleMatrix& X, int k, rng::Engine& eng) {
  const Index n = X.rows();
  Matrixd centroids(k, X.cols());
  std::vector<double> min_sq(static_cast<std::size_t>(n),
                             std::numeric_limits<double>::infinity());
  centroids.row(0) = X.row(static_cast<Index>(
      rng::uniform_index(eng, static_cast<std::uint64_t>(n))));
  for (int c = 1; c < k; ++c) {
    double total = 0.0;
    for (Index i = 0; i < n; ++i) {
      const double d = (X.row(i) - centroids.row(c - 1)).squaredNorm();
      min_sq[static_cast<std::size_t>(i)] =
          std::min(min_sq[static_cast<std::size_t>(i)], d);
      total += min_sq[static_cast<std::size_t>(i)];
    }
    Index pick;
    if (total > 0.0) {
      pick = static_cast<Index>(rng::discrete(eng, min_sq));
    } else {
      // All remaining points coincide with chosen centroids.
      pick = static_cast<Index>(
          rng::uniform_index(eng, static_cast<std::uint64_t>(n)));
    }
    centroids.row(c) = X.row(pick);
  }
  return centroids;
}

/// Assignment step; ties go to the smaller centroid index.
void assign_points(const SampleMatrix& X, const Matrixd& centroids,
                   std::vector<int>& assignments) {
  const Index n = X.rows();
  const int k = static_cast<int>(centroids.rows());
  for (Index i = 0; i < n; ++i) {
    int best = 0;
    double best_d = (X.row(i) - centroids.row(0)).squaredNorm();
    for (int c = 1; c < k; ++c) {
      const double d = (X.row(i) - centroids.row(c)).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    assignments[static_cast<std::size_t>(i)] = best;
  }
}

double compute_inertia(const SampleMatrix& X, const Matrixd& centroids,
                       const std::vector<int>& assignments) {
  double inertia = 0.0;
  for (Index i = 0; i < X.rows(); ++i)
    inertia += (X.row(i) -
                centroids.row(assignments[static_cast<std::size_t>(i)]))
                   .squaredNorm();
  return inertia;
}

}  // namespace

ClusterModel kmeans(const SampleMatrix& X, int k, std::uint64_t seed,
                    const KMeansOptions& options) {
  const Index n = X.rows();
  if (k < 1) throw ConfigError("kmeans: k must be >= 1");
  if (n < k) throw DataError("kmeans: fewer samples than clusters");
  if (options.restarts < 1 || options.max_iters < 1)
    throw ConfigError("kmeans: restarts and max_iters must be >= 1");

  ClusterModel best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int restart = 0; restart < options.restarts; ++restart) {
    rng::Engine eng =
        rng::stream(seed, "kmeans", static_cast<std::uint64_t>(restart));
    Matrixd centroids = kmeanspp_init(X, k, eng);
    std::vector<int> assignments(static_cast<std::size_t>(n), 0);
    std::vector<double> history;
    double prev = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < options.max_iters; ++iter) {
      assign_points(X, centroids, assignments);

      // Reseed empty clusters from the farthest-from-centroid point.
      std::vector<long long> counts(static_cast<std::size_t>(k), 0);
      for (int a : assignments) counts[static_cast<std::size_t>(a)]++;
      for (int c = 0; c < k; ++c) {
        if (counts[static_cast<std::size_t>(c)] > 0) continue;
        Index farthest = -1;
        double far_d = -1.0;
        for (Index i = 0; i < n; ++i) {
          const int a = assignments[static_cast<std::size_t>(i)];
          if (counts[static_cast<std::size_t>(a)] <= 1) continue;
          const double d = (X.row(i) - centroids.row(a)).squaredNorm();
          if (d > far_d) {
            far_d = d;
            farthest = i;
          }
        }
        if (farthest < 0) continue;  // nothing movable
        counts[static_cast<std::size_t>(
            assignments[static_cast<std::size_t>(farthest)])]--;
        assignments[static_cast<std::size_t>(farthest)] = c;
        counts[static_cast<std::size_t>(c)]++;
        centroids.row(c) = X.row(farthest);
      }

      // Update step: means of the assigned points.
      Matrixd sums = Matrixd::Zero(k, X.cols());
      std::vector<long long> sizes(static_cast<std::size_t>(k), 0);
      for (Index i = 0; i < n; ++i) {
        sums.row(assignments[static_cast<std::size_t>(i)]) += X.row(i);
        sizes[static_cast<std::size_t>(
            assignments[static_cast<std::size_t>(i)])]++;
      }
      for (int c = 0; c < k; ++c)
        if (sizes[static_cast<std::size_t>(c)] > 0)
          centroids.row(c) =
              sums.row(c) /
              static_cast<double>(sizes[static_cast<std::size_t>(c)]);

      const double inertia = compute_inertia(X, centroids, assignments);
      history.push_back(inertia);
      if (std::isfinite(prev) &&
          std::abs(prev - inertia) <= options.tol * std::max(prev, 1e-300))
        break;
      prev = inertia;
    }
    const double final_inertia = history.back();
    best.restart_inertias.push_back(final_inertia);
    if (final_inertia < best.inertia) {
      best.inertia = final_inertia;
      best.centroids = centroids;
      best.assignments = assignments;
      best.inertia_history = history;
    }
  }
  return best;
}

std::vector<int> clustering_inference(const SampleMatrix& test_embeddings,
                                      int k, std::uint64_t seed,
                                      const KMeansOptions& options) {
  return kmeans(test_embeddings, k, seed, options).assignments;
}

CentroidBank build_centroids(const SampleMatrix& train_embeddings,
                             const std::vector<int>& coarse_labels, int k,
                             std::uint64_t seed, bool renormalize,
                             const KMeansOptions& options) {
  const Index n = train_embeddings.rows();
  if (static_cast<Index>(coarse_labels.size()) != n)
    throw ConfigError("build_centroids: label count mismatch");
  ClusterModel model = kmeans(train_embeddings, k, seed, options);

  CentroidBank bank;
  bank.centroids.resize(k, train_embeddings.cols());
  bank.coarse_labels.resize(static_cast<std::size_t>(k), -1);
  for (int c = 0; c < k; ++c) {
    // Predominant coarse label; ties toward the smaller label value.
    std::map<int, long long> counts;
    for (Index i = 0; i < n; ++i)
      if (model.assignments[static_cast<std::size_t>(i)] == c)
        counts[coarse_labels[static_cast<std::size_t>(i)]]++;
    if (counts.empty())
      throw NumericError("build_centroids: empty cluster in k-means output");
    int best_label = -1;
    long long best_count = -1;
    for (const auto& [label, count] : counts)
      if (count > best_count) {  // map iterates ascending: ties keep smaller
        best_count = count;
        best_label = label;
      }
    bank.coarse_labels[static_cast<std::size_t>(c)] = best_label;

    Vectord mean = Vectord::Zero(train_embeddings.cols());
    long long members = 0;
    for (Index i = 0; i < n; ++i)
      if (model.assignments[static_cast<std::size_t>(i)] == c &&
          coarse_labels[static_cast<std::size_t>(i)] == best_label) {
        mean += train_embeddings.row(i).transpose();
        members++;
      }
    mean /= static_cast<double>(members);
    bank.centroids.row(c) =
        renormalize ? vecmath::normalize(mean).transpose() : mean.transpose();
  }
  return bank;
}

int centroid_inference(const Vectord& test_embedding,
                       const CentroidBank& bank) {
  int best = 0;
  double best_sim = bank.centroids.row(0).dot(test_embedding);
  for (int c = 1; c < bank.k(); ++c) {
    const double sim = bank.centroids.row(c).dot(test_embedding);
    if (sim > best_sim) {
      best_sim = sim;
      best = c;
    }
  }
  return best;
}

std::vector<int> centroid_inference(const SampleMatrix& test_embeddings,
                                    const CentroidBank& bank) {
  std::vector<int> labels(static_cast<std::size_t>(test_embeddings.rows()));
  for (Index i = 0; i < test_embeddings.rows(); ++i)
    labels[static_cast<std::size_t>(i)] =
        centroid_inference(Vectord(test_embeddings.row(i).transpose()), bank);
  return labels;
}

void save_centroid_bank(const CentroidBank& bank, const std::string& path) {
  nlohmann::json j;
  j["version"] = 1;
  j["k"] = bank.k();
  j["dim"] = bank.centroids.cols();
  j["coarse_labels"] = bank.coarse_labels;
  std::vector<std::vector<double>> rows;
  for (Index r = 0; r < bank.centroids.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(bank.centroids.cols()));
    for (Index c = 0; c < bank.centroids.cols(); ++c)
      row[static_cast<std::size_t>(c)] = bank.centroids(r, c);
    rows.push_back(std::move(row));
  }
  j["centroids"] = rows;
  std::ofstream out(path);
  if (!out) throw DataError("save_centroid_bank: cannot write " + path);
  out << j.dump(2) << "\n";
}

CentroidBank load_centroid_bank(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("load_centroid_bank: cannot read " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("load_centroid_bank: invalid JSON in " + path + ": " +
                    e.what());
  }
  if (!j.contains("version") || j["version"] != 1)
    throw DataError("load_centroid_bank: unsupported version in " + path);
  CentroidBank bank;
  const int k = j.at("k").get<int>();
  const Index dim = j.at("dim").get<Index>();
  bank.coarse_labels = j.at("coarse_labels").get<std::vector<int>>();
  const auto rows = j.at("centroids").get<std::vector<std::vector<double>>>();
  if (static_cast<int>(rows.size()) != k ||
      static_cast<int>(bank.coarse_labels.size()) != k)
    throw DataError("load_centroid_bank: centroid count mismatch in " + path);
  bank.centroids.resize(k, dim);
  for (int r = 0; r < k; ++r) {
    if (static_cast<Index>(rows[static_cast<std::size_t>(r)].size()) != dim)
      throw DataError("load_centroid_bank: centroid width mismatch in " +
                      path);
    for (Index c = 0; c < dim; ++c)
      bank.centroids(r, c) =
          rows[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)];
  }
  return bank;
}

}  // namespace star
