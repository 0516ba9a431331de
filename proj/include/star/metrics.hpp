#pragma once

#include <string>
#include <vector>

#include "star/types.hpp"

namespace star {

/// Joint label counts: counts(i, j) is the number of samples with predicted
/// cluster i and true class j. Labels are compacted to dense indices in
/// sorted order of their original values.
struct ContingencyTable {
  Eigen::Matrix<long long, Eigen::Dynamic, Eigen::Dynamic> counts;
  std::vector<long long> row_sums;  // per predicted cluster
  std::vector<long long> col_sums;  // per true class
  long long total = 0;

  static ContingencyTable build(const std::vector<int>& pred,
                                const std::vector<int>& truth);
};

/// Metric bundle for one evaluation run.
struct EvalReport {
  double acc = 0.0;
  double ari = 0.0;
  double nmi = 0.0;
  double silhouette = 0.0;
  Index n = 0;
  int k = 0;
  std::string mechanism;
  std::string config_hash;
};

/// Clustering accuracy under the best one-to-one cluster/class matching,
/// solved exactly (rectangular tables are padded with zero-weight dummies).
double hungarian_accuracy(const std::vector<int>& pred,
                          const std::vector<int>& truth);

/// Adjusted Rand Index by pair counting. When the adjustment denominator
/// vanishes (both partitions trivial) the value is 1.0 if the partitions are
/// equal up to relabeling and 0.0 otherwise.
double ari(const std::vector<int>& pred, const std::vector<int>& truth);

/// Mutual information normalized by the arithmetic mean of the two label
/// entropies (natural logs). Both entropies zero -> 1.0; exactly one
/// zero -> 0.0.
double nmi(const std::vector<int>& pred, const std::vector<int>& truth);

/// Mean silhouette coefficient with Euclidean distances. Samples in
/// singleton clusters score 0, as do samples with a = b = 0. Requires at
/// least two distinct clusters.
double silhouette(const SampleMatrix& embeddings,
                  const std::vector<int>& assignments);

}  // namespace star
