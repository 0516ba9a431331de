#include "star/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "star/error.hpp"

namespace star {

namespace {

std::vector<int> compact_labels(const std::vector<int>& labels, int& k_out) {
  std::map<int, int> remap;
  for (int l : labels) remap.emplace(l, 0);
  int next = 0;
  for (auto& [label, idx] : remap) idx = next++;
  std::vector<int> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) out[i] = remap[labels[i]];
  k_out = next;
  return out;
}

long long choose2(long long m) { return m * (m - 1) / 2; }

/// Partitions equal up to relabeling: the contingency table is a (padded)
/// permutation matrix in the count sense, i.e. every row and column has at
/// most one nonzero block and the blocks cover everything.
bool partitions_equal(const ContingencyTable& t) {
  for (Index i = 0; i < t.counts.rows(); ++i) {
    long long nonzero = 0;
    for (Index j = 0; j < t.counts.cols(); ++j)
      if (t.counts(i, j) > 0) ++nonzero;
    if (nonzero > 1) return false;
  }
  for (Index j = 0; j < t.counts.cols(); ++j) {
    long long nonzero = 0;
    for (Index i = 0; i < t.counts.rows(); ++i)
      if (t.counts(i, j) > 0) ++nonzero;
    if (nonzero > 1) return false;
  }
  return true;
}

/// Exact minimum-cost assignment on a square cost matrix (potentials +
/// augmenting paths, cubic). Returns, for each column, the assigned row.
std::vector<int> solve_assignment(
    const Eigen::Matrix<long long, Eigen::Dynamic, Eigen::Dynamic>& cost) {
  const int n = static_cast<int>(cost.rows());
  const long long inf = std::numeric_limits<long long>::max() / 4;
  std::vector<long long> u(static_cast<std::size_t>(n) + 1, 0);
  std::vector<long long> v(static_cast<std::size_t>(n) + 1, 0);
  std::vector<int> p(static_cast<std::size_t>(n) + 1, 0);
  std::vector<int> way(static_cast<std::size_t>(n) + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<long long> minv(static_cast<std::size_t>(n) + 1, inf);
    std::vector<bool> used(static_cast<std::size_t>(n) + 1, false);
    do {
      used[static_cast<std::size_t>(j0)] = true;
      const int i0 = p[static_cast<std::size_t>(j0)];
      int j1 = -1;
      long long delta = inf;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const long long cur = cost(i0 - 1, j - 1) -
                              u[static_cast<std::size_t>(i0)] -
                              v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> row_of_col(static_cast<std::size_t>(n));
  for (int j = 1; j <= n; ++j)
    row_of_col[static_cast<std::size_t>(j) - 1] =
        p[static_cast<std::size_t>(j)] - 1;
  return row_of_col;
}

}  // namespace

ContingencyTable ContingencyTable::build(const std::vector<int>& pred,
                                         const std::vector<int>& truth) {
  if (pred.size() != truth.size())
    throw ConfigError("ContingencyTable: length mismatch");
  if (pred.empty()) throw ConfigError("ContingencyTable: empty input");
  int kp = 0, kt = 0;
  std::vector<int> cp = compact_labels(pred, kp);
  std::vector<int> ct = compact_labels(truth, kt);
  ContingencyTable t;
  t.counts.setZero(kp, kt);
  for (std::size_t i = 0; i < cp.size(); ++i)
    t.counts(cp[i], ct[i]) += 1;
  t.row_sums.assign(static_cast<std::size_t>(kp), 0);
  t.col_sums.assign(static_cast<std::size_t>(kt), 0);
  for (Index i = 0; i < t.counts.rows(); ++i)
    for (Index j = 0; j < t.counts.cols(); ++j) {
      t.row_sums[static_cast<std::size_t>(i)] += t.counts(i, j);
      t.col_sums[static_cast<std::size_t>(j)] += t.counts(i, j);
    }
  t.total = static_cast<long long>(pred.size());
  return t;
}

double hungarian_accuracy(const std::vector<int>& pred,
                          const std::vector<int>& truth) {
  ContingencyTable t = ContingencyTable::build(pred, truth);
  const Index k = std::max(t.counts.rows(), t.counts.cols());
  // Pad to square, negate so the minimizer maximizes matched counts.
  Eigen::Matrix<long long, Eigen::Dynamic, Eigen::Dynamic> cost =
      Eigen::Matrix<long long, Eigen::Dynamic, Eigen::Dynamic>::Zero(k, k);
  cost.topLeftCorner(t.counts.rows(), t.counts.cols()) = -t.counts;
  std::vector<int> row_of_col = solve_assignment(cost);
  long long matched = 0;
  for (Index j = 0; j < k; ++j)
    matched -= cost(row_of_col[static_cast<std::size_t>(j)], j);
  return static_cast<double>(matched) / static_cast<double>(t.total);
}

double ari(const std::vector<int>& pred, const std::vector<int>& truth) {
  if (pred.size() != truth.size()) throw ConfigError("ari: length mismatch");
  if (pred.size() < 2) throw ConfigError("ari: need at least two samples");
  ContingencyTable t = ContingencyTable::build(pred, truth);
  long long index = 0;
  for (Index i = 0; i < t.counts.rows(); ++i)
    for (Index j = 0; j < t.counts.cols(); ++j)
      index += choose2(t.counts(i, j));
  long long sum_rows = 0, sum_cols = 0;
  for (long long r : t.row_sums) sum_rows += choose2(r);
  for (long long c : t.col_sums) sum_cols += choose2(c);
  const double pairs = static_cast<double>(choose2(t.total));
  const double expected =
      static_cast<double>(sum_rows) * static_cast<double>(sum_cols) / pairs;
  const double max_index =
      0.5 * (static_cast<double>(sum_rows) + static_cast<double>(sum_cols));
  const double denom = max_index - expected;
  if (denom == 0.0) return partitions_equal(t) ? 1.0 : 0.0;
  return (static_cast<double>(index) - expected) / denom;
}

double nmi(const std::vector<int>& pred, const std::vector<int>& truth) {
  ContingencyTable t = ContingencyTable::build(pred, truth);
  const double n = static_cast<double>(t.total);
  double h_pred = 0.0, h_truth = 0.0, mi = 0.0;
  for (long long r : t.row_sums)
    if (r > 0) h_pred -= (r / n) * std::log(r / n);
  for (long long c : t.col_sums)
    if (c > 0) h_truth -= (c / n) * std::log(c / n);
  if (h_pred == 0.0 && h_truth == 0.0) return 1.0;
  if (h_pred == 0.0 || h_truth == 0.0) return 0.0;
  for (Index i = 0; i < t.counts.rows(); ++i)
    for (Index j = 0; j < t.counts.cols(); ++j) {
      const long long c = t.counts(i, j);
      if (c == 0) continue;
      mi += (c / n) *
            std::log(n * static_cast<double>(c) /
                     (static_cast<double>(
                          t.row_sums[static_cast<std::size_t>(i)]) *
                      static_cast<double>(
                          t.col_sums[static_cast<std::size_t>(j)])));
    }
  return mi / (0.5 * (h_pred + h_truth));
}

double silhouette(const SampleMatrix& embeddings,
                  const std::vector<int>& assignments) {
  const Index n = embeddings.rows();
  if (static_cast<Index>(assignments.size()) != n)
    throw ConfigError("silhouette: assignment length mismatch");
  if (n < 2) throw ConfigError("silhouette: need at least two samples");
  int k = 0;
  std::vector<int> labels = compact_labels(assignments, k);
  if (k < 2) throw DataError("silhouette: need at least two clusters");

  std::vector<long long> cluster_size(static_cast<std::size_t>(k), 0);
  for (int l : labels) cluster_size[static_cast<std::size_t>(l)]++;

  // Per sample, accumulate the distance sum to every cluster in one pass.
  double total_score = 0.0;
  Matrixd dist_sums = Matrixd::Zero(n, k);
  for (Index i = 0; i < n; ++i)
    for (Index j = i + 1; j < n; ++j) {
      const double d = (embeddings.row(i) - embeddings.row(j)).norm();
      dist_sums(i, labels[static_cast<std::size_t>(j)]) += d;
      dist_sums(j, labels[static_cast<std::size_t>(i)]) += d;
    }
  for (Index i = 0; i < n; ++i) {
    const int own = labels[static_cast<std::size_t>(i)];
    const long long own_size = cluster_size[static_cast<std::size_t>(own)];
    if (own_size <= 1) continue;  // singleton scores 0
    const double a =
        dist_sums(i, own) / static_cast<double>(own_size - 1);
    double b = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) {
      if (c == own) continue;
      b = std::min(b, dist_sums(i, c) /
                          static_cast<double>(
                              cluster_size[static_cast<std::size_t>(c)]));
    }
    const double m = std::max(a, b);
    if (m > 0.0) total_score += (b - a) / m;
  }
  return total_score / static_cast<double>(n);
}

}  // namespace star
