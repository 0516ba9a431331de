#pragma once

#include <deque>
#include <unordered_map>
#include <vector>

#include "star/types.hpp"

namespace star {

/// One momentum-encoder feature stored in the queue.
struct QueueEntry {
  SampleId sample_id = -1;
  Vectord embedding;  // unit-norm
  int coarse_label = -1;
};

/// Bounded FIFO of momentum features. An arriving entry whose sample_id is
/// already present refreshes the stale entry in place (position preserved);
/// otherwise it is appended and the oldest entry is evicted when full.
class MomentumQueue {
 public:
  explicit MomentumQueue(Index capacity);

  void push(const QueueEntry& entry);
  void push(const std::vector<QueueEntry>& batch);

  Index size() const { return static_cast<Index>(entries_.size()); }
  Index capacity() const { return capacity_; }
  bool empty() const { return entries_.empty(); }
  bool contains(SampleId id) const;

  /// Entries in FIFO order (oldest first).
  const std::deque<QueueEntry>& entries() const { return entries_; }

 private:
  Index capacity_;
  std::deque<QueueEntry> entries_;
  // id -> arrival sequence number; entry position = seq - front_seq_.
  std::unordered_map<SampleId, std::uint64_t> seq_by_id_;
  std::uint64_t front_seq_ = 0;
  std::uint64_t next_seq_ = 0;
};

/// Immutable, matrix-shaped view of a queue taken once per batch. Row r of
/// `embeddings` is the r-th entry in FIFO order. `probs`/`log_probs` are the
/// coordinate-softmax distributions of each row; they are filled lazily by
/// precompute_probs and only needed by the KL-based losses.
struct QueueSnapshot {
  SampleMatrix embeddings;             // |Q| x d
  std::vector<SampleId> ids;           // |Q|
  std::vector<int> coarse_labels;      // |Q|
  SampleMatrix probs;                  // |Q| x d (optional)
  SampleMatrix log_probs;              // |Q| x d (optional)
  Vectord self_kl;                     // per-row sum p*log(p) cache (optional)
  double prob_temperature = 0.0;       // parameters behind the cache
  double prob_floor = 0.0;

  Index size() const { return embeddings.rows(); }
  bool has_probs() const { return probs.rows() == embeddings.rows(); }
  void precompute_probs(double temperature, double floor);
};

QueueSnapshot snapshot(const MomentumQueue& queue);

/// Retrieved neighbors of one query, ordered by descending similarity.
/// Position j holds the neighbor of rank j+1; weights are strictly positive
/// and sum to 1.
struct NeighborSet {
  std::vector<Index> queue_rows;  // row indices into the snapshot
  std::vector<SampleId> ids;
  Vectord similarities;
  Vectord weights;

  Index size() const { return static_cast<Index>(queue_rows.size()); }
};

/// Soft rank weights w_j proportional to alpha^(-rank_j / k), normalized to
/// sum to 1. Ranks start at 1. alpha = 1 gives uniform weights; alpha > 1
/// makes weights strictly decreasing in rank.
Vectord rank_weights(const std::vector<int>& ranks, double alpha, int k);

/// Top-k entries by cosine similarity to `q`, excluding any entry whose
/// sample_id equals `query_id`. Ties break toward the lower sample_id. Fewer
/// than k eligible entries yields all of them (ranks stay gapless).
NeighborSet retrieve_neighbors(const Vectord& q, SampleId query_id,
                               const QueueSnapshot& snap, int k, double alpha);
NeighborSet retrieve_neighbors(const Vectord& q, SampleId query_id,
                               const MomentumQueue& queue, int k, double alpha);

/// Staged schedule: stage_length epochs per value, clamped at the last.
struct AlphaSchedule {
  std::vector<double> values{150.0, 10.0, 5.0, 2.0};
  int stage_length = 5;

  double at(int epoch) const;
};

/// Default schedule: epochs 0-4 -> 150, 5-9 -> 10, 10-14 -> 5, >= 15 -> 2.
double alpha_for_epoch(int epoch);

}  // namespace star
