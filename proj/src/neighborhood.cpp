#include "star/neighborhood.hpp"

#include <algorithm>
#include <cmath>

#include "star/error.hpp"
#include "star/vecmath.hpp"

namespace star {

MomentumQueue::MomentumQueue(Index capacity) : capacity_(capacity) {
  if (capacity < 1) throw ConfigError("MomentumQueue: capacity must be >= 1");
}

void MomentumQueue::push(const QueueEntry& entry) {
  auto it = seq_by_id_.find(entry.sample_id);
  if (it != seq_by_id_.end() && it->second >= front_seq_) {
    entries_[static_cast<std::size_t>(it->second - front_seq_)] = entry;
    return;
  }
  entries_.push_back(entry);
  seq_by_id_[entry.sample_id] = next_seq_++;
  if (static_cast<Index>(entries_.size()) > capacity_) {
    const QueueEntry& front = entries_.front();
    auto fit = seq_by_id_.find(front.sample_id);
    if (fit != seq_by_id_.end() && fit->second == front_seq_)
      seq_by_id_.erase(fit);
    entries_.pop_front();
    ++front_seq_;
  }
}

void MomentumQueue::push(const std::vector<QueueEntry>& batch) {
  for (const QueueEntry& e : batch) push(e);
}

bool MomentumQueue::contains(SampleId id) const {
  auto it = seq_by_id_.find(id);
  return it != seq_by_id_.end() && it->second >= front_seq_;
}

void QueueSnapshot::precompute_probs(double temperature, double floor) {
  const Index n = embeddings.rows();
  const Index d = embeddings.cols();
  prob_temperature = temperature;
  prob_floor = floor;
  probs.resize(n, d);
  log_probs.resize(n, d);
  self_kl.resize(n);
  for (Index r = 0; r < n; ++r) {
    Vectord p = vecmath::embed_to_prob(embeddings.row(r).transpose(),
                                       temperature, floor);
    probs.row(r) = p.transpose();
    log_probs.row(r) = p.array().log().matrix().transpose();
    self_kl(r) = (p.array() * p.array().log()).sum();
  }
}

QueueSnapshot snapshot(const MomentumQueue& queue) {
  QueueSnapshot snap;
  const Index n = queue.size();
  snap.ids.reserve(static_cast<std::size_t>(n));
  snap.coarse_labels.reserve(static_cast<std::size_t>(n));
  Index r = 0;
  for (const QueueEntry& e : queue.entries()) {
    if (r == 0) snap.embeddings.resize(n, e.embedding.size());
    snap.embeddings.row(r++) = e.embedding.transpose();
    snap.ids.push_back(e.sample_id);
    snap.coarse_labels.push_back(e.coarse_label);
  }
  return snap;
}

Vectord rank_weights(const std::vector<int>& ranks, double alpha, int k) {
  if (!(alpha > 0.0)) throw ConfigError("rank_weights: alpha must be > 0");
  if (k < 1) throw ConfigError("rank_weights: k must be >= 1");
  Vectord raw(static_cast<Index>(ranks.size()));
  for (std::size_t j = 0; j < ranks.size(); ++j) {
    if (ranks[j] < 1 || ranks[j] > k)
      throw ConfigError("rank_weights: rank out of [1, k]");
    raw(static_cast<Index>(j)) =
        std::pow(alpha, -static_cast<double>(ranks[j]) / k);
  }
  return raw / raw.sum();
}

NeighborSet retrieve_neighbors(const Vectord& q, SampleId query_id,
                               const QueueSnapshot& snap, int k, double alpha) {
  if (k < 1) throw ConfigError("retrieve_neighbors: k must be >= 1");
  const Index n = snap.size();
  Vectord sims = snap.embeddings * q;

  std::vector<Index> eligible;
  eligible.reserve(static_cast<std::size_t>(n));
  for (Index r = 0; r < n; ++r)
    if (snap.ids[static_cast<std::size_t>(r)] != query_id)
      eligible.push_back(r);
  if (eligible.empty())
    throw NumericError(
        "retrieve_neighbors: queue empty after excluding the query");

  const auto better = [&](Index a, Index b) {
    if (sims(a) != sims(b)) return sims(a) > sims(b);
    return snap.ids[static_cast<std::size_t>(a)] <
           snap.ids[static_cast<std::size_t>(b)];
  };
  const std::size_t kept =
      std::min<std::size_t>(static_cast<std::size_t>(k), eligible.size());
  std::partial_sort(eligible.begin(),
                    eligible.begin() + static_cast<std::ptrdiff_t>(kept),
                    eligible.end(), better);
  eligible.resize(kept);

  NeighborSet out;
  out.queue_rows = eligible;
  out.similarities.resize(static_cast<Index>(kept));
  out.ids.reserve(kept);
  std::vector<int> ranks(kept);
  for (std::size_t j = 0; j < kept; ++j) {
    out.similarities(static_cast<Index>(j)) = sims(eligible[j]);
    out.ids.push_back(snap.ids[static_cast<std::size_t>(eligible[j])]);
    ranks[j] = static_cast<int>(j) + 1;
  }
  out.weights = rank_weights(ranks, alpha, k);
  return out;
}

NeighborSet retrieve_neighbors(const Vectord& q, SampleId query_id,
                               const MomentumQueue& queue, int k,
                               double alpha) {
  return retrieve_neighbors(q, query_id, snapshot(queue), k, alpha);
}

double AlphaSchedule::at(int epoch) const {
  if (epoch < 0) throw ConfigError("AlphaSchedule: epoch must be >= 0");
  std::size_t stage = static_cast<std::size_t>(epoch / stage_length);
  if (stage >= values.size()) stage = values.size() - 1;
  return values[stage];
}

double alpha_for_epoch(int epoch) { return AlphaSchedule{}.at(epoch); }

}  // namespace star
