#include <doctest.h>

#include <cmath>
#include <vector>

#include "star/error.hpp"
#include "star/neighborhood.hpp"
#include "star/rng.hpp"
#include "star/vecmath.hpp"

using namespace star;

namespace {

QueueEntry entry(SampleId id, std::initializer_list<double> coords,
                 int label = 0) {
  QueueEntry e;
  e.sample_id = id;
  e.embedding.resize(static_cast<Index>(coords.size()));
  Index i = 0;
  for (double c : coords) e.embedding(i++) = c;
  e.embedding = vecmath::normalize(e.embedding);
  e.coarse_label = label;
  return e;
}

QueueEntry random_entry(SampleId id, Index dim, rng::Engine& eng) {
  QueueEntry e;
  e.sample_id = id;
  e.embedding.resize(dim);
  for (Index i = 0; i < dim; ++i) e.embedding(i) = rng::normal(eng);
  e.embedding = vecmath::normalize(e.embedding);
  e.coarse_label = static_cast<int>(id % 3);
  return e;
}

}  // namespace

TEST_SUITE("neighborhood") {

TEST_CASE("queue rejects non-positive capacity") {
  CHECK_THROWS_AS(MomentumQueue(0), ConfigError);
  CHECK_THROWS_AS(MomentumQueue(-3), ConfigError);
}

TEST_CASE("queue evicts oldest first at capacity") {
  MomentumQueue q(3);
  for (SampleId id = 0; id < 5; ++id) q.push(entry(id, {1.0, double(id)}));
  CHECK(q.size() == 3);
  std::vector<SampleId> ids;
  for (const auto& e : q.entries()) ids.push_back(e.sample_id);
  CHECK(ids == std::vector<SampleId>{2, 3, 4});
  CHECK_FALSE(q.contains(0));
  CHECK_FALSE(q.contains(1));
  CHECK(q.contains(2));
}

TEST_CASE("duplicate sample refreshes in place without eviction") {
  MomentumQueue q(3);
  q.push(entry(10, {1.0, 0.0}));
  q.push(entry(11, {0.0, 1.0}));
  q.push(entry(12, {1.0, 1.0}));
  // Refreshing id 11 must keep its middle position and evict nothing.
  q.push(entry(11, {3.0, 4.0}));
  CHECK(q.size() == 3);
  std::vector<SampleId> ids;
  for (const auto& e : q.entries()) ids.push_back(e.sample_id);
  CHECK(ids == std::vector<SampleId>{10, 11, 12});
  CHECK(q.entries()[1].embedding(0) == doctest::Approx(0.6));
  CHECK(q.entries()[1].embedding(1) == doctest::Approx(0.8));
}

TEST_CASE("refresh after eviction re-inserts at the tail") {
  MomentumQueue q(2);
  q.push(entry(1, {1.0, 0.0}));
  q.push(entry(2, {0.0, 1.0}));
  q.push(entry(3, {1.0, 1.0}));  // evicts 1
  CHECK_FALSE(q.contains(1));
  q.push(entry(1, {1.0, 2.0}));  // new arrival, evicts 2
  std::vector<SampleId> ids;
  for (const auto& e : q.entries()) ids.push_back(e.sample_id);
  CHECK(ids == std::vector<SampleId>{3, 1});
}

TEST_CASE("snapshot preserves FIFO order and labels") {
  MomentumQueue q(4);
  q.push(entry(5, {1.0, 0.0}, 2));
  q.push(entry(6, {0.0, 1.0}, 1));
  QueueSnapshot snap = snapshot(q);
  REQUIRE(snap.size() == 2);
  CHECK(snap.ids == std::vector<SampleId>{5, 6});
  CHECK(snap.coarse_labels == std::vector<int>{2, 1});
  CHECK(snap.embeddings(0, 0) == doctest::Approx(1.0));
  CHECK(snap.embeddings(1, 1) == doctest::Approx(1.0));
  CHECK_FALSE(snap.has_probs());
  snap.precompute_probs(1.0, 1e-8);
  CHECK(snap.has_probs());
  CHECK(snap.probs.row(0).sum() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(snap.self_kl(0) ==
        doctest::Approx((snap.probs.row(0).array() *
                         snap.probs.row(0).array().log())
                            .sum())
            .epsilon(1e-12));
}

TEST_CASE("rank weights match the closed form for k=2, alpha=4") {
  Vectord w = rank_weights({1, 2}, 4.0, 2);
  // Raw weights 4^(-1/2) = 1/2 and 4^(-1) = 1/4 normalize to 2/3, 1/3.
  CHECK(w(0) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(w(1) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("rank weights are uniform at alpha=1 and decreasing above") {
  Vectord u = rank_weights({1, 2, 3}, 1.0, 3);
  for (Index j = 0; j < 3; ++j)
    CHECK(u(j) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  Vectord w = rank_weights({1, 2, 3, 4}, 10.0, 4);
  CHECK(w.sum() == doctest::Approx(1.0).epsilon(1e-12));
  for (Index j = 1; j < 4; ++j) CHECK(w(j) < w(j - 1));
  CHECK(w.minCoeff() > 0.0);
}

TEST_CASE("rank weights validate their inputs") {
  CHECK_THROWS_AS(rank_weights({1}, 0.0, 1), ConfigError);
  CHECK_THROWS_AS(rank_weights({1}, -2.0, 1), ConfigError);
  CHECK_THROWS_AS(rank_weights({1}, 2.0, 0), ConfigError);
  CHECK_THROWS_AS(rank_weights({0}, 2.0, 3), ConfigError);
  CHECK_THROWS_AS(rank_weights({4}, 2.0, 3), ConfigError);
}

TEST_CASE("alpha schedule steps down every five epochs") {
  CHECK(alpha_for_epoch(0) == 150.0);
  CHECK(alpha_for_epoch(4) == 150.0);
  CHECK(alpha_for_epoch(5) == 10.0);
  CHECK(alpha_for_epoch(7) == 10.0);
  CHECK(alpha_for_epoch(12) == 5.0);
  CHECK(alpha_for_epoch(15) == 2.0);
  CHECK(alpha_for_epoch(17) == 2.0);
  CHECK(alpha_for_epoch(40) == 2.0);
  CHECK_THROWS_AS(alpha_for_epoch(-1), ConfigError);
}

TEST_CASE("retrieval orders by similarity and excludes the query") {
  MomentumQueue q(8);
  q.push(entry(0, {1.0, 0.0}));
  q.push(entry(1, {0.9, 0.1}));
  q.push(entry(2, {0.0, 1.0}));
  q.push(entry(3, {0.5, 0.5}));
  Vectord query(2);
  query << 1.0, 0.0;
  NeighborSet nb = retrieve_neighbors(query, /*query_id=*/0, q, 3, 2.0);
  REQUIRE(nb.size() == 3);
  CHECK(nb.ids == std::vector<SampleId>{1, 3, 2});
  CHECK(nb.similarities(0) > nb.similarities(1));
  CHECK(nb.similarities(1) > nb.similarities(2));
  CHECK(nb.weights.sum() == doctest::Approx(1.0).epsilon(1e-12));
  Vectord expected = rank_weights({1, 2, 3}, 2.0, 3);
  for (Index j = 0; j < 3; ++j)
    CHECK(nb.weights(j) == doctest::Approx(expected(j)).epsilon(1e-12));
}

TEST_CASE("retrieval tie-breaks toward the smaller sample id") {
  MomentumQueue q(4);
  q.push(entry(7, {1.0, 0.0}));
  q.push(entry(3, {1.0, 0.0}));  // same direction, same similarity
  Vectord query(2);
  query << 1.0, 0.0;
  NeighborSet nb = retrieve_neighbors(query, /*query_id=*/99, q, 2, 2.0);
  REQUIRE(nb.size() == 2);
  CHECK(nb.ids[0] == 3);
  CHECK(nb.ids[1] == 7);
}

TEST_CASE("retrieval returns fewer neighbors than k when queue is short") {
  MomentumQueue q(4);
  q.push(entry(1, {1.0, 0.0}));
  q.push(entry(2, {0.0, 1.0}));
  Vectord query(2);
  query << 1.0, 1.0;
  query = vecmath::normalize(query);
  NeighborSet nb = retrieve_neighbors(query, /*query_id=*/1, q, 10, 3.0);
  // Only id 2 is eligible.
  REQUIRE(nb.size() == 1);
  CHECK(nb.ids[0] == 2);
  CHECK(nb.weights(0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("retrieval fails when only the query itself is present") {
  MomentumQueue q(2);
  q.push(entry(5, {1.0, 0.0}));
  Vectord query(2);
  query << 1.0, 0.0;
  CHECK_THROWS_AS(retrieve_neighbors(query, 5, q, 3, 2.0), NumericError);
}

TEST_CASE("retrieval similarities agree with brute force on random data") {
  rng::Engine eng = rng::stream(23, "retrieval");
  MomentumQueue q(64);
  for (SampleId id = 0; id < 64; ++id) q.push(random_entry(id, 6, eng));
  QueueSnapshot snap = snapshot(q);
  for (int trial = 0; trial < 20; ++trial) {
    Vectord query(6);
    for (Index i = 0; i < 6; ++i) query(i) = rng::normal(eng);
    query = vecmath::normalize(query);
    const SampleId self = trial;  // exclude a different id each time
    NeighborSet nb = retrieve_neighbors(query, self, snap, 5, 4.0);
    REQUIRE(nb.size() == 5);
    // Brute force: best similarity among eligible entries.
    double best = -2.0;
    for (Index r = 0; r < snap.size(); ++r)
      if (snap.ids[static_cast<size_t>(r)] != self)
        best = std::max(best, vecmath::cosine_sim(
                                  Vectord(snap.embeddings.row(r).transpose()),
                                  query));
    CHECK(nb.similarities(0) == doctest::Approx(best).epsilon(1e-12));
    for (Index j = 0; j + 1 < nb.size(); ++j)
      CHECK(nb.similarities(j) >= nb.similarities(j + 1));
    for (SampleId id : nb.ids) CHECK(id != self);
  }
}

}  // TEST_SUITE
