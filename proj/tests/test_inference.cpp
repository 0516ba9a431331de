#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <vector>

#include <doctest.h>

#include "star/error.hpp"
#include "star/inference.hpp"
#include "star/metrics.hpp"
#include "star/rng.hpp"
#include "star/vecmath.hpp"

using namespace star;

namespace {

/// Three well-separated planar blobs; labels returned alongside.
SampleMatrix blobs(std::vector<int>& labels, int per_blob,
                   std::uint64_t seed, double spread = 0.3) {
  const Matrixd centers =
      (Matrixd(3, 2) << 0.0, 0.0, 10.0, 0.0, 0.0, 10.0).finished();
  rng::Engine eng = rng::stream(seed, "blobs");
  SampleMatrix points(3 * per_blob, 2);
  labels.assign(static_cast<std::size_t>(points.rows()), 0);
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < per_blob; ++i) {
      const Index row = c * per_blob + i;
      points(row, 0) = centers(c, 0) + spread * rng::normal(eng);
      points(row, 1) = centers(c, 1) + spread * rng::normal(eng);
      labels[static_cast<std::size_t>(row)] = c;
    }
  return points;
}

std::string scratch_file(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_SUITE("inference") {
  TEST_CASE("kmeans recovers well-separated blobs") {
    std::vector<int> truth;
    const SampleMatrix points = blobs(truth, 30, 11);
    for (std::uint64_t seed : {0ull, 1ull, 2ull}) {
      const ClusterModel model = kmeans(points, 3, seed);
      CHECK(hungarian_accuracy(model.assignments, truth) == 1.0);
    }
  }

  TEST_CASE("one cluster per point drives inertia to zero") {
    SampleMatrix points(5, 2);
    points << 0, 0, 1, 0, 0, 1, 2, 2, 3, 5;
    const ClusterModel model = kmeans(points, 5, 0);
    CHECK(model.inertia == 0.0);
    std::vector<int> sorted = model.assignments;
    std::sort(sorted.begin(), sorted.end());
    for (int c = 0; c < 5; ++c) CHECK(sorted[static_cast<std::size_t>(c)] == c);
  }

  TEST_CASE("inertia is monotone over Lloyd iterations") {
    std::vector<int> truth;
    const SampleMatrix points = blobs(truth, 25, 3, 2.5);
    const ClusterModel model = kmeans(points, 4, 9);
    REQUIRE(!model.inertia_history.empty());
    for (std::size_t i = 1; i < model.inertia_history.size(); ++i)
      CHECK(model.inertia_history[i] <= model.inertia_history[i - 1] + 1e-9);
    CHECK(model.inertia ==
          doctest::Approx(model.inertia_history.back()).epsilon(1e-12));
  }

  TEST_CASE("the reported model is the best restart") {
    std::vector<int> truth;
    const SampleMatrix points = blobs(truth, 20, 5, 1.5);
    KMeansOptions options;
    options.restarts = 7;
    const ClusterModel model = kmeans(points, 3, 21, options);
    REQUIRE(model.restart_inertias.size() == 7);
    const double best = *std::min_element(model.restart_inertias.begin(),
                                          model.restart_inertias.end());
    CHECK(model.inertia == best);
  }

  TEST_CASE("duplicate-heavy input with excess clusters stays valid") {
    SampleMatrix points(20, 2);
    for (Index i = 0; i < 10; ++i) points.row(i) << 0.0, 0.0;
    for (Index i = 10; i < 20; ++i) points.row(i) << 1.0, 1.0;
    const ClusterModel model = kmeans(points, 3, 4);
    CHECK(std::isfinite(model.inertia));
    for (int a : model.assignments) {
      CHECK(a >= 0);
      CHECK(a < 3);
    }
    CHECK(model.assignments.size() == 20);
  }

  TEST_CASE("kmeans determinism and input validation") {
    std::vector<int> truth;
    const SampleMatrix points = blobs(truth, 10, 8);
    const ClusterModel a = kmeans(points, 3, 17);
    const ClusterModel b = kmeans(points, 3, 17);
    CHECK(a.assignments == b.assignments);
    CHECK(a.centroids == b.centroids);
    CHECK_THROWS_AS(kmeans(points, 0, 0), ConfigError);
    CHECK_THROWS_AS(kmeans(points.topRows(2), 3, 0), DataError);
  }

  TEST_CASE("clustering_inference returns the kmeans assignments") {
    std::vector<int> truth;
    const SampleMatrix points = blobs(truth, 15, 2);
    const std::vector<int> via_fn = clustering_inference(points, 3, 33);
    const ClusterModel model = kmeans(points, 3, 33);
    CHECK(via_fn == model.assignments);
  }

  TEST_CASE("centroid bank averages only the predominant coarse label") {
    // Two tight clusters near e1 and e2. The e1 cluster holds three
    // label-0 members and one label-1 outvoted member.
    SampleMatrix points(7, 3);
    points.row(0) = vecmath::normalize((Vectord(3) << 1.0, 0.02, 0.0).finished());
    points.row(1) = vecmath::normalize((Vectord(3) << 1.0, -0.02, 0.0).finished());
    points.row(2) = vecmath::normalize((Vectord(3) << 1.0, 0.0, 0.03).finished());
    points.row(3) = vecmath::normalize((Vectord(3) << 1.0, 0.0, -0.03).finished());
    points.row(4) = vecmath::normalize((Vectord(3) << 0.0, 1.0, 0.02).finished());
    points.row(5) = vecmath::normalize((Vectord(3) << 0.0, 1.0, -0.02).finished());
    points.row(6) = vecmath::normalize((Vectord(3) << 0.02, 1.0, 0.0).finished());
    const std::vector<int> coarse = {0, 0, 0, 1, 1, 1, 1};

    const CentroidBank bank = build_centroids(points, coarse, 2, 5);
    REQUIRE(bank.k() == 2);
    int e1_row = bank.centroids(0, 0) > bank.centroids(1, 0) ? 0 : 1;
    CHECK(bank.coarse_labels[static_cast<std::size_t>(e1_row)] == 0);
    CHECK(bank.coarse_labels[static_cast<std::size_t>(1 - e1_row)] == 1);

    const Vectord expected = vecmath::normalize(
        (points.row(0) + points.row(1) + points.row(2)).transpose() / 3.0);
    CHECK((bank.centroids.row(e1_row).transpose() - expected).norm() <
          1e-12);
  }

  TEST_CASE("predominant-label ties pick the smaller label") {
    SampleMatrix points(4, 2);
    points.row(0) = vecmath::normalize((Vectord(2) << 1.0, 0.01).finished());
    points.row(1) = vecmath::normalize((Vectord(2) << 1.0, -0.01).finished());
    points.row(2) = vecmath::normalize((Vectord(2) << 1.0, 0.02).finished());
    points.row(3) = vecmath::normalize((Vectord(2) << 1.0, -0.02).finished());
    const std::vector<int> coarse = {3, 1, 3, 1};
    const CentroidBank bank = build_centroids(points, coarse, 1, 0);
    REQUIRE(bank.k() == 1);
    CHECK(bank.coarse_labels[0] == 1);
    const Vectord expected =
        vecmath::normalize((points.row(1) + points.row(3)).transpose() / 2.0);
    CHECK((bank.centroids.row(0).transpose() - expected).norm() < 1e-12);
  }

  TEST_CASE("bank centroids sit on the unit sphere unless told otherwise") {
    std::vector<int> truth;
    SampleMatrix points = blobs(truth, 12, 19);
    for (Index i = 0; i < points.rows(); ++i)
      points.row(i) = vecmath::normalize(points.row(i).transpose()).transpose();
    const CentroidBank unit = build_centroids(points, truth, 3, 2);
    for (int c = 0; c < unit.k(); ++c)
      CHECK(unit.centroids.row(c).norm() == doctest::Approx(1.0).epsilon(1e-12));
    const CentroidBank raw = build_centroids(points, truth, 3, 2, false);
    bool any_off_sphere = false;
    for (int c = 0; c < raw.k(); ++c)
      any_off_sphere |= std::abs(raw.centroids.row(c).norm() - 1.0) > 1e-6;
    CHECK(any_off_sphere);
  }

  TEST_CASE("centroid inference takes the nearest row, ties toward zero") {
    CentroidBank bank;
    bank.centroids = Matrixd::Identity(2, 2);
    bank.coarse_labels = {0, 1};
    CHECK(centroid_inference((Vectord(2) << 1.0, 0.0).finished(), bank) == 0);
    CHECK(centroid_inference((Vectord(2) << 0.0, 1.0).finished(), bank) == 1);
    const Vectord diagonal =
        vecmath::normalize((Vectord(2) << 1.0, 1.0).finished());
    CHECK(centroid_inference(diagonal, bank) == 0);
  }

  TEST_CASE("batch centroid inference matches the one-sample path") {
    std::vector<int> truth;
    SampleMatrix points = blobs(truth, 8, 23);
    for (Index i = 0; i < points.rows(); ++i)
      points.row(i) = vecmath::normalize(points.row(i).transpose()).transpose();
    const CentroidBank bank = build_centroids(points, truth, 3, 1);
    const std::vector<int> batch = centroid_inference(points, bank);
    REQUIRE(batch.size() == static_cast<std::size_t>(points.rows()));
    for (Index i = 0; i < points.rows(); ++i)
      CHECK(batch[static_cast<std::size_t>(i)] ==
            centroid_inference(Vectord(points.row(i).transpose()), bank));
  }

  TEST_CASE("centroid bank round-trips through JSON") {
    std::vector<int> truth;
    SampleMatrix points = blobs(truth, 10, 29);
    for (Index i = 0; i < points.rows(); ++i)
      points.row(i) = vecmath::normalize(points.row(i).transpose()).transpose();
    const CentroidBank bank = build_centroids(points, truth, 3, 7);
    const std::string path = scratch_file("star-test-bank.json");
    save_centroid_bank(bank, path);
    const CentroidBank loaded = load_centroid_bank(path);
    CHECK(loaded.coarse_labels == bank.coarse_labels);
    CHECK(loaded.centroids == bank.centroids);
    std::filesystem::remove(path);
  }
}
