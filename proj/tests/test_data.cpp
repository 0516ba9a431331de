#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <doctest.h>

#include "star/data.hpp"
#include "star/error.hpp"

using namespace star;

namespace {

std::filesystem::path scratch_dir(const std::string& name) {
  const std::filesystem::path dir =
      std::filesystem::temp_directory_path() / ("star-data-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

bool datasets_equal(const Dataset& a, const Dataset& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    const LabeledSample& x = a.samples[i];
    const LabeledSample& y = b.samples[i];
    if (x.id != y.id || x.coarse != y.coarse || x.fine_hidden != y.fine_hidden)
      return false;
    if (x.features != y.features) return false;
  }
  return true;
}

}  // namespace

TEST_SUITE("data") {
  TEST_CASE("fine to coarse map is total, surjective, and balanced") {
    SUBCASE("even split") {
      for (int f = 0; f < 9; ++f)
        CHECK(fine_to_coarse(f, 3, 9) == f / 3);
    }
    SUBCASE("uneven split stays within one") {
      std::map<int, int> sizes;
      for (int f = 0; f < 10; ++f) {
        const int c = fine_to_coarse(f, 3, 10);
        CHECK(c >= 0);
        CHECK(c < 3);
        ++sizes[c];
      }
      CHECK(sizes.size() == 3);
      int lo = 10, hi = 0;
      for (const auto& [c, n] : sizes) {
        lo = std::min(lo, n);
        hi = std::max(hi, n);
      }
      CHECK(hi - lo <= 1);
    }
    SUBCASE("out of range rejected") {
      CHECK_THROWS_AS(fine_to_coarse(9, 3, 9), ConfigError);
      CHECK_THROWS_AS(fine_to_coarse(-1, 3, 9), ConfigError);
    }
  }

  TEST_CASE("generator count arithmetic") {
    const GeneratedData data =
        generate_synthetic(3, 9, 200, 6, 32, 6.0, 1.6, 0.6, 1);
    CHECK(data.train.size() + data.test.size() == 1800);
    CHECK(data.test.size() == 360);  // 200 / 5 per fine category
    CHECK(data.manifest.n_train == 1440);
    CHECK(data.manifest.n_test == 360);
    CHECK(data.manifest.coarse_m == 3);
    CHECK(data.manifest.fine_k == 9);
    CHECK(data.manifest.d_in == 32);
    CHECK(data.train.dim() == 32);
  }

  TEST_CASE("every sample's fine label maps to its coarse label") {
    const GeneratedData data =
        generate_synthetic(3, 10, 50, 4, 12, 5.0, 1.0, 0.3, 2);
    for (const Dataset* ds : {&data.train, &data.test})
      for (const LabeledSample& s : ds->samples) {
        REQUIRE(s.fine_hidden >= 0);
        CHECK(s.coarse == fine_to_coarse(s.fine_hidden, 3, 10));
      }
  }

  TEST_CASE("split is stratified by fine category") {
    const GeneratedData data =
        generate_synthetic(2, 6, 35, 4, 10, 5.0, 1.0, 0.3, 3);
    std::map<int, int> train_counts, test_counts;
    for (const LabeledSample& s : data.train.samples)
      ++train_counts[s.fine_hidden];
    for (const LabeledSample& s : data.test.samples)
      ++test_counts[s.fine_hidden];
    for (int f = 0; f < 6; ++f) {
      CHECK(test_counts[f] == 7);  // 35 / 5
      CHECK(train_counts[f] == 28);
    }
  }

  TEST_CASE("zero noise collapses each fine category to one point") {
    const GeneratedData data =
        generate_synthetic(2, 4, 20, 3, 8, 5.0, 1.0, 0.0, 4);
    std::map<int, Vectord> representative;
    for (const Dataset* ds : {&data.train, &data.test})
      for (const LabeledSample& s : ds->samples) {
        auto [it, fresh] = representative.emplace(s.fine_hidden, s.features);
        if (!fresh) CHECK(s.features == it->second);
      }
    CHECK(representative.size() == 4);
  }

  TEST_CASE("same seed gives bit-identical datasets") {
    const GeneratedData a =
        generate_synthetic(3, 9, 30, 4, 16, 6.0, 1.6, 0.6, 12);
    const GeneratedData b =
        generate_synthetic(3, 9, 30, 4, 16, 6.0, 1.6, 0.6, 12);
    CHECK(datasets_equal(a.train, b.train));
    CHECK(datasets_equal(a.test, b.test));
    const GeneratedData c =
        generate_synthetic(3, 9, 30, 4, 16, 6.0, 1.6, 0.6, 13);
    CHECK(!datasets_equal(a.train, c.train));
  }

  TEST_CASE("latent nearest-center classifier is exact when scales separate") {
    const GeneratedData data =
        generate_synthetic(3, 9, 40, 5, 24, 50.0, 5.0, 0.1, 6);
    REQUIRE(data.debug.fine_centers.rows() == 9);
    REQUIRE(data.debug.latents.rows() ==
            data.train.size() + data.test.size());
    for (const Dataset* ds : {&data.train, &data.test})
      for (const LabeledSample& s : ds->samples) {
        const Vectord z = data.debug.latents.row(s.id).transpose();
        int best = -1;
        double best_d = 0.0;
        for (int f = 0; f < 9; ++f) {
          const double d =
              (z - data.debug.fine_centers.row(f).transpose()).squaredNorm();
          if (best < 0 || d < best_d) {
            best = f;
            best_d = d;
          }
        }
        CHECK(best == s.fine_hidden);
      }
  }

  TEST_CASE("generator parameter validation") {
    CHECK_THROWS_AS(generate_synthetic(0, 9, 10, 4, 8, 6, 1.6, 0.6, 0),
                    ConfigError);
    CHECK_THROWS_AS(generate_synthetic(3, 2, 10, 4, 8, 6, 1.6, 0.6, 0),
                    ConfigError);
    CHECK_THROWS_AS(generate_synthetic(3, 9, 0, 4, 8, 6, 1.6, 0.6, 0),
                    ConfigError);
    CHECK_THROWS_AS(generate_synthetic(3, 9, 10, 4, 8, -1.0, 1.6, 0.6, 0),
                    ConfigError);
    CHECK_THROWS_AS(generate_synthetic(3, 9, 10, 4, 8, 6, 1.6, -0.1, 0),
                    ConfigError);
  }

  TEST_CASE("save then load is the identity") {
    const GeneratedData data =
        generate_synthetic(3, 9, 25, 4, 12, 6.0, 1.6, 0.6, 9);
    const std::filesystem::path dir = scratch_dir("roundtrip");
    save_dataset(data, dir.string());
    const LoadedData loaded = load_dataset(dir.string());
    CHECK(datasets_equal(loaded.train, data.train));
    CHECK(datasets_equal(loaded.test, data.test));
    CHECK(loaded.manifest.n_train == data.manifest.n_train);
    CHECK(loaded.manifest.n_test == data.manifest.n_test);
    CHECK(loaded.manifest.coarse_m == data.manifest.coarse_m);
    CHECK(loaded.manifest.fine_k == data.manifest.fine_k);
    CHECK(loaded.manifest.d_in == data.manifest.d_in);
    CHECK(loaded.manifest.seed == data.manifest.seed);
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("hand-authored files load as a normal dataset") {
    // The external plug-in path: any tool can emit this format directly.
    const std::filesystem::path dir = scratch_dir("external");
    {
      std::ofstream manifest(dir / "manifest.json");
      manifest << R"({"version":1,"n_train":3,"n_test":2,"M":2,"K":4,)"
               << R"("d_in":3,"seed":0,"source":"external"})";
      std::ofstream train(dir / "train.csv");
      train << "# star-dataset v1 n=3 M=2 K=4 d_in=3\n"
            << "id,coarse,fine,f0,f1,f2\n"
            << "0,0,-1,0.5,1.25,-2\n"
            << "1,1,-1,0,0,3.5\n"
            << "2,0,-1,1,2,4\n";
      std::ofstream test(dir / "test.csv");
      test << "# star-dataset v1 n=2 M=2 K=4 d_in=3\n"
           << "id,coarse,fine,f0,f1,f2\n"
           << "3,0,1,0.25,0.5,1\n"
           << "4,1,3,-1,-2,-4\n";
    }
    const LoadedData loaded = load_dataset(dir.string());
    CHECK(loaded.train.size() == 3);
    CHECK(loaded.test.size() == 2);
    CHECK(loaded.train.samples[0].fine_hidden == -1);
    CHECK(loaded.train.samples[0].features(1) == 1.25);
    CHECK(loaded.test.samples[1].fine_hidden == 3);
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("malformed rows are rejected with their line number") {
    const GeneratedData data =
        generate_synthetic(2, 4, 10, 3, 4, 6.0, 1.6, 0.6, 5);
    auto write_broken = [&](const std::string& name,
                            const std::string& bad_row) {
      const std::filesystem::path dir = scratch_dir(name);
      save_dataset(data, dir.string());
      std::ofstream train(dir / "train.csv", std::ios::app);
      train << bad_row << "\n";
      return dir;
    };

    SUBCASE("coarse label out of range") {
      const auto dir = write_broken("badcoarse", "99,2,0,1,2,3,4");
      try {
        load_dataset(dir.string());
        FAIL("expected DataError");
      } catch (const DataError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("line 35") != std::string::npos);
        CHECK(msg.find("coarse") != std::string::npos);
      }
      std::filesystem::remove_all(dir);
    }
    SUBCASE("wrong field count") {
      const auto dir = write_broken("badcount", "99,0,0,1,2");
      try {
        load_dataset(dir.string());
        FAIL("expected DataError");
      } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("line 35") != std::string::npos);
      }
      std::filesystem::remove_all(dir);
    }
    SUBCASE("non-numeric feature") {
      const auto dir = write_broken("badnum", "99,0,0,1,2,zebra,4");
      CHECK_THROWS_AS(load_dataset(dir.string()), DataError);
      std::filesystem::remove_all(dir);
    }
    SUBCASE("row count disagrees with the manifest") {
      const auto dir = write_broken("badn", "99,0,0,1,2,3,4");
      CHECK_THROWS_AS(load_dataset(dir.string()), DataError);
      std::filesystem::remove_all(dir);
    }
  }
}
