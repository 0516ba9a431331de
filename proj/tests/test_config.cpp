#include <filesystem>
#include <fstream>
#include <string>

#include <doctest.h>

#include "star/config.hpp"
#include "star/error.hpp"

using namespace star;

namespace {

/// CHECK_THROWS_WITH needs exact strings; this just asserts the field name
/// appears somewhere in the message.
template <typename Fn>
void expect_config_error(Fn&& fn, const std::string& needle) {
  try {
    fn();
    FAIL("expected ConfigError mentioning '" << needle << "'");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find(needle) != std::string::npos);
  }
}

}  // namespace

TEST_SUITE("config") {
  TEST_CASE("defaults are valid and match the published protocol") {
    StarConfig c;
    CHECK_NOTHROW(c.validate());
    CHECK(c.objective == LossMode::kStar);
    CHECK(c.tau == 0.07);
    CHECK(c.gamma == 1.0);
    CHECK(c.k == 10);
    CHECK(c.momentum == 0.99);
    CHECK(c.base_init == 10.0);
    CHECK(c.base_trainable);
    REQUIRE(c.alpha.values.size() == 4);
    CHECK(c.alpha.values[0] == 150.0);
    CHECK(c.alpha.values[3] == 2.0);
    CHECK(c.alpha.stage_length == 5);
  }

  TEST_CASE("validation names the offending field") {
    expect_config_error(
        [] {
          StarConfig c;
          c.tau = 0.0;
          c.validate();
        },
        "tau");
    expect_config_error(
        [] {
          StarConfig c;
          c.gamma = -0.5;
          c.validate();
        },
        "gamma");
    expect_config_error(
        [] {
          StarConfig c;
          c.momentum = 1.5;
          c.validate();
        },
        "momentum");
    expect_config_error(
        [] {
          StarConfig c;
          c.batch_size = 0;
          c.validate();
        },
        "batch_size");
    expect_config_error(
        [] {
          StarConfig c;
          c.k = 0;
          c.validate();
        },
        "k must");
    expect_config_error(
        [] {
          StarConfig c;
          c.alpha.values.clear();
          c.validate();
        },
        "alpha");
    expect_config_error(
        [] {
          StarConfig c;
          c.prob_floor = 1.0;
          c.validate();
        },
        "prob_floor");
    expect_config_error(
        [] {
          StarConfig c;
          c.coarse_m = 3;
          c.fine_k = 2;
          c.validate();
        },
        "fine_k");
    expect_config_error(
        [] {
          StarConfig c;
          c.base_init = 0.0;
          c.validate();
        },
        "base_init");
  }

  TEST_CASE("JSON round-trip preserves every field") {
    StarConfig c;
    c.objective = LossMode::kDown;
    c.tau = 0.13;
    c.gamma = 0.25;
    c.include_ce = false;
    c.include_kl_weight = false;
    c.hidden = {48, 24};
    c.embed_dim = 12;
    c.k = 7;
    c.alpha.values = {100.0, 9.0, 3.0};
    c.alpha.stage_length = 2;
    c.queue_capacity = 512;
    c.momentum = 0.97;
    c.batch_size = 17;
    c.lr = 3e-4;
    c.weight_decay = 0.02;
    c.clip_norm = 2.5;
    c.pretrain_epochs = 11;
    c.train_epochs = 13;
    c.patience = 3;
    c.base_init = 16.0;
    c.base_trainable = false;
    c.coarse_m = 3;
    c.fine_k = 9;
    c.seed = 424242;

    const StarConfig back = config_from_json_text(config_to_json_text(c));
    CHECK(back.objective == LossMode::kDown);
    CHECK(back.tau == c.tau);
    CHECK(back.gamma == c.gamma);
    CHECK(back.include_ce == c.include_ce);
    CHECK(back.include_kl_loss == c.include_kl_loss);
    CHECK(back.include_kl_weight == c.include_kl_weight);
    CHECK(back.hidden == c.hidden);
    CHECK(back.embed_dim == c.embed_dim);
    CHECK(back.k == c.k);
    CHECK(back.alpha.values == c.alpha.values);
    CHECK(back.alpha.stage_length == c.alpha.stage_length);
    CHECK(back.queue_capacity == c.queue_capacity);
    CHECK(back.momentum == c.momentum);
    CHECK(back.batch_size == c.batch_size);
    CHECK(back.lr == c.lr);
    CHECK(back.weight_decay == c.weight_decay);
    CHECK(back.clip_norm == c.clip_norm);
    CHECK(back.pretrain_epochs == c.pretrain_epochs);
    CHECK(back.train_epochs == c.train_epochs);
    CHECK(back.patience == c.patience);
    CHECK(back.base_init == c.base_init);
    CHECK(back.base_trainable == c.base_trainable);
    CHECK(back.coarse_m == c.coarse_m);
    CHECK(back.fine_k == c.fine_k);
    CHECK(back.seed == c.seed);
    CHECK(config_hash(back) == config_hash(c));
  }

  TEST_CASE("partial JSON fills the rest from defaults") {
    const StarConfig c =
        config_from_json_text(R"({"tau": 0.5, "objective": "down"})");
    CHECK(c.tau == 0.5);
    CHECK(c.objective == LossMode::kDown);
    CHECK(c.gamma == 1.0);
    CHECK(c.k == 10);
  }

  TEST_CASE("unknown and malformed fields are rejected") {
    expect_config_error(
        [] { config_from_json_text(R"({"taoo": 0.5})"); }, "taoo");
    expect_config_error(
        [] { config_from_json_text(R"({"objective": "both"})"); },
        "objective");
    expect_config_error([] { config_from_json_text("{nope"); }, "JSON");
    expect_config_error(
        [] { config_from_json_text(R"({"tau": "warm"})"); }, "type");
  }

  TEST_CASE("file round-trip") {
    const std::string path =
        (std::filesystem::temp_directory_path() / "star-config.json")
            .string();
    StarConfig c;
    c.seed = 99;
    c.hidden = {32};
    config_to_json_file(c, path);
    const StarConfig back = config_from_json_file(path);
    CHECK(config_hash(back) == config_hash(c));
    CHECK_THROWS_AS(config_from_json_file(path + ".missing"), ConfigError);
    std::filesystem::remove(path);
  }

  TEST_CASE("hash is stable and sensitive") {
    StarConfig a;
    StarConfig b;
    CHECK(config_hash(a) == config_hash(b));
    CHECK(config_hash(a).size() == 16);
    b.seed = 1;
    CHECK(config_hash(a) != config_hash(b));
    b = a;
    b.gamma = 0.5;
    CHECK(config_hash(a) != config_hash(b));
  }
}
