#include "star/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "star/error.hpp"
#include "star/rng.hpp"

namespace star {

void StarConfig::validate() const {
  if (!(tau > 0.0)) throw ConfigError("config: tau must be > 0");
  if (!(gamma >= 0.0)) throw ConfigError("config: gamma must be >= 0");
  if (!(prob_temperature > 0.0))
    throw ConfigError("config: prob_temperature must be > 0");
  if (!(prob_floor > 0.0) || prob_floor >= 1.0)
    throw ConfigError("config: prob_floor must be in (0, 1)");
  for (int h : hidden)
    if (h < 1) throw ConfigError("config: hidden widths must be >= 1");
  if (embed_dim < 1) throw ConfigError("config: embed_dim must be >= 1");
  if (k < 1) throw ConfigError("config: k must be >= 1");
  if (alpha.values.empty())
    throw ConfigError("config: alpha schedule must be nonempty");
  for (double a : alpha.values)
    if (!(a > 0.0))
      throw ConfigError("config: alpha schedule values must be > 0");
  if (alpha.stage_length < 1)
    throw ConfigError("config: alpha stage_length must be >= 1");
  if (queue_capacity < 0)
    throw ConfigError("config: queue_capacity must be >= 0");
  if (!(momentum >= 0.0 && momentum <= 1.0))
    throw ConfigError("config: momentum must be in [0, 1]");
  if (batch_size < 1) throw ConfigError("config: batch_size must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("config: lr must be > 0");
  if (!(weight_decay >= 0.0))
    throw ConfigError("config: weight_decay must be >= 0");
  if (!(clip_norm > 0.0)) throw ConfigError("config: clip_norm must be > 0");
  if (pretrain_epochs < 0)
    throw ConfigError("config: pretrain_epochs must be >= 0");
  if (train_epochs < 0) throw ConfigError("config: train_epochs must be >= 0");
  if (patience < 1) throw ConfigError("config: patience must be >= 1");
  if (!(base_init > 0.0)) throw ConfigError("config: base_init must be > 0");
  if (coarse_m < 0 || fine_k < 0)
    throw ConfigError("config: coarse_m and fine_k must be >= 0");
  if (coarse_m > 0 && fine_k > 0 && fine_k < coarse_m)
    throw ConfigError("config: fine_k must be >= coarse_m");
  if (objective == LossMode::kPretrain)
    throw ConfigError("config: objective must be down or star");
}

ObjectiveConfig StarConfig::objective_config(double alpha_value) const {
  ObjectiveConfig oc;
  oc.mode = objective;
  oc.tau = tau;
  oc.gamma = gamma;
  oc.prob_temperature = prob_temperature;
  oc.prob_floor = prob_floor;
  oc.k = k;
  oc.alpha = alpha_value;
  oc.include_ce = include_ce;
  oc.include_kl_loss = include_kl_loss;
  oc.include_kl_weight = include_kl_weight;
  return oc;
}

namespace {

nlohmann::json to_json(const StarConfig& c) {
  nlohmann::json j;
  j["objective"] = c.objective == LossMode::kStar ? "star" : "down";
  j["tau"] = c.tau;
  j["gamma"] = c.gamma;
  j["include_ce"] = c.include_ce;
  j["include_kl_loss"] = c.include_kl_loss;
  j["include_kl_weight"] = c.include_kl_weight;
  j["prob_temperature"] = c.prob_temperature;
  j["prob_floor"] = c.prob_floor;
  j["hidden"] = c.hidden;
  j["embed_dim"] = c.embed_dim;
  j["k"] = c.k;
  j["alpha_values"] = c.alpha.values;
  j["alpha_stage_length"] = c.alpha.stage_length;
  j["queue_capacity"] = c.queue_capacity;
  j["momentum"] = c.momentum;
  j["batch_size"] = c.batch_size;
  j["lr"] = c.lr;
  j["weight_decay"] = c.weight_decay;
  j["clip_norm"] = c.clip_norm;
  j["pretrain_epochs"] = c.pretrain_epochs;
  j["train_epochs"] = c.train_epochs;
  j["patience"] = c.patience;
  j["base_init"] = c.base_init;
  j["base_trainable"] = c.base_trainable;
  j["coarse_m"] = c.coarse_m;
  j["fine_k"] = c.fine_k;
  j["seed"] = c.seed;
  return j;
}

StarConfig from_json(const nlohmann::json& j) {
  static const std::set<std::string> known = {
      "objective",        "tau",
      "gamma",            "include_ce",
      "include_kl_loss",  "include_kl_weight",
      "prob_temperature", "prob_floor",
      "hidden",           "embed_dim",
      "k",                "alpha_values",
      "alpha_stage_length", "queue_capacity",
      "momentum",         "batch_size",
      "lr",               "weight_decay",
      "clip_norm",        "pretrain_epochs",
      "train_epochs",     "patience",
      "base_init",        "base_trainable",
      "coarse_m",         "fine_k",
      "seed"};
  for (const auto& [key, value] : j.items())
    if (!known.count(key))
      throw ConfigError("config: unknown field '" + key + "'");

  StarConfig c;
  try {
    if (j.contains("objective")) {
      const std::string obj = j["objective"].get<std::string>();
      if (obj == "star")
        c.objective = LossMode::kStar;
      else if (obj == "down")
        c.objective = LossMode::kDown;
      else
        throw ConfigError("config: objective must be 'down' or 'star', got '" +
                          obj + "'");
    }
    c.tau = j.value("tau", c.tau);
    c.gamma = j.value("gamma", c.gamma);
    c.include_ce = j.value("include_ce", c.include_ce);
    c.include_kl_loss = j.value("include_kl_loss", c.include_kl_loss);
    c.include_kl_weight = j.value("include_kl_weight", c.include_kl_weight);
    c.prob_temperature = j.value("prob_temperature", c.prob_temperature);
    c.prob_floor = j.value("prob_floor", c.prob_floor);
    c.hidden = j.value("hidden", c.hidden);
    c.embed_dim = j.value("embed_dim", c.embed_dim);
    c.k = j.value("k", c.k);
    c.alpha.values = j.value("alpha_values", c.alpha.values);
    c.alpha.stage_length = j.value("alpha_stage_length", c.alpha.stage_length);
    c.queue_capacity = j.value("queue_capacity", c.queue_capacity);
    c.momentum = j.value("momentum", c.momentum);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.lr = j.value("lr", c.lr);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.clip_norm = j.value("clip_norm", c.clip_norm);
    c.pretrain_epochs = j.value("pretrain_epochs", c.pretrain_epochs);
    c.train_epochs = j.value("train_epochs", c.train_epochs);
    c.patience = j.value("patience", c.patience);
    c.base_init = j.value("base_init", c.base_init);
    c.base_trainable = j.value("base_trainable", c.base_trainable);
    c.coarse_m = j.value("coarse_m", c.coarse_m);
    c.fine_k = j.value("fine_k", c.fine_k);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config: field type error: " + std::string(e.what()));
  }
  return c;
}

}  // namespace

StarConfig config_from_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config: invalid JSON: " + std::string(e.what()));
  }
  return from_json(j);
}

StarConfig config_from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return config_from_json_text(buf.str());
}

std::string config_to_json_text(const StarConfig& config) {
  return to_json(config).dump(2);
}

void config_to_json_file(const StarConfig& config, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("config: cannot write " + path);
  out << config_to_json_text(config) << "\n";
}

std::string config_hash(const StarConfig& config) {
  const std::string canon = to_json(config).dump();
  const std::uint64_t h = rng::fnv1a(canon);
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace star
