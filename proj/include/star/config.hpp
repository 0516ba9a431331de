#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "star/neighborhood.hpp"
#include "star/objective.hpp"
#include "star/types.hpp"

namespace star {

/// Full training configuration. Defaults follow the published protocol;
/// fields set to 0 (coarse_m, fine_k, queue_capacity) are resolved from the
/// dataset at run time.
struct StarConfig {
  // Objective.
  LossMode objective = LossMode::kStar;
  double tau = 0.07;
  double gamma = 1.0;
  bool include_ce = true;
  bool include_kl_loss = true;
  bool include_kl_weight = true;
  double prob_temperature = 1.0;
  double prob_floor = 1e-8;

  // Architecture.
  std::vector<int> hidden = {64};
  int embed_dim = 16;

  // Neighborhood.
  int k = 10;
  AlphaSchedule alpha;
  Index queue_capacity = 0;  // 0 -> min(|D_train|, 8192)

  // Optimization.
  double momentum = 0.99;
  int batch_size = 64;
  double lr = 5e-5;
  double weight_decay = 0.01;
  double clip_norm = 1.0;
  int pretrain_epochs = 100;
  int train_epochs = 20;
  int patience = 5;
  double base_init = 10.0;
  bool base_trainable = true;

  // Problem shape (0 -> take from the dataset manifest).
  int coarse_m = 0;
  int fine_k = 0;

  std::uint64_t seed = 0;

  /// Throws ConfigError naming the first offending field.
  void validate() const;

  /// The per-batch objective view of this config.
  ObjectiveConfig objective_config(double alpha_value) const;
};

StarConfig config_from_json_file(const std::string& path);
StarConfig config_from_json_text(const std::string& text);
std::string config_to_json_text(const StarConfig& config);
void config_to_json_file(const StarConfig& config, const std::string& path);

/// FNV-1a over the canonical JSON form, as 16 hex digits.
std::string config_hash(const StarConfig& config);

}  // namespace star
