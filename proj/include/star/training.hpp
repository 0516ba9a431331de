#pragma once

#include <limits>
#include <string>
#include <vector>

#include "star/config.hpp"
#include "star/data.hpp"
#include "star/encoder.hpp"
#include "star/neighborhood.hpp"
#include "star/objective.hpp"
#include "star/types.hpp"

namespace star {

/// Strict-improvement stopper: stops once `patience` consecutive
/// observations fail to beat the best seen so far.
struct EarlyStopper {
  int patience = 5;
  double best = -std::numeric_limits<double>::infinity();
  int best_epoch = -1;
  int epochs_since_improvement = 0;

  /// Returns true when training should stop after this observation.
  bool observe(int epoch, double value);
};

struct TrainHistoryRow {
  int epoch = 0;  // 0-based
  double alpha = 0.0;
  LossBreakdown loss;
  double base = 0.0;
  double silhouette = 0.0;
};

struct TrainState {
  int epoch = 0;
  EncoderParams params;
  MomentumParams momentum;
  OptimizerState optimizer;
  MomentumQueue queue{1};
  EarlyStopper stopper;
  std::uint64_t seed = 0;
};

struct FitResult {
  EncoderParams best_params;
  EncoderParams final_params;
  std::vector<TrainHistoryRow> history;
  double pretrain_silhouette = 0.0;
  int best_epoch = -1;  // -1 when no contrastive epoch ran
  double best_silhouette = 0.0;
};

/// Coarse-label CE pretraining from a fresh init. Deterministic in
/// config.seed; zero epochs returns the initialization untouched.
EncoderParams pretrain(const Dataset& train, const StarConfig& config);

/// One full momentum-encoder pass over the training set, pushed FIFO.
MomentumQueue init_queue(const MomentumParams& momentum, const Dataset& train,
                         const StarConfig& config);

/// One contrastive epoch: per shuffled batch, snapshot the queue, take a
/// gradient step, update the momentum encoder, push the batch's momentum
/// features. Returns the epoch's sample-weighted mean loss.
LossBreakdown train_epoch(TrainState& state, const Dataset& train,
                          const StarConfig& config);

/// Silhouette of a k-means clustering (fine_k clusters) of the dataset under
/// the given encoder; the early-stopping signal.
double clustering_silhouette(const EncoderParams& params, const Dataset& data,
                             const StarConfig& config, std::uint64_t seed);

/// Full pipeline: pretrain, warm the queue, iterate train_epoch with
/// silhouette early stopping, return the best-silhouette checkpoint.
FitResult fit(const Dataset& train, const StarConfig& config);

/// Versioned JSON checkpoint; load rejects structural mismatches.
void save_checkpoint(const EncoderParams& params, const std::string& path,
                     const std::string& config_hash_hex = {});
struct Checkpoint {
  EncoderParams params;
  std::string config_hash;
};
Checkpoint load_checkpoint(const std::string& path);

}  // namespace star
