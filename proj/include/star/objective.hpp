#pragma once

#include <utility>
#include <vector>

#include "star/encoder.hpp"
#include "star/neighborhood.hpp"
#include "star/types.hpp"

namespace star {

enum class LossMode { kPretrain, kDown, kStar };

/// Everything the per-batch objective needs besides parameters and data.
struct ObjectiveConfig {
  LossMode mode = LossMode::kStar;
  double tau = 0.07;              // contrastive temperature
  double gamma = 1.0;             // weight of the KL-space term
  double prob_temperature = 1.0;  // coordinate-softmax temperature
  double prob_floor = 1e-8;
  int k = 10;                     // retrieved neighbor count
  double alpha = 150.0;           // rank-weight base for this epoch
  bool include_ce = true;         // coarse cross-entropy term
  bool include_kl_loss = true;    // KL-space contrastive term (gamma term)
  bool include_kl_weight = true;  // B^dkl modulation of the denominator
};

/// Additive pieces of the training objective. In STAR mode
/// total = ce + kl_term + euclid_term; in DOWN mode total = ce + contrastive;
/// in pretrain mode total = ce. Disabled terms are exactly 0.
struct LossBreakdown {
  double ce = 0.0;
  double contrastive = 0.0;
  double kl_term = 0.0;
  double euclid_term = 0.0;
  double total = 0.0;
};

/// Softmax cross-entropy of logits against the true class, via log-sum-exp.
double ce_loss(const Vectord& logits, int label);

/// Rank-weighted InfoNCE over the queue: the denominator runs over every
/// queue entry (positives included). Log-domain.
double down_loss_l1(const Vectord& q, const NeighborSet& neighbors,
                    const QueueSnapshot& snap, double tau);

struct StarTerms {
  double kl_term = 0.0;
  double euclid_term = 0.0;
};

/// The two terms of the STAR loss for one query. The KL-weighted denominator
/// sum_k B^dkl(q,hk) * exp(q.hk/tau) is evaluated as log-sum-exp of
/// q.hk/tau + dkl * log(B), which is algebraically identical and cannot
/// overflow. The snapshot must carry precomputed probabilities.
StarTerms star_loss_l2(const Vectord& q, const NeighborSet& neighbors,
                       const QueueSnapshot& snap, double tau, double gamma,
                       double base, bool include_kl_loss = true,
                       bool include_kl_weight = true,
                       double prob_temperature = 1.0, double prob_floor = 1e-8);

/// Literal evaluation of the expanded Euclidean term
///   sum_j w_j * (log sum_k B^dkl(q,hk) * exp(q.hk/tau) - q.hj/tau)
/// using the explicit product form. Exists as an identity oracle for
/// star_loss_l2's euclid_term.
double expanded_l22(const Vectord& q, const NeighborSet& neighbors,
                    const QueueSnapshot& snap, double tau, double base,
                    double prob_temperature = 1.0, double prob_floor = 1e-8);

/// One minibatch of raw samples.
struct Batch {
  SampleMatrix features;        // b x d_in
  std::vector<int> coarse;      // b
  std::vector<SampleId> ids;    // b
};

/// Mean objective over the batch: per-query neighbor retrieval at the given
/// alpha, CE plus the mode's contrastive terms. Pure value path (no
/// gradients); used for reporting and as a cross-check of compute_gradients.
LossBreakdown batch_objective(const EncoderParams& params, const Batch& batch,
                              const QueueSnapshot& snap,
                              const ObjectiveConfig& config);
LossBreakdown batch_objective(const EncoderParams& params, const Batch& batch,
                              const MomentumQueue& queue,
                              const ObjectiveConfig& config);

/// Exact reverse-mode gradients of batch_objective's total with respect to
/// every parameter (base_raw included). Queue features are constants: no
/// gradient flows into the snapshot. Returns the loss breakdown alongside
/// shape-identical gradients. Throws NumericError if the loss is not finite.
std::pair<LossBreakdown, EncoderParams> compute_gradients(
    const EncoderParams& params, const Batch& batch, const QueueSnapshot& snap,
    const ObjectiveConfig& config);

}  // namespace star
