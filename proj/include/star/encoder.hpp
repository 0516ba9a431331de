#pragma once

#include <cstdint>
#include <vector>

#include "star/types.hpp"

namespace star {

/// Trainable parameters: an MLP (affine layers with tanh between them,
/// followed by L2 normalization), a coarse-classifier head that consumes the
/// normalized embedding, and the raw scalar parametrizing the positive
/// exponential base B = exp(base_raw) of the KL weighting.
struct EncoderParams {
  std::vector<Matrixd> weights;  // layer l: dims[l+1] x dims[l]
  std::vector<Vectord> biases;
  Matrixd head_weight;  // M x d
  Vectord head_bias;    // M
  double base_raw = 0.0;

  int input_dim() const { return static_cast<int>(weights.front().cols()); }
  int embed_dim() const { return static_cast<int>(weights.back().rows()); }
  int coarse_classes() const { return static_cast<int>(head_bias.size()); }
  int layer_count() const { return static_cast<int>(weights.size()); }
  double base() const;  // exp(base_raw), always > 0

  Index parameter_count() const;
  Vectord flatten() const;
  void unflatten(const Vectord& flat);

  /// Shape-compatible zero-filled copy (gradient accumulator).
  EncoderParams zeros_like() const;
  bool same_shape(const EncoderParams& other) const;
  bool all_finite() const;
};

/// Momentum copy of the encoder part (no head, no base, no gradients).
struct MomentumParams {
  std::vector<Matrixd> weights;
  std::vector<Vectord> biases;
};

/// Deterministic initialization. `hidden` may be empty (single affine layer).
/// Weight entries ~ N(0, 1/fan_in); biases zero; base_raw = log(base_init).
EncoderParams init_encoder(int d_in, const std::vector<int>& hidden, int d,
                           int M, std::uint64_t seed, double base_init = 10.0);

/// Forward pass to a unit embedding. Throws on dimension mismatch.
Vectord encode(const EncoderParams& params, const Vectord& x);
Vectord encode(const MomentumParams& params, const Vectord& x);

/// Row-wise batch forward; row i of the result is encode(params, X.row(i)).
SampleMatrix encode_batch(const EncoderParams& params, const SampleMatrix& X);
SampleMatrix encode_batch(const MomentumParams& params, const SampleMatrix& X);

/// Coarse-class logits for a unit embedding.
Vectord classify_coarse(const EncoderParams& params, const Vectord& q);

MomentumParams momentum_copy(const EncoderParams& params);

/// theta_k <- m * theta_k + (1 - m) * theta, elementwise. Requires 0<=m<=1.
void momentum_update(MomentumParams& momentum, const EncoderParams& params,
                     double m);

/// AdamW with global-norm gradient clipping applied before the moment update.
struct OptimizerState {
  Vectord first_moment;
  Vectord second_moment;
  long step = 0;
  double lr = 5e-5;
  double weight_decay = 0.01;
  double clip_norm = 1.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

OptimizerState make_optimizer(const EncoderParams& params, double lr,
                              double weight_decay = 0.01,
                              double clip_norm = 1.0);

/// One clipped, decoupled-weight-decay adaptive step. `grads` must be
/// shape-identical to `params`. Deterministic.
void adamw_step(EncoderParams& params, const EncoderParams& grads,
                OptimizerState& state);

}  // namespace star
