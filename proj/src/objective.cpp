#include "star/objective.hpp"

#include <cmath>
#include <optional>

#include "star/error.hpp"
#include "star/vecmath.hpp"

namespace star {

namespace {

// Returns a snapshot view whose probability cache matches (temperature,
// floor); recomputes into `local` only when the cache is missing or stale.
const QueueSnapshot& with_probs(const QueueSnapshot& snap,
                                std::optional<QueueSnapshot>& local,
                                double temperature, double floor) {
  if (snap.has_probs() && snap.prob_temperature == temperature &&
      snap.prob_floor == floor)
    return snap;
  local = snap;
  local->precompute_probs(temperature, floor);
  return *local;
}

// dkl(q, h_k) for every row k of the snapshot, via the expansion
//   sym_kl(p, r) = sum p log p + sum r log r - p . log r - r . log p.
Vectord dkl_row(const QueueSnapshot& snap, const Vectord& prob_q,
                const Vectord& log_prob_q, double self_kl_q) {
  return (Vectord::Constant(snap.size(), self_kl_q) + snap.self_kl -
          snap.log_probs * prob_q - snap.probs * log_prob_q);
}

double weighted_infonce(const Vectord& logits, const Vectord& numerators,
                        const NeighborSet& neighbors) {
  const double lse = vecmath::log_sum_exp(logits);
  double loss = 0.0;
  for (Index j = 0; j < neighbors.size(); ++j)
    loss += neighbors.weights(j) * (lse - numerators(neighbors.queue_rows[j]));
  return loss;
}

}  // namespace

double ce_loss(const Vectord& logits, int label) {
  if (label < 0 || label >= logits.size())
    throw ConfigError("ce_loss: label out of range");
  return vecmath::log_sum_exp(logits) - logits(label);
}

double down_loss_l1(const Vectord& q, const NeighborSet& neighbors,
                    const QueueSnapshot& snap, double tau) {
  if (snap.size() == 0) throw NumericError("down_loss_l1: empty queue");
  if (!(tau > 0.0)) throw ConfigError("down_loss_l1: tau must be > 0");
  Vectord s = snap.embeddings * q / tau;
  return weighted_infonce(s, s, neighbors);
}

StarTerms star_loss_l2(const Vectord& q, const NeighborSet& neighbors,
                       const QueueSnapshot& snap, double tau, double gamma,
                       double base, bool include_kl_loss,
                       bool include_kl_weight, double prob_temperature,
                       double prob_floor) {
  if (snap.size() == 0) throw NumericError("star_loss_l2: empty queue");
  if (!(tau > 0.0)) throw ConfigError("star_loss_l2: tau must be > 0");
  if (!(gamma >= 0.0)) throw ConfigError("star_loss_l2: gamma must be >= 0");
  if (!(base > 0.0)) throw ConfigError("star_loss_l2: base must be > 0");

  Vectord s = snap.embeddings * q / tau;
  StarTerms out;

  const bool need_dkl =
      include_kl_weight || (include_kl_loss && gamma > 0.0);
  Vectord dkl;
  std::optional<QueueSnapshot> local;
  if (need_dkl) {
    const QueueSnapshot& sp =
        with_probs(snap, local, prob_temperature, prob_floor);
    Vectord pq = vecmath::embed_to_prob(q, prob_temperature, prob_floor);
    Vectord lpq = pq.array().log();
    dkl = dkl_row(sp, pq, lpq, pq.dot(lpq));
  }

  if (include_kl_loss && gamma > 0.0) {
    Vectord u = -dkl / tau;
    out.kl_term = gamma * weighted_infonce(u, u, neighbors);
    if (!std::isfinite(out.kl_term))
      throw NumericError("star_loss_l2: non-finite kl_term");
  }

  Vectord t = include_kl_weight ? Vectord(s + std::log(base) * dkl) : s;
  out.euclid_term = weighted_infonce(t, s, neighbors);
  if (!std::isfinite(out.euclid_term))
    throw NumericError("star_loss_l2: non-finite euclid_term");
  return out;
}

double expanded_l22(const Vectord& q, const NeighborSet& neighbors,
                    const QueueSnapshot& snap, double tau, double base,
                    double prob_temperature, double prob_floor) {
  if (snap.size() == 0) throw NumericError("expanded_l22: empty queue");
  std::optional<QueueSnapshot> local;
  const QueueSnapshot& sp =
      with_probs(snap, local, prob_temperature, prob_floor);
  Vectord pq = vecmath::embed_to_prob(q, prob_temperature, prob_floor);
  Vectord lpq = pq.array().log();
  Vectord dkl = dkl_row(sp, pq, lpq, pq.dot(lpq));
  Vectord s = snap.embeddings * q / tau;

  // Product form, evaluated literally.
  double denom = 0.0;
  for (Index kk = 0; kk < snap.size(); ++kk)
    denom += std::pow(base, dkl(kk)) * std::exp(s(kk));
  double loss = 0.0;
  for (Index j = 0; j < neighbors.size(); ++j)
    loss += neighbors.weights(j) *
            (std::log(denom) - s(neighbors.queue_rows[j]));
  return loss;
}

namespace {

void check_batch(const EncoderParams& params, const Batch& batch,
                 const ObjectiveConfig& config) {
  const Index b = batch.features.rows();
  if (b == 0) throw ConfigError("batch_objective: empty batch");
  if (batch.features.cols() != params.input_dim())
    throw ConfigError("batch_objective: feature dimension mismatch");
  if (static_cast<Index>(batch.coarse.size()) != b ||
      static_cast<Index>(batch.ids.size()) != b)
    throw ConfigError("batch_objective: ragged batch");
  const bool ce_used = config.mode == LossMode::kPretrain || config.include_ce;
  if (ce_used) {
    for (int y : batch.coarse)
      if (y < 0 || y >= params.coarse_classes())
        throw ConfigError("batch_objective: coarse label out of range");
  }
}

}  // namespace

LossBreakdown batch_objective(const EncoderParams& params, const Batch& batch,
                              const QueueSnapshot& snap,
                              const ObjectiveConfig& config) {
  check_batch(params, batch, config);
  const Index b = batch.features.rows();
  const bool contrastive = config.mode != LossMode::kPretrain;
  const bool ce_used = !contrastive || config.include_ce;

  std::optional<QueueSnapshot> local;
  const QueueSnapshot* sp = &snap;
  if (contrastive && config.mode == LossMode::kStar)
    sp = &with_probs(snap, local, config.prob_temperature, config.prob_floor);

  LossBreakdown sum;
  for (Index i = 0; i < b; ++i) {
    Vectord q = encode(params, Vectord(batch.features.row(i)));
    if (ce_used)
      sum.ce += ce_loss(classify_coarse(params, q), batch.coarse[i]);
    if (!contrastive) continue;
    NeighborSet nb =
        retrieve_neighbors(q, batch.ids[i], *sp, config.k, config.alpha);
    if (config.mode == LossMode::kDown) {
      sum.contrastive += down_loss_l1(q, nb, *sp, config.tau);
    } else {
      StarTerms terms = star_loss_l2(
          q, nb, *sp, config.tau, config.gamma, std::exp(params.base_raw),
          config.include_kl_loss, config.include_kl_weight,
          config.prob_temperature, config.prob_floor);
      sum.kl_term += terms.kl_term;
      sum.euclid_term += terms.euclid_term;
    }
  }
  LossBreakdown out;
  const double inv = 1.0 / static_cast<double>(b);
  out.ce = sum.ce * inv;
  out.contrastive = sum.contrastive * inv;
  out.kl_term = sum.kl_term * inv;
  out.euclid_term = sum.euclid_term * inv;
  out.total = out.ce + out.contrastive + out.kl_term + out.euclid_term;
  if (!std::isfinite(out.total))
    throw NumericError("batch_objective: non-finite total loss");
  return out;
}

LossBreakdown batch_objective(const EncoderParams& params, const Batch& batch,
                              const MomentumQueue& queue,
                              const ObjectiveConfig& config) {
  return batch_objective(params, batch, snapshot(queue), config);
}

std::pair<LossBreakdown, EncoderParams> compute_gradients(
    const EncoderParams& params, const Batch& batch, const QueueSnapshot& snap,
    const ObjectiveConfig& config) {
  check_batch(params, batch, config);
  const Index b = batch.features.rows();
  const Index d = params.embed_dim();
  const int layers = params.layer_count();
  const bool contrastive = config.mode != LossMode::kPretrain;
  const bool ce_used = !contrastive || config.include_ce;
  const bool star = contrastive && config.mode == LossMode::kStar;
  const bool kl_loss = star && config.include_kl_loss && config.gamma > 0.0;
  const bool kl_weight = star && config.include_kl_weight;
  const bool need_dkl = kl_loss || kl_weight;
  const double inv_b = 1.0 / static_cast<double>(b);

  std::optional<QueueSnapshot> local;
  const QueueSnapshot* sp = &snap;
  if (need_dkl)
    sp = &with_probs(snap, local, config.prob_temperature, config.prob_floor);
  if (contrastive && sp->size() == 0)
    throw NumericError("compute_gradients: empty queue");

  // Forward through the MLP, keeping activations for the backward pass.
  std::vector<SampleMatrix> acts(static_cast<std::size_t>(layers) + 1);
  acts[0] = batch.features;
  for (int l = 0; l < layers; ++l) {
    SampleMatrix z =
        (acts[static_cast<std::size_t>(l)] * params.weights[l].transpose())
            .rowwise() +
        params.biases[l].transpose();
    acts[static_cast<std::size_t>(l) + 1] =
        (l + 1 < layers) ? SampleMatrix(z.array().tanh()) : std::move(z);
  }
  const SampleMatrix& pre_norm = acts.back();
  Vectord row_norms = pre_norm.rowwise().norm();
  if ((row_norms.array() <= 1e-12).any())
    throw NumericError("compute_gradients: degenerate pre-norm embedding");
  SampleMatrix Q = pre_norm.array().colwise() / row_norms.array();

  LossBreakdown loss;
  SampleMatrix dQ = SampleMatrix::Zero(b, d);
  EncoderParams grads = params.zeros_like();

  if (ce_used) {
    SampleMatrix logits = (Q * params.head_weight.transpose()).rowwise() +
                          params.head_bias.transpose();
    SampleMatrix dlogits(b, logits.cols());
    for (Index i = 0; i < b; ++i) {
      const double lse = vecmath::log_sum_exp(logits.row(i).transpose());
      loss.ce += (lse - logits(i, batch.coarse[i])) * inv_b;
      dlogits.row(i) = (logits.row(i).array() - lse).exp();
      dlogits(i, batch.coarse[i]) -= 1.0;
    }
    dlogits *= inv_b;
    grads.head_weight = dlogits.transpose() * Q;
    grads.head_bias = dlogits.colwise().sum();
    dQ += dlogits * params.head_weight;
  }

  if (contrastive) {
    const Index n = sp->size();
    const double log_base = params.base_raw;  // log(exp(base_raw))
    SampleMatrix S = Q * sp->embeddings.transpose() / config.tau;  // b x n

    // Per-query coordinate-softmax state for the dkl backward.
    SampleMatrix Pq, LPq, Sq;  // probs, log probs, pre-floor softmax
    SampleMatrix DKL;
    if (need_dkl) {
      Pq.resize(b, d);
      LPq.resize(b, d);
      Sq.resize(b, d);
      DKL.resize(b, n);
      for (Index i = 0; i < b; ++i) {
        Vectord z = Q.row(i).transpose() / config.prob_temperature;
        Vectord s = (z.array() - z.maxCoeff()).exp();
        s /= s.sum();
        Sq.row(i) = s.transpose();
        Vectord p = s.array().max(config.prob_floor);
        p /= p.sum();
        Pq.row(i) = p.transpose();
        LPq.row(i) = p.array().log().transpose();
        DKL.row(i) =
            dkl_row(*sp, p, LPq.row(i).transpose(), p.dot(LPq.row(i)))
                .transpose();
      }
    }

    SampleMatrix dS = SampleMatrix::Zero(b, n);
    SampleMatrix dDKL;
    if (need_dkl) dDKL = SampleMatrix::Zero(b, n);
    double dbase_raw = 0.0;

    for (Index i = 0; i < b; ++i) {
      Vectord q = Q.row(i).transpose();
      NeighborSet nb =
          retrieve_neighbors(q, batch.ids[i], *sp, config.k, config.alpha);

      if (config.mode == LossMode::kDown) {
        Vectord s = S.row(i).transpose();
        const double lse = vecmath::log_sum_exp(s);
        Vectord soft = (s.array() - lse).exp();
        double l1 = 0.0;
        for (Index j = 0; j < nb.size(); ++j)
          l1 += nb.weights(j) * (lse - s(nb.queue_rows[j]));
        loss.contrastive += l1 * inv_b;
        dS.row(i) = soft.transpose();
        for (Index j = 0; j < nb.size(); ++j)
          dS(i, nb.queue_rows[j]) -= nb.weights(j);
        continue;
      }

      // STAR terms.
      Vectord s = S.row(i).transpose();
      Vectord t = kl_weight ? Vectord(s + log_base * DKL.row(i).transpose())
                            : s;
      const double lse_t = vecmath::log_sum_exp(t);
      Vectord soft_t = (t.array() - lse_t).exp();
      double euclid = 0.0;
      for (Index j = 0; j < nb.size(); ++j)
        euclid += nb.weights(j) * (lse_t - s(nb.queue_rows[j]));
      loss.euclid_term += euclid * inv_b;
      dS.row(i) += soft_t.transpose();
      for (Index j = 0; j < nb.size(); ++j)
        dS(i, nb.queue_rows[j]) -= nb.weights(j);
      if (kl_weight) {
        dDKL.row(i) += log_base * soft_t.transpose();
        dbase_raw += soft_t.dot(DKL.row(i).transpose());
      }

      if (kl_loss) {
        Vectord u = -DKL.row(i).transpose() / config.tau;
        const double lse_u = vecmath::log_sum_exp(u);
        Vectord soft_u = (u.array() - lse_u).exp();
        double klv = 0.0;
        for (Index j = 0; j < nb.size(); ++j)
          klv += nb.weights(j) * (lse_u - u(nb.queue_rows[j]));
        loss.kl_term += config.gamma * klv * inv_b;
        Vectord du = config.gamma * soft_u;
        for (Index j = 0; j < nb.size(); ++j)
          du(nb.queue_rows[j]) -= config.gamma * nb.weights(j);
        dDKL.row(i) -= du.transpose() / config.tau;
      }
    }

    dS *= inv_b;
    grads.base_raw = dbase_raw * inv_b;
    dQ += dS * sp->embeddings / config.tau;

    if (need_dkl) {
      dDKL *= inv_b;
      for (Index i = 0; i < b; ++i) {
        Vectord g = dDKL.row(i).transpose();
        const double gsum = g.sum();
        // d dkl / d p, accumulated over queue rows.
        Vectord dp = gsum * (LPq.row(i).transpose().array() + 1.0).matrix() -
                     sp->log_probs.transpose() * g -
                     ((sp->probs.transpose() * g).array() /
                      Pq.row(i).transpose().array())
                         .matrix();
        // Renormalization p = p~ / Z with Z = sum(p~).
        Vectord p = Pq.row(i).transpose();
        Vectord s = Sq.row(i).transpose();
        const double z_sum = s.array().max(config.prob_floor).sum();
        Vectord dpt = (dp.array() - dp.dot(p)) / z_sum;
        // Floor: inactive coordinates pass the gradient through.
        Vectord ds =
            (s.array() > config.prob_floor).select(dpt.array(), 0.0);
        // Softmax backward, then the 1/temperature of the logit map.
        Vectord dz = (s.array() * (ds.array() - ds.dot(s))).matrix() /
                     config.prob_temperature;
        dQ.row(i) += dz.transpose();
      }
    }
  }

  // Back through L2 normalization: dU = (dQ - Q (Q . dQ)) / ||u||.
  SampleMatrix dU(b, d);
  for (Index i = 0; i < b; ++i) {
    const double proj = Q.row(i).dot(dQ.row(i));
    dU.row(i) = (dQ.row(i) - proj * Q.row(i)) / row_norms(i);
  }

  // Back through the MLP.
  SampleMatrix dA = std::move(dU);
  for (int l = layers - 1; l >= 0; --l) {
    SampleMatrix dZ =
        (l == layers - 1)
            ? std::move(dA)
            : SampleMatrix(
                  (dA.array() *
                   (1.0 -
                    acts[static_cast<std::size_t>(l) + 1].array().square())));
    grads.weights[l] = dZ.transpose() * acts[static_cast<std::size_t>(l)];
    grads.biases[l] = dZ.colwise().sum();
    if (l > 0) dA = dZ * params.weights[l];
  }

  loss.total = loss.ce + loss.contrastive + loss.kl_term + loss.euclid_term;
  if (!std::isfinite(loss.total))
    throw NumericError("compute_gradients: non-finite loss");
  if (!grads.all_finite())
    throw NumericError("compute_gradients: non-finite gradient");
  return {loss, std::move(grads)};
}

}  // namespace star
