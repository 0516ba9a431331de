#include "star/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "star/error.hpp"
#include "star/inference.hpp"
#include "star/metrics.hpp"
#include "star/rng.hpp"

namespace star {

bool EarlyStopper::observe(int epoch, double value) {
  if (value > best) {
    best = value;
    best_epoch = epoch;
    epochs_since_improvement = 0;
    return false;
  }
  return ++epochs_since_improvement >= patience;
}

namespace {

Index resolve_queue_capacity(const StarConfig& config, Index n_train) {
  if (config.queue_capacity > 0) return config.queue_capacity;
  return std::min<Index>(n_train, 8192);
}

void require_shape(const Dataset& train, const StarConfig& config) {
  config.validate();
  if (train.size() == 0) throw DataError("training: empty dataset");
  if (config.coarse_m < 1)
    throw ConfigError("training: coarse_m unresolved (set it or load a manifest)");
  for (Index i = 0; i < train.size(); ++i) {
    const int y = train.samples[static_cast<std::size_t>(i)].coarse;
    if (y < 0 || y >= config.coarse_m)
      throw DataError("training: coarse label out of range at sample index " +
                      std::to_string(i));
  }
}

Batch slice_batch(const SampleMatrix& X, const std::vector<int>& coarse,
                  const std::vector<SampleId>& ids,
                  const std::vector<std::size_t>& perm, std::size_t begin,
                  std::size_t end) {
  Batch b;
  b.features.resize(static_cast<Index>(end - begin), X.cols());
  for (std::size_t j = begin; j < end; ++j) {
    const std::size_t src = perm[j];
    b.features.row(static_cast<Index>(j - begin)) =
        X.row(static_cast<Index>(src));
    b.coarse.push_back(coarse[src]);
    b.ids.push_back(ids[src]);
  }
  return b;
}

}  // namespace

EncoderParams pretrain(const Dataset& train, const StarConfig& config) {
  require_shape(train, config);
  EncoderParams params =
      init_encoder(static_cast<int>(train.dim()), config.hidden,
                   config.embed_dim, config.coarse_m, config.seed,
                   config.base_init);
  OptimizerState opt = make_optimizer(params, config.lr, config.weight_decay,
                                      config.clip_norm);
  const SampleMatrix X = train.feature_matrix();
  const std::vector<int> coarse = train.coarse_labels();
  const std::vector<SampleId> ids = train.ids();
  const std::size_t n = static_cast<std::size_t>(train.size());
  const std::size_t bs = static_cast<std::size_t>(config.batch_size);

  ObjectiveConfig oc;
  oc.mode = LossMode::kPretrain;
  QueueSnapshot no_queue;

  for (int epoch = 0; epoch < config.pretrain_epochs; ++epoch) {
    rng::Engine eng = rng::stream(config.seed, "pretrain-shuffle",
                                  static_cast<std::uint64_t>(epoch));
    std::vector<std::size_t> perm = rng::permutation(n, eng);
    for (std::size_t begin = 0; begin < n; begin += bs) {
      const std::size_t end = std::min(n, begin + bs);
      Batch batch = slice_batch(X, coarse, ids, perm, begin, end);
      auto [loss, grads] = compute_gradients(params, batch, no_queue, oc);
      // CE never touches the base; keep weight decay off it too.
      const double base_keep = params.base_raw;
      adamw_step(params, grads, opt);
      params.base_raw = base_keep;
    }
  }
  return params;
}

MomentumQueue init_queue(const MomentumParams& momentum, const Dataset& train,
                         const StarConfig& config) {
  MomentumQueue queue(resolve_queue_capacity(config, train.size()));
  const SampleMatrix Q = encode_batch(momentum, train.feature_matrix());
  for (Index i = 0; i < train.size(); ++i) {
    const LabeledSample& s = train.samples[static_cast<std::size_t>(i)];
    queue.push(QueueEntry{s.id, Q.row(i).transpose(), s.coarse});
  }
  return queue;
}

LossBreakdown train_epoch(TrainState& state, const Dataset& train,
                          const StarConfig& config) {
  const SampleMatrix X = train.feature_matrix();
  const std::vector<int> coarse = train.coarse_labels();
  const std::vector<SampleId> ids = train.ids();
  const std::size_t n = static_cast<std::size_t>(train.size());
  const std::size_t bs = static_cast<std::size_t>(config.batch_size);
  const double alpha = config.alpha.at(state.epoch);
  const ObjectiveConfig oc = config.objective_config(alpha);

  rng::Engine eng = rng::stream(state.seed, "train-shuffle",
                                static_cast<std::uint64_t>(state.epoch));
  std::vector<std::size_t> perm = rng::permutation(n, eng);

  LossBreakdown sum;
  for (std::size_t begin = 0; begin < n; begin += bs) {
    const std::size_t end = std::min(n, begin + bs);
    Batch batch = slice_batch(X, coarse, ids, perm, begin, end);

    QueueSnapshot snap = snapshot(state.queue);
    if (oc.mode == LossMode::kStar &&
        (oc.include_kl_weight || (oc.include_kl_loss && oc.gamma > 0.0)))
      snap.precompute_probs(oc.prob_temperature, oc.prob_floor);

    auto [loss, grads] = compute_gradients(state.params, batch, snap, oc);
    if (!config.base_trainable) grads.base_raw = 0.0;
    const double base_keep = state.params.base_raw;
    adamw_step(state.params, grads, state.optimizer);
    if (!config.base_trainable) state.params.base_raw = base_keep;

    momentum_update(state.momentum, state.params, config.momentum);
    const SampleMatrix Qm = encode_batch(state.momentum, batch.features);
    for (Index i = 0; i < Qm.rows(); ++i)
      state.queue.push(QueueEntry{batch.ids[static_cast<std::size_t>(i)],
                                  Qm.row(i).transpose(),
                                  batch.coarse[static_cast<std::size_t>(i)]});

    const double w = static_cast<double>(end - begin);
    sum.ce += loss.ce * w;
    sum.contrastive += loss.contrastive * w;
    sum.kl_term += loss.kl_term * w;
    sum.euclid_term += loss.euclid_term * w;
    sum.total += loss.total * w;
  }
  const double inv = 1.0 / static_cast<double>(n);
  sum.ce *= inv;
  sum.contrastive *= inv;
  sum.kl_term *= inv;
  sum.euclid_term *= inv;
  sum.total *= inv;
  state.epoch += 1;
  return sum;
}

double clustering_silhouette(const EncoderParams& params, const Dataset& data,
                             const StarConfig& config, std::uint64_t seed) {
  if (config.fine_k < 2)
    throw ConfigError("clustering_silhouette: fine_k must be >= 2");
  const SampleMatrix Q = encode_batch(params, data.feature_matrix());
  ClusterModel model = kmeans(Q, config.fine_k, seed);
  return silhouette(Q, model.assignments);
}

FitResult fit(const Dataset& train, const StarConfig& config) {
  require_shape(train, config);
  if (config.fine_k < 2)
    throw ConfigError("fit: fine_k unresolved (set it or load a manifest)");
  if (train.size() < config.fine_k)
    throw DataError("fit: fewer training samples than fine categories");

  FitResult result;
  EncoderParams params = pretrain(train, config);
  result.pretrain_silhouette = clustering_silhouette(
      params, train, config, rng::derive(config.seed, "silhouette-pretrain"));

  if (config.train_epochs == 0) {
    result.best_params = params;
    result.final_params = std::move(params);
    result.best_silhouette = result.pretrain_silhouette;
    return result;
  }

  TrainState state;
  state.seed = config.seed;
  state.momentum = momentum_copy(params);
  state.optimizer = make_optimizer(params, config.lr, config.weight_decay,
                                   config.clip_norm);
  state.queue = init_queue(state.momentum, train, config);
  state.params = std::move(params);
  state.stopper.patience = config.patience;

  for (int epoch = 0; epoch < config.train_epochs; ++epoch) {
    const double alpha = config.alpha.at(epoch);
    LossBreakdown mean = train_epoch(state, train, config);
    const double sil = clustering_silhouette(
        state.params, train, config,
        rng::derive(config.seed, "silhouette-epoch",
                    static_cast<std::uint64_t>(epoch)));
    result.history.push_back(
        TrainHistoryRow{epoch, alpha, mean, state.params.base(), sil});
    const bool stop = state.stopper.observe(epoch, sil);
    if (state.stopper.best_epoch == epoch)
      result.best_params = state.params;
    if (stop) break;
  }
  result.final_params = state.params;
  result.best_epoch = state.stopper.best_epoch;
  result.best_silhouette = state.stopper.best;
  return result;
}

namespace {

std::vector<double> matrix_to_flat(const Matrixd& m) {
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(m.size()));
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) flat.push_back(m(r, c));
  return flat;
}

Matrixd flat_to_matrix(const std::vector<double>& flat, Index rows,
                       Index cols, const std::string& what) {
  if (static_cast<Index>(flat.size()) != rows * cols)
    throw DataError("load_checkpoint: " + what + " has " +
                    std::to_string(flat.size()) + " values, expected " +
                    std::to_string(rows * cols));
  Matrixd m(rows, cols);
  std::size_t i = 0;
  for (Index r = 0; r < rows; ++r)
    for (Index c = 0; c < cols; ++c) m(r, c) = flat[i++];
  return m;
}

}  // namespace

void save_checkpoint(const EncoderParams& params, const std::string& path,
                     const std::string& config_hash_hex) {
  nlohmann::json j;
  j["version"] = 1;
  j["config_hash"] = config_hash_hex;
  j["input_dim"] = params.input_dim();
  j["embed_dim"] = params.embed_dim();
  j["coarse_classes"] = params.coarse_classes();
  std::vector<int> hidden;
  for (int l = 0; l + 1 < params.layer_count(); ++l)
    hidden.push_back(static_cast<int>(params.weights[l].rows()));
  j["hidden"] = hidden;
  j["base_raw"] = params.base_raw;
  nlohmann::json weights = nlohmann::json::array();
  nlohmann::json biases = nlohmann::json::array();
  for (int l = 0; l < params.layer_count(); ++l) {
    weights.push_back(matrix_to_flat(params.weights[l]));
    biases.push_back(std::vector<double>(
        params.biases[l].data(),
        params.biases[l].data() + params.biases[l].size()));
  }
  j["weights"] = std::move(weights);
  j["biases"] = std::move(biases);
  j["head_weight"] = matrix_to_flat(params.head_weight);
  j["head_bias"] = std::vector<double>(
      params.head_bias.data(),
      params.head_bias.data() + params.head_bias.size());
  std::ofstream out(path);
  if (!out) throw DataError("save_checkpoint: cannot write " + path);
  out << j.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("load_checkpoint: cannot read " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("load_checkpoint: invalid JSON in " + path + ": " +
                    e.what());
  }
  if (!j.contains("version") || j["version"] != 1)
    throw DataError("load_checkpoint: unsupported version in " + path);
  Checkpoint ckpt;
  try {
    ckpt.config_hash = j.value("config_hash", std::string{});
    const int d_in = j.at("input_dim").get<int>();
    const int d = j.at("embed_dim").get<int>();
    const int m = j.at("coarse_classes").get<int>();
    const std::vector<int> hidden = j.at("hidden").get<std::vector<int>>();
    std::vector<int> dims = {d_in};
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(d);

    const auto weights =
        j.at("weights").get<std::vector<std::vector<double>>>();
    const auto biases = j.at("biases").get<std::vector<std::vector<double>>>();
    if (weights.size() != dims.size() - 1 || biases.size() != weights.size())
      throw DataError("load_checkpoint: layer count mismatch in " + path);
    EncoderParams& p = ckpt.params;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
      p.weights.push_back(flat_to_matrix(weights[l], dims[l + 1], dims[l],
                                         "layer " + std::to_string(l)));
      if (static_cast<Index>(biases[l].size()) != dims[l + 1])
        throw DataError("load_checkpoint: bias " + std::to_string(l) +
                        " length mismatch in " + path);
      p.biases.push_back(Eigen::Map<const Vectord>(
          biases[l].data(), static_cast<Index>(biases[l].size())));
    }
    p.head_weight = flat_to_matrix(
        j.at("head_weight").get<std::vector<double>>(), m, d, "head_weight");
    const auto head_bias = j.at("head_bias").get<std::vector<double>>();
    if (static_cast<int>(head_bias.size()) != m)
      throw DataError("load_checkpoint: head_bias length mismatch in " + path);
    p.head_bias = Eigen::Map<const Vectord>(
        head_bias.data(), static_cast<Index>(head_bias.size()));
    p.base_raw = j.at("base_raw").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError("load_checkpoint: field error in " + path + ": " +
                    e.what());
  }
  if (!ckpt.params.all_finite())
    throw DataError("load_checkpoint: non-finite parameters in " + path);
  return ckpt;
}

}  // namespace star
