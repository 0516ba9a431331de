#include "star/encoder.hpp"

#include <cmath>

#include "star/error.hpp"
#include "star/rng.hpp"
#include "star/vecmath.hpp"

namespace star {

double EncoderParams::base() const { return std::exp(base_raw); }

Index EncoderParams::parameter_count() const {
  Index n = 1;  // base_raw
  for (const Matrixd& w : weights) n += w.size();
  for (const Vectord& b : biases) n += b.size();
  n += head_weight.size() + head_bias.size();
  return n;
}

Vectord EncoderParams::flatten() const {
  Vectord flat(parameter_count());
  Index at = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    flat.segment(at, weights[l].size()) =
        Eigen::Map<const Vectord>(weights[l].data(), weights[l].size());
    at += weights[l].size();
    flat.segment(at, biases[l].size()) = biases[l];
    at += biases[l].size();
  }
  flat.segment(at, head_weight.size()) =
      Eigen::Map<const Vectord>(head_weight.data(), head_weight.size());
  at += head_weight.size();
  flat.segment(at, head_bias.size()) = head_bias;
  at += head_bias.size();
  flat(at) = base_raw;
  return flat;
}

void EncoderParams::unflatten(const Vectord& flat) {
  if (flat.size() != parameter_count())
    throw ConfigError("unflatten: size mismatch");
  Index at = 0;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    Eigen::Map<Vectord>(weights[l].data(), weights[l].size()) =
        flat.segment(at, weights[l].size());
    at += weights[l].size();
    biases[l] = flat.segment(at, biases[l].size());
    at += biases[l].size();
  }
  Eigen::Map<Vectord>(head_weight.data(), head_weight.size()) =
      flat.segment(at, head_weight.size());
  at += head_weight.size();
  head_bias = flat.segment(at, head_bias.size());
  at += head_bias.size();
  base_raw = flat(at);
}

EncoderParams EncoderParams::zeros_like() const {
  EncoderParams z = *this;
  for (Matrixd& w : z.weights) w.setZero();
  for (Vectord& b : z.biases) b.setZero();
  z.head_weight.setZero();
  z.head_bias.setZero();
  z.base_raw = 0.0;
  return z;
}

bool EncoderParams::same_shape(const EncoderParams& other) const {
  if (weights.size() != other.weights.size()) return false;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (weights[l].rows() != other.weights[l].rows() ||
        weights[l].cols() != other.weights[l].cols() ||
        biases[l].size() != other.biases[l].size())
      return false;
  }
  return head_weight.rows() == other.head_weight.rows() &&
         head_weight.cols() == other.head_weight.cols() &&
         head_bias.size() == other.head_bias.size();
}

bool EncoderParams::all_finite() const {
  for (const Matrixd& w : weights)
    if (!w.allFinite()) return false;
  for (const Vectord& b : biases)
    if (!b.allFinite()) return false;
  return head_weight.allFinite() && head_bias.allFinite() &&
         std::isfinite(base_raw);
}

EncoderParams init_encoder(int d_in, const std::vector<int>& hidden, int d,
                           int M, std::uint64_t seed, double base_init) {
  if (d_in < 1 || d < 1 || M < 1)
    throw ConfigError("init_encoder: dims must be >= 1");
  for (int h : hidden)
    if (h < 1) throw ConfigError("init_encoder: hidden dims must be >= 1");
  if (!(base_init > 0.0))
    throw ConfigError("init_encoder: base_init must be > 0");

  std::vector<int> dims;
  dims.push_back(d_in);
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(d);

  rng::Engine eng = rng::stream(seed, "encoder-init");
  const auto fill = [&eng](Matrixd& w, int fan_in) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (Index i = 0; i < w.rows(); ++i)
      for (Index j = 0; j < w.cols(); ++j) w(i, j) = scale * rng::normal(eng);
  };

  EncoderParams p;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    Matrixd w(dims[l + 1], dims[l]);
    fill(w, dims[l]);
    p.weights.push_back(std::move(w));
    p.biases.push_back(Vectord::Zero(dims[l + 1]));
  }
  p.head_weight.resize(M, d);
  fill(p.head_weight, d);
  p.head_bias = Vectord::Zero(M);
  p.base_raw = std::log(base_init);
  return p;
}

namespace {

template <typename Params>
Vectord mlp_forward(const Params& params, const Vectord& x) {
  Vectord a = x;
  const std::size_t last = params.weights.size() - 1;
  for (std::size_t l = 0; l <= last; ++l) {
    a = params.weights[l] * a + params.biases[l];
    if (l != last) a = a.array().tanh();
  }
  return a;
}

template <typename Params>
Vectord encode_impl(const Params& params, const Vectord& x) {
  if (x.size() != params.weights.front().cols())
    throw ConfigError("encode: input dimension mismatch");
  return vecmath::normalize(mlp_forward(params, x));
}

template <typename Params>
SampleMatrix encode_batch_impl(const Params& params, const SampleMatrix& X) {
  SampleMatrix out(X.rows(), params.weights.back().rows());
  for (Index i = 0; i < X.rows(); ++i)
    out.row(i) = encode_impl(params, Vectord(X.row(i))).transpose();
  return out;
}

}  // namespace

Vectord encode(const EncoderParams& params, const Vectord& x) {
  return encode_impl(params, x);
}
Vectord encode(const MomentumParams& params, const Vectord& x) {
  return encode_impl(params, x);
}
SampleMatrix encode_batch(const EncoderParams& params, const SampleMatrix& X) {
  return encode_batch_impl(params, X);
}
SampleMatrix encode_batch(const MomentumParams& params, const SampleMatrix& X) {
  return encode_batch_impl(params, X);
}

Vectord classify_coarse(const EncoderParams& params, const Vectord& q) {
  if (q.size() != params.head_weight.cols())
    throw ConfigError("classify_coarse: embedding dimension mismatch");
  return params.head_weight * q + params.head_bias;
}

MomentumParams momentum_copy(const EncoderParams& params) {
  return MomentumParams{params.weights, params.biases};
}

void momentum_update(MomentumParams& momentum, const EncoderParams& params,
                     double m) {
  if (!(m >= 0.0 && m <= 1.0))
    throw ConfigError("momentum_update: m must be in [0, 1]");
  if (momentum.weights.size() != params.weights.size())
    throw ConfigError("momentum_update: shape mismatch");
  for (std::size_t l = 0; l < momentum.weights.size(); ++l) {
    momentum.weights[l] = m * momentum.weights[l] + (1.0 - m) * params.weights[l];
    momentum.biases[l] = m * momentum.biases[l] + (1.0 - m) * params.biases[l];
  }
}

OptimizerState make_optimizer(const EncoderParams& params, double lr,
                              double weight_decay, double clip_norm) {
  OptimizerState st;
  st.first_moment = Vectord::Zero(params.parameter_count());
  st.second_moment = Vectord::Zero(params.parameter_count());
  st.lr = lr;
  st.weight_decay = weight_decay;
  st.clip_norm = clip_norm;
  return st;
}

void adamw_step(EncoderParams& params, const EncoderParams& grads,
                OptimizerState& state) {
  if (!params.same_shape(grads)) throw ConfigError("adamw_step: shape mismatch");
  Vectord theta = params.flatten();
  if (state.first_moment.size() != theta.size())
    throw ConfigError("adamw_step: optimizer state shape mismatch");
  Vectord g = grads.flatten();

  const double gnorm = g.norm();
  if (state.clip_norm > 0.0 && gnorm > state.clip_norm)
    g *= state.clip_norm / gnorm;

  ++state.step;
  state.first_moment = state.beta1 * state.first_moment + (1.0 - state.beta1) * g;
  state.second_moment = state.beta2 * state.second_moment +
                        (1.0 - state.beta2) * g.cwiseProduct(g);
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  Vectord update =
      (state.first_moment / bc1).array() /
      ((state.second_moment / bc2).array().sqrt() + state.eps);
  theta -= state.lr * (update + state.weight_decay * theta);
  params.unflatten(theta);
  if (!params.all_finite())
    throw NumericError("adamw_step: non-finite parameters after update");
}

}  // namespace star
