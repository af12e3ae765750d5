#include "gapcoref/encoder.hpp"

#include <cmath>
#include <limits>

#include "gapcoref/error.hpp"
#include "gapcoref/rng.hpp"

namespace gapcoref {
namespace {

Parameter weight(std::string name, int rows, int cols) { return Parameter(std::move(name), rows, cols, true); }
Parameter bias(std::string name, int cols) { return Parameter(std::move(name), 1, cols, false); }
Parameter gain(std::string name, int cols) {
  Parameter p(std::move(name), 1, cols, false);
  p.value.setOnes();
  return p;
}

void fill_uniform(Matrix& m, double limit, Rng& rng) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rng.uniform(-limit, limit);
  }
}

double glorot(const Matrix& m) { return std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols())); }

// Uniform with standard deviation 0.02.
constexpr double kEmbeddingLimit = 0.02 * 1.7320508075688772;

}  // namespace

void EncoderConfig::validate() const {
  if (num_layers < 1 || hidden_dim < 1 || num_heads < 1 || ffn_dim < 1 || max_positions < 1 || vocab_size < 1) {
    throw Error(ErrorCode::BadConfig, "encoder dimensions must be positive");
  }
  if (hidden_dim % num_heads != 0) {
    throw Error(ErrorCode::BadConfig, "hidden_dim must be divisible by num_heads");
  }
  for (int l : frozen_layers) {
    if (l < 1 || l > num_layers) throw Error(ErrorCode::BadRange, "frozen layer " + std::to_string(l));
  }
  if (output_layer > num_layers || output_layer < -1) {
    throw Error(ErrorCode::BadRange, "output layer " + std::to_string(output_layer));
  }
}

ParameterList EncoderLayer::parameters() {
  return {&query_w,    &query_b,     &key_w,       &key_b,    &value_w,  &value_b,
          &attn_out_w, &attn_out_b,  &attn_norm_g, &attn_norm_b, &ffn_in_w, &ffn_in_b,
          &ffn_out_w,  &ffn_out_b,   &ffn_norm_g,  &ffn_norm_b};
}

ParameterList EncoderParams::embedding_parameters() {
  return {&token_embedding, &position_embedding, &segment_embedding, &embed_norm_g, &embed_norm_b};
}

ParameterList EncoderParams::parameters() {
  ParameterList out = embedding_parameters();
  for (auto& layer : layers) {
    for (Parameter* p : layer.parameters()) out.push_back(p);
  }
  return out;
}

std::size_t EncoderParams::parameter_count() const {
  std::size_t n = 0;
  for (const Parameter* p : const_cast<EncoderParams*>(this)->parameters()) n += static_cast<std::size_t>(p->size());
  return n;
}

EncoderParams init_params(const EncoderConfig& config) {
  config.validate();
  const int h = config.hidden_dim;
  const int f = config.ffn_dim;

  EncoderParams params;
  params.config = config;
  params.token_embedding = weight("embed.token", config.vocab_size, h);
  params.position_embedding = weight("embed.position", config.max_positions, h);
  params.segment_embedding = weight("embed.segment", 2, h);
  params.embed_norm_g = gain("embed.norm.gain", h);
  params.embed_norm_b = bias("embed.norm.bias", h);
  for (int l = 1; l <= config.num_layers; ++l) {
    const std::string prefix = "layer" + std::to_string(l) + ".";
    EncoderLayer layer;
    layer.query_w = weight(prefix + "query.w", h, h);
    layer.query_b = bias(prefix + "query.b", h);
    layer.key_w = weight(prefix + "key.w", h, h);
    layer.key_b = bias(prefix + "key.b", h);
    layer.value_w = weight(prefix + "value.w", h, h);
    layer.value_b = bias(prefix + "value.b", h);
    layer.attn_out_w = weight(prefix + "attn_out.w", h, h);
    layer.attn_out_b = bias(prefix + "attn_out.b", h);
    layer.attn_norm_g = gain(prefix + "attn_norm.gain", h);
    layer.attn_norm_b = bias(prefix + "attn_norm.bias", h);
    layer.ffn_in_w = weight(prefix + "ffn_in.w", h, f);
    layer.ffn_in_b = bias(prefix + "ffn_in.b", f);
    layer.ffn_out_w = weight(prefix + "ffn_out.w", f, h);
    layer.ffn_out_b = bias(prefix + "ffn_out.b", h);
    layer.ffn_norm_g = gain(prefix + "ffn_norm.gain", h);
    layer.ffn_norm_b = bias(prefix + "ffn_norm.bias", h);
    params.layers.push_back(std::move(layer));
  }

  Rng rng(derive_seed(config.seed, "encoder/init"));
  for (Parameter* p : params.embedding_parameters()) {
    if (p->decay) fill_uniform(p->value, kEmbeddingLimit, rng);
  }
  for (auto& layer : params.layers) {
    for (Parameter* p : layer.parameters()) {
      if (p->decay) fill_uniform(p->value, glorot(p->value), rng);
    }
  }
  for (int l : config.frozen_layers) freeze_layers(params, l, l);
  return params;
}

void freeze_layers(EncoderParams& params, int first, int last) {
  const int n = static_cast<int>(params.layers.size());
  if (first < 1 || last > n || first > last) {
    throw Error(ErrorCode::BadRange, "cannot freeze layers " + std::to_string(first) + ".." + std::to_string(last));
  }
  if (first == 1) {
    for (Parameter* p : params.embedding_parameters()) p->trainable = false;
  }
  for (int l = first; l <= last; ++l) {
    for (Parameter* p : params.layers[static_cast<std::size_t>(l - 1)].parameters()) p->trainable = false;
    params.config.frozen_layers.insert(l);
  }
}

void unfreeze_all(EncoderParams& params) {
  for (Parameter* p : params.parameters()) p->trainable = true;
  params.config.frozen_layers.clear();
}

namespace {

Matrix layer_forward(const EncoderLayer& layer, const Matrix& x, const std::vector<std::int32_t>& mask, int heads,
                     LayerTape* tape) {
  const Eigen::Index n = x.rows();
  const Eigen::Index h = x.cols();
  const Eigen::Index d = h / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));

  Matrix q = affine(x, layer.query_w, layer.query_b);
  Matrix k = affine(x, layer.key_w, layer.key_b);
  Matrix v = affine(x, layer.value_w, layer.value_b);
  Matrix context = Matrix::Zero(n, h);
  std::vector<Matrix> attention;
  if (tape) attention.reserve(static_cast<std::size_t>(heads));

  for (int head = 0; head < heads; ++head) {
    const auto qh = q.middleCols(head * d, d);
    const auto kh = k.middleCols(head * d, d);
    Matrix probs = Matrix::Zero(n, n);
    const Matrix scores = (qh * kh.transpose()) * scale;
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!mask[static_cast<std::size_t>(i)]) continue;  // attends to nothing
      double m = -std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < n; ++j) {
        if (mask[static_cast<std::size_t>(j)]) m = std::max(m, scores(i, j));
      }
      double z = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (mask[static_cast<std::size_t>(j)]) {
          probs(i, j) = std::exp(scores(i, j) - m);
          z += probs(i, j);
        }
      }
      probs.row(i) /= z;
    }
    context.middleCols(head * d, d).noalias() = probs * v.middleCols(head * d, d);
    if (tape) attention.push_back(std::move(probs));
  }

  const Matrix attn_out = affine(context, layer.attn_out_w, layer.attn_out_b);
  NormCache attn_norm;
  Matrix normed = layer_norm_forward(x + attn_out, layer.attn_norm_g, layer.attn_norm_b, tape ? &attn_norm : nullptr);

  Matrix ffn_pre = affine(normed, layer.ffn_in_w, layer.ffn_in_b);
  Matrix ffn_act = ffn_pre.unaryExpr([](double t) { return gelu(t); });
  const Matrix ffn_out = affine(ffn_act, layer.ffn_out_w, layer.ffn_out_b);
  NormCache ffn_norm;
  Matrix out = layer_norm_forward(normed + ffn_out, layer.ffn_norm_g, layer.ffn_norm_b, tape ? &ffn_norm : nullptr);

  if (tape) {
    tape->input = x;
    tape->query = std::move(q);
    tape->key = std::move(k);
    tape->value = std::move(v);
    tape->attention = std::move(attention);
    tape->context = std::move(context);
    tape->attn_norm = std::move(attn_norm);
    tape->attn_normed = std::move(normed);
    tape->ffn_pre = std::move(ffn_pre);
    tape->ffn_act = std::move(ffn_act);
    tape->ffn_norm = std::move(ffn_norm);
  }
  return out;
}

Matrix layer_backward(EncoderLayer& layer, const LayerTape& tape, const Matrix& d_out, int heads) {
  const Eigen::Index h = d_out.cols();
  const Eigen::Index d = h / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));

  // out = LN(normed + ffn(normed))
  const Matrix d_ffn_sum = layer_norm_backward(d_out, tape.ffn_norm, layer.ffn_norm_g, layer.ffn_norm_b);
  const Matrix d_act = affine_backward(tape.ffn_act, d_ffn_sum, layer.ffn_out_w, layer.ffn_out_b);
  const Matrix d_pre = d_act.array() * tape.ffn_pre.unaryExpr([](double t) { return gelu_derivative(t); }).array();
  Matrix d_normed = d_ffn_sum + affine_backward(tape.attn_normed, d_pre, layer.ffn_in_w, layer.ffn_in_b);

  // normed = LN(x + attn(x))
  const Matrix d_attn_sum = layer_norm_backward(d_normed, tape.attn_norm, layer.attn_norm_g, layer.attn_norm_b);
  const Matrix d_context = affine_backward(tape.context, d_attn_sum, layer.attn_out_w, layer.attn_out_b);

  const Eigen::Index n = d_out.rows();
  Matrix d_q(n, h), d_k(n, h), d_v(n, h);
  for (int head = 0; head < heads; ++head) {
    const Matrix& probs = tape.attention[static_cast<std::size_t>(head)];
    const auto dc = d_context.middleCols(head * d, d);
    const Matrix d_probs = dc * tape.value.middleCols(head * d, d).transpose();
    d_v.middleCols(head * d, d).noalias() = probs.transpose() * dc;
    const Vector row_dot = (d_probs.array() * probs.array()).rowwise().sum();
    const Matrix d_scores = (probs.array() * (d_probs.colwise() - row_dot).array()).matrix() * scale;
    d_q.middleCols(head * d, d).noalias() = d_scores * tape.key.middleCols(head * d, d);
    d_k.middleCols(head * d, d).noalias() = d_scores.transpose() * tape.query.middleCols(head * d, d);
  }

  Matrix d_x = d_attn_sum;
  d_x += affine_backward(tape.input, d_q, layer.query_w, layer.query_b);
  d_x += affine_backward(tape.input, d_k, layer.key_w, layer.key_b);
  d_x += affine_backward(tape.input, d_v, layer.value_w, layer.value_b);
  return d_x;
}

bool any_trainable(const ParameterList& params) {
  for (const Parameter* p : params) {
    if (p->trainable) return true;
  }
  return false;
}

}  // namespace

TokenStates encoder_forward(const EncoderParams& params, const EncodedInput& input, EncoderTape* tape) {
  const auto& cfg = params.config;
  const auto n = static_cast<Eigen::Index>(input.ids.size());
  if (n > cfg.max_positions) {
    throw Error(ErrorCode::SequenceTooLong,
                std::to_string(n) + " tokens exceed " + std::to_string(cfg.max_positions) + " positions");
  }
  if (input.segment_ids.size() != input.ids.size() || input.mask.size() != input.ids.size()) {
    throw Error(ErrorCode::ShapeMismatch, "ids, segment ids and mask differ in length");
  }

  Matrix x(n, cfg.hidden_dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto id = input.ids[static_cast<std::size_t>(i)];
    const auto seg = input.segment_ids[static_cast<std::size_t>(i)];
    if (id < 0 || id >= cfg.vocab_size || seg < 0 || seg > 1) {
      throw Error(ErrorCode::DimensionMismatch, "token id or segment out of range at position " + std::to_string(i));
    }
    x.row(i) = params.token_embedding.value.row(id) + params.position_embedding.value.row(i) +
               params.segment_embedding.value.row(seg);
  }

  if (tape) {
    tape->ids = input.ids;
    tape->segment_ids = input.segment_ids;
    tape->mask = input.mask;
    tape->layers.clear();
  }
  x = layer_norm_forward(x, params.embed_norm_g, params.embed_norm_b, tape ? &tape->embed_norm : nullptr);

  const int top = cfg.resolved_output_layer();
  for (int l = 0; l < top; ++l) {
    LayerTape* lt = nullptr;
    if (tape) lt = &tape->layers.emplace_back();
    x = layer_forward(params.layers[static_cast<std::size_t>(l)], x, input.mask, cfg.num_heads, lt);
  }
  return x;
}

void encoder_backward(EncoderParams& params, const EncoderTape& tape, const Matrix& d_states) {
  const int top = static_cast<int>(tape.layers.size());
  // Lowest block that still needs gradients: 0 for embeddings, l for layer l.
  int lowest = top + 1;
  if (any_trainable(params.embedding_parameters())) {
    lowest = 0;
  } else {
    for (int l = 1; l <= top; ++l) {
      if (any_trainable(params.layers[static_cast<std::size_t>(l - 1)].parameters())) {
        lowest = l;
        break;
      }
    }
  }
  if (lowest > top) return;

  Matrix d = d_states;
  for (int l = top; l >= std::max(lowest, 1); --l) {
    d = layer_backward(params.layers[static_cast<std::size_t>(l - 1)], tape.layers[static_cast<std::size_t>(l - 1)], d,
                       params.config.num_heads);
  }
  if (lowest > 0) return;

  const Matrix d_embed = layer_norm_backward(d, tape.embed_norm, params.embed_norm_g, params.embed_norm_b);
  for (Eigen::Index i = 0; i < d_embed.rows(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    if (params.token_embedding.trainable) params.token_embedding.grad.row(tape.ids[k]) += d_embed.row(i);
    if (params.position_embedding.trainable) params.position_embedding.grad.row(i) += d_embed.row(i);
    if (params.segment_embedding.trainable) params.segment_embedding.grad.row(tape.segment_ids[k]) += d_embed.row(i);
  }
}

}  // namespace gapcoref
