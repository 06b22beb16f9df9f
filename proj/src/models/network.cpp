#include "gentoc/models/network.hpp"

#include <cmath>
#include <numeric>

namespace gentoc::models {

namespace num = gentoc::numerics;

namespace {

void fill_normal(num::Tensor<Real>& t, num::Rng& rng, double stddev) {
  for (auto& v : t.values) v = static_cast<Real>(rng.normal() * stddev);
}

LinearLayer make_linear(Params& params, num::Rng& rng, const std::string& name, int in, int out,
                        double gain = 1.0) {
  LinearLayer l;
  l.weight = params.add(name + ".weight", {in, out});
  l.bias = params.add(name + ".bias", {1, out});
  fill_normal(params[l.weight], rng, gain / std::sqrt(static_cast<double>(in)));
  return l;
}

NormLayer make_norm(Params& params, const std::string& name, int width) {
  NormLayer n;
  n.gain = params.add(name + ".gain", {1, width});
  n.bias = params.add(name + ".bias", {1, width});
  for (auto& v : params[n.gain].values) v = Real(1);
  return n;
}

AttentionBlock make_attention(Params& params, num::Rng& rng, const std::string& name, int d, double out_gain) {
  AttentionBlock a;
  a.query = make_linear(params, rng, name + ".query", d, d);
  a.key = make_linear(params, rng, name + ".key", d, d);
  a.value = make_linear(params, rng, name + ".value", d, d);
  a.output = make_linear(params, rng, name + ".output", d, d, out_gain);
  return a;
}

Var apply(Context& ctx, const LinearLayer& l, Var x) { return num::linear(x, ctx.param(l.weight), ctx.param(l.bias)); }

Var apply(Context& ctx, const NormLayer& n, Var x) { return num::layer_norm(x, ctx.param(n.gain), ctx.param(n.bias)); }

Var attend(Context& ctx, const AttentionBlock& a, Var queries, Var keys_values, int heads, bool causal) {
  const Var q = apply(ctx, a.query, queries);
  const Var k = apply(ctx, a.key, keys_values);
  const Var v = apply(ctx, a.value, keys_values);
  return apply(ctx, a.output, num::attention(q, k, v, heads, causal));
}

Var feedforward(Context& ctx, const LinearLayer& in, const LinearLayer& out, Var x) {
  return apply(ctx, out, ctx.drop(num::relu(apply(ctx, in, x))));
}

std::vector<int> positions(std::size_t n) {
  std::vector<int> p(n);
  std::iota(p.begin(), p.end(), 0);
  return p;
}

Var embed(Context& ctx, int token_table, int position_table, std::span<const int> ids, int max_length) {
  if (ids.empty()) {
    throw ModelError("cannot embed an empty sequence");
  }
  if (static_cast<int>(ids.size()) > max_length) {
    throw ModelError("sequence of " + std::to_string(ids.size()) + " tokens exceeds max_length " +
                     std::to_string(max_length));
  }
  const auto pos = positions(ids.size());
  return ctx.drop(num::add(num::embedding(ctx.param(token_table), ids), num::embedding(ctx.param(position_table), pos)));
}

}  // namespace

// ---------------------------------------------------------------------------

Context::Context(Tape& tape, Params& params, num::Rng& rng, Real dropout)
    : tape_(tape), mutable_(&params), const_(&params), rng_(&rng), dropout_(dropout), cache_(params.size()) {}

Context::Context(Tape& tape, const Params& params) : tape_(tape), const_(&params), cache_(params.size()) {}

Var Context::param(int index) {
  auto& slot = cache_.at(static_cast<std::size_t>(index));
  if (!slot.valid()) {
    slot = mutable_ != nullptr && tape_.recording() ? tape_.parameter((*mutable_)[index]) : tape_.constant((*const_)[index]);
  }
  return slot;
}

Var Context::drop(Var x) {
  if (rng_ == nullptr || dropout_ <= Real(0)) return x;
  return num::dropout(x, dropout_, *rng_);
}

// ---------------------------------------------------------------------------

Encoder::Encoder(const ModelConfig& config, Params& params, num::Rng& rng, const std::string& prefix)
    : config_(config) {
  const int d = config.d_model;
  token_embedding_ = params.add(prefix + "token_embedding", {config.vocab_size, d});
  position_embedding_ = params.add(prefix + "position_embedding", {config.max_length, d});
  fill_normal(params[token_embedding_], rng, 0.1);
  fill_normal(params[position_embedding_], rng, 0.1);
  const double residual_gain = 1.0 / std::sqrt(2.0 * config.n_encoder_layers);
  for (int i = 0; i < config.n_encoder_layers; ++i) {
    const std::string name = prefix + "layer" + std::to_string(i);
    EncoderLayer layer;
    layer.attn_norm = make_norm(params, name + ".attn_norm", d);
    layer.self_attn = make_attention(params, rng, name + ".self_attn", d, residual_gain);
    layer.ff_norm = make_norm(params, name + ".ff_norm", d);
    layer.ff_in = make_linear(params, rng, name + ".ff_in", d, config.feedforward);
    layer.ff_out = make_linear(params, rng, name + ".ff_out", config.feedforward, d, residual_gain);
    layers_.push_back(layer);
  }
  final_norm_ = make_norm(params, prefix + "final_norm", d);
  marker_ = params.add(prefix + "marker", {1, d});
  fill_normal(params[marker_], rng, 0.5);
}

Var Encoder::forward(Context& ctx, std::span<const int> ids, const text::MarkerMask* mask, int mask_offset) const {
  if (mask != nullptr && mask_offset + mask->size() != ids.size()) {
    throw ModelError("marker mask covers " + std::to_string(mask->size()) + " words but the input has " +
                     std::to_string(ids.size() - static_cast<std::size_t>(mask_offset)));
  }
  Var x = embed(ctx, token_embedding_, position_embedding_, ids, config_.max_length);
  for (const auto& layer : layers_) {
    x = num::add(x, ctx.drop(attend(ctx, layer.self_attn, apply(ctx, layer.attn_norm, x), apply(ctx, layer.attn_norm, x),
                                    config_.n_heads, false)));
    x = num::add(x, ctx.drop(feedforward(ctx, layer.ff_in, layer.ff_out, apply(ctx, layer.ff_norm, x))));
  }
  auto add_marker = [&](Var states) {
    if (!config_.marker_enabled || mask == nullptr) return states;
    std::vector<Real> column(ids.size(), Real(0));
    for (std::size_t i = 0; i < mask->size(); ++i) {
      if (mask->flags[i]) column[static_cast<std::size_t>(mask_offset) + i] = Real(1);
    }
    const Var flags = ctx.tape().constant({static_cast<int>(ids.size()), 1}, std::move(column));
    return num::add(states, num::matmul(flags, ctx.param(marker_)));
  };
  if (config_.marker_before_final_norm) {
    return apply(ctx, final_norm_, add_marker(x));
  }
  return add_marker(apply(ctx, final_norm_, x));
}

// ---------------------------------------------------------------------------

Decoder::Decoder(const ModelConfig& config, Params& params, num::Rng& rng, const std::string& prefix)
    : config_(config) {
  const int d = config.d_model;
  token_embedding_ = params.add(prefix + "token_embedding", {config.vocab_size, d});
  position_embedding_ = params.add(prefix + "position_embedding", {config.max_length, d});
  fill_normal(params[token_embedding_], rng, 0.1);
  fill_normal(params[position_embedding_], rng, 0.1);
  const double residual_gain = 1.0 / std::sqrt(3.0 * std::max(1, config.n_decoder_layers));
  for (int i = 0; i < config.n_decoder_layers; ++i) {
    const std::string name = prefix + "layer" + std::to_string(i);
    DecoderLayer layer;
    layer.self_norm = make_norm(params, name + ".self_norm", d);
    layer.self_attn = make_attention(params, rng, name + ".self_attn", d, residual_gain);
    layer.cross_norm = make_norm(params, name + ".cross_norm", d);
    layer.cross_attn = make_attention(params, rng, name + ".cross_attn", d, residual_gain);
    layer.ff_norm = make_norm(params, name + ".ff_norm", d);
    layer.ff_in = make_linear(params, rng, name + ".ff_in", d, config.feedforward);
    layer.ff_out = make_linear(params, rng, name + ".ff_out", config.feedforward, d, residual_gain);
    layers_.push_back(layer);
  }
  final_norm_ = make_norm(params, prefix + "final_norm", d);
  projection_ = make_linear(params, rng, prefix + "projection", d, config.vocab_size);
}

Var Decoder::forward(Context& ctx, Var memory, std::span<const int> inputs, bool last_only) const {
  Var x = embed(ctx, token_embedding_, position_embedding_, inputs, config_.max_length);
  for (const auto& layer : layers_) {
    const Var h = apply(ctx, layer.self_norm, x);
    x = num::add(x, ctx.drop(attend(ctx, layer.self_attn, h, h, config_.n_heads, true)));
    x = num::add(x, ctx.drop(attend(ctx, layer.cross_attn, apply(ctx, layer.cross_norm, x), memory, config_.n_heads,
                                    false)));
    x = num::add(x, ctx.drop(feedforward(ctx, layer.ff_in, layer.ff_out, apply(ctx, layer.ff_norm, x))));
  }
  if (last_only) {
    const int rows = static_cast<int>(inputs.size());
    x = num::slice_rows(x, rows - 1, rows);
  }
  return apply(ctx, projection_, apply(ctx, final_norm_, x));
}

// ---------------------------------------------------------------------------

TaggerHead::TaggerHead(int d_model, int labels, Params& params, num::Rng& rng, const std::string& prefix)
    : labels_(labels) {
  head_ = make_linear(params, rng, prefix + "head", d_model, labels);
}

Var TaggerHead::forward(Context& ctx, Var states) const { return apply(ctx, head_, states); }

}  // namespace gentoc::models
