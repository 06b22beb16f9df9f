#pragma once

#include <span>
#include <string>
#include <vector>

#include "gentoc/models/config.hpp"
#include "gentoc/numerics/autodiff.hpp"
#include "gentoc/numerics/rng.hpp"
#include "gentoc/numerics/tensor.hpp"
#include "gentoc/text/formats.hpp"

namespace gentoc::models {

using Real = float;
using Var = numerics::Var<Real>;
using Tape = numerics::Tape<Real>;
using Params = numerics::ParameterSet<Real>;

/// One forward pass: binds a tape to a parameter bundle. The training form
/// records gradients into the bundle and applies dropout; the inference form
/// reads a const bundle and is safe to use from several threads, one context
/// per thread.
class Context {
 public:
  Context(Tape& tape, Params& params, numerics::Rng& rng, Real dropout);
  Context(Tape& tape, const Params& params);

  Var param(int index);
  Var drop(Var x);
  Tape& tape() { return tape_; }
  bool training() const { return mutable_ != nullptr; }

 private:
  Tape& tape_;
  Params* mutable_ = nullptr;
  const Params* const_;
  numerics::Rng* rng_ = nullptr;
  Real dropout_ = 0;
  std::vector<Var> cache_;
};

struct LinearLayer {
  int weight = -1;
  int bias = -1;
};

struct NormLayer {
  int gain = -1;
  int bias = -1;
};

struct AttentionBlock {
  LinearLayer query;
  LinearLayer key;
  LinearLayer value;
  LinearLayer output;
};

struct EncoderLayer {
  NormLayer attn_norm;
  AttentionBlock self_attn;
  NormLayer ff_norm;
  LinearLayer ff_in;
  LinearLayer ff_out;
};

struct DecoderLayer {
  NormLayer self_norm;
  AttentionBlock self_attn;
  NormLayer cross_norm;
  AttentionBlock cross_attn;
  NormLayer ff_norm;
  LinearLayer ff_in;
  LinearLayer ff_out;
};

/// Token + learned position embeddings feeding a pre-norm transformer
/// encoder. The shared marker vector, when enabled, is added to the final
/// hidden state of every flagged position.
class Encoder {
 public:
  Encoder() = default;
  Encoder(const ModelConfig& config, Params& params, numerics::Rng& rng, const std::string& prefix);

  /// `mask` may be null (no markers). `mask_offset` shifts mask positions,
  /// e.g. past an attribute prefix.
  Var forward(Context& ctx, std::span<const int> ids, const text::MarkerMask* mask, int mask_offset = 0) const;

  int token_embedding() const { return token_embedding_; }
  int marker() const { return marker_; }

 private:
  ModelConfig config_;
  int token_embedding_ = -1;
  int position_embedding_ = -1;
  int marker_ = -1;
  std::vector<EncoderLayer> layers_;
  NormLayer final_norm_;
};

class Decoder {
 public:
  Decoder() = default;
  Decoder(const ModelConfig& config, Params& params, numerics::Rng& rng, const std::string& prefix);

  /// Logits [len(inputs) x vocab]; with `last_only`, just the final row.
  Var forward(Context& ctx, Var memory, std::span<const int> inputs, bool last_only = false) const;

 private:
  ModelConfig config_;
  int token_embedding_ = -1;
  int position_embedding_ = -1;
  std::vector<DecoderLayer> layers_;
  NormLayer final_norm_;
  LinearLayer projection_;
};

/// Encoder followed by a per-token classification head.
class TaggerHead {
 public:
  TaggerHead() = default;
  TaggerHead(int d_model, int labels, Params& params, numerics::Rng& rng, const std::string& prefix);

  Var forward(Context& ctx, Var states) const;
  int labels() const { return labels_; }

 private:
  LinearLayer head_;
  int labels_ = 0;
};

}  // namespace gentoc::models
