#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gentoc/corpus/av_pair.hpp"
#include "gentoc/models/config.hpp"
#include "gentoc/models/network.hpp"
#include "gentoc/text/formats.hpp"
#include "gentoc/text/vocab.hpp"

namespace gentoc::models {

inline constexpr const char* kOutsideLabel = "O";

/// One trainable architecture: an encoder plus either a decoder (seq2seq
/// kinds) or a per-token head (tagger kinds). ToC-VE's head has labels
/// {NO, YES}; ToC-AVE's has {O, attributes...}.
class Model {
 public:
  Model(ModelKind kind, ModelConfig config, text::Vocab vocab, std::vector<std::string> labels, std::uint64_t seed);

  ModelKind kind() const { return kind_; }
  const ModelConfig& config() const { return config_; }
  const text::Vocab& vocab() const { return vocab_; }
  const std::vector<std::string>& labels() const { return labels_; }
  std::uint64_t seed() const { return seed_; }
  Params& params() { return params_; }
  const Params& params() const { return params_; }
  const Encoder& encoder() const { return encoder_; }
  const Decoder& decoder() const { return decoder_; }
  const TaggerHead& head() const { return head_; }
  int label_index(const std::string& label) const;

  /// Free-form provenance stored alongside the manifest.
  nlohmann::json meta = nlohmann::json::object();

  void save(const std::filesystem::path& path) const;
  static Model load(const std::filesystem::path& path);

 private:
  ModelKind kind_;
  ModelConfig config_;
  text::Vocab vocab_;
  std::vector<std::string> labels_;
  std::uint64_t seed_;
  Params params_;
  Encoder encoder_;
  Decoder decoder_;
  TaggerHead head_;
};

/// Throws ModelError unless both models share a vocabulary.
void require_same_vocab(const Model& a, const Model& b);

// ---------------------------------------------------------------------------
// Training examples in id form. `mask` empty means no marker input.

struct Seq2SeqExample {
  std::vector<int> input;
  std::vector<bool> mask;
  std::vector<int> target;  // without <bos>/<eos>
};

struct TaggerExample {
  std::vector<int> input;
  std::vector<bool> mask;
  int offset = 0;           // first scored position
  std::vector<int> labels;  // one per position from `offset`
};

/// Target-string tokens to ids; unknown tokens are an error.
std::vector<int> encode_target(const std::string& target, const text::Vocab& vocab);

Seq2SeqExample make_genae_example(const text::TokenSeq& seq, const PairList& pairs, const text::Vocab& vocab,
                                  bool with_mask);
Seq2SeqExample make_genave_example(const text::TokenSeq& seq, const PairList& pairs, const text::Vocab& vocab,
                                   bool with_mask);
Seq2SeqExample make_rescorer_example(const text::TokenSeq& seq, const AVPair& pair, const text::Vocab& vocab);
/// YES at `gold` positions of the product name, NO elsewhere.
TaggerExample make_tocve_example(const std::string& attribute, const text::TokenSeq& seq,
                                 const std::vector<int>& gold, const text::Vocab& vocab);
TaggerExample make_tocave_example(const Model& model, const text::TokenSeq& seq, const PairList& pairs,
                                  bool with_mask);

/// Teacher-forced mean token cross entropy over target ++ <eos>.
Var seq2seq_loss(Context& ctx, const Model& model, const Seq2SeqExample& ex);
/// Mean cross entropy over positions from `offset` on.
Var tagger_loss(Context& ctx, const Model& model, const TaggerExample& ex);

// ---------------------------------------------------------------------------
// Inference. All of these build their own non-recording tape and only read
// the model, so they may run concurrently on one model.

/// Final encoder states [len x d_model] (the decoder's memory).
numerics::Tensor<Real> encode_states(const Model& model, const std::vector<int>& ids, const text::MarkerMask* mask);

/// Greedy decode from <bos> until <eos> or max_length tokens.
std::vector<std::string> greedy_decode(const Model& model, const std::vector<int>& input,
                                       const text::MarkerMask* mask);

/// Full-marker greedy decode, parsed as an attribute list.
text::ParsedAttributes genae_decode(const Model& model, const text::TokenSeq& seq);

/// Indices with P(YES) > 0.5; empty when "attribute <sep> name" exceeds max_length.
std::vector<int> tocve_predict(const Model& model, const std::string& attribute, const text::TokenSeq& seq);
/// Per-position YES probability over the product words.
std::vector<double> tocve_probabilities(const Model& model, const std::string& attribute, const text::TokenSeq& seq);

struct GroundedPairs {
  PairList pairs;
  int malformed = 0;  // unparsable segments plus values not found in the name
};

/// Maps each generated value string onto the leftmost unused matching run of
/// name words; unmatched values are dropped and tallied.
GroundedPairs ground_pairs(const std::vector<std::pair<std::string, std::string>>& candidates,
                           const std::vector<std::string>& words);
GroundedPairs genave_decode(const Model& model, const text::TokenSeq& seq);

/// Merges consecutive positions with the same non-O label into one pair.
PairList merge_tags(const std::vector<std::string>& tags);
PairList tocave_predict(const Model& model, const text::TokenSeq& seq);

/// Geometric-mean probability of `target` ++ <eos> under teacher forcing.
double sequence_confidence(const Model& model, const std::vector<int>& input, const std::vector<int>& target);

}  // namespace gentoc::models
