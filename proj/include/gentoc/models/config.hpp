#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include <json.hpp>

namespace gentoc::models {

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class ModelKind {
  kGenAE,     // stage 1: product name -> attribute list
  kToCVE,     // stage 2: "attribute <sep> name" -> YES/NO per word
  kGenAVE,    // baseline: product name -> "a:v,..." string
  kToCAVE,    // baseline: per-word attribute tagger
  kRescorer,  // product name -> "attribute: value", used for confidences
};

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);
bool is_seq2seq(ModelKind kind);

struct ModelConfig {
  int d_model = 64;
  int n_heads = 2;
  int n_encoder_layers = 2;
  int n_decoder_layers = 2;
  int feedforward = 128;
  int max_length = 64;
  int vocab_size = 0;
  double dropout = 0.1;
  bool marker_enabled = true;
  /// Add the marker before the encoder's final normalization instead of after.
  bool marker_before_final_norm = false;

  /// Throws ModelError on a violated invariant.
  void validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
/// Missing keys keep their defaults.
void from_json(const nlohmann::json& j, ModelConfig& c);

}  // namespace gentoc::models
