#include "gentoc/models/config.hpp"

namespace gentoc::models {

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kGenAE:
      return "genae";
    case ModelKind::kToCVE:
      return "tocve";
    case ModelKind::kGenAVE:
      return "genave";
    case ModelKind::kToCAVE:
      return "tocave";
    case ModelKind::kRescorer:
      return "rescorer";
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
  for (const auto k : {ModelKind::kGenAE, ModelKind::kToCVE, ModelKind::kGenAVE, ModelKind::kToCAVE,
                       ModelKind::kRescorer}) {
    if (to_string(k) == name) return k;
  }
  throw ModelError("unknown model kind '" + std::string(name) + "'");
}

bool is_seq2seq(ModelKind kind) {
  return kind == ModelKind::kGenAE || kind == ModelKind::kGenAVE || kind == ModelKind::kRescorer;
}

void ModelConfig::validate() const {
  if (d_model <= 0 || n_heads <= 0 || d_model % n_heads != 0) {
    throw ModelError("d_model " + std::to_string(d_model) + " must be a positive multiple of n_heads " +
                     std::to_string(n_heads));
  }
  if (n_encoder_layers < 1 || n_decoder_layers < 0 || feedforward < 1) {
    throw ModelError("layer counts and feedforward width must be positive");
  }
  if (max_length < 2) {
    throw ModelError("max_length must be at least 2");
  }
  if (vocab_size < 1) {
    throw ModelError("vocab_size must be set");
  }
  if (dropout < 0.0 || dropout >= 1.0) {
    throw ModelError("dropout must be in [0, 1)");
  }
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{{"d_model", c.d_model},
                     {"n_heads", c.n_heads},
                     {"n_encoder_layers", c.n_encoder_layers},
                     {"n_decoder_layers", c.n_decoder_layers},
                     {"feedforward", c.feedforward},
                     {"max_length", c.max_length},
                     {"vocab_size", c.vocab_size},
                     {"dropout", c.dropout},
                     {"marker_enabled", c.marker_enabled},
                     {"marker_before_final_norm", c.marker_before_final_norm}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
  c.d_model = j.value("d_model", c.d_model);
  c.n_heads = j.value("n_heads", c.n_heads);
  c.n_encoder_layers = j.value("n_encoder_layers", c.n_encoder_layers);
  c.n_decoder_layers = j.value("n_decoder_layers", c.n_decoder_layers);
  c.feedforward = j.value("feedforward", c.feedforward);
  c.max_length = j.value("max_length", c.max_length);
  c.vocab_size = j.value("vocab_size", c.vocab_size);
  c.dropout = j.value("dropout", c.dropout);
  c.marker_enabled = j.value("marker_enabled", c.marker_enabled);
  c.marker_before_final_norm = j.value("marker_before_final_norm", c.marker_before_final_norm);
}

}  // namespace gentoc::models
