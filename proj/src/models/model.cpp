#include "gentoc/models/model.hpp"

#include <algorithm>
#include <cmath>

#include "gentoc/numerics/checkpoint.hpp"

namespace gentoc::models {

namespace num = gentoc::numerics;

namespace {

int head_width(ModelKind kind, const std::vector<std::string>& labels) {
  if (kind == ModelKind::kToCVE && labels.size() != 2) {
    throw ModelError("tocve needs exactly two labels (NO, YES)");
  }
  if (kind == ModelKind::kToCAVE && (labels.empty() || labels.front() != kOutsideLabel)) {
    throw ModelError("tocave labels must start with 'O'");
  }
  return static_cast<int>(labels.size());
}

ModelConfig sized(ModelConfig config, const text::Vocab& vocab) {
  config.vocab_size = vocab.size();
  config.validate();
  return config;
}

text::MarkerMask as_mask(const std::vector<bool>& flags) { return text::MarkerMask{flags}; }

std::vector<int> with_bos(const std::vector<int>& target) {
  std::vector<int> in;
  in.reserve(target.size() + 1);
  in.push_back(text::Vocab::kBosId);
  in.insert(in.end(), target.begin(), target.end());
  return in;
}

std::vector<int> with_eos(const std::vector<int>& target) {
  std::vector<int> out = target;
  out.push_back(text::Vocab::kEosId);
  return out;
}

Var encode(Context& ctx, const Model& model, const std::vector<int>& input, const std::vector<bool>& mask,
           int offset) {
  if (mask.empty()) return model.encoder().forward(ctx, input, nullptr);
  const auto m = as_mask(mask);
  return model.encoder().forward(ctx, input, &m, offset);
}

std::vector<bool> full_mask_if(const Model& model, std::size_t n) {
  return model.config().marker_enabled ? std::vector<bool>(n, true) : std::vector<bool>{};
}

void require_kind(const Model& model, std::initializer_list<ModelKind> kinds, const char* op) {
  if (std::find(kinds.begin(), kinds.end(), model.kind()) == kinds.end()) {
    throw ModelError(std::string(op) + ": unsupported model kind " + to_string(model.kind()));
  }
}

}  // namespace

Model::Model(ModelKind kind, ModelConfig config, text::Vocab vocab, std::vector<std::string> labels,
             std::uint64_t seed)
    : kind_(kind), config_(sized(config, vocab)), vocab_(std::move(vocab)), labels_(std::move(labels)), seed_(seed) {
  num::Rng rng(seed);
  encoder_ = Encoder(config_, params_, rng, "encoder.");
  if (is_seq2seq(kind_)) {
    if (config_.n_decoder_layers < 1) throw ModelError(to_string(kind_) + " needs at least one decoder layer");
    decoder_ = Decoder(config_, params_, rng, "decoder.");
  } else {
    head_ = TaggerHead(config_.d_model, head_width(kind_, labels_), params_, rng, "head.");
  }
}

int Model::label_index(const std::string& label) const {
  const auto it = std::find(labels_.begin(), labels_.end(), label);
  return it == labels_.end() ? -1 : static_cast<int>(it - labels_.begin());
}

void Model::save(const std::filesystem::path& path) const {
  nlohmann::json manifest{{"kind", to_string(kind_)}, {"config", config_},  {"vocab", vocab_.tokens()},
                          {"labels", labels_},        {"seed", seed_},      {"meta", meta}};
  num::write_checkpoint(path, manifest, params_);
}

Model Model::load(const std::filesystem::path& path) {
  auto ckpt = num::read_checkpoint(path);
  const auto& m = ckpt.model;
  Model model(parse_model_kind(m.at("kind").get<std::string>()), m.at("config").get<ModelConfig>(),
              text::Vocab::from_tokens(m.at("vocab").get<std::vector<std::string>>()),
              m.at("labels").get<std::vector<std::string>>(), m.at("seed").get<std::uint64_t>());
  model.meta = m.value("meta", nlohmann::json::object());
  auto& dst = model.params_.items();
  const auto& src = ckpt.params.items();
  if (dst.size() != src.size()) {
    throw ModelError(path.string() + ": checkpoint has " + std::to_string(src.size()) + " parameters, model expects " +
                     std::to_string(dst.size()));
  }
  for (std::size_t i = 0; i < dst.size(); ++i) {
    if (dst[i].name != src[i].name || !(dst[i].tensor.shape == src[i].tensor.shape)) {
      throw ModelError(path.string() + ": parameter '" + src[i].name + "' does not match '" + dst[i].name + "'");
    }
    dst[i].tensor.values = src[i].tensor.values;
  }
  return model;
}

void require_same_vocab(const Model& a, const Model& b) {
  if (a.vocab().fingerprint() != b.vocab().fingerprint() || !(a.vocab() == b.vocab())) {
    throw ModelError("incompatible vocabularies between " + to_string(a.kind()) + " and " + to_string(b.kind()) +
                     " checkpoints");
  }
}

// ---------------------------------------------------------------------------

std::vector<int> encode_target(const std::string& target, const text::Vocab& vocab) {
  std::vector<int> ids;
  for (const auto& tok : text::target_tokens(target)) {
    if (!vocab.contains(tok)) {
      throw ModelError("target token '" + tok + "' is not in the vocabulary");
    }
    ids.push_back(vocab.id(tok));
  }
  return ids;
}

Seq2SeqExample make_genae_example(const text::TokenSeq& seq, const PairList& pairs, const text::Vocab& vocab,
                                  bool with_mask) {
  Seq2SeqExample ex;
  ex.input = seq.ids;
  if (with_mask) ex.mask = text::build_marker_mask(seq, pairs).flags;
  ex.target = encode_target(text::build_genae_target(pairs), vocab);
  return ex;
}

Seq2SeqExample make_genave_example(const text::TokenSeq& seq, const PairList& pairs, const text::Vocab& vocab,
                                   bool with_mask) {
  Seq2SeqExample ex;
  ex.input = seq.ids;
  if (with_mask) ex.mask = text::build_marker_mask(seq, pairs).flags;
  ex.target = encode_target(text::build_genave_target(pairs, seq.words), vocab);
  return ex;
}

Seq2SeqExample make_rescorer_example(const text::TokenSeq& seq, const AVPair& pair, const text::Vocab& vocab) {
  Seq2SeqExample ex;
  ex.input = seq.ids;
  ex.target = encode_target(text::build_rescorer_target(pair, seq.words), vocab);
  return ex;
}

TaggerExample make_tocve_example(const std::string& attribute, const text::TokenSeq& seq,
                                 const std::vector<int>& gold, const text::Vocab& vocab) {
  auto in = text::build_tocve_input(attribute, seq, vocab);
  TaggerExample ex;
  ex.input = std::move(in.tokens.ids);
  ex.offset = in.offset;
  ex.labels.assign(seq.size(), 0);
  for (const int i : gold) {
    if (i < 0 || static_cast<std::size_t>(i) >= seq.size()) {
      throw ModelError("tocve: gold index " + std::to_string(i) + " outside a " + std::to_string(seq.size()) +
                       "-word name");
    }
    ex.labels[static_cast<std::size_t>(i)] = 1;
  }
  return ex;
}

TaggerExample make_tocave_example(const Model& model, const text::TokenSeq& seq, const PairList& pairs,
                                  bool with_mask) {
  TaggerExample ex;
  ex.input = seq.ids;
  if (with_mask) ex.mask = text::build_marker_mask(seq, pairs).flags;
  ex.labels.assign(seq.size(), 0);
  for (const auto& p : pairs) {
    const int label = model.label_index(p.attribute);
    if (label < 0) throw ModelError("tocave: attribute '" + p.attribute + "' is outside the label set");
    for (const int i : p.value_indices) {
      if (i < 0 || static_cast<std::size_t>(i) >= seq.size()) throw ModelError("tocave: value index out of range");
      ex.labels[static_cast<std::size_t>(i)] = label;
    }
  }
  return ex;
}

Var seq2seq_loss(Context& ctx, const Model& model, const Seq2SeqExample& ex) {
  require_kind(model, {ModelKind::kGenAE, ModelKind::kGenAVE, ModelKind::kRescorer}, "seq2seq_loss");
  const auto dec_in = with_bos(ex.target);
  if (static_cast<int>(dec_in.size()) > model.config().max_length) {
    throw ModelError("target of " + std::to_string(ex.target.size()) + " tokens exceeds max_length " +
                     std::to_string(model.config().max_length));
  }
  const Var memory = encode(ctx, model, ex.input, ex.mask, 0);
  const Var logits = model.decoder().forward(ctx, memory, dec_in);
  const auto dec_out = with_eos(ex.target);
  return num::cross_entropy(logits, std::span<const int>(dec_out));
}

Var tagger_loss(Context& ctx, const Model& model, const TaggerExample& ex) {
  require_kind(model, {ModelKind::kToCVE, ModelKind::kToCAVE}, "tagger_loss");
  if (ex.offset + ex.labels.size() != ex.input.size()) {
    throw ModelError("tagger: " + std::to_string(ex.labels.size()) + " labels for " +
                     std::to_string(ex.input.size() - static_cast<std::size_t>(ex.offset)) + " scored positions");
  }
  const Var states = encode(ctx, model, ex.input, ex.mask, ex.offset);
  const int n = static_cast<int>(ex.input.size());
  const Var scored = ex.offset == 0 ? states : num::slice_rows(states, ex.offset, n);
  return num::cross_entropy(model.head().forward(ctx, scored), std::span<const int>(ex.labels));
}

// ---------------------------------------------------------------------------

num::Tensor<Real> encode_states(const Model& model, const std::vector<int>& ids, const text::MarkerMask* mask) {
  Tape tape(false);
  Context ctx(tape, model.params());
  const Var h = model.encoder().forward(ctx, ids, mask);
  const auto v = h.values();
  return num::Tensor<Real>(h.shape(), std::vector<Real>(v.begin(), v.end()));
}

namespace {

std::vector<int> greedy_ids(const Model& model, const std::vector<int>& input, const std::vector<bool>& mask) {
  Tape tape(false);
  Context ctx(tape, model.params());
  const Var memory = encode(ctx, model, input, mask, 0);
  std::vector<int> seq{text::Vocab::kBosId};
  std::vector<int> out;
  while (static_cast<int>(seq.size()) <= model.config().max_length) {
    const Var logits = model.decoder().forward(ctx, memory, seq, true);
    const auto row = logits.values();
    const int next = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    if (next == text::Vocab::kEosId) break;
    out.push_back(next);
    seq.push_back(next);
  }
  return out;
}

}  // namespace

std::vector<std::string> greedy_decode(const Model& model, const std::vector<int>& input,
                                       const text::MarkerMask* mask) {
  const auto ids = greedy_ids(model, input, mask == nullptr ? std::vector<bool>{} : mask->flags);
  std::vector<std::string> tokens;
  tokens.reserve(ids.size());
  for (const int id : ids) tokens.push_back(model.vocab().token(id));
  return tokens;
}

text::ParsedAttributes genae_decode(const Model& model, const text::TokenSeq& seq) {
  require_kind(model, {ModelKind::kGenAE}, "genae_decode");
  const auto mask = text::all_true_mask(seq);
  return text::parse_genae_output(text::join_target_tokens(greedy_decode(model, seq.ids, &mask)));
}

std::vector<double> tocve_probabilities(const Model& model, const std::string& attribute, const text::TokenSeq& seq) {
  require_kind(model, {ModelKind::kToCVE}, "tocve_predict");
  const auto in = text::build_tocve_input(attribute, seq, model.vocab());
  Tape tape(false);
  Context ctx(tape, model.params());
  const Var states = model.encoder().forward(ctx, in.tokens.ids, nullptr);
  const Var logits = model.head().forward(ctx, states);
  const auto v = logits.values();
  std::vector<double> p(seq.size());
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const std::size_t row = (static_cast<std::size_t>(in.offset) + i) * 2;
    p[i] = 1.0 / (1.0 + std::exp(static_cast<double>(v[row]) - static_cast<double>(v[row + 1])));
  }
  return p;
}

std::vector<int> tocve_predict(const Model& model, const std::string& attribute, const text::TokenSeq& seq) {
  // a runaway stage-1 attribute cannot fit next to the name; it gets no value
  if (text::target_tokens(attribute).size() + 1 + seq.size() > static_cast<std::size_t>(model.config().max_length)) {
    return {};
  }
  const auto p = tocve_probabilities(model, attribute, seq);
  std::vector<int> yes;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] > 0.5) yes.push_back(static_cast<int>(i));
  }
  return yes;
}

GroundedPairs ground_pairs(const std::vector<std::pair<std::string, std::string>>& candidates,
                           const std::vector<std::string>& words) {
  GroundedPairs out;
  std::vector<bool> used(words.size(), false);
  for (const auto& [attribute, value] : candidates) {
    std::vector<std::string> value_words;
    try {
      value_words = text::split_words(value);
    } catch (const text::TextError&) {
      ++out.malformed;
      continue;
    }
    const std::size_t k = value_words.size();
    bool found = false;
    for (std::size_t start = 0; !found && start + k <= words.size(); ++start) {
      bool ok = true;
      for (std::size_t j = 0; ok && j < k; ++j) {
        ok = !used[start + j] && words[start + j] == value_words[j];
      }
      if (!ok) continue;
      AVPair pair{attribute, {}};
      for (std::size_t j = 0; j < k; ++j) {
        used[start + j] = true;
        pair.value_indices.push_back(static_cast<int>(start + j));
      }
      out.pairs.push_back(std::move(pair));
      found = true;
    }
    if (!found) ++out.malformed;
  }
  return out;
}

GroundedPairs genave_decode(const Model& model, const text::TokenSeq& seq) {
  require_kind(model, {ModelKind::kGenAVE}, "genave_decode");
  const auto mask = text::all_true_mask(seq);
  const auto parsed = text::parse_genave_output(text::join_target_tokens(greedy_decode(model, seq.ids, &mask)));
  auto grounded = ground_pairs(parsed.pairs, seq.words);
  grounded.malformed += parsed.malformed;
  return grounded;
}

PairList merge_tags(const std::vector<std::string>& tags) {
  PairList pairs;
  std::string current;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const auto& tag = tags[i];
    if (tag == kOutsideLabel) {
      current.clear();
      continue;
    }
    if (tag != current) {
      pairs.push_back(AVPair{tag, {}});
      current = tag;
    }
    pairs.back().value_indices.push_back(static_cast<int>(i));
  }
  return pairs;
}

PairList tocave_predict(const Model& model, const text::TokenSeq& seq) {
  require_kind(model, {ModelKind::kToCAVE}, "tocave_predict");
  Tape tape(false);
  Context ctx(tape, model.params());
  const auto mask = full_mask_if(model, seq.size());
  const Var logits = model.head().forward(ctx, encode(ctx, model, seq.ids, mask, 0));
  const auto v = logits.values();
  const auto width = model.labels().size();
  std::vector<std::string> tags;
  tags.reserve(seq.size());
  for (std::size_t i = 0; i < seq.size(); ++i) {
    const auto row = v.begin() + static_cast<std::ptrdiff_t>(i * width);
    tags.push_back(model.labels()[static_cast<std::size_t>(std::max_element(row, row + width) - row)]);
  }
  return merge_tags(tags);
}

double sequence_confidence(const Model& model, const std::vector<int>& input, const std::vector<int>& target) {
  require_kind(model, {ModelKind::kGenAE, ModelKind::kGenAVE, ModelKind::kRescorer}, "sequence_confidence");
  const auto dec_in = with_bos(target);
  if (static_cast<int>(dec_in.size()) > model.config().max_length) {
    throw ModelError("target exceeds max_length");
  }
  Tape tape(false);
  Context ctx(tape, model.params());
  const Var memory = model.encoder().forward(ctx, input, nullptr);
  const Var logits = model.decoder().forward(ctx, memory, dec_in);
  const auto v = logits.values();
  const auto dec_out = with_eos(target);
  const auto width = static_cast<std::size_t>(logits.shape().cols);
  double total = 0.0;
  for (std::size_t r = 0; r < dec_out.size(); ++r) {
    const auto row = v.subspan(r * width, width);
    const double top = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (const Real x : row) z += std::exp(static_cast<double>(x) - top);
    total += static_cast<double>(row[static_cast<std::size_t>(dec_out[r])]) - top - std::log(z);
  }
  return std::exp(total / static_cast<double>(dec_out.size()));
}

}  // namespace gentoc::models
