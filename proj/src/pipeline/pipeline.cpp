#include "gentoc/pipeline/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <set>
#include <variant>

#include "gentoc/numerics/optimizer.hpp"

namespace gentoc::pipeline {

namespace num = gentoc::numerics;
using models::Model;
using models::ModelKind;

void TrainPlan::validate() const {
  auto shape = config;
  shape.vocab_size = std::max(shape.vocab_size, 1);  // filled in from the dataset
  shape.validate();
  if (epochs < 1) throw PipelineError("epochs must be at least 1");
  if (batch_size < 1) throw PipelineError("batch_size must be at least 1");
  if (value_pruning_rate < 0.0 || value_pruning_rate > 1.0) throw PipelineError("value_pruning_rate must be in [0, 1]");
  if (learning_rate < 0.0) throw PipelineError("learning_rate must be nonnegative");
  if (final_lr_fraction < 0.0 || final_lr_fraction > 1.0) throw PipelineError("final_lr_fraction must be in [0, 1]");
}

void to_json(nlohmann::json& j, const TrainPlan& p) {
  j = nlohmann::json{{"kind", models::to_string(p.kind)},
                     {"dataset", p.dataset.string()},
                     {"config", p.config},
                     {"epochs", p.epochs},
                     {"batch_size", p.batch_size},
                     {"seed", p.seed},
                     {"value_pruning_rate", p.value_pruning_rate},
                     {"learning_rate", p.learning_rate},
                     {"clip_norm", p.clip_norm},
                     {"final_lr_fraction", p.final_lr_fraction}};
}

void from_json(const nlohmann::json& j, TrainPlan& p) {
  if (j.contains("kind")) p.kind = models::parse_model_kind(j.at("kind").get<std::string>());
  if (j.contains("dataset")) p.dataset = j.at("dataset").get<std::string>();
  if (j.contains("config")) p.config = j.at("config").get<models::ModelConfig>();
  p.config.marker_enabled = j.value("marker_enabled", p.config.marker_enabled);
  p.epochs = j.value("epochs", p.epochs);
  p.batch_size = j.value("batch_size", p.batch_size);
  p.seed = j.value("seed", p.seed);
  p.value_pruning_rate = j.value("value_pruning_rate", p.value_pruning_rate);
  p.learning_rate = j.value("learning_rate", p.learning_rate);
  p.clip_norm = j.value("clip_norm", p.clip_norm);
  p.final_lr_fraction = j.value("final_lr_fraction", p.final_lr_fraction);
}

TrainPlan load_plan(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw PipelineError("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
    return j.get<TrainPlan>();
  } catch (const nlohmann::json::exception& e) {
    throw PipelineError(path.string() + ": " + e.what());
  }
}

text::Vocab build_vocab(const corpus::Dataset& dataset) {
  text::Vocab vocab;
  for (const auto& ex : dataset) {
    for (const auto& w : ex.words) vocab.add(w);
    for (const auto& p : ex.observed_pairs) {
      for (const auto& tok : text::target_tokens(p.attribute)) vocab.add(tok);
    }
  }
  return vocab;
}

std::vector<std::string> tagger_labels(const corpus::Dataset& dataset) {
  std::set<std::string> attrs;
  for (const auto& ex : dataset) {
    for (const auto& p : ex.observed_pairs) attrs.insert(p.attribute);
  }
  std::vector<std::string> labels{models::kOutsideLabel};
  labels.insert(labels.end(), attrs.begin(), attrs.end());
  return labels;
}

std::vector<PrunedRecord> make_value_pruning_examples(const corpus::Dataset& dataset, double rate,
                                                      std::uint64_t seed) {
  if (rate < 0.0 || rate > 1.0) throw PipelineError("value-pruning rate must be in [0, 1]");
  std::vector<PrunedRecord> out;
  if (rate == 0.0) return out;
  num::Rng rng(seed);
  for (const auto& ex : dataset) {
    for (std::size_t k = 0; k < ex.observed_pairs.size(); ++k) {
      // draw for every candidate so skipping never shifts later decisions
      if (!rng.bernoulli(rate)) continue;
      const auto& pair = ex.observed_pairs[k];
      const bool repeated = std::any_of(ex.observed_pairs.begin(), ex.observed_pairs.end(), [&](const AVPair& q) {
        return &q != &pair && q.attribute == pair.attribute;
      });
      if (repeated) continue;
      std::vector<bool> removed(ex.words.size(), false);
      for (const int i : pair.value_indices) removed[static_cast<std::size_t>(i)] = true;
      PrunedRecord rec{pair.attribute, {}};
      for (std::size_t i = 0; i < ex.words.size(); ++i) {
        if (!removed[i]) rec.words.push_back(ex.words[i]);
      }
      if (rec.words.empty()) continue;
      const bool leftover = std::any_of(pair.value_indices.begin(), pair.value_indices.end(), [&](int i) {
        return std::find(rec.words.begin(), rec.words.end(), ex.words[static_cast<std::size_t>(i)]) != rec.words.end();
      });
      if (leftover) continue;
      out.push_back(std::move(rec));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

using Example = std::variant<models::Seq2SeqExample, models::TaggerExample>;

std::vector<Example> build_examples(const TrainPlan& plan, const Model& model, const corpus::Dataset& dataset) {
  const auto& vocab = model.vocab();
  const bool marker = model.config().marker_enabled;
  std::vector<Example> out;
  for (const auto& ex : dataset) {
    const auto seq = text::encode(ex.words, vocab);
    switch (plan.kind) {
      case ModelKind::kGenAE:
        out.emplace_back(models::make_genae_example(seq, ex.observed_pairs, vocab, marker));
        break;
      case ModelKind::kGenAVE:
        out.emplace_back(models::make_genave_example(seq, ex.observed_pairs, vocab, marker));
        break;
      case ModelKind::kToCAVE:
        out.emplace_back(models::make_tocave_example(model, seq, ex.observed_pairs, marker));
        break;
      case ModelKind::kRescorer:
        for (const auto& p : ex.observed_pairs) out.emplace_back(models::make_rescorer_example(seq, p, vocab));
        break;
      case ModelKind::kToCVE:
        for (const auto& p : ex.observed_pairs) {
          out.emplace_back(models::make_tocve_example(p.attribute, seq, p.value_indices, vocab));
        }
        break;
    }
  }
  if (plan.kind == ModelKind::kToCVE) {
    for (const auto& rec : make_value_pruning_examples(dataset, plan.value_pruning_rate, plan.seed ^ 0x5650ULL)) {
      out.emplace_back(models::make_tocve_example(rec.attribute, text::encode(rec.words, vocab), {}, vocab));
    }
  }
  if (out.empty()) throw PipelineError("no training records for " + models::to_string(plan.kind));
  return out;
}

std::vector<std::string> labels_for(ModelKind kind, const corpus::Dataset& dataset) {
  if (kind == ModelKind::kToCVE) return {"NO", "YES"};
  if (kind == ModelKind::kToCAVE) return tagger_labels(dataset);
  return {};
}

}  // namespace

TrainResult train(const TrainPlan& plan, const corpus::Dataset& dataset, const EpochCallback& on_epoch) {
  plan.validate();
  if (dataset.empty()) throw PipelineError("training dataset is empty");
  auto config = plan.config;
  if (plan.kind == ModelKind::kToCVE || plan.kind == ModelKind::kRescorer) config.marker_enabled = false;
  Model model(plan.kind, config, build_vocab(dataset), labels_for(plan.kind, dataset), plan.seed);
  nlohmann::json plan_json = plan;
  plan_json["config"] = model.config();
  model.meta = {{"plan", plan_json}};

  const auto examples = build_examples(plan, model, dataset);
  num::Rng order_rng(plan.seed ^ 0x4f52444552ULL);
  num::Rng dropout_rng(plan.seed ^ 0x44524f50ULL);
  num::Adam<models::Real> adam({plan.learning_rate, 0.9, 0.999, 1e-8, plan.clip_norm});

  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  const std::size_t batch = static_cast<std::size_t>(plan.batch_size);
  const std::size_t batches_per_epoch = (order.size() + batch - 1) / batch;
  const double total_steps = static_cast<double>(batches_per_epoch) * plan.epochs;

  TrainResult result{std::move(model), {}};
  auto& params = result.model.params();
  for (int epoch = 1; epoch <= plan.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    order_rng.shuffle(order.begin(), order.end());
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < batches_per_epoch; ++b) {
      const std::size_t lo = b * batch;
      const std::size_t hi = std::min(order.size(), lo + batch);
      params.zero_grad();
      for (std::size_t k = lo; k < hi; ++k) {
        models::Tape tape(true);
        models::Context ctx(tape, params, dropout_rng, static_cast<models::Real>(config.dropout));
        const auto& ex = examples[order[k]];
        const models::Var loss = std::holds_alternative<models::Seq2SeqExample>(ex)
                                     ? models::seq2seq_loss(ctx, result.model, std::get<models::Seq2SeqExample>(ex))
                                     : models::tagger_loss(ctx, result.model, std::get<models::TaggerExample>(ex));
        const double value = loss.item();
        if (!std::isfinite(value)) {
          throw PipelineError(models::to_string(plan.kind) + " diverged: non-finite loss at epoch " +
                              std::to_string(epoch) + ", batch " + std::to_string(b + 1));
        }
        loss_sum += value;
        tape.backward(num::scale(loss, static_cast<models::Real>(1.0 / static_cast<double>(hi - lo))));
      }
      const double progress = (static_cast<double>(epoch - 1) * batches_per_epoch + b) / total_steps;
      adam.set_learning_rate(plan.learning_rate * (1.0 - (1.0 - plan.final_lr_fraction) * progress));
      adam.step(params);
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    EpochLog log{epoch, loss_sum / static_cast<double>(examples.size()), seconds};
    result.history.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  auto& losses = result.model.meta["loss_history"];
  losses = nlohmann::json::array();
  for (const auto& h : result.history) losses.push_back(h.mean_loss);
  return result;
}

TrainResult train(const TrainPlan& plan, const EpochCallback& on_epoch) {
  return train(plan, corpus::load_jsonl(plan.dataset), on_epoch);
}

// ---------------------------------------------------------------------------

PairList combine_stages(const std::vector<std::string>& attributes, std::size_t name_length, const ValueFn& values) {
  std::vector<bool> claimed(name_length, false);
  std::set<std::string> seen;
  PairList out;
  for (const auto& attribute : attributes) {
    if (!seen.insert(attribute).second) continue;
    AVPair pair{attribute, {}};
    for (const int i : values(attribute)) {
      if (i < 0 || static_cast<std::size_t>(i) >= name_length) throw PipelineError("value index out of range");
      if (!claimed[static_cast<std::size_t>(i)]) pair.value_indices.push_back(i);
    }
    if (pair.value_indices.empty()) continue;
    for (const int i : pair.value_indices) claimed[static_cast<std::size_t>(i)] = true;
    out.push_back(std::move(pair));
  }
  return out;
}

PairList gentoc_infer(const text::TokenSeq& seq, const Model& genae, const Model& tocve) {
  return combine_stages(models::genae_decode(genae, seq).attributes, seq.size(),
                        [&](const std::string& attribute) { return models::tocve_predict(tocve, attribute, seq); });
}

PairList gentoc_infer(const std::vector<std::string>& words, const Model& genae, const Model& tocve) {
  require_same_vocab(genae, tocve);
  return gentoc_infer(text::encode(words, genae.vocab()), genae, tocve);
}

BootstrapResult bootstrap(const corpus::Dataset& dataset, const Model& genae, const Model& tocve) {
  require_same_vocab(genae, tocve);
  BootstrapResult result;
  result.before = corpus::stats(dataset);
  result.dataset.reserve(dataset.size());
  for (const auto& ex : dataset) {
    auto out = ex;
    out.observed_pairs = gentoc_infer(text::encode(ex.words, genae.vocab()), genae, tocve);
    out.retagged = true;
    result.dataset.push_back(std::move(out));
  }
  result.after = corpus::stats(result.dataset);
  return result;
}

}  // namespace gentoc::pipeline
