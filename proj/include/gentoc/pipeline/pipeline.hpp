#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gentoc/corpus/dataset.hpp"
#include "gentoc/models/model.hpp"

namespace gentoc::pipeline {

class PipelineError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainPlan {
  models::ModelKind kind = models::ModelKind::kGenAE;
  std::filesystem::path dataset;
  models::ModelConfig config;
  int epochs = 10;
  int batch_size = 16;
  std::uint64_t seed = 13;
  double value_pruning_rate = 0.3;  // tocve only
  double learning_rate = 1e-3;
  double clip_norm = 1.0;
  /// Final learning rate as a fraction of the initial one (linear decay).
  double final_lr_fraction = 0.1;

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainPlan& p);
/// Missing keys keep their defaults; "marker_enabled" may sit at top level.
void from_json(const nlohmann::json& j, TrainPlan& p);
TrainPlan load_plan(const std::filesystem::path& path);

/// Reserved tokens, then every name word and attribute word in first-seen
/// order.
text::Vocab build_vocab(const corpus::Dataset& dataset);

/// "O" followed by the sorted distinct observed attributes.
std::vector<std::string> tagger_labels(const corpus::Dataset& dataset);

/// A ToC-VE record whose gold value is empty.
struct PrunedRecord {
  std::string attribute;
  std::vector<std::string> words;
};

/// For a `rate` fraction of (example, observed pair) combinations, deletes
/// the pair's value words from the name. Candidates are skipped when another
/// pair of the same attribute remains, when a value word still occurs in the
/// pruned name, or when nothing would be left.
std::vector<PrunedRecord> make_value_pruning_examples(const corpus::Dataset& dataset, double rate,
                                                      std::uint64_t seed);

struct EpochLog {
  int epoch = 0;
  double mean_loss = 0.0;
  double seconds = 0.0;
};

using EpochCallback = std::function<void(const EpochLog&)>;

struct TrainResult {
  models::Model model;
  std::vector<EpochLog> history;
};

/// Trains `plan.kind` on the observed pairs of `dataset`. A non-finite loss
/// aborts with a PipelineError naming the epoch and batch.
TrainResult train(const TrainPlan& plan, const corpus::Dataset& dataset, const EpochCallback& on_epoch = {});
/// Loads plan.dataset first.
TrainResult train(const TrainPlan& plan, const EpochCallback& on_epoch = {});

using ValueFn = std::function<std::vector<int>(const std::string& attribute)>;

/// Joins the two stages: deduplicated attributes in order, each given the
/// value indices not already claimed by an earlier attribute; attributes left
/// without a value are dropped.
PairList combine_stages(const std::vector<std::string>& attributes, std::size_t name_length, const ValueFn& values);

/// Two-stage extraction with a Gen-AE and a ToC-VE checkpoint.
PairList gentoc_infer(const text::TokenSeq& seq, const models::Model& genae, const models::Model& tocve);
PairList gentoc_infer(const std::vector<std::string>& words, const models::Model& genae,
                      const models::Model& tocve);

struct BootstrapResult {
  corpus::Dataset dataset;
  corpus::DatasetStats before;
  corpus::DatasetStats after;
};

/// Replaces every example's observed pairs with gentoc_infer output.
BootstrapResult bootstrap(const corpus::Dataset& dataset, const models::Model& genae, const models::Model& tocve);

}  // namespace gentoc::pipeline
