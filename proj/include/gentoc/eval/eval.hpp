#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gentoc/corpus/dataset.hpp"
#include "gentoc/models/model.hpp"

namespace gentoc::eval {

class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Maps attribute aliases to a canonical name before matching.
using SynonymMap = std::map<std::string, std::string>;

struct PairScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t predicted = 0;
  std::size_t gold = 0;
  std::size_t correct = 0;
};

/// A prediction is correct when its normalized attribute and exact index set
/// match an unused gold pair. Empty predictions score P=1 only against empty
/// gold; empty gold scores R=1.
PairScore pair_set_metrics(const PairList& predicted, const PairList& gold, const SynonymMap* synonyms = nullptr);

struct SliceMetrics {
  std::size_t examples = 0;
  double precision = 0.0;  // macro averages over examples
  double recall = 0.0;
  double f1 = 0.0;
  double f1_of_means = 0.0;  // harmonic mean of the averaged P and R
  std::size_t predicted = 0;
  std::size_t gold = 0;
  std::size_t correct = 0;
  double tagged_ratio = 0.0;  // mean fraction of words covered by predictions
};

void to_json(nlohmann::json& j, const SliceMetrics& m);

struct MetricsReport {
  std::string system;
  SliceMetrics overall;
  std::map<std::string, SliceMetrics> slices;
  int malformed = 0;

  nlohmann::json to_json() const;
};

struct Extraction {
  PairList pairs;
  int malformed = 0;
};

struct EvalOptions {
  int long_threshold = 9;  // "long" slice: names with at least this many words
  std::optional<SynonymMap> synonyms;
};

/// Gold for scoring: full_pairs when present, else observed_pairs.
const PairList& gold_pairs(const corpus::ProductExample& example);

/// Aggregates per-example predictions; `predictions[i]` belongs to
/// `dataset[i]`. Throws on an empty dataset or a size mismatch.
MetricsReport score(const std::string& system, const corpus::Dataset& dataset,
                    const std::vector<Extraction>& predictions, const EvalOptions& options = {});

/// One of the three end-to-end extractors built from checkpoints.
class System {
 public:
  /// Recognizes {genae, tocve} as GenToC, {genave}, or {tocave}; a rescorer
  /// among `models` is ignored.
  explicit System(std::vector<models::Model> models);
  static System load(const std::vector<std::filesystem::path>& checkpoints);

  const std::string& name() const { return name_; }
  Extraction extract(const std::vector<std::string>& words) const;
  const models::Model& primary() const { return models_.at(primary_); }

 private:
  std::vector<models::Model> models_;
  std::string name_;
  std::size_t primary_ = 0;
  std::size_t secondary_ = 0;
};

std::vector<Extraction> predict(const System& system, const corpus::Dataset& dataset);
MetricsReport evaluate(const System& system, const corpus::Dataset& dataset, const EvalOptions& options = {});

// ---------------------------------------------------------------------------
// Rescoring and PR curves.

/// Trains the independent "attribute: value" seq2seq scorer.
models::Model train_rescorer(const corpus::Dataset& dataset, const nlohmann::json& config, std::uint64_t seed);

/// Geometric-mean target-token probability of "attribute: value"; tokens
/// unknown to the rescorer map to <unk>.
double score_pair(const models::Model& rescorer, const std::vector<std::string>& words, const AVPair& pair);

struct ScoredPair {
  AVPair pair;
  double confidence = 0.0;
};

using ScoredExtraction = std::vector<ScoredPair>;

std::vector<ScoredExtraction> score_extractions(const models::Model& rescorer, const corpus::Dataset& dataset,
                                                const std::vector<Extraction>& predictions);

struct PRPoint {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

/// Thresholds i/(n-1) for i in [0, n); an extraction is kept when its
/// confidence is at least the threshold.
std::vector<PRPoint> pr_curve(const std::vector<ScoredExtraction>& scored, const corpus::Dataset& dataset,
                              int n_thresholds, const EvalOptions& options = {});
void write_pr_csv(const std::vector<PRPoint>& curve, const std::filesystem::path& path);

/// Fraction of `levels` evenly spaced recall levels (over the recall range
/// both curves reach) where a's best precision at recall >= r is at least b's.
double dominance_fraction(const std::vector<PRPoint>& a, const std::vector<PRPoint>& b, int levels = 20);

// ---------------------------------------------------------------------------

struct LatencyReport {
  std::string system;
  std::size_t queries = 0;
  std::size_t warmup = 0;
  double mean_ms = 0.0;
  double stddev_ms = 0.0;
  std::string hardware;
  std::string started;
  std::string finished;

  nlohmann::json to_json() const;
};

/// Times one query at a time on the calling thread. Needs at least 100 timed
/// queries.
LatencyReport latency_bench(const System& system, const std::vector<std::vector<std::string>>& queries,
                            std::size_t warmup);

/// CPU model from /proc/cpuinfo plus the logical core count.
std::string hardware_descriptor();

}  // namespace gentoc::eval
