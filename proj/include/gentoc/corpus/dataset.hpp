#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gentoc/corpus/av_pair.hpp"

namespace gentoc::corpus {

class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A product name with its (possibly partial) training pairs. `full_pairs`,
/// when present, is the hidden complete gold set used only for scoring.
struct ProductExample {
  std::vector<std::string> words;
  PairList observed_pairs;
  std::optional<PairList> full_pairs;
  std::string category;
  /// Observed pairs come from a model rather than from the oracle, so they
  /// need not be a subset of full_pairs.
  bool retagged = false;

  std::string name() const;
  friend bool operator==(const ProductExample&, const ProductExample&) = default;
};

using Dataset = std::vector<ProductExample>;

/// Checks that every pair has a nonempty attribute and strictly increasing,
/// in-range indices, that no word belongs to two pairs of the same list, and
/// that observed pairs are a subset of full pairs when both exist (unless the
/// example is retagged).
void validate_example(const ProductExample& example);

/// Fraction of words covered by some pair in `pairs`.
double covered_fraction(const std::vector<std::string>& words, const PairList& pairs);

struct DatasetStats {
  std::size_t examples = 0;
  double tagged_ratio = 0.0;  // mean over examples of covered / total words
  std::size_t pair_count = 0;
  std::size_t attribute_count = 0;  // distinct attribute strings
  double mean_name_length = 0.0;
};

enum class PairSource { kObserved, kFull };

/// Throws on an empty dataset. kFull falls back to observed pairs for examples
/// without an oracle.
DatasetStats stats(const Dataset& dataset, PairSource source = PairSource::kObserved);

/// JSONL, one example per line:
///   {"name", "category", "observed_pairs": [{"attribute", "value_indices"}],
///    "full_pairs": optional, same shape}
void save_jsonl(const Dataset& dataset, const std::filesystem::path& path);
/// Errors name the offending 1-based line.
Dataset load_jsonl(const std::filesystem::path& path);

}  // namespace gentoc::corpus
