#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gentoc/corpus/dataset.hpp"

namespace gentoc::corpus {

/// One attribute a category can express. `surface` is the attribute string
/// this category uses when synonym noise is on (e.g. "model no." for the
/// canonical "model number").
struct AttributeSlot {
  std::string canonical;
  std::string surface;
  std::vector<std::string> lexicon;  // values, possibly multi-word
  double inclusion = 1.0;
};

/// A template element: an attribute slot (by index into Category::slots), an
/// optional filler word, or a product noun. Fillers and nouns never carry a
/// pair.
struct TemplateElement {
  enum class Kind { kSlot, kFiller, kNoun };
  Kind kind = Kind::kSlot;
  int slot = -1;
  double inclusion = 1.0;  // fillers and nouns only; slots use AttributeSlot::inclusion
};

struct NameTemplate {
  std::vector<TemplateElement> elements;
  double weight = 1.0;
};

struct Category {
  std::string name;
  std::vector<AttributeSlot> slots;
  std::vector<std::string> nouns;
  std::vector<std::string> fillers;
  std::vector<NameTemplate> templates;
  double weight = 1.0;
};

struct CatalogGrammar {
  std::vector<Category> categories;
  bool synonym_noise = true;
};

/// Eight categories of marketplace-style listings with shared and
/// category-specific attributes, per-category attribute aliases and filler
/// words.
CatalogGrammar default_grammar();

/// Builds a template from a compact layout: slot canonical names, "~" for an
/// optional filler (probability `filler_rate`), "#" for the product noun.
NameTemplate make_template(const Category& category, const std::vector<std::string>& layout, double filler_rate = 0.35,
                           double weight = 1.0);

/// Throws CorpusError if the grammar is empty, a lexicon entry or attribute
/// contains a reserved delimiter, or a template can yield fewer than 2 or more
/// than 12 words.
void validate_grammar(const CatalogGrammar& grammar);

/// Deterministic in `seed`. Every example has full_pairs populated and
/// observed_pairs equal to it.
Dataset generate_catalog(const CatalogGrammar& grammar, std::size_t n, std::uint64_t seed);

enum class DropoutMode {
  kPerPair,       // every pair dropped with the same probability
  kPerAttribute,  // drop probability scaled by a fixed per-attribute propensity
};

struct PartialLabelingResult {
  Dataset dataset;
  double drop_scale = 0.0;  // calibrated drop probability (kPerPair) or scale
  double realized_coverage = 0.0;
};

/// Drops pairs independently so the mean observed token coverage lands within
/// 0.02 of `target_coverage` (or at full coverage when that is below the
/// target). full_pairs is kept as the hidden oracle.
PartialLabelingResult partial_labeling(const Dataset& dataset, double target_coverage, std::uint64_t seed,
                                       DropoutMode mode = DropoutMode::kPerPair);

/// Propensity multiplier in [0.5, 1.5] used by kPerAttribute, a fixed hash of
/// the attribute string.
double attribute_drop_propensity(const std::string& attribute);

}  // namespace gentoc::corpus
