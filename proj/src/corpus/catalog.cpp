#include "gentoc/corpus/catalog.hpp"

#include <algorithm>
#include <cmath>

#include "gentoc/numerics/rng.hpp"
#include "gentoc/text/vocab.hpp"

namespace gentoc::corpus {

namespace {

using numerics::Rng;

std::size_t word_count(const std::string& phrase) {
  std::size_t n = 0;
  bool in_word = false;
  for (const char c : phrase) {
    if (c == ' ') {
      in_word = false;
    } else if (!in_word) {
      in_word = true;
      ++n;
    }
  }
  return n;
}

bool has_reserved(const std::string& s) { return s.find_first_of(",:") != std::string::npos; }

template <typename Weighted>
std::size_t pick_weighted(const std::vector<Weighted>& items, Rng& rng) {
  double total = 0.0;
  for (const auto& it : items) total += it.weight;
  double r = rng.uniform() * total;
  for (std::size_t i = 0; i < items.size(); ++i) {
    r -= items[i].weight;
    if (r < 0.0) return i;
  }
  return items.size() - 1;
}

std::pair<std::size_t, std::size_t> phrase_length_range(const std::vector<std::string>& phrases) {
  std::size_t lo = SIZE_MAX;
  std::size_t hi = 0;
  for (const auto& p : phrases) {
    lo = std::min(lo, word_count(p));
    hi = std::max(hi, word_count(p));
  }
  return {phrases.empty() ? 0 : lo, hi};
}

void append_phrase(const std::string& phrase, std::vector<std::string>& words, std::vector<int>* indices) {
  for (auto& w : text::split_words(phrase)) {
    if (indices != nullptr) indices->push_back(static_cast<int>(words.size()));
    words.push_back(std::move(w));
  }
}

}  // namespace

NameTemplate make_template(const Category& category, const std::vector<std::string>& layout, double filler_rate,
                           double weight) {
  NameTemplate t;
  t.weight = weight;
  for (const auto& item : layout) {
    TemplateElement e;
    if (item == "~") {
      e.kind = TemplateElement::Kind::kFiller;
      e.inclusion = filler_rate;
    } else if (item == "#") {
      e.kind = TemplateElement::Kind::kNoun;
    } else {
      const auto it = std::find_if(category.slots.begin(), category.slots.end(),
                                   [&](const AttributeSlot& s) { return s.canonical == item; });
      if (it == category.slots.end()) {
        throw CorpusError("template for '" + category.name + "' names unknown slot '" + item + "'");
      }
      e.kind = TemplateElement::Kind::kSlot;
      e.slot = static_cast<int>(it - category.slots.begin());
    }
    t.elements.push_back(e);
  }
  return t;
}

void validate_grammar(const CatalogGrammar& grammar) {
  if (grammar.categories.empty()) {
    throw CorpusError("grammar has no categories");
  }
  for (const auto& cat : grammar.categories) {
    if (cat.templates.empty()) {
      throw CorpusError("category '" + cat.name + "' has no templates");
    }
    for (const auto& slot : cat.slots) {
      if (slot.canonical.empty() || slot.surface.empty() || has_reserved(slot.canonical) || has_reserved(slot.surface)) {
        throw CorpusError("category '" + cat.name + "': invalid attribute name '" + slot.canonical + "'");
      }
      if (slot.lexicon.empty()) {
        throw CorpusError("category '" + cat.name + "': slot '" + slot.canonical + "' has an empty lexicon");
      }
      for (const auto& v : slot.lexicon) {
        if (has_reserved(v) || word_count(v) == 0) {
          throw CorpusError("category '" + cat.name + "': invalid value '" + v + "'");
        }
      }
    }
    for (const auto& words : {cat.nouns, cat.fillers}) {
      for (const auto& w : words) {
        if (has_reserved(w) || word_count(w) == 0) {
          throw CorpusError("category '" + cat.name + "': invalid filler or noun '" + w + "'");
        }
      }
    }
    for (const auto& t : cat.templates) {
      std::size_t max_words = 0;
      for (const auto& e : t.elements) {
        switch (e.kind) {
          case TemplateElement::Kind::kSlot:
            if (e.slot < 0 || static_cast<std::size_t>(e.slot) >= cat.slots.size()) {
              throw CorpusError("category '" + cat.name + "': template references a missing slot");
            }
            max_words += phrase_length_range(cat.slots[static_cast<std::size_t>(e.slot)].lexicon).second;
            break;
          case TemplateElement::Kind::kFiller:
            if (cat.fillers.empty()) throw CorpusError("category '" + cat.name + "' has fillers but no filler words");
            max_words += phrase_length_range(cat.fillers).second;
            break;
          case TemplateElement::Kind::kNoun:
            if (cat.nouns.empty()) throw CorpusError("category '" + cat.name + "' has a noun but no nouns");
            max_words += phrase_length_range(cat.nouns).second;
            break;
        }
      }
      if (max_words < 2 || max_words > 12) {
        throw CorpusError("category '" + cat.name + "': template can yield " + std::to_string(max_words) +
                          " words, outside 2..12");
      }
    }
  }
}

Dataset generate_catalog(const CatalogGrammar& grammar, std::size_t n, std::uint64_t seed) {
  validate_grammar(grammar);
  if (n == 0) {
    throw CorpusError("generate_catalog: n must be at least 1");
  }
  Rng rng(seed);
  Dataset out;
  out.reserve(n);
  while (out.size() < n) {
    const auto& cat = grammar.categories[pick_weighted(grammar.categories, rng)];
    const auto& tmpl = cat.templates[pick_weighted(cat.templates, rng)];
    ProductExample ex;
    ex.category = cat.name;
    PairList pairs;
    for (const auto& e : tmpl.elements) {
      switch (e.kind) {
        case TemplateElement::Kind::kSlot: {
          const auto& slot = cat.slots[static_cast<std::size_t>(e.slot)];
          if (!rng.bernoulli(slot.inclusion)) break;
          AVPair pair;
          pair.attribute = grammar.synonym_noise ? slot.surface : slot.canonical;
          append_phrase(slot.lexicon[rng.below(slot.lexicon.size())], ex.words, &pair.value_indices);
          pairs.push_back(std::move(pair));
          break;
        }
        case TemplateElement::Kind::kFiller:
          if (rng.bernoulli(e.inclusion)) append_phrase(cat.fillers[rng.below(cat.fillers.size())], ex.words, nullptr);
          break;
        case TemplateElement::Kind::kNoun:
          if (rng.bernoulli(e.inclusion)) append_phrase(cat.nouns[rng.below(cat.nouns.size())], ex.words, nullptr);
          break;
      }
    }
    if (ex.words.size() < 2) continue;
    ex.observed_pairs = pairs;
    ex.full_pairs = std::move(pairs);
    validate_example(ex);
    out.push_back(std::move(ex));
  }
  return out;
}

double attribute_drop_propensity(const std::string& attribute) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const unsigned char c : attribute) h = (h ^ c) * 1099511628211ULL;
  return 0.5 + static_cast<double>(h % 1001) / 1000.0;
}

PartialLabelingResult partial_labeling(const Dataset& dataset, double target_coverage, std::uint64_t seed,
                                       DropoutMode mode) {
  if (!(target_coverage > 0.0 && target_coverage <= 1.0)) {
    throw CorpusError("partial_labeling: target coverage must be in (0, 1]");
  }
  // One uniform draw per (example, pair); a pair survives when its draw is at
  // least its drop probability, so coverage is monotone in the scale.
  Rng rng(seed);
  std::vector<std::vector<double>> draws(dataset.size());
  std::vector<std::vector<double>> propensity(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (!dataset[i].full_pairs) {
      throw CorpusError("partial_labeling: example " + std::to_string(i) + " has no full_pairs");
    }
    for (const auto& p : *dataset[i].full_pairs) {
      draws[i].push_back(rng.uniform());
      propensity[i].push_back(mode == DropoutMode::kPerAttribute ? attribute_drop_propensity(p.attribute) : 1.0);
    }
  }
  auto apply = [&](double scale, Dataset* target) {
    double ratio = 0.0;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      const auto& full = *dataset[i].full_pairs;
      PairList kept;
      for (std::size_t j = 0; j < full.size(); ++j) {
        if (draws[i][j] >= std::min(1.0, scale * propensity[i][j])) kept.push_back(full[j]);
      }
      ratio += covered_fraction(dataset[i].words, kept);
      if (target != nullptr) (*target)[i].observed_pairs = std::move(kept);
    }
    return dataset.empty() ? 0.0 : ratio / static_cast<double>(dataset.size());
  };

  double scale = 0.0;
  if (apply(0.0, nullptr) > target_coverage) {
    double lo = 0.0;
    double hi = mode == DropoutMode::kPerAttribute ? 2.0 : 1.0;
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (apply(mid, nullptr) > target_coverage) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    scale = std::abs(apply(lo, nullptr) - target_coverage) <= std::abs(apply(hi, nullptr) - target_coverage) ? lo : hi;
  }
  PartialLabelingResult result;
  result.dataset = dataset;
  result.drop_scale = scale;
  result.realized_coverage = apply(scale, &result.dataset);
  return result;
}

}  // namespace gentoc::corpus
