#include "gentoc/corpus/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <json.hpp>

#include "gentoc/text/formats.hpp"
#include "gentoc/text/vocab.hpp"

namespace gentoc::corpus {

namespace {

using nlohmann::json;

void validate_pairs(const PairList& pairs, std::size_t length, const char* which) {
  std::vector<bool> claimed(length, false);
  for (const auto& p : pairs) {
    if (p.attribute.empty()) {
      throw CorpusError(std::string(which) + ": empty attribute");
    }
    if (p.value_indices.empty()) {
      throw CorpusError(std::string(which) + ": attribute '" + p.attribute + "' has no value words");
    }
    int prev = -1;
    for (const int i : p.value_indices) {
      if (i < 0 || static_cast<std::size_t>(i) >= length) {
        throw CorpusError(std::string(which) + ": value index " + std::to_string(i) + " outside a " +
                          std::to_string(length) + "-word name");
      }
      if (i <= prev) {
        throw CorpusError(std::string(which) + ": value indices of '" + p.attribute + "' not strictly increasing");
      }
      if (claimed[static_cast<std::size_t>(i)]) {
        throw CorpusError(std::string(which) + ": word " + std::to_string(i) + " belongs to two pairs");
      }
      claimed[static_cast<std::size_t>(i)] = true;
      prev = i;
    }
  }
}

json pairs_to_json(const PairList& pairs) {
  json arr = json::array();
  for (const auto& p : pairs) {
    arr.push_back({{"attribute", p.attribute}, {"value_indices", p.value_indices}});
  }
  return arr;
}

PairList pairs_from_json(const json& arr) {
  if (!arr.is_array()) {
    throw CorpusError("pair list is not an array");
  }
  PairList pairs;
  for (const auto& item : arr) {
    pairs.push_back(AVPair{item.at("attribute").get<std::string>(), item.at("value_indices").get<std::vector<int>>()});
  }
  return pairs;
}

}  // namespace

std::string ProductExample::name() const {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out.push_back(' ');
    out += w;
  }
  return out;
}

void validate_example(const ProductExample& example) {
  if (example.words.empty()) {
    throw CorpusError("example has an empty name");
  }
  validate_pairs(example.observed_pairs, example.words.size(), "observed_pairs");
  if (example.full_pairs) {
    validate_pairs(*example.full_pairs, example.words.size(), "full_pairs");
    if (example.retagged) return;
    for (const auto& p : example.observed_pairs) {
      if (std::find(example.full_pairs->begin(), example.full_pairs->end(), p) == example.full_pairs->end()) {
        throw CorpusError("observed pair '" + p.attribute + "' is not in full_pairs");
      }
    }
  }
}

double covered_fraction(const std::vector<std::string>& words, const PairList& pairs) {
  if (words.empty()) return 0.0;
  std::vector<bool> covered(words.size(), false);
  for (const auto& p : pairs) {
    for (const int i : p.value_indices) {
      if (i >= 0 && static_cast<std::size_t>(i) < words.size()) covered[static_cast<std::size_t>(i)] = true;
    }
  }
  return static_cast<double>(std::count(covered.begin(), covered.end(), true)) / static_cast<double>(words.size());
}

DatasetStats stats(const Dataset& dataset, PairSource source) {
  if (dataset.empty()) {
    throw CorpusError("stats: empty dataset");
  }
  DatasetStats s;
  s.examples = dataset.size();
  std::set<std::string> attributes;
  double ratio_sum = 0.0;
  double length_sum = 0.0;
  for (const auto& ex : dataset) {
    const PairList& pairs = (source == PairSource::kFull && ex.full_pairs) ? *ex.full_pairs : ex.observed_pairs;
    ratio_sum += covered_fraction(ex.words, pairs);
    length_sum += static_cast<double>(ex.words.size());
    s.pair_count += pairs.size();
    for (const auto& p : pairs) attributes.insert(p.attribute);
  }
  s.tagged_ratio = ratio_sum / static_cast<double>(dataset.size());
  s.mean_name_length = length_sum / static_cast<double>(dataset.size());
  s.attribute_count = attributes.size();
  return s;
}

void save_jsonl(const Dataset& dataset, const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw CorpusError("cannot write " + path.string());
  }
  for (const auto& ex : dataset) {
    json rec;
    rec["name"] = ex.name();
    rec["category"] = ex.category;
    rec["observed_pairs"] = pairs_to_json(ex.observed_pairs);
    if (ex.full_pairs) {
      rec["full_pairs"] = pairs_to_json(*ex.full_pairs);
    }
    if (ex.retagged) rec["retagged"] = true;
    out << rec.dump() << '\n';
  }
}

Dataset load_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw CorpusError("cannot open " + path.string());
  }
  Dataset dataset;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (text::trim(line).empty()) continue;
    try {
      const auto rec = json::parse(line);
      ProductExample ex;
      ex.words = text::split_words(rec.at("name").get<std::string>());
      ex.category = rec.value("category", "");
      ex.observed_pairs = pairs_from_json(rec.at("observed_pairs"));
      if (rec.contains("full_pairs") && !rec.at("full_pairs").is_null()) {
        ex.full_pairs = pairs_from_json(rec.at("full_pairs"));
      }
      ex.retagged = rec.value("retagged", false);
      validate_example(ex);
      dataset.push_back(std::move(ex));
    } catch (const std::exception& e) {
      throw CorpusError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return dataset;
}

}  // namespace gentoc::corpus
