#include "gentoc/text/formats.hpp"

#include <algorithm>
#include <cctype>

namespace gentoc::text {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::vector<std::string_view> split_on(std::string_view s, char delim) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == delim) {
      parts.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return parts;
}

std::string value_string(const AVPair& pair, const std::vector<std::string>& words) {
  std::string out;
  for (const int i : pair.value_indices) {
    if (i < 0 || static_cast<std::size_t>(i) >= words.size()) {
      throw TextError("value index " + std::to_string(i) + " outside a " + std::to_string(words.size()) +
                      "-word name");
    }
    if (!out.empty()) out.push_back(' ');
    out += words[static_cast<std::size_t>(i)];
  }
  return out;
}

}  // namespace

std::size_t MarkerMask::popcount() const { return static_cast<std::size_t>(std::count(flags.begin(), flags.end(), true)); }

MarkerMask build_marker_mask(const TokenSeq& seq, const PairList& pairs) {
  MarkerMask mask{std::vector<bool>(seq.size(), false)};
  for (const auto& p : pairs) {
    for (const int i : p.value_indices) {
      if (i < 0 || static_cast<std::size_t>(i) >= seq.size()) {
        throw TextError("marker mask: value index " + std::to_string(i) + " outside a " +
                        std::to_string(seq.size()) + "-word name");
      }
      mask.flags[static_cast<std::size_t>(i)] = true;
    }
  }
  return mask;
}

MarkerMask all_true_mask(const TokenSeq& seq) { return MarkerMask{std::vector<bool>(seq.size(), true)}; }

MarkerMask all_false_mask(const TokenSeq& seq) { return MarkerMask{std::vector<bool>(seq.size(), false)}; }

PairList order_by_occurrence(const PairList& pairs) {
  PairList sorted = pairs;
  std::stable_sort(sorted.begin(), sorted.end(), [](const AVPair& a, const AVPair& b) {
    const int sa = a.value_indices.empty() ? 0 : a.value_indices.front();
    const int sb = b.value_indices.empty() ? 0 : b.value_indices.front();
    return sa < sb;
  });
  return sorted;
}

std::string build_genae_target(const PairList& pairs) {
  std::string out;
  for (const auto& p : order_by_occurrence(pairs)) {
    if (!out.empty()) out += kPairDelimiter;
    out += p.attribute;
  }
  return out;
}

std::string build_genave_target(const PairList& pairs, const std::vector<std::string>& words) {
  std::string out;
  for (const auto& p : order_by_occurrence(pairs)) {
    if (!out.empty()) out += kPairDelimiter;
    out += p.attribute;
    out += kValueSeparator;
    out += value_string(p, words);
  }
  return out;
}

std::string build_rescorer_target(const AVPair& pair, const std::vector<std::string>& words) {
  return pair.attribute + ": " + value_string(pair, words);
}

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

std::string normalize_attribute(std::string_view s) {
  std::string out;
  bool pending_space = false;
  for (const char ch : s) {
    if (is_space(ch)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(ch))));
  }
  return out;
}

ParsedAttributes parse_genae_output(std::string_view output) {
  ParsedAttributes parsed;
  if (trim(output).empty()) {
    return parsed;
  }
  for (const auto part : split_on(output, ',')) {
    auto attribute = trim(part);
    if (attribute.empty()) {
      ++parsed.malformed;
      continue;
    }
    parsed.attributes.push_back(std::move(attribute));
  }
  return parsed;
}

ParsedPairs parse_genave_output(std::string_view output) {
  ParsedPairs parsed;
  if (trim(output).empty()) {
    return parsed;
  }
  for (const auto part : split_on(output, ',')) {
    const auto colon = part.find(':');
    if (colon == std::string_view::npos) {
      ++parsed.malformed;
      continue;
    }
    auto attribute = trim(part.substr(0, colon));
    if (attribute.empty()) {
      ++parsed.malformed;
      continue;
    }
    parsed.pairs.emplace_back(std::move(attribute), trim(part.substr(colon + 1)));
  }
  return parsed;
}

std::vector<std::string> target_tokens(std::string_view target) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  };
  for (const char ch : target) {
    if (is_space(ch)) {
      flush();
    } else if (ch == ',' || ch == ':') {
      flush();
      tokens.emplace_back(1, ch);
    } else {
      current.push_back(ch);
    }
  }
  flush();
  return tokens;
}

std::string join_target_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  bool after_delimiter = true;
  for (const auto& t : tokens) {
    const bool delimiter = t == kPairDelimiter || t == kValueSeparator;
    if (!delimiter && !after_delimiter) out.push_back(' ');
    out += t;
    after_delimiter = delimiter;
  }
  return out;
}

TocveInput build_tocve_input(std::string_view attribute, const TokenSeq& seq, const Vocab& vocab) {
  const auto attribute_words = target_tokens(attribute);
  if (attribute_words.empty()) {
    throw TextError("empty attribute");
  }
  TocveInput input;
  for (const auto& w : attribute_words) {
    input.tokens.words.push_back(w);
    input.tokens.ids.push_back(vocab.id(w));
  }
  input.tokens.words.emplace_back(kSep);
  input.tokens.ids.push_back(Vocab::kSepId);
  input.offset = static_cast<int>(input.tokens.words.size());
  input.tokens.words.insert(input.tokens.words.end(), seq.words.begin(), seq.words.end());
  input.tokens.ids.insert(input.tokens.ids.end(), seq.ids.begin(), seq.ids.end());
  return input;
}

}  // namespace gentoc::text
