#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gentoc/corpus/av_pair.hpp"
#include "gentoc/text/vocab.hpp"

namespace gentoc::text {

/// One flag per word; true marks a word whose encoder state receives the
/// marker embedding.
struct MarkerMask {
  std::vector<bool> flags;

  std::size_t size() const { return flags.size(); }
  std::size_t popcount() const;
};

/// Marks every word covered by some pair's value.
MarkerMask build_marker_mask(const TokenSeq& seq, const PairList& pairs);
MarkerMask all_true_mask(const TokenSeq& seq);
MarkerMask all_false_mask(const TokenSeq& seq);

/// Pairs sorted by first value index (stable, so ties keep input order).
PairList order_by_occurrence(const PairList& pairs);

/// "a1,a2,..." in order of first value occurrence.
std::string build_genae_target(const PairList& pairs);
/// "a1:v1,a2:v2,..." where vi are the value words joined by spaces.
std::string build_genave_target(const PairList& pairs, const std::vector<std::string>& words);
/// "attribute: value words" (one pair), the rescoring target.
std::string build_rescorer_target(const AVPair& pair, const std::vector<std::string>& words);

struct ParsedAttributes {
  std::vector<std::string> attributes;
  int malformed = 0;
};

struct ParsedPairs {
  std::vector<std::pair<std::string, std::string>> pairs;  // (attribute, value string)
  int malformed = 0;
};

ParsedAttributes parse_genae_output(std::string_view output);
ParsedPairs parse_genave_output(std::string_view output);

/// Splits a target string into decoder tokens: whitespace-separated words,
/// with "," and ":" always standalone.
std::vector<std::string> target_tokens(std::string_view target);
/// Inverse of target_tokens for well-formed sequences: words joined by single
/// spaces, delimiters attached without spaces.
std::string join_target_tokens(const std::vector<std::string>& tokens);

struct TocveInput {
  TokenSeq tokens;  // attribute words ++ <sep> ++ product words
  int offset = 0;   // index of the first product word
};

/// Throws TextError on an empty attribute.
TocveInput build_tocve_input(std::string_view attribute, const TokenSeq& seq, const Vocab& vocab);

std::string trim(std::string_view s);
/// Lowercase, trimmed, single-spaced.
std::string normalize_attribute(std::string_view s);

}  // namespace gentoc::text
