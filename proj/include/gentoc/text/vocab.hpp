#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace gentoc::text {

class TextError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr std::string_view kPad = "<pad>";
inline constexpr std::string_view kUnk = "<unk>";
inline constexpr std::string_view kBos = "<bos>";
inline constexpr std::string_view kEos = "<eos>";
inline constexpr std::string_view kSep = "<sep>";
inline constexpr std::string_view kPairDelimiter = ",";
inline constexpr std::string_view kValueSeparator = ":";

/// Dense token <-> id bijection. Ids 0..6 are the reserved tokens in the
/// order pad, unk, bos, eos, sep, ",", ":".
class Vocab {
 public:
  static constexpr int kPadId = 0;
  static constexpr int kUnkId = 1;
  static constexpr int kBosId = 2;
  static constexpr int kEosId = 3;
  static constexpr int kSepId = 4;
  static constexpr int kPairDelimiterId = 5;
  static constexpr int kValueSeparatorId = 6;
  static constexpr int kReservedCount = 7;

  Vocab();

  /// Returns the id of `token`, inserting it if new.
  int add(std::string_view token);
  /// Id of `token`, or the unk id.
  int id(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token(int id) const;
  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  /// FNV-1a over the tokens in id order.
  std::uint64_t fingerprint() const;

  /// Newline-delimited, line number == id.
  void save(const std::filesystem::path& path) const;
  static Vocab load(const std::filesystem::path& path);
  static Vocab from_tokens(const std::vector<std::string>& tokens);

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

/// Word strings with their ids, 1:1.
struct TokenSeq {
  std::vector<std::string> words;
  std::vector<int> ids;

  std::size_t size() const { return words.size(); }
};

/// Lowercases and splits on whitespace. Throws "empty product name" when no
/// word remains.
std::vector<std::string> split_words(std::string_view raw);

TokenSeq tokenize(std::string_view raw, const Vocab& vocab);
TokenSeq encode(const std::vector<std::string>& words, const Vocab& vocab);

}  // namespace gentoc::text
