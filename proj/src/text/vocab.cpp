#include "gentoc/text/vocab.hpp"

#include <cctype>
#include <fstream>

namespace gentoc::text {

Vocab::Vocab() {
  for (const auto t : {kPad, kUnk, kBos, kEos, kSep, kPairDelimiter, kValueSeparator}) {
    add(t);
  }
}

int Vocab::add(std::string_view token) {
  if (auto it = ids_.find(std::string(token)); it != ids_.end()) {
    return it->second;
  }
  const int id = size();
  tokens_.emplace_back(token);
  ids_.emplace(tokens_.back(), id);
  return id;
}

int Vocab::id(std::string_view token) const {
  const auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnkId : it->second;
}

bool Vocab::contains(std::string_view token) const { return ids_.count(std::string(token)) != 0; }

const std::string& Vocab::token(int id) const {
  if (id < 0 || id >= size()) {
    throw TextError("vocab: id " + std::to_string(id) + " out of range");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::uint64_t Vocab::fingerprint() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& t : tokens_) {
    for (const unsigned char c : t) {
      h = (h ^ c) * 1099511628211ULL;
    }
    h = (h ^ 0x0A) * 1099511628211ULL;
  }
  return h;
}

void Vocab::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw TextError("cannot write vocabulary " + path.string());
  }
  for (const auto& t : tokens_) {
    out << t << '\n';
  }
}

Vocab Vocab::from_tokens(const std::vector<std::string>& tokens) {
  Vocab v;
  if (tokens.size() < static_cast<std::size_t>(kReservedCount)) {
    throw TextError("vocabulary is missing reserved tokens");
  }
  for (int i = 0; i < kReservedCount; ++i) {
    if (tokens[static_cast<std::size_t>(i)] != v.tokens_[static_cast<std::size_t>(i)]) {
      throw TextError("vocabulary line " + std::to_string(i + 1) + ": expected reserved token '" +
                      v.tokens_[static_cast<std::size_t>(i)] + "'");
    }
  }
  for (std::size_t i = kReservedCount; i < tokens.size(); ++i) {
    if (v.contains(tokens[i])) {
      throw TextError("vocabulary token '" + tokens[i] + "' appears twice");
    }
    v.add(tokens[i]);
  }
  return v;
}

Vocab Vocab::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw TextError("cannot open vocabulary " + path.string());
  }
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    tokens.push_back(line);
  }
  return from_tokens(tokens);
}

std::vector<std::string> split_words(std::string_view raw) {
  std::vector<std::string> words;
  std::string current;
  for (const char ch : raw) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      if (!current.empty()) {
        words.push_back(std::move(current));
        current.clear();
      }
    } else {
      current.push_back(static_cast<char>(std::tolower(c)));
    }
  }
  if (!current.empty()) {
    words.push_back(std::move(current));
  }
  if (words.empty()) {
    throw TextError("empty product name");
  }
  return words;
}

TokenSeq encode(const std::vector<std::string>& words, const Vocab& vocab) {
  TokenSeq seq;
  seq.words = words;
  seq.ids.reserve(words.size());
  for (const auto& w : words) {
    seq.ids.push_back(vocab.id(w));
  }
  return seq;
}

TokenSeq tokenize(std::string_view raw, const Vocab& vocab) { return encode(split_words(raw), vocab); }

}  // namespace gentoc::text
