#pragma once

#include <unicode/uchar.h>
#include <unicode/utf8.h>

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "vcrn/corpus/video.hpp"

namespace vcrn::corpus {

inline constexpr std::int32_t kPadId = 0;
inline constexpr std::int32_t kBosId = 1;
inline constexpr std::int32_t kEosId = 2;
inline constexpr std::int32_t kUnkId = 3;
inline constexpr std::int32_t kReservedCount = 4;

/// Caption truncation length used for MSVD/MSR-VTT.
inline constexpr std::size_t kDefaultMaxWords = 26;

namespace detail {

inline bool is_punctuation(UChar32 c) {
  switch (u_charType(c)) {
    case U_DASH_PUNCTUATION:
    case U_START_PUNCTUATION:
    case U_END_PUNCTUATION:
    case U_CONNECTOR_PUNCTUATION:
    case U_OTHER_PUNCTUATION:
    case U_INITIAL_PUNCTUATION:
    case U_FINAL_PUNCTUATION:
      return true;
    default:
      return false;
  }
}

inline void append_utf8(std::string& out, UChar32 c) {
  char buf[U8_MAX_LENGTH];
  int32_t len = 0;
  UBool error = false;
  U8_APPEND(buf, len, U8_MAX_LENGTH, c, error);
  if (!error) out.append(buf, static_cast<std::size_t>(len));
}

}  // namespace detail

/// Punctuation (Unicode P*) removed, lower-cased, split on whitespace.
/// Digits and symbols are kept. Invalid UTF-8 bytes are dropped.
inline std::vector<std::string> split_words(std::string_view raw) {
  std::vector<std::string> words;
  std::string current;
  const auto* s = reinterpret_cast<const uint8_t*>(raw.data());
  const auto n = static_cast<int32_t>(raw.size());
  int32_t i = 0;
  while (i < n) {
    UChar32 c;
    U8_NEXT(s, i, n, c);
    if (c < 0) continue;
    if (u_isUWhiteSpace(c)) {
      if (!current.empty()) words.push_back(std::move(current));
      current.clear();
      continue;
    }
    if (detail::is_punctuation(c)) continue;
    detail::append_utf8(current, u_tolower(c));
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

/// Words of a caption after normalisation, truncated to `max_words`.
inline std::vector<std::string> tokenize_caption(std::string_view raw,
                                                 std::size_t max_words = kDefaultMaxWords) {
  auto words = split_words(raw);
  if (words.size() > max_words) words.resize(max_words);
  return words;
}

class Vocabulary {
 public:
  Vocabulary() {
    for (const char* t : {"<pad>", "<bos>", "<eos>", "<unk>"}) push(t);
  }

  /// Reserved tokens followed by `tokens` in the given order.
  static Vocabulary from_tokens(const std::vector<std::string>& tokens) {
    Vocabulary v;
    for (const auto& t : tokens) {
      if (v.index_.count(t)) throw ConfigError("duplicate vocabulary token: " + t);
      v.push(t);
    }
    return v;
  }

  /// Id of a word. Unknown words and the reserved spellings map to unk.
  std::int32_t id(const std::string& token) const {
    auto it = index_.find(token);
    return it == index_.end() || it->second < kReservedCount ? kUnkId : it->second;
  }
  bool contains(const std::string& token) const { return index_.count(token) > 0; }
  const std::string& token(std::int32_t id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
      throw ContractError("token id " + std::to_string(id) + " outside vocabulary of size " +
                          std::to_string(tokens_.size()));
    }
    return tokens_[static_cast<std::size_t>(id)];
  }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  /// [bos, ids..., eos] for already-normalised words.
  std::vector<std::int32_t> encode(const std::vector<std::string>& words) const {
    std::vector<std::int32_t> ids{kBosId};
    for (const auto& w : words) ids.push_back(id(w));
    ids.push_back(kEosId);
    return ids;
  }

  /// Content words between bos and eos, joined by single spaces. Stops at eos.
  std::string decode(const std::vector<std::int32_t>& ids) const {
    std::string out;
    for (auto t : ids) {
      if (t == kBosId || t == kPadId) continue;
      if (t == kEosId) break;
      if (!out.empty()) out += ' ';
      out += token(t);
    }
    return out;
  }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_;
  }

 private:
  void push(const std::string& t) {
    index_.emplace(t, static_cast<std::int32_t>(tokens_.size()));
    tokens_.push_back(t);
  }

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::int32_t> index_;
};

inline Caption encode_caption(const Vocabulary& vocab, const CaptionRecord& record,
                              std::size_t max_words = kDefaultMaxWords) {
  return Caption{record.video_id, vocab.encode(tokenize_caption(record.text, max_words))};
}

/// Words seen more than `min_occurrences` times, in lexicographic order after
/// the reserved ids. Everything else maps to unk.
inline Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& tokenized,
                                   std::size_t min_occurrences = 2) {
  std::map<std::string, std::size_t> counts;
  for (const auto& sentence : tokenized)
    for (const auto& w : sentence) ++counts[w];
  const Vocabulary reserved;
  std::vector<std::string> kept;
  for (const auto& [w, c] : counts)
    if (c > min_occurrences && !reserved.contains(w)) kept.push_back(w);
  return Vocabulary::from_tokens(kept);
}

}  // namespace vcrn::corpus
