#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace xsense {

enum class TokenKind { kWord, kCls, kSep };

// A token with its half-open byte range [char_start, char_end) in the source
// text. Synthetic CLS/SEP tokens carry an empty span.
struct Token {
  std::string surface;
  std::size_t char_start = 0;
  std::size_t char_end = 0;
  TokenKind kind = TokenKind::kWord;

  bool synthetic() const { return kind != TokenKind::kWord; }
  bool operator==(const Token&) const = default;
};

struct TokenSequence {
  std::vector<Token> tokens;

  std::size_t size() const { return tokens.size(); }
  bool empty() const { return tokens.empty(); }
  const Token& operator[](std::size_t i) const { return tokens[i]; }
  bool operator==(const TokenSequence&) const = default;

  // Surfaces of the word tokens joined by single spaces.
  std::string text() const;
};

// Inclusive token range [start, end].
struct TokenSpan {
  std::size_t start = 0;
  std::size_t end = 0;

  std::size_t length() const { return end - start + 1; }
  bool overlaps(const TokenSpan& o) const { return start <= o.end && o.start <= end; }
  auto operator<=>(const TokenSpan&) const = default;
};

Token make_cls();
Token make_sep();

bool is_ascii_punct(char c);

// Whitespace split, then leading and trailing ASCII punctuation characters are
// detached one token per character. Case is preserved. Offsets are relative to
// `text` plus `offset`.
TokenSequence tokenize(std::string_view text, std::size_t offset = 0);

// Sentence boundaries fall after a '.', '!' or '?' token that is followed by
// whitespace or the end of the text.
std::vector<TokenSequence> split_sentences(const TokenSequence& tokens, std::string_view text);

// Lowercase, trim, collapse internal whitespace to single spaces.
std::string normalize_phrase(std::string_view phrase);

std::string to_lower(std::string_view s);

// Splits on runs of ASCII whitespace.
std::vector<std::string> split_words(std::string_view s);

// Word <-> id table with a fixed prefix of special symbols.
class Vocabulary {
 public:
  Vocabulary() = default;
  Vocabulary(std::vector<std::string> specials, const std::vector<std::string>& words);

  // Rebuilds a table whose ids are the positions in `ordered`.
  static Vocabulary from_ordered(std::vector<std::string> ordered);

  std::size_t size() const { return words_.size(); }
  const std::string& word(std::size_t id) const { return words_.at(id); }
  std::optional<std::size_t> find(std::string_view word) const;
  // Falls back to `unknown_id` for absent words.
  std::size_t id_or(std::string_view word, std::size_t unknown_id) const;
  const std::vector<std::string>& words() const { return words_; }

  bool operator==(const Vocabulary& o) const { return words_ == o.words_; }

 private:
  std::vector<std::string> words_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

}  // namespace xsense
