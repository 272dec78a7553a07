#include "xsense/text.hpp"

#include <cctype>
#include <set>

namespace xsense {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

bool is_sentence_final(const Token& t) {
  return t.kind == TokenKind::kWord && t.surface.size() == 1 &&
         (t.surface[0] == '.' || t.surface[0] == '!' || t.surface[0] == '?');
}

}  // namespace

std::string TokenSequence::text() const {
  std::string out;
  for (const Token& t : tokens) {
    if (t.synthetic()) continue;
    if (!out.empty()) out += ' ';
    out += t.surface;
  }
  return out;
}

Token make_cls() { return Token{"[CLS]", 0, 0, TokenKind::kCls}; }
Token make_sep() { return Token{"[SEP]", 0, 0, TokenKind::kSep}; }

bool is_ascii_punct(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u < 128 && std::ispunct(u) != 0;
}

TokenSequence tokenize(std::string_view text, std::size_t offset) {
  TokenSequence out;
  std::size_t i = 0;
  const std::size_t n = text.size();
  auto emit = [&](std::size_t b, std::size_t e) {
    out.tokens.push_back(Token{std::string(text.substr(b, e - b)), offset + b, offset + e,
                               TokenKind::kWord});
  };
  while (i < n) {
    while (i < n && is_space(text[i])) ++i;
    if (i >= n) break;
    std::size_t j = i;
    while (j < n && !is_space(text[j])) ++j;
    // Chunk [i, j): peel punctuation off both ends.
    std::size_t b = i;
    std::size_t e = j;
    while (b < e && is_ascii_punct(text[b])) {
      emit(b, b + 1);
      ++b;
    }
    std::size_t core_end = e;
    while (core_end > b && is_ascii_punct(text[core_end - 1])) --core_end;
    if (core_end > b) emit(b, core_end);
    for (std::size_t k = core_end; k < e; ++k) emit(k, k + 1);
    i = j;
  }
  return out;
}

std::vector<TokenSequence> split_sentences(const TokenSequence& tokens, std::string_view text) {
  std::vector<TokenSequence> sentences;
  TokenSequence current;
  for (const Token& t : tokens.tokens) {
    current.tokens.push_back(t);
    if (!is_sentence_final(t)) continue;
    const bool at_end = t.char_end >= text.size();
    const bool before_space = !at_end && is_space(text[t.char_end]);
    if (at_end || before_space) {
      sentences.push_back(std::move(current));
      current = TokenSequence{};
    }
  }
  if (!current.empty()) sentences.push_back(std::move(current));
  return sentences;
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::vector<std::string> split_words(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && is_space(s[i])) ++i;
    std::size_t j = i;
    while (j < s.size() && !is_space(s[j])) ++j;
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string normalize_phrase(std::string_view phrase) {
  std::string out;
  for (const std::string& w : split_words(phrase)) {
    if (!out.empty()) out += ' ';
    out += to_lower(w);
  }
  return out;
}

Vocabulary::Vocabulary(std::vector<std::string> specials, const std::vector<std::string>& words)
    : words_(std::move(specials)) {
  for (std::size_t i = 0; i < words_.size(); ++i) index_.emplace(words_[i], i);
  std::set<std::string> sorted(words.begin(), words.end());
  for (const std::string& w : sorted) {
    if (index_.count(w)) continue;
    index_.emplace(w, words_.size());
    words_.push_back(w);
  }
}

Vocabulary Vocabulary::from_ordered(std::vector<std::string> ordered) {
  Vocabulary v;
  v.words_ = std::move(ordered);
  for (std::size_t i = 0; i < v.words_.size(); ++i) v.index_.emplace(v.words_[i], i);
  return v;
}

std::optional<std::size_t> Vocabulary::find(std::string_view word) const {
  auto it = index_.find(word);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t Vocabulary::id_or(std::string_view word, std::size_t unknown_id) const {
  return find(word).value_or(unknown_id);
}

}  // namespace xsense
