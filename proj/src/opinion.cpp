#include "xsense/opinion.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <fstream>
#include <sstream>
#include <tuple>

#include "json.hpp"
#include "xsense/error.hpp"

namespace xsense {

namespace {

enum class WordClass { kOther, kAdjective, kAspect };

struct Run {
  WordClass cls;
  TokenSpan span;
};

bool is_copula(const std::string& lower) {
  return lower == "is" || lower == "was" || lower == "are" || lower == "were";
}

std::vector<Run> class_runs(const TokenSequence& sentence, const Lexicon& lexicon) {
  std::vector<Run> runs;
  for (std::size_t i = 0; i < sentence.size(); ++i) {
    WordClass cls = WordClass::kOther;
    if (!sentence[i].synthetic()) {
      const std::string w = to_lower(sentence[i].surface);
      if (lexicon.aspect_nouns.count(w)) {
        cls = WordClass::kAspect;
      } else if (lexicon.adjectives.count(w)) {
        cls = WordClass::kAdjective;
      }
    }
    if (!runs.empty() && runs.back().cls == cls && runs.back().span.end + 1 == i) {
      runs.back().span.end = i;
    } else {
      runs.push_back(Run{cls, TokenSpan{i, i}});
    }
  }
  return runs;
}

bool is_inside(Tag t) { return t == Tag::kIAsp || t == Tag::kIMod; }
bool is_aspect(Tag t) { return t == Tag::kBAsp || t == Tag::kIAsp; }

Tag begin_of(Tag inside) { return inside == Tag::kIAsp ? Tag::kBAsp : Tag::kBMod; }

std::set<std::string> lowered(const nlohmann::json& arr, const char* key) {
  if (!arr.is_array()) throw DataError(fmt::format("lexicon key {} must be an array", key));
  std::set<std::string> out;
  for (const auto& v : arr) out.insert(normalize_phrase(v.get<std::string>()));
  return out;
}

}  // namespace

Lexicon parse_lexicon(const std::string& json_text) {
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(fmt::format("malformed lexicon: {}", e.what()));
  }
  for (const char* key : {"adjectives", "aspect_nouns"}) {
    if (!root.contains(key)) throw DataError(fmt::format("lexicon is missing key {}", key));
  }
  Lexicon lex{lowered(root.at("adjectives"), "adjectives"), lowered(root.at("aspect_nouns"), "aspect_nouns")};
  if (lex.adjectives.empty() || lex.aspect_nouns.empty()) {
    throw DataError("lexicon needs at least one adjective and one aspect noun");
  }
  return lex;
}

Lexicon load_lexicon(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open {}", path.string()));
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_lexicon(buffer.str());
}

std::string span_phrase(const TokenSequence& sentence, const TokenSpan& span) {
  std::string out;
  for (std::size_t i = span.start; i <= span.end; ++i) {
    if (!out.empty()) out += ' ';
    out += to_lower(sentence[i].surface);
  }
  return out;
}

std::vector<OpinionTuple> extract_rule_based(const TokenSequence& sentence, const Lexicon& lexicon,
                                             std::size_t sentence_index) {
  if (lexicon.adjectives.empty() || lexicon.aspect_nouns.empty()) {
    throw ConfigError("rule-based extraction needs a lexicon with adjectives and aspect nouns");
  }
  const std::vector<Run> runs = class_runs(sentence, lexicon);
  std::vector<OpinionTuple> out;
  auto emit = [&](const TokenSpan& mod, const TokenSpan& asp) {
    out.push_back(OpinionTuple{span_phrase(sentence, mod), span_phrase(sentence, asp), sentence_index, mod, asp});
  };
  for (std::size_t k = 0; k < runs.size(); ++k) {
    if (runs[k].cls != WordClass::kAspect) continue;
    const TokenSpan asp = runs[k].span;
    // "very clean bathroom"
    if (k > 0 && runs[k - 1].cls == WordClass::kAdjective) emit(runs[k - 1].span, asp);
    // "bathroom is very clean"
    if (k + 2 < runs.size() && runs[k + 1].cls == WordClass::kOther && runs[k + 1].span.length() == 1 &&
        is_copula(to_lower(sentence[runs[k + 1].span.start].surface)) &&
        runs[k + 2].cls == WordClass::kAdjective) {
      emit(runs[k + 2].span, asp);
    }
  }
  return out;
}

const char* tag_name(Tag t) {
  switch (t) {
    case Tag::kO: return "O";
    case Tag::kBAsp: return "B-ASP";
    case Tag::kIAsp: return "I-ASP";
    case Tag::kBMod: return "B-MOD";
    case Tag::kIMod: return "I-MOD";
  }
  return "O";
}

Tag parse_tag(std::string_view name) {
  for (std::size_t i = 0; i < kNumTags; ++i) {
    const Tag t = static_cast<Tag>(i);
    if (name == tag_name(t)) return t;
  }
  throw DataError(fmt::format("unknown tag '{}'", name));
}

bool transition_allowed(Tag prev, Tag next) {
  if (next == Tag::kIAsp) return prev == Tag::kBAsp || prev == Tag::kIAsp;
  if (next == Tag::kIMod) return prev == Tag::kBMod || prev == Tag::kIMod;
  return true;
}

bool transition_allowed_from_start(Tag first) { return !is_inside(first); }

bool well_formed(const TagSequence& tags) {
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const bool ok = i == 0 ? transition_allowed_from_start(tags[i]) : transition_allowed(tags[i - 1], tags[i]);
    if (!ok) return false;
  }
  return true;
}

TagSequence repair(TagSequence tags) {
  for (std::size_t i = 0; i < tags.size(); ++i) {
    const bool ok = i == 0 ? transition_allowed_from_start(tags[i]) : transition_allowed(tags[i - 1], tags[i]);
    if (!ok) tags[i] = begin_of(tags[i]);
  }
  return tags;
}

LabeledSpans spans_from_tags(const TagSequence& raw) {
  const TagSequence tags = repair(raw);
  LabeledSpans out;
  for (std::size_t i = 0; i < tags.size(); ++i) {
    if (tags[i] == Tag::kO || is_inside(tags[i])) continue;
    std::size_t j = i;
    const Tag inside = tags[i] == Tag::kBAsp ? Tag::kIAsp : Tag::kIMod;
    while (j + 1 < tags.size() && tags[j + 1] == inside) ++j;
    (is_aspect(tags[i]) ? out.aspects : out.modifiers).push_back(TokenSpan{i, j});
  }
  return out;
}

TagSequence tags_from_tuples(std::size_t n_tokens, const std::vector<OpinionTuple>& tuples) {
  TagSequence tags(n_tokens, Tag::kO);
  auto mark = [&](const TokenSpan& s, Tag b, Tag in) {
    if (s.end >= n_tokens) throw DataError("tuple span outside the sentence");
    tags[s.start] = b;
    for (std::size_t i = s.start + 1; i <= s.end; ++i) tags[i] = in;
  };
  for (const OpinionTuple& t : tuples) {
    mark(t.aspect_span, Tag::kBAsp, Tag::kIAsp);
    mark(t.modifier_span, Tag::kBMod, Tag::kIMod);
  }
  return tags;
}

std::vector<OpinionTuple> pair(const TagSequence& tagged, const TokenSequence& sentence,
                               std::size_t sentence_index) {
  if (tagged.size() != sentence.size()) {
    throw DataError(fmt::format("tag count {} does not match token count {}", tagged.size(), sentence.size()));
  }
  const LabeledSpans spans = spans_from_tags(tagged);
  // (distance, modifier-follows-aspect, aspect index, modifier index)
  std::vector<std::tuple<std::size_t, int, std::size_t, std::size_t>> candidates;
  for (std::size_t a = 0; a < spans.aspects.size(); ++a) {
    for (std::size_t m = 0; m < spans.modifiers.size(); ++m) {
      const TokenSpan& as = spans.aspects[a];
      const TokenSpan& ms = spans.modifiers[m];
      const bool before = ms.end < as.start;
      const std::size_t distance = before ? as.start - ms.end : ms.start - as.end;
      candidates.emplace_back(distance, before ? 0 : 1, a, m);
    }
  }
  std::sort(candidates.begin(), candidates.end());
  std::vector<bool> aspect_used(spans.aspects.size(), false);
  std::vector<bool> modifier_used(spans.modifiers.size(), false);
  std::vector<OpinionTuple> out;
  for (const auto& [distance, follows, a, m] : candidates) {
    if (aspect_used[a] || modifier_used[m]) continue;
    aspect_used[a] = modifier_used[m] = true;
    const TokenSpan& as = spans.aspects[a];
    const TokenSpan& ms = spans.modifiers[m];
    out.push_back(OpinionTuple{span_phrase(sentence, ms), span_phrase(sentence, as), sentence_index, ms, as});
  }
  std::sort(out.begin(), out.end(), [](const OpinionTuple& x, const OpinionTuple& y) {
    return std::tie(x.aspect_span.start, x.modifier_span.start) < std::tie(y.aspect_span.start, y.modifier_span.start);
  });
  return out;
}

}  // namespace xsense
