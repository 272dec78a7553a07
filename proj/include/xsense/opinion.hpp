#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "xsense/text.hpp"

namespace xsense {

// A (modifier, aspect) opinion anchored to token spans of one sentence.
struct OpinionTuple {
  std::string modifier;
  std::string aspect;
  std::size_t sentence_index = 0;
  TokenSpan modifier_span;
  TokenSpan aspect_span;

  // "modifier aspect"
  std::string key() const { return modifier + " " + aspect; }
  bool operator==(const OpinionTuple&) const = default;
};

struct Lexicon {
  std::set<std::string> adjectives;
  std::set<std::string> aspect_nouns;

  bool empty() const { return adjectives.empty() && aspect_nouns.empty(); }
};

// JSON {"adjectives": [...], "aspect_nouns": [...]}; entries are lowercased.
Lexicon load_lexicon(const std::filesystem::path& path);
Lexicon parse_lexicon(const std::string& json_text);

// Adjective runs directly before an aspect run, or after it across a copula
// (is/was/are/were), form one tuple. Output is ordered by aspect position.
std::vector<OpinionTuple> extract_rule_based(const TokenSequence& sentence, const Lexicon& lexicon,
                                             std::size_t sentence_index = 0);

// Labels are ordered so that O wins score ties.
enum class Tag : std::uint8_t { kO = 0, kBAsp = 1, kIAsp = 2, kBMod = 3, kIMod = 4 };
inline constexpr std::size_t kNumTags = 5;

using TagSequence = std::vector<Tag>;

const char* tag_name(Tag t);
Tag parse_tag(std::string_view name);

// I-x may follow only B-x or I-x of the same type.
bool transition_allowed(Tag prev, Tag next);
bool transition_allowed_from_start(Tag first);
bool well_formed(const TagSequence& tags);

// Orphan I-x (after O, a different type, or at the start) becomes B-x.
TagSequence repair(TagSequence tags);

struct LabeledSpans {
  std::vector<TokenSpan> aspects;
  std::vector<TokenSpan> modifiers;
};

// Decodes after repair.
LabeledSpans spans_from_tags(const TagSequence& tags);

TagSequence tags_from_tuples(std::size_t n_tokens, const std::vector<OpinionTuple>& tuples);

// Greedy one-to-one matching on token distance. Among equal distances a
// modifier preceding its aspect wins; remaining ties go to the earlier aspect.
// Unpaired spans are dropped; output is ordered by aspect start.
std::vector<OpinionTuple> pair(const TagSequence& tagged, const TokenSequence& sentence,
                               std::size_t sentence_index = 0);

std::string span_phrase(const TokenSequence& sentence, const TokenSpan& span);

// Averaged-perceptron BIO tagger.
struct TaggerModel {
  using Scores = std::array<double, kNumTags>;

  std::map<std::string, Scores> feature_weights;
  std::array<Scores, kNumTags> transitions{};  // [prev][next]
  Lexicon lexicon;

  bool operator==(const TaggerModel& o) const {
    return feature_weights == o.feature_weights && transitions == o.transitions;
  }
};

struct TaggerOptions {
  std::size_t epochs = 10;
  std::uint64_t seed = 0;
  Lexicon lexicon;
};

struct LabeledSentence {
  TokenSequence tokens;
  TagSequence tags;
};

std::vector<std::string> token_features(const TokenSequence& sentence, std::size_t i, const Lexicon& lexicon);

// Per-token emission scores under the model, [token][tag].
std::vector<TaggerModel::Scores> emission_scores(const TaggerModel& model, const TokenSequence& sentence);

// Sum of emission and transition scores of a complete tag sequence.
double sequence_score(const TaggerModel& model, const TokenSequence& sentence, const TagSequence& tags);

TaggerModel train_tagger(const std::vector<LabeledSentence>& labeled, const TaggerOptions& options);

// Viterbi over allowed transitions; ties go to the lower tag index.
TagSequence tag(const TaggerModel& model, const TokenSequence& sentence);

std::vector<LabeledSentence> load_labeled_tags(const std::filesystem::path& path);

}  // namespace xsense
