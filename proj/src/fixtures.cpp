#include "xsense/fixtures.hpp"

#include <fmt/format.h>

#include <array>
#include <map>

#include "xsense/error.hpp"
#include "xsense/random.hpp"

namespace xsense::fixtures {

namespace {

constexpr std::string_view kConsonants = "bdfgklmnprstvz";
constexpr std::string_view kVowels = "aeiou";

std::string syllable(std::size_t i) {
  return {kConsonants[i / kVowels.size() % kConsonants.size()], kVowels[i % kVowels.size()]};
}

constexpr std::array<std::string_view, 6> kConclusions = {"noisy room", "dirty room", "slow service",
                                                          "cold food",  "bad smell",  "poor value"};

QAExample make_example(std::string id, const std::string& question, const kb::Opinion& answer,
                       const kb::Opinion& distractor, bool answer_first) {
  auto sentence = [](const kb::Opinion& o) { return fmt::format("the {} is {} .", o.aspect, o.modifier); };
  const std::string first = sentence(answer_first ? answer : distractor);
  const std::string second = sentence(answer_first ? distractor : answer);
  QAExample ex;
  ex.id = id;
  ex.review = make_review(id, "synthetic", first + " " + second);
  ex.question_text = question;
  ex.question = tokenize(question);
  ex.answer_char_start = answer_first ? 0 : first.size() + 1;
  ex.answer_char_end = ex.answer_char_start + (answer_first ? first.size() : second.size());
  return ex;
}

}  // namespace

std::string pseudo_word(std::size_t i) {
  const std::size_t n = kConsonants.size() * kVowels.size();
  return syllable(i / n % n) + syllable(i % n);
}

kb::KnowledgeBase reasoner_kb() {
  static constexpr std::array<std::string_view, 10> kModifiers = {"thin",    "paper", "loud", "broken", "dirty",
                                                                  "stained", "rude",  "slow", "cramped", "cold"};
  static constexpr std::array<std::string_view, 5> kAspects = {"walls", "windows", "carpet", "staff", "heater"};
  static constexpr std::array<std::string_view, 5> kTargets = {"noisy room", "unpleasant stay", "bad service",
                                                               "poor maintenance", "uncomfortable night"};
  kb::KnowledgeBase kb;
  kb.domain_name = "reasoner-fixture";
  for (std::size_t m = 0; m < kModifiers.size(); ++m) {
    for (std::size_t a = 0; a < kAspects.size(); ++a) {
      const kb::Opinion premise(kModifiers[m], kAspects[a]);
      const auto words = split_words(kTargets[(m + 2 * a) % kTargets.size()]);
      kb.facts.push_back(kb::Fact{premise, kb::Opinion(words[0], words[1]), 1.0});
      kb.opinions.push_back(premise);
    }
  }
  for (std::string_view t : kTargets) {
    const auto words = split_words(t);
    kb.opinions.emplace_back(words[0], words[1]);
  }
  return kb;
}

std::vector<std::vector<std::string>> premise_groups(const kb::KnowledgeBase& kb) {
  std::map<std::string, std::vector<std::string>> by_conclusion;
  for (const kb::Fact& f : kb.facts) by_conclusion[f.conclusion.key()].push_back(f.premise.key());
  std::vector<std::vector<std::string>> out;
  for (auto& [_, premises] : by_conclusion) out.push_back(std::move(premises));
  return out;
}

std::vector<distmult::NamedTriple> distmult_rule_triples() {
  constexpr std::size_t kEntities = 20;
  struct Rule {
    const char* name;
    std::size_t (*cls)(std::size_t);
  };
  static constexpr std::array<Rule, 3> kRules = {{
      {"same_block", [](std::size_t i) { return i / 5; }},
      {"same_residue", [](std::size_t i) { return i % 5; }},
      {"same_half_parity", [](std::size_t i) { return 2 * (i / 10) + i % 2; }},
  }};
  std::vector<distmult::NamedTriple> out;
  for (const Rule& r : kRules) {
    for (std::size_t h = 0; h < kEntities; ++h) {
      for (std::size_t t = 0; t < kEntities; ++t) {
        if (h != t && r.cls(h) == r.cls(t)) {
          out.push_back({fmt::format("e{:02}", h), r.name, fmt::format("e{:02}", t)});
        }
      }
    }
  }
  return out;
}

DistMultSplit distmult_rule_split(double test_fraction, std::uint64_t seed) {
  DistMultSplit s;
  s.all = distmult_rule_triples();
  auto [train, test] = split(s.all, 1.0 - test_fraction, seed);
  s.train = std::move(train);
  s.test = std::move(test);
  return s;
}

DisambiguationSuite disambiguation_suite(const DisambiguationOptions& o) {
  if (o.groups < 2 || o.groups > kConclusions.size()) {
    throw ConfigError(fmt::format("disambiguation suite needs 2..{} groups", kConclusions.size()));
  }
  if (o.train_premises + o.validation_premises >= o.premises_per_group) {
    throw ConfigError("disambiguation suite needs test premises in every group");
  }
  DisambiguationSuite suite;
  suite.kb.domain_name = "disambiguation";
  suite.question = "why is the room noisy ?";

  // premises[split][group]
  std::array<std::vector<std::vector<kb::Opinion>>, 3> premises;
  for (auto& p : premises) p.resize(o.groups);
  std::size_t word = 0;
  for (std::size_t g = 0; g < o.groups; ++g) {
    const auto conclusion_words = split_words(kConclusions[g]);
    const kb::Opinion conclusion(conclusion_words[0], conclusion_words[1]);
    for (std::size_t j = 0; j < o.premises_per_group; ++j) {
      const std::string modifier = pseudo_word(word++);
      const std::string aspect = pseudo_word(word++);
      suite.lexicon.adjectives.insert(modifier);
      suite.lexicon.aspect_nouns.insert(aspect);
      const kb::Opinion premise(modifier, aspect);
      suite.kb.opinions.push_back(premise);
      suite.kb.facts.push_back(kb::Fact{premise, conclusion, 1.0});
      const std::size_t which = j < o.train_premises ? 0 : j < o.train_premises + o.validation_premises ? 1 : 2;
      premises[which][g].push_back(premise);
    }
    suite.kb.opinions.push_back(conclusion);
  }

  Rng rng(o.seed);
  const std::array<std::size_t, 3> counts = {o.train_examples, o.validation_examples, o.test_examples};
  const std::array<const char*, 3> names = {"train", "validation", "test"};
  std::array<std::vector<QAExample>*, 3> outputs = {&suite.train, &suite.validation, &suite.test};
  for (std::size_t s = 0; s < 3; ++s) {
    const auto& targets = premises[s][0];
    for (std::size_t k = 0; k < counts[s]; ++k) {
      const kb::Opinion& answer = targets[rng.below(targets.size())];
      const auto& pool = premises[s][1 + rng.below(o.groups - 1)];
      const kb::Opinion& distractor = pool[rng.below(pool.size())];
      outputs[s]->push_back(
          make_example(fmt::format("{}-{}", names[s], k), suite.question, answer, distractor, k % 2 == 0));
    }
  }
  return suite;
}

std::vector<Review> thin_walls_reviews() {
  return {
      make_review("t1", "h1", "The walls are thin. The room is noisy."),
      make_review("t2", "h1", "The room is noisy at night."),
      make_review("t3", "h2", "The walls are thin and the room is noisy."),
      make_review("t4", "h3", "Thin walls, noisy room."),
      make_review("t5", "h4", "The bathroom is clean."),
  };
}

Lexicon thin_walls_lexicon() {
  Lexicon lex;
  lex.adjectives = {"thin", "noisy", "clean", "very", "average", "quiet"};
  lex.aspect_nouns = {"walls", "room", "bathroom", "food", "staff"};
  return lex;
}

EdgeList thin_walls_edges() {
  EdgeList edges;
  edges.add_edge("walls", "rooms");
  edges.add_edge("thin walls", "partition");
  return edges;
}

}  // namespace xsense::fixtures
