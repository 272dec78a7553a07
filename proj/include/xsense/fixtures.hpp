#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "xsense/corpus.hpp"
#include "xsense/distmult.hpp"
#include "xsense/kb.hpp"
#include "xsense/opinion.hpp"

// Deterministic synthetic datasets used by tests, the acceptance suite and
// the repro-report command.
namespace xsense::fixtures {

// Pronounceable nonsense word for index i (unique for i < 4900).
std::string pseudo_word(std::size_t i);

// 50 facts: premises are every (modifier, aspect) pair over 10 modifiers and
// 5 aspects; the conclusion group of (m, a) is (m + 2a) mod 5, so no single
// premise word predicts its group. Contains "thin walls" -> "noisy room".
kb::KnowledgeBase reasoner_kb();

// Premise keys grouped by conclusion key.
std::vector<std::vector<std::string>> premise_groups(const kb::KnowledgeBase& kb);

// 20 entities e00..e19 with three symmetric relations, each an equivalence
// partition: same_block (i / 5), same_residue (i mod 5) and
// same_half_parity (i / 10, i mod 2). Every ordered pair of distinct members
// of a class is a triple.
std::vector<distmult::NamedTriple> distmult_rule_triples();

struct DistMultSplit {
  std::vector<distmult::NamedTriple> train;
  std::vector<distmult::NamedTriple> test;
  std::vector<distmult::NamedTriple> all;
};

DistMultSplit distmult_rule_split(double test_fraction = 0.1, std::uint64_t seed = 7);

struct DisambiguationOptions {
  std::size_t groups = 4;
  std::size_t premises_per_group = 12;
  std::size_t train_premises = 6;
  std::size_t validation_premises = 2;
  std::size_t train_examples = 96;
  std::size_t validation_examples = 16;
  std::size_t test_examples = 40;
  std::uint64_t seed = 2024;
};

// QA reviews made of two sentences "the <aspect> is <modifier> ." whose
// premises come from the target group (the answer) and from another group.
// The question never changes. Premise sets of the three splits are disjoint,
// so test sentences contain words the QA encoder never saw in training; only
// the knowledge base, which holds every premise, tells the two apart.
struct DisambiguationSuite {
  kb::KnowledgeBase kb;
  Lexicon lexicon;
  std::string question;
  std::vector<QAExample> train;
  std::vector<QAExample> validation;
  std::vector<QAExample> test;
};

DisambiguationSuite disambiguation_suite(const DisambiguationOptions& options = {});

// Four hotels where "thin walls" always co-occurs with the more frequent
// "noisy room", plus one unrelated opinion.
std::vector<Review> thin_walls_reviews();
Lexicon thin_walls_lexicon();
// Holds the node "thin walls" and the edge (walls, rooms) but nothing
// linking "noisy" or "room" to the premise.
EdgeList thin_walls_edges();

}  // namespace xsense::fixtures
