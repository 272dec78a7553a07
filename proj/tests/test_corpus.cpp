#include <sstream>

#include "doctest.h"
#include "xsense/corpus.hpp"
#include "xsense/error.hpp"

using namespace xsense;

namespace {

std::vector<std::string> surfaces(const TokenSequence& seq) {
  std::vector<std::string> out;
  for (const auto& t : seq.tokens) out.push_back(t.surface);
  return out;
}

}  // namespace

TEST_CASE("tokenize detaches edge punctuation and keeps byte offsets") {
  const std::string text = "The bathroom is very clean but the food is average.";
  const TokenSequence seq = tokenize(text);
  CHECK(seq.size() == 11);
  CHECK(surfaces(seq).back() == ".");
  for (const auto& t : seq.tokens) CHECK(text.substr(t.char_start, t.char_end - t.char_start) == t.surface);
}

TEST_CASE("tokenize peels punctuation one character at a time") {
  CHECK(surfaces(tokenize("(\"wow!!\")")) == std::vector<std::string>{"(", "\"", "wow", "!", "!", "\"", ")"});
  CHECK(surfaces(tokenize("don't U.S.")) == std::vector<std::string>{"don't", "U.S", "."});
  CHECK(tokenize("   ").empty());
}

TEST_CASE("tokenize offset shifts every span") {
  const auto seq = tokenize("ab cd", 10);
  CHECK(seq[0].char_start == 10);
  CHECK(seq[1].char_end == 15);
}

TEST_CASE("tokens never straddle whitespace and cover every non-space byte") {
  Rng rng(3);
  const std::string alphabet = "ab .,!?\t\n'-";
  for (int trial = 0; trial < 200; ++trial) {
    std::string text;
    const std::size_t n = rng.below(30);
    for (std::size_t i = 0; i < n; ++i) text += alphabet[rng.below(alphabet.size())];
    std::size_t covered = 0;
    std::size_t last_end = 0;
    for (const auto& t : tokenize(text).tokens) {
      CHECK(t.char_start >= last_end);
      last_end = t.char_end;
      covered += t.char_end - t.char_start;
      CHECK(text.substr(t.char_start, t.char_end - t.char_start) == t.surface);
    }
    std::size_t non_space = 0;
    for (char c : text) non_space += (c == ' ' || c == '\t' || c == '\n') ? 0 : 1;
    CHECK(covered == non_space);
  }
}

TEST_CASE("sentences split after terminal punctuation followed by space or end") {
  const std::string text = "Great room. Noisy street! Is it 3.5 stars? yes";
  const auto sentences = split_sentences(tokenize(text), text);
  REQUIRE(sentences.size() == 4);
  CHECK(surfaces(sentences[0]) == std::vector<std::string>{"Great", "room", "."});
  CHECK(surfaces(sentences[2]).back() == "?");
  CHECK(surfaces(sentences[3]) == std::vector<std::string>{"yes"});
}

TEST_CASE("sentences partition the tokens in order") {
  const std::string text = "A b. C d! E";
  const auto all = tokenize(text);
  const auto sentences = split_sentences(all, text);
  std::vector<Token> joined;
  for (const auto& s : sentences) joined.insert(joined.end(), s.tokens.begin(), s.tokens.end());
  CHECK(joined == all.tokens);
}

TEST_CASE("make_review on the bathroom example") {
  std::istringstream in(R"({"id":"r1","entity":"h1","text":"The bathroom is very clean but the food is average."})");
  const auto reviews = parse_reviews(in);
  REQUIRE(reviews.size() == 1);
  CHECK(reviews[0].entity_id == "h1");
  CHECK(reviews[0].sentences.size() == 1);
  CHECK(reviews[0].sentences[0].size() == 11);
}

TEST_CASE("review loading reports the failing line") {
  std::istringstream bad_json("{\"id\":\"a\",\"entity\":\"h\",\"text\":\"x\"}\n\n{oops\n");
  CHECK_THROWS_WITH_AS(parse_reviews(bad_json), "malformed JSON at line 3", DataError);
  std::istringstream missing("{\"id\":\"a\",\"text\":\"x\"}\n");
  CHECK_THROWS_WITH_AS(parse_reviews(missing), "missing key entity at line 1", DataError);
  std::istringstream empty_entity("{\"id\":\"a\",\"entity\":\"\",\"text\":\"x\"}\n");
  CHECK_THROWS_AS(parse_reviews(empty_entity), DataError);
}

TEST_CASE("QA examples join against reviews and validate the span") {
  const std::vector<Review> reviews = {make_review("r1", "h1", "The walls are thin.")};
  const auto ex = make_qa_examples(
      R"([{"review_id":"r1","question":"why noisy ?","answer_start":4,"answer_end":9}])", reviews);
  REQUIRE(ex.size() == 1);
  CHECK(ex[0].id == "0");
  CHECK(ex[0].answer_text() == "walls");
  CHECK_THROWS_AS(make_qa_examples(R"([{"review_id":"r9","question":"q","answer_start":0,"answer_end":1}])",
                                   reviews),
                  DataError);
  CHECK_THROWS_AS(make_qa_examples(R"([{"review_id":"r1","question":"q","answer_start":3,"answer_end":99}])",
                                   reviews),
                  DataError);
}

TEST_CASE("ABSA lines use inclusive token ranges") {
  std::istringstream in(
      R"({"text":"The breakfast buffet is average.","aspects":[{"start":1,"end":2}],"target":{"start":1,"end":2},"polarity":"neutral"})");
  const auto ex = parse_absa(in);
  REQUIRE(ex.size() == 1);
  CHECK(ex[0].aspect_spans[0].length() == 2);
  CHECK(ex[0].polarity == Polarity::kNeutral);
  std::istringstream half(R"({"text":"a b","aspects":[],"target":{"start":0,"end":0}})");
  CHECK_THROWS_AS(parse_absa(half), DataError);
  std::istringstream outside(R"({"text":"a b","aspects":[{"start":1,"end":2}]})");
  CHECK_THROWS_AS(parse_absa(outside), DataError);
}

TEST_CASE("word vectors reject a ragged row") {
  std::istringstream good("a 1 2\nb 3 4\n");
  const auto wv = parse_word_vectors(good);
  CHECK(wv.dim() == 2);
  CHECK(wv.lookup("b") == std::vector<double>{3, 4});
  CHECK(wv.lookup("zzz") == std::vector<double>{0, 0});
  std::istringstream bad("a 1 2\nb 3\n");
  CHECK_THROWS_WITH_AS(parse_word_vectors(bad), "inconsistent dimension at row 2: expected 2, got 1", DataError);
}

TEST_CASE("edge list parses one edge per line") {
  std::istringstream in("thin walls\tnoisy room\n");
  const EdgeList edges = parse_edge_list(in);
  CHECK(edges.nodes().size() == 2);
  CHECK(edges.edges().size() == 1);
  CHECK(edges.has_edge("noisy room", "thin walls"));
}

TEST_CASE("split follows the floor rule and is seeded") {
  std::vector<int> items(757);
  for (int i = 0; i < 757; ++i) items[i] = i;
  const auto [train, val] = split(items, 0.9, 1);
  CHECK(train.size() == 681);
  CHECK(val.size() == 76);
  const auto again = split(items, 0.9, 1);
  CHECK(again.first == train);
  const auto other = split(items, 0.9, 2);
  CHECK(other.first != train);
  CHECK(train_count(100, 0.29) == 29);
  CHECK_THROWS_AS(split(items, 1.0, 0), ConfigError);
  CHECK_THROWS_AS(split(items, 0.0, 0), ConfigError);
  CHECK_THROWS_AS(split(std::vector<int>{}, 0.5, 0), DataError);
}

TEST_CASE("dataset statistics use the reported field meanings") {
  const std::vector<Review> reviews = {make_review("r1", "h1", "One two three four."),
                                       make_review("r2", "h1", "Five six.")};
  const auto ex = make_qa_examples(
      R"([{"review_id":"r1","question":"a b ?","answer_start":0,"answer_end":7},
          {"review_id":"r2","question":"c ?","answer_start":0,"answer_end":9}])",
      reviews);
  const DatasetStats s = dataset_stats(ex);
  CHECK(s.avg_review_words == doctest::Approx(3.0));
  CHECK(s.avg_question_words == doctest::Approx(2.5));
  CHECK(s.avg_answer_words == doctest::Approx(2.0));
}

TEST_CASE("vocabulary puts specials first then sorted words") {
  const Vocabulary v({"<unk>"}, {"b", "a", "b"});
  CHECK(v.words() == std::vector<std::string>{"<unk>", "a", "b"});
  CHECK(v.id_or("zzz", 0) == 0);
  CHECK(Vocabulary::from_ordered(v.words()) == v);
}
