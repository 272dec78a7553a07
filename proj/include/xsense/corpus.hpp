#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "xsense/error.hpp"
#include "xsense/random.hpp"
#include "xsense/text.hpp"

namespace xsense {

struct Review {
  std::string id;
  std::string entity_id;
  std::string text;
  std::vector<TokenSequence> sentences;

  bool operator==(const Review&) const = default;
};

// Tokenizes and sentence-splits `text`.
Review make_review(std::string id, std::string entity_id, std::string text);

struct QAExample {
  std::string id;
  Review review;
  std::string question_text;
  TokenSequence question;
  // Half-open byte range into review.text.
  std::size_t answer_char_start = 0;
  std::size_t answer_char_end = 0;

  std::string answer_text() const {
    return review.text.substr(answer_char_start, answer_char_end - answer_char_start);
  }
};

enum class Polarity { kPositive = 0, kNegative = 1, kNeutral = 2 };
inline constexpr std::size_t kNumPolarities = 3;

const char* polarity_name(Polarity p);
Polarity parse_polarity(std::string_view name);

struct AbsaExample {
  std::string id;
  std::string text;
  TokenSequence sentence;
  std::vector<TokenSpan> aspect_spans;
  std::optional<TokenSpan> target_aspect;
  std::optional<Polarity> polarity;
};

// Missing words map to the zero vector.
class WordVectors {
 public:
  WordVectors() = default;
  explicit WordVectors(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return table_.size(); }
  bool contains(const std::string& word) const { return table_.count(word) != 0; }
  void insert(std::string word, std::vector<double> vec);
  std::vector<double> lookup(const std::string& word) const;

 private:
  std::size_t dim_ = 0;
  std::unordered_map<std::string, std::vector<double>> table_;
};

class EdgeList {
 public:
  void add_edge(std::string_view a, std::string_view b);
  void add_node(std::string_view phrase);

  bool has_node(const std::string& phrase) const { return nodes_.count(phrase) != 0; }
  // Unordered; phrases are compared after normalization by the caller.
  bool has_edge(const std::string& a, const std::string& b) const;

  const std::set<std::string>& nodes() const { return nodes_; }
  const std::set<std::pair<std::string, std::string>>& edges() const { return edges_; }

 private:
  std::set<std::string> nodes_;
  std::set<std::pair<std::string, std::string>> edges_;
};

std::vector<Review> load_reviews(const std::filesystem::path& path);
std::vector<Review> parse_reviews(std::istream& in);

// QA JSON array of {review_id, question, answer_start, answer_end[, id]} joined
// against a reviews JSONL file.
std::vector<QAExample> load_qa_dataset(const std::filesystem::path& qa_path,
                                       const std::filesystem::path& reviews_path);
std::vector<QAExample> make_qa_examples(const std::string& qa_json, const std::vector<Review>& reviews);

// JSONL {text, aspects:[{start,end}], target:{start,end}?, polarity?}; token
// ranges are inclusive.
std::vector<AbsaExample> load_absa_dataset(const std::filesystem::path& path);
std::vector<AbsaExample> parse_absa(std::istream& in);

WordVectors load_word_vectors(const std::filesystem::path& path);
WordVectors parse_word_vectors(std::istream& in);

EdgeList load_edge_list(const std::filesystem::path& path);
EdgeList parse_edge_list(std::istream& in);

struct DatasetStats {
  double avg_review_words = 0.0;
  double avg_question_words = 0.0;
  double avg_answer_words = 0.0;
};

DatasetStats dataset_stats(const std::vector<QAExample>& examples);

// Number of training items for a split; floor with a small guard against
// representation error (0.29 * 100 gives 29, not 28).
std::size_t train_count(std::size_t n, double train_fraction);

template <typename T>
std::pair<std::vector<T>, std::vector<T>> split(const std::vector<T>& examples, double train_fraction,
                                                std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("train fraction must lie in (0, 1)");
  }
  if (examples.empty()) throw DataError("cannot split an empty list");
  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));
  const std::size_t n_train = train_count(examples.size(), train_fraction);
  std::pair<std::vector<T>, std::vector<T>> out;
  out.first.reserve(n_train);
  out.second.reserve(examples.size() - n_train);
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_train ? out.first : out.second).push_back(examples[order[i]]);
  }
  return out;
}

}  // namespace xsense
