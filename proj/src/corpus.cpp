#include "xsense/corpus.hpp"

#include <fmt/format.h>

#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

namespace xsense {

using nlohmann::json;

namespace {

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open {}", path.string()));
  return in;
}

bool blank(const std::string& line) {
  return line.find_first_not_of(" \t\r\n") == std::string::npos;
}

json parse_json_line(const std::string& line, std::size_t line_no) {
  try {
    return json::parse(line);
  } catch (const json::parse_error&) {
    throw DataError(fmt::format("malformed JSON at line {}", line_no));
  }
}

const json& require_key(const json& obj, const char* key, std::size_t line_no) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw DataError(fmt::format("missing key {} at line {}", key, line_no));
  }
  return obj.at(key);
}

std::string require_string(const json& obj, const char* key, std::size_t line_no) {
  const json& v = require_key(obj, key, line_no);
  if (!v.is_string()) throw DataError(fmt::format("key {} must be a string at line {}", key, line_no));
  return v.get<std::string>();
}

std::size_t require_index(const json& obj, const char* key, std::size_t line_no) {
  const json& v = require_key(obj, key, line_no);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
    throw DataError(fmt::format("key {} must be a non-negative integer at line {}", key, line_no));
  }
  return v.get<std::size_t>();
}

TokenSpan parse_span(const json& obj, std::size_t n_tokens, std::size_t line_no) {
  TokenSpan span{require_index(obj, "start", line_no), require_index(obj, "end", line_no)};
  if (span.start > span.end || span.end >= n_tokens) {
    throw DataError(fmt::format("token range [{}, {}] out of bounds at line {}", span.start, span.end,
                                line_no));
  }
  return span;
}

}  // namespace

Review make_review(std::string id, std::string entity_id, std::string text) {
  Review r{std::move(id), std::move(entity_id), std::move(text), {}};
  r.sentences = split_sentences(tokenize(r.text), r.text);
  return r;
}

const char* polarity_name(Polarity p) {
  switch (p) {
    case Polarity::kPositive: return "positive";
    case Polarity::kNegative: return "negative";
    case Polarity::kNeutral: return "neutral";
  }
  return "neutral";
}

Polarity parse_polarity(std::string_view name) {
  if (name == "positive") return Polarity::kPositive;
  if (name == "negative") return Polarity::kNegative;
  if (name == "neutral") return Polarity::kNeutral;
  throw DataError(fmt::format("unknown polarity '{}'", name));
}

void WordVectors::insert(std::string word, std::vector<double> vec) {
  if (dim_ == 0) dim_ = vec.size();
  if (vec.size() != dim_) {
    throw DataError(fmt::format("vector for '{}' has dimension {}, expected {}", word, vec.size(), dim_));
  }
  table_[std::move(word)] = std::move(vec);
}

std::vector<double> WordVectors::lookup(const std::string& word) const {
  auto it = table_.find(word);
  if (it == table_.end()) return std::vector<double>(dim_, 0.0);
  return it->second;
}

void EdgeList::add_node(std::string_view phrase) { nodes_.insert(normalize_phrase(phrase)); }

void EdgeList::add_edge(std::string_view a, std::string_view b) {
  std::string na = normalize_phrase(a);
  std::string nb = normalize_phrase(b);
  nodes_.insert(na);
  nodes_.insert(nb);
  if (nb < na) std::swap(na, nb);
  edges_.emplace(std::move(na), std::move(nb));
}

bool EdgeList::has_edge(const std::string& a, const std::string& b) const {
  return a < b ? edges_.count({a, b}) != 0 : edges_.count({b, a}) != 0;
}

std::vector<Review> parse_reviews(std::istream& in) {
  std::vector<Review> reviews;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    const json obj = parse_json_line(line, line_no);
    std::string id = require_string(obj, "id", line_no);
    std::string entity = require_string(obj, "entity", line_no);
    std::string text = require_string(obj, "text", line_no);
    if (entity.empty()) throw DataError(fmt::format("empty entity at line {}", line_no));
    reviews.push_back(make_review(std::move(id), std::move(entity), std::move(text)));
  }
  return reviews;
}

std::vector<Review> load_reviews(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_reviews(in);
}

std::vector<QAExample> make_qa_examples(const std::string& qa_json, const std::vector<Review>& reviews) {
  json root;
  try {
    root = json::parse(qa_json);
  } catch (const json::parse_error& e) {
    throw DataError(fmt::format("malformed QA dataset: {}", e.what()));
  }
  if (!root.is_array()) throw DataError("QA dataset must be a JSON array");
  std::map<std::string, const Review*> by_id;
  for (const Review& r : reviews) by_id[r.id] = &r;

  std::vector<QAExample> out;
  for (std::size_t i = 0; i < root.size(); ++i) {
    const json& obj = root[i];
    const std::size_t item = i + 1;
    const std::string review_id = require_string(obj, "review_id", item);
    auto it = by_id.find(review_id);
    if (it == by_id.end()) throw DataError(fmt::format("unknown review_id '{}' at item {}", review_id, item));
    QAExample ex;
    ex.id = obj.contains("id") ? obj.at("id").get<std::string>() : std::to_string(i);
    ex.review = *it->second;
    ex.question_text = require_string(obj, "question", item);
    ex.question = tokenize(ex.question_text);
    ex.answer_char_start = require_index(obj, "answer_start", item);
    ex.answer_char_end = require_index(obj, "answer_end", item);
    if (ex.answer_char_start >= ex.answer_char_end || ex.answer_char_end > ex.review.text.size()) {
      throw DataError(fmt::format("answer span [{}, {}) outside review at item {}", ex.answer_char_start,
                                  ex.answer_char_end, item));
    }
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<QAExample> load_qa_dataset(const std::filesystem::path& qa_path,
                                       const std::filesystem::path& reviews_path) {
  auto in = open_input(qa_path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return make_qa_examples(buffer.str(), load_reviews(reviews_path));
}

std::vector<AbsaExample> parse_absa(std::istream& in) {
  std::vector<AbsaExample> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    const json obj = parse_json_line(line, line_no);
    AbsaExample ex;
    ex.id = obj.contains("id") ? obj.at("id").get<std::string>() : std::to_string(out.size());
    ex.text = require_string(obj, "text", line_no);
    ex.sentence = tokenize(ex.text);
    const std::size_t n = ex.sentence.size();
    if (obj.contains("aspects")) {
      for (const json& a : obj.at("aspects")) ex.aspect_spans.push_back(parse_span(a, n, line_no));
    }
    if (obj.contains("target") && !obj.at("target").is_null()) {
      ex.target_aspect = parse_span(obj.at("target"), n, line_no);
    }
    if (obj.contains("polarity") && !obj.at("polarity").is_null()) {
      ex.polarity = parse_polarity(obj.at("polarity").get<std::string>());
    }
    if (ex.target_aspect.has_value() != ex.polarity.has_value()) {
      throw DataError(fmt::format("target and polarity must appear together at line {}", line_no));
    }
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<AbsaExample> load_absa_dataset(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_absa(in);
}

WordVectors parse_word_vectors(std::istream& in) {
  WordVectors wv;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (blank(line)) continue;
    ++row;
    std::istringstream fields(line);
    std::string word;
    fields >> word;
    std::vector<double> vec;
    std::string value;
    while (fields >> value) {
      try {
        std::size_t used = 0;
        vec.push_back(std::stod(value, &used));
        if (used != value.size()) throw std::invalid_argument(value);
      } catch (const std::exception&) {
        throw DataError(fmt::format("bad value '{}' at row {}", value, row));
      }
    }
    if (vec.empty()) throw DataError(fmt::format("no values at row {}", row));
    if (wv.dim() != 0 && vec.size() != wv.dim()) {
      throw DataError(fmt::format("inconsistent dimension at row {}: expected {}, got {}", row, wv.dim(),
                                  vec.size()));
    }
    wv.insert(std::move(word), std::move(vec));
  }
  return wv;
}

WordVectors load_word_vectors(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_word_vectors(in);
}

EdgeList parse_edge_list(std::istream& in) {
  EdgeList edges;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (blank(line)) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || line.find('\t', tab + 1) != std::string::npos) {
      throw DataError(fmt::format("expected two tab-separated phrases at row {}", row));
    }
    const std::string_view lhs(line.data(), tab);
    const std::string_view rhs(line.data() + tab + 1, line.size() - tab - 1);
    if (normalize_phrase(lhs).empty() || normalize_phrase(rhs).empty()) {
      throw DataError(fmt::format("empty phrase at row {}", row));
    }
    edges.add_edge(lhs, rhs);
  }
  return edges;
}

EdgeList load_edge_list(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_edge_list(in);
}

DatasetStats dataset_stats(const std::vector<QAExample>& examples) {
  if (examples.empty()) throw DataError("dataset_stats needs at least one example");
  double review = 0, question = 0, answer = 0;
  for (const QAExample& ex : examples) {
    review += static_cast<double>(split_words(ex.review.text).size());
    question += static_cast<double>(split_words(ex.question_text).size());
    answer += static_cast<double>(split_words(ex.answer_text()).size());
  }
  const double n = static_cast<double>(examples.size());
  return DatasetStats{review / n, question / n, answer / n};
}

std::size_t train_count(std::size_t n, double train_fraction) {
  return static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(n) + 1e-9));
}

}  // namespace xsense
