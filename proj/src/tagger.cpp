#include <fmt/format.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "json.hpp"
#include "xsense/error.hpp"
#include "xsense/opinion.hpp"
#include "xsense/random.hpp"

namespace xsense {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::string suffix3(const std::string& w) { return w.size() <= 3 ? w : w.substr(w.size() - 3); }

bool all_punct(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return is_ascii_punct(c); });
}

TagSequence viterbi(const std::vector<TaggerModel::Scores>& emissions,
                    const std::array<TaggerModel::Scores, kNumTags>& transitions) {
  const std::size_t n = emissions.size();
  if (n == 0) return {};
  std::vector<TaggerModel::Scores> delta(n);
  std::vector<std::array<std::size_t, kNumTags>> back(n);
  for (std::size_t y = 0; y < kNumTags; ++y) {
    delta[0][y] = transition_allowed_from_start(static_cast<Tag>(y)) ? emissions[0][y] : kNegInf;
  }
  for (std::size_t t = 1; t < n; ++t) {
    for (std::size_t y = 0; y < kNumTags; ++y) {
      double best = kNegInf;
      std::size_t arg = 0;
      for (std::size_t p = 0; p < kNumTags; ++p) {
        if (delta[t - 1][p] == kNegInf || !transition_allowed(static_cast<Tag>(p), static_cast<Tag>(y))) continue;
        const double s = delta[t - 1][p] + transitions[p][y];
        if (s > best) {
          best = s;
          arg = p;
        }
      }
      delta[t][y] = best == kNegInf ? kNegInf : best + emissions[t][y];
      back[t][y] = arg;
    }
  }
  std::size_t y = 0;
  for (std::size_t k = 1; k < kNumTags; ++k) {
    if (delta[n - 1][k] > delta[n - 1][y]) y = k;
  }
  TagSequence out(n);
  for (std::size_t t = n; t-- > 0;) {
    out[t] = static_cast<Tag>(y);
    if (t > 0) y = back[t][y];
  }
  return out;
}

// Weights plus the running sums needed for averaging (w_avg = w - u / c).
struct AveragedWeights {
  TaggerModel current;
  std::map<std::string, TaggerModel::Scores> feature_sums;
  std::array<TaggerModel::Scores, kNumTags> transition_sums{};
  double counter = 1.0;

  void update_feature(const std::string& f, Tag y, double delta) {
    current.feature_weights[f][static_cast<std::size_t>(y)] += delta;
    feature_sums[f][static_cast<std::size_t>(y)] += counter * delta;
  }
  void update_transition(Tag p, Tag y, double delta) {
    current.transitions[static_cast<std::size_t>(p)][static_cast<std::size_t>(y)] += delta;
    transition_sums[static_cast<std::size_t>(p)][static_cast<std::size_t>(y)] += counter * delta;
  }

  TaggerModel averaged() const {
    TaggerModel out;
    out.lexicon = current.lexicon;
    for (const auto& [f, w] : current.feature_weights) {
      const auto& u = feature_sums.at(f);
      TaggerModel::Scores avg{};
      for (std::size_t y = 0; y < kNumTags; ++y) avg[y] = w[y] - u[y] / counter;
      out.feature_weights.emplace(f, avg);
    }
    for (std::size_t p = 0; p < kNumTags; ++p) {
      for (std::size_t y = 0; y < kNumTags; ++y) {
        out.transitions[p][y] = current.transitions[p][y] - transition_sums[p][y] / counter;
      }
    }
    return out;
  }
};

}  // namespace

std::vector<std::string> token_features(const TokenSequence& sentence, std::size_t i, const Lexicon& lexicon) {
  const std::string w = to_lower(sentence[i].surface);
  const std::string prev = i > 0 ? to_lower(sentence[i - 1].surface) : "<s>";
  const std::string next = i + 1 < sentence.size() ? to_lower(sentence[i + 1].surface) : "</s>";
  std::vector<std::string> f{
      "bias", "w=" + w, "p=" + prev, "n=" + next, "suf=" + suffix3(w), all_punct(w) ? "punct" : "alnum",
  };
  if (lexicon.adjectives.count(w)) f.emplace_back("lex=adj");
  if (lexicon.aspect_nouns.count(w)) f.emplace_back("lex=asp");
  return f;
}

std::vector<TaggerModel::Scores> emission_scores(const TaggerModel& model, const TokenSequence& sentence) {
  std::vector<TaggerModel::Scores> out(sentence.size());
  for (std::size_t i = 0; i < sentence.size(); ++i) {
    out[i].fill(0.0);
    for (const std::string& f : token_features(sentence, i, model.lexicon)) {
      auto it = model.feature_weights.find(f);
      if (it == model.feature_weights.end()) continue;
      for (std::size_t y = 0; y < kNumTags; ++y) out[i][y] += it->second[y];
    }
  }
  return out;
}

double sequence_score(const TaggerModel& model, const TokenSequence& sentence, const TagSequence& tags) {
  const auto em = emission_scores(model, sentence);
  double s = 0.0;
  for (std::size_t t = 0; t < tags.size(); ++t) {
    s += em[t][static_cast<std::size_t>(tags[t])];
    if (t > 0) s += model.transitions[static_cast<std::size_t>(tags[t - 1])][static_cast<std::size_t>(tags[t])];
  }
  return s;
}

TagSequence tag(const TaggerModel& model, const TokenSequence& sentence) {
  return viterbi(emission_scores(model, sentence), model.transitions);
}

TaggerModel train_tagger(const std::vector<LabeledSentence>& labeled, const TaggerOptions& options) {
  if (labeled.empty()) throw DataError("cannot train a tagger on an empty data set");
  for (std::size_t i = 0; i < labeled.size(); ++i) {
    if (labeled[i].tags.size() != labeled[i].tokens.size()) {
      throw DataError(fmt::format("sentence {} has {} tags for {} tokens", i, labeled[i].tags.size(),
                                  labeled[i].tokens.size()));
    }
    if (!well_formed(labeled[i].tags)) throw DataError(fmt::format("sentence {} has malformed BIO tags", i));
  }
  AveragedWeights acc;
  acc.current.lexicon = options.lexicon;

  std::vector<std::vector<std::vector<std::string>>> features(labeled.size());
  for (std::size_t s = 0; s < labeled.size(); ++s) {
    for (std::size_t i = 0; i < labeled[s].tokens.size(); ++i) {
      features[s].push_back(token_features(labeled[s].tokens, i, options.lexicon));
    }
  }

  Rng rng(options.seed);
  std::vector<std::size_t> order(labeled.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t s : order) {
      const TagSequence& gold = labeled[s].tags;
      const TagSequence pred = tag(acc.current, labeled[s].tokens);
      if (pred != gold) {
        for (std::size_t t = 0; t < gold.size(); ++t) {
          if (pred[t] != gold[t]) {
            for (const std::string& f : features[s][t]) {
              acc.update_feature(f, gold[t], 1.0);
              acc.update_feature(f, pred[t], -1.0);
            }
          }
          if (t > 0 && (pred[t] != gold[t] || pred[t - 1] != gold[t - 1])) {
            acc.update_transition(gold[t - 1], gold[t], 1.0);
            acc.update_transition(pred[t - 1], pred[t], -1.0);
          }
        }
      }
      acc.counter += 1.0;
    }
  }
  return acc.averaged();
}

std::vector<LabeledSentence> load_labeled_tags(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open {}", path.string()));
  std::vector<LabeledSentence> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      throw DataError(fmt::format("malformed JSON at line {}", line_no));
    }
    for (const char* key : {"tokens", "labels"}) {
      if (!obj.contains(key)) throw DataError(fmt::format("missing key {} at line {}", key, line_no));
    }
    LabeledSentence ls;
    std::size_t pos = 0;
    for (const auto& tok : obj.at("tokens")) {
      std::string s = tok.get<std::string>();
      ls.tokens.tokens.push_back(Token{s, pos, pos + s.size(), TokenKind::kWord});
      pos += s.size() + 1;
    }
    for (const auto& lab : obj.at("labels")) ls.tags.push_back(parse_tag(lab.get<std::string>()));
    if (ls.tags.size() != ls.tokens.size()) {
      throw DataError(fmt::format("token/label count mismatch at line {}", line_no));
    }
    out.push_back(std::move(ls));
  }
  return out;
}

}  // namespace xsense
