#pragma once

#include <array>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "xsense/corpus.hpp"
#include "xsense/text.hpp"

namespace xsense::metrics {

struct QaScore {
  double f1 = 0.0;
  int exact = 0;
};

// Lowercase, drop tokens made only of punctuation, collapse whitespace.
// Articles are kept.
std::vector<std::string> normalize_answer(const std::string& s);

QaScore token_f1(const std::string& prediction, const std::string& gold);

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

double harmonic_mean(double p, double r);

// Exact boundary matches only; empty denominators give 0.
Prf span_prf(const std::vector<TokenSpan>& predicted, const std::vector<TokenSpan>& gold);

// Micro-averaged over a corpus of sentences.
Prf span_prf(const std::vector<std::vector<TokenSpan>>& predicted, const std::vector<std::vector<TokenSpan>>& gold);

struct ClsScore {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::array<Prf, kNumPolarities> per_class{};
};

ClsScore cls_scores(const std::vector<Polarity>& predicted, const std::vector<Polarity>& gold);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

// Population standard deviation.
MeanStd mean_std(const std::vector<double>& values);

// Per-metric mean and std across runs; every run must report the same metrics.
std::map<std::string, MeanStd> aggregate(const std::vector<std::map<std::string, double>>& runs);

nlohmann::json score_report(const std::string& task, const std::vector<std::map<std::string, double>>& runs,
                            const std::vector<std::uint64_t>& seeds);

}  // namespace xsense::metrics
