#include "xsense/metrics.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "xsense/error.hpp"

namespace xsense::metrics {

std::vector<std::string> normalize_answer(const std::string& s) {
  std::vector<std::string> out;
  for (const Token& t : tokenize(s).tokens) {
    const bool punct = std::all_of(t.surface.begin(), t.surface.end(), is_ascii_punct);
    if (!punct) out.push_back(to_lower(t.surface));
  }
  return out;
}

double harmonic_mean(double p, double r) { return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r); }

QaScore token_f1(const std::string& prediction, const std::string& gold) {
  const auto pred = normalize_answer(prediction);
  const auto ref = normalize_answer(gold);
  QaScore s;
  s.exact = pred == ref ? 1 : 0;
  if (pred.empty() && ref.empty()) {
    s.f1 = 1.0;
    return s;
  }
  if (pred.empty() || ref.empty()) return s;
  std::map<std::string, std::size_t> counts;
  for (const auto& w : ref) ++counts[w];
  std::size_t overlap = 0;
  for (const auto& w : pred) {
    auto it = counts.find(w);
    if (it != counts.end() && it->second > 0) {
      --it->second;
      ++overlap;
    }
  }
  const double p = static_cast<double>(overlap) / static_cast<double>(pred.size());
  const double r = static_cast<double>(overlap) / static_cast<double>(ref.size());
  s.f1 = harmonic_mean(p, r);
  return s;
}

namespace {

Prf prf_from_counts(std::size_t correct, std::size_t n_pred, std::size_t n_gold) {
  Prf out;
  out.precision = n_pred == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(n_pred);
  out.recall = n_gold == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(n_gold);
  out.f1 = harmonic_mean(out.precision, out.recall);
  return out;
}

std::size_t exact_matches(const std::vector<TokenSpan>& predicted, const std::vector<TokenSpan>& gold) {
  const std::set<TokenSpan> g(gold.begin(), gold.end());
  const std::set<TokenSpan> p(predicted.begin(), predicted.end());
  std::size_t correct = 0;
  for (const TokenSpan& s : p) correct += g.count(s);
  return correct;
}

}  // namespace

Prf span_prf(const std::vector<TokenSpan>& predicted, const std::vector<TokenSpan>& gold) {
  return prf_from_counts(exact_matches(predicted, gold), predicted.size(), gold.size());
}

Prf span_prf(const std::vector<std::vector<TokenSpan>>& predicted, const std::vector<std::vector<TokenSpan>>& gold) {
  if (predicted.size() != gold.size()) throw DataError("prediction and gold sentence counts differ");
  std::size_t correct = 0, n_pred = 0, n_gold = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    correct += exact_matches(predicted[i], gold[i]);
    n_pred += predicted[i].size();
    n_gold += gold[i].size();
  }
  return prf_from_counts(correct, n_pred, n_gold);
}

ClsScore cls_scores(const std::vector<Polarity>& predicted, const std::vector<Polarity>& gold) {
  if (predicted.size() != gold.size()) {
    throw DataError(fmt::format("{} predictions for {} gold labels", predicted.size(), gold.size()));
  }
  ClsScore s;
  if (gold.empty()) return s;
  std::array<std::size_t, kNumPolarities> tp{}, n_pred{}, n_gold{};
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const auto p = static_cast<std::size_t>(predicted[i]);
    const auto g = static_cast<std::size_t>(gold[i]);
    ++n_pred[p];
    ++n_gold[g];
    if (p == g) {
      ++tp[g];
      ++correct;
    }
  }
  s.accuracy = static_cast<double>(correct) / static_cast<double>(gold.size());
  for (std::size_t c = 0; c < kNumPolarities; ++c) {
    s.per_class[c] = prf_from_counts(tp[c], n_pred[c], n_gold[c]);
    s.macro_f1 += s.per_class[c].f1;
  }
  s.macro_f1 /= static_cast<double>(kNumPolarities);
  return s;
}

MeanStd mean_std(const std::vector<double>& values) {
  if (values.empty()) throw DataError("aggregation needs at least one run");
  MeanStd out;
  for (double v : values) out.mean += v;
  out.mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - out.mean) * (v - out.mean);
  out.std = std::sqrt(var / static_cast<double>(values.size()));
  return out;
}

std::map<std::string, MeanStd> aggregate(const std::vector<std::map<std::string, double>>& runs) {
  if (runs.empty()) throw DataError("aggregation needs at least one run");
  std::map<std::string, MeanStd> out;
  for (const auto& [name, first] : runs.front()) {
    std::vector<double> values;
    for (const auto& run : runs) {
      auto it = run.find(name);
      if (it == run.end()) throw DataError(fmt::format("metric '{}' missing from a run", name));
      values.push_back(it->second);
    }
    out[name] = mean_std(values);
  }
  return out;
}

nlohmann::json score_report(const std::string& task, const std::vector<std::map<std::string, double>>& runs,
                            const std::vector<std::uint64_t>& seeds) {
  nlohmann::json report;
  report["task"] = task;
  report["n_runs"] = runs.size();
  report["seed_list"] = seeds;
  nlohmann::json metrics = nlohmann::json::object();
  for (const auto& [name, ms] : aggregate(runs)) metrics[name] = {{"mean", ms.mean}, {"std", ms.std}};
  report["metrics"] = metrics;
  return report;
}

}  // namespace xsense::metrics
