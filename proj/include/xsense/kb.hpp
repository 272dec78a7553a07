#pragma once

#include <compare>
#include <cstddef>
#include <filesystem>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "xsense/corpus.hpp"
#include "xsense/opinion.hpp"

namespace xsense::kb {

// Normalized (modifier, aspect) pair. Ordered by key text, then modifier.
struct Opinion {
  std::string modifier;
  std::string aspect;

  Opinion() = default;
  Opinion(std::string_view mod, std::string_view asp);
  explicit Opinion(const OpinionTuple& t) : Opinion(t.modifier, t.aspect) {}

  std::string key() const { return modifier + " " + aspect; }

  bool operator==(const Opinion&) const = default;
  std::strong_ordering operator<=>(const Opinion& o) const;
};

// (entity, opinion) -> occurrence count.
class ExtractionMatrix {
 public:
  void add(const std::string& entity, const Opinion& opinion, std::size_t count = 1);
  std::size_t count(const std::string& entity, const Opinion& opinion) const;

  const std::map<std::string, std::map<Opinion, std::size_t>>& rows() const { return rows_; }
  std::size_t total() const;
  std::size_t nonzeros() const;
  bool empty() const { return rows_.empty(); }

  // Corpus frequency of every opinion.
  std::map<Opinion, std::size_t> opinion_totals() const;
  std::map<std::string, std::size_t> entity_totals() const;

  bool operator==(const ExtractionMatrix&) const = default;

 private:
  std::map<std::string, std::map<Opinion, std::size_t>> rows_;
};

// (entity, modifier, aspect) -> count.
class ModifierAspectTensor {
 public:
  using Key = std::tuple<std::string, std::string, std::string>;

  void add(const std::string& entity, const std::string& modifier, const std::string& aspect);
  const std::map<Key, std::size_t>& cells() const { return cells_; }

  // Sums over (modifier, aspect) for each (entity, "modifier aspect").
  std::map<std::pair<std::string, std::string>, std::size_t> marginal_by_key() const;

 private:
  std::map<Key, std::size_t> cells_;
};

struct BuiltMatrices {
  ExtractionMatrix matrix;
  ModifierAspectTensor tensor;
};

// `tuples[i]` holds every opinion extracted from `reviews[i]`.
BuiltMatrices build_matrix(const std::vector<Review>& reviews,
                           const std::vector<std::vector<OpinionTuple>>& tuples);

// True iff both views agree on every (entity, opinion key) count.
bool marginals_consistent(const BuiltMatrices& built);

struct Selection {
  std::vector<std::string> entities;
  std::vector<Opinion> opinions;
  ExtractionMatrix restricted;
};

// Entities by total count, opinions by corpus frequency, both descending with
// lexicographic tie-breaks. Oversized k returns everything.
Selection select(const ExtractionMatrix& matrix, std::size_t top_entities, std::size_t top_extractions);

struct Fact {
  Opinion premise;
  Opinion conclusion;
  double weight = 0.0;

  bool operator==(const Fact&) const = default;
};

// Normalized PMI from entity-level counts: ln(P(a,b) / (P(a) P(b))) / -ln P(a,b).
// Defined as 1 when P(a,b) = 1 and -1 when n_ab = 0.
double npmi(std::size_t n_ab, std::size_t n_a, std::size_t n_b, std::size_t n_entities);

struct MiningOptions {
  double npmi_threshold = 0.3;
  std::size_t min_support = 3;
};

// One fact per qualifying pair, directed from the less frequent opinion to the
// more frequent one. Sorted by (premise, conclusion).
std::vector<Fact> mine_facts(const ExtractionMatrix& restricted, const MiningOptions& options = {});

struct KnowledgeBase {
  std::string domain_name;
  std::vector<Opinion> opinions;
  std::vector<Fact> facts;

  bool operator==(const KnowledgeBase&) const = default;
};

// Opinions are the selected ones taking part in at least one fact, in
// selection order.
KnowledgeBase build_kb(std::string domain_name, const Selection& selection, std::vector<Fact> facts);

double extraction_overlap(const KnowledgeBase& kb, const EdgeList& edges);
double relation_overlap(const KnowledgeBase& kb, const EdgeList& edges);
// The derivability predicate behind relation_overlap.
bool fact_derivable(const Fact& fact, const EdgeList& edges);

struct KbStats {
  std::string domain;
  std::size_t n_entities = 0;
  std::size_t n_extractions = 0;
  std::size_t n_unique_opinions = 0;
  std::size_t n_facts = 0;
  double extraction_overlap = 0.0;
  double relation_overlap = 0.0;
};

KbStats stats(const KnowledgeBase& kb, const ExtractionMatrix& restricted, const EdgeList& edges);
nlohmann::json to_json(const KbStats& s);

// TSV of facts plus "<path>.opinions" sidecar.
std::filesystem::path opinions_path(const std::filesystem::path& kb_path);
void save_kb(const KnowledgeBase& kb, const std::filesystem::path& path);
KnowledgeBase load_kb(const std::filesystem::path& path);

}  // namespace xsense::kb
