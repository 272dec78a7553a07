#include "xsense/kb.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "xsense/error.hpp"

namespace xsense::kb {

Opinion::Opinion(std::string_view mod, std::string_view asp)
    : modifier(normalize_phrase(mod)), aspect(normalize_phrase(asp)) {}

std::strong_ordering Opinion::operator<=>(const Opinion& o) const {
  if (auto c = key() <=> o.key(); c != 0) return c;
  return modifier <=> o.modifier;
}

void ExtractionMatrix::add(const std::string& entity, const Opinion& opinion, std::size_t count) {
  if (count == 0) return;
  rows_[entity][opinion] += count;
}

std::size_t ExtractionMatrix::count(const std::string& entity, const Opinion& opinion) const {
  auto row = rows_.find(entity);
  if (row == rows_.end()) return 0;
  auto cell = row->second.find(opinion);
  return cell == row->second.end() ? 0 : cell->second;
}

std::size_t ExtractionMatrix::total() const {
  std::size_t t = 0;
  for (const auto& [e, row] : rows_) {
    for (const auto& [o, c] : row) t += c;
  }
  return t;
}

std::size_t ExtractionMatrix::nonzeros() const {
  std::size_t n = 0;
  for (const auto& [e, row] : rows_) n += row.size();
  return n;
}

std::map<Opinion, std::size_t> ExtractionMatrix::opinion_totals() const {
  std::map<Opinion, std::size_t> out;
  for (const auto& [e, row] : rows_) {
    for (const auto& [o, c] : row) out[o] += c;
  }
  return out;
}

std::map<std::string, std::size_t> ExtractionMatrix::entity_totals() const {
  std::map<std::string, std::size_t> out;
  for (const auto& [e, row] : rows_) {
    for (const auto& [o, c] : row) out[e] += c;
  }
  return out;
}

void ModifierAspectTensor::add(const std::string& entity, const std::string& modifier, const std::string& aspect) {
  ++cells_[Key{entity, modifier, aspect}];
}

std::map<std::pair<std::string, std::string>, std::size_t> ModifierAspectTensor::marginal_by_key() const {
  std::map<std::pair<std::string, std::string>, std::size_t> out;
  for (const auto& [key, c] : cells_) {
    const auto& [entity, modifier, aspect] = key;
    out[{entity, modifier + " " + aspect}] += c;
  }
  return out;
}

BuiltMatrices build_matrix(const std::vector<Review>& reviews,
                           const std::vector<std::vector<OpinionTuple>>& tuples) {
  if (reviews.size() != tuples.size()) {
    throw DataError(fmt::format("{} reviews but {} tuple lists", reviews.size(), tuples.size()));
  }
  BuiltMatrices out;
  for (std::size_t i = 0; i < reviews.size(); ++i) {
    for (const OpinionTuple& t : tuples[i]) {
      const Opinion op(t);
      if (op.modifier.empty() || op.aspect.empty()) continue;
      out.matrix.add(reviews[i].entity_id, op);
      out.tensor.add(reviews[i].entity_id, op.modifier, op.aspect);
    }
  }
  return out;
}

bool marginals_consistent(const BuiltMatrices& built) {
  std::map<std::pair<std::string, std::string>, std::size_t> from_matrix;
  for (const auto& [e, row] : built.matrix.rows()) {
    for (const auto& [o, c] : row) from_matrix[{e, o.key()}] += c;
  }
  return from_matrix == built.tensor.marginal_by_key();
}

namespace {

template <typename K>
std::vector<K> top_k(const std::map<K, std::size_t>& counts, std::size_t k) {
  std::vector<std::pair<K, std::size_t>> items(counts.begin(), counts.end());
  // Map order is the lexicographic tie-break; stable sort keeps it.
  std::stable_sort(items.begin(), items.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<K> out;
  for (std::size_t i = 0; i < items.size() && i < k; ++i) out.push_back(items[i].first);
  return out;
}

}  // namespace

Selection select(const ExtractionMatrix& matrix, std::size_t top_entities, std::size_t top_extractions) {
  if (top_entities < 1 || top_extractions < 1) throw ConfigError("selection sizes must be at least 1");
  Selection sel;
  sel.entities = top_k(matrix.entity_totals(), top_entities);
  sel.opinions = top_k(matrix.opinion_totals(), top_extractions);
  const std::set<std::string> keep_entities(sel.entities.begin(), sel.entities.end());
  const std::set<Opinion> keep_opinions(sel.opinions.begin(), sel.opinions.end());
  for (const auto& [e, row] : matrix.rows()) {
    if (!keep_entities.count(e)) continue;
    for (const auto& [o, c] : row) {
      if (keep_opinions.count(o)) sel.restricted.add(e, o, c);
    }
  }
  return sel;
}

double npmi(std::size_t n_ab, std::size_t n_a, std::size_t n_b, std::size_t n_entities) {
  if (n_entities == 0 || n_a == 0 || n_b == 0) throw DataError("npmi needs non-empty marginals");
  if (n_ab == 0) return -1.0;
  const double n = static_cast<double>(n_entities);
  const double p_ab = static_cast<double>(n_ab) / n;
  const double p_a = static_cast<double>(n_a) / n;
  const double p_b = static_cast<double>(n_b) / n;
  if (n_ab == n_entities) return 1.0;
  return std::log(p_ab / (p_a * p_b)) / -std::log(p_ab);
}

std::vector<Fact> mine_facts(const ExtractionMatrix& restricted, const MiningOptions& options) {
  if (!(options.npmi_threshold > 0.0 && options.npmi_threshold < 1.0)) {
    throw ConfigError("npmi threshold must lie in (0, 1)");
  }
  if (options.min_support < 1) throw ConfigError("min_support must be at least 1");

  const auto totals = restricted.opinion_totals();
  std::vector<Opinion> opinions;
  std::map<Opinion, std::size_t> index;
  for (const auto& [o, c] : totals) {
    index[o] = opinions.size();
    opinions.push_back(o);
  }
  const std::size_t n_entities = restricted.rows().size();
  std::vector<std::size_t> presence(opinions.size(), 0);
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> joint;
  for (const auto& [e, row] : restricted.rows()) {
    std::vector<std::size_t> ids;
    for (const auto& [o, c] : row) ids.push_back(index.at(o));
    for (std::size_t i = 0; i < ids.size(); ++i) {
      ++presence[ids[i]];
      for (std::size_t j = i + 1; j < ids.size(); ++j) ++joint[{ids[i], ids[j]}];
    }
  }

  std::vector<Fact> facts;
  for (const auto& [ids, n_ab] : joint) {
    if (n_ab < options.min_support) continue;
    const auto [a, b] = ids;
    const double w = npmi(n_ab, presence[a], presence[b], n_entities);
    if (w < options.npmi_threshold) continue;
    const Opinion& oa = opinions[a];
    const Opinion& ob = opinions[b];
    const std::size_t fa = totals.at(oa);
    const std::size_t fb = totals.at(ob);
    // Rarer opinion is the premise; on equal frequency the smaller key.
    const bool a_first = fa < fb || (fa == fb && oa < ob);
    facts.push_back(a_first ? Fact{oa, ob, w} : Fact{ob, oa, w});
  }
  std::sort(facts.begin(), facts.end(), [](const Fact& x, const Fact& y) {
    return std::tie(x.premise, x.conclusion) < std::tie(y.premise, y.conclusion);
  });
  return facts;
}

KnowledgeBase build_kb(std::string domain_name, const Selection& selection, std::vector<Fact> facts) {
  std::set<Opinion> used;
  for (const Fact& f : facts) {
    if (f.premise == f.conclusion) throw DataError(fmt::format("fact with identical ends '{}'", f.premise.key()));
    used.insert(f.premise);
    used.insert(f.conclusion);
  }
  KnowledgeBase kb{std::move(domain_name), {}, std::move(facts)};
  for (const Opinion& o : selection.opinions) {
    if (used.erase(o)) kb.opinions.push_back(o);
  }
  // Facts may name opinions outside the selection when supplied externally.
  for (const Opinion& o : used) kb.opinions.push_back(o);
  return kb;
}

double extraction_overlap(const KnowledgeBase& kb, const EdgeList& edges) {
  if (kb.opinions.empty()) throw DataError("empty knowledge base");
  std::size_t hits = 0;
  for (const Opinion& o : kb.opinions) hits += edges.has_node(o.key()) ? 1 : 0;
  return 100.0 * static_cast<double>(hits) / static_cast<double>(kb.opinions.size());
}

bool fact_derivable(const Fact& f, const EdgeList& edges) {
  const Opinion& p = f.premise;
  const Opinion& c = f.conclusion;
  if (!edges.has_edge(p.aspect, c.aspect)) return false;
  return edges.has_edge(p.modifier, c.modifier) || edges.has_edge(p.modifier, c.aspect) ||
         edges.has_edge(c.modifier, p.aspect);
}

double relation_overlap(const KnowledgeBase& kb, const EdgeList& edges) {
  if (kb.opinions.empty()) throw DataError("empty knowledge base");
  if (kb.facts.empty()) return 0.0;
  std::size_t hits = 0;
  for (const Fact& f : kb.facts) hits += fact_derivable(f, edges) ? 1 : 0;
  return 100.0 * static_cast<double>(hits) / static_cast<double>(kb.facts.size());
}

KbStats stats(const KnowledgeBase& kb, const ExtractionMatrix& restricted, const EdgeList& edges) {
  KbStats s;
  s.domain = kb.domain_name;
  s.n_entities = restricted.rows().size();
  s.n_extractions = restricted.opinion_totals().size();
  s.n_unique_opinions = kb.opinions.size();
  s.n_facts = kb.facts.size();
  s.extraction_overlap = extraction_overlap(kb, edges);
  s.relation_overlap = relation_overlap(kb, edges);
  return s;
}

nlohmann::json to_json(const KbStats& s) {
  return {
      {"domain", s.domain},
      {"n_entities", s.n_entities},
      {"n_extractions", s.n_extractions},
      {"n_unique_opinions", s.n_unique_opinions},
      {"n_facts", s.n_facts},
      {"extraction_overlap", s.extraction_overlap},
      {"relation_overlap", s.relation_overlap},
  };
}

std::filesystem::path opinions_path(const std::filesystem::path& kb_path) {
  return std::filesystem::path(kb_path.string() + ".opinions");
}

namespace {

constexpr const char* kHeader =
    "premise_modifier\tpremise_aspect\tconclusion_modifier\tconclusion_aspect\tweight";

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

}  // namespace

void save_kb(const KnowledgeBase& kb, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError(fmt::format("cannot write {}", path.string()));
  out << kHeader << '\n';
  for (const Fact& f : kb.facts) {
    out << fmt::format("{}\t{}\t{}\t{}\t{:.17g}\n", f.premise.modifier, f.premise.aspect, f.conclusion.modifier,
                       f.conclusion.aspect, f.weight);
  }
  const auto side = opinions_path(path);
  std::ofstream ops(side, std::ios::trunc);
  if (!ops) throw DataError(fmt::format("cannot write {}", side.string()));
  ops << "#domain\t" << kb.domain_name << '\n';
  for (const Opinion& o : kb.opinions) ops << o.modifier << '\t' << o.aspect << '\n';
  if (!out || !ops) throw DataError(fmt::format("write failed for {}", path.string()));
}

KnowledgeBase load_kb(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open {}", path.string()));
  KnowledgeBase kb;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1) {
      if (line != kHeader) throw DataError(fmt::format("{}: unexpected KB header", path.string()));
      continue;
    }
    if (line.empty()) continue;
    const auto f = split_tabs(line);
    if (f.size() != 5) throw DataError(fmt::format("{}: expected 5 fields at line {}", path.string(), line_no));
    double w = 0.0;
    try {
      w = std::stod(f[4]);
    } catch (const std::exception&) {
      throw DataError(fmt::format("{}: bad weight at line {}", path.string(), line_no));
    }
    kb.facts.push_back(Fact{Opinion(f[0], f[1]), Opinion(f[2], f[3]), w});
  }
  const auto side = opinions_path(path);
  std::ifstream ops(side);
  if (!ops) throw DataError(fmt::format("cannot open {}", side.string()));
  line_no = 0;
  while (std::getline(ops, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_tabs(line);
    if (f.size() != 2) throw DataError(fmt::format("{}: expected 2 fields at line {}", side.string(), line_no));
    if (f[0] == "#domain") {
      kb.domain_name = f[1];
      continue;
    }
    kb.opinions.emplace_back(f[0], f[1]);
  }
  return kb;
}

}  // namespace xsense::kb
