#include "xsense/distmult.hpp"

#include <fmt/format.h>

#include <cmath>
#include <fstream>
#include <numeric>

#include "xsense/error.hpp"
#include "xsense/nn/loss.hpp"
#include "xsense/nn/optimizer.hpp"
#include "xsense/text.hpp"

namespace xsense::distmult {

std::vector<NamedTriple> parse_triples(std::istream& in) {
  std::vector<NamedTriple> out;
  std::string line;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<std::string> f;
    std::size_t start = 0;
    while (true) {
      const auto tab = line.find('\t', start);
      f.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (f.size() != 3) throw DataError(fmt::format("expected head<TAB>relation<TAB>tail at row {}", row));
    NamedTriple t{normalize_phrase(f[0]), normalize_phrase(f[1]), normalize_phrase(f[2])};
    if (t.head.empty() || t.relation.empty() || t.tail.empty()) {
      throw DataError(fmt::format("empty field at row {}", row));
    }
    out.push_back(std::move(t));
  }
  return out;
}

std::vector<NamedTriple> load_triples(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot open {}", path.string()));
  return parse_triples(in);
}

DistMultModel::DistMultModel(std::vector<std::string> entities, std::vector<std::string> relations,
                             std::size_t dim, std::uint64_t seed)
    : entity_names_(std::move(entities)), relation_names_(std::move(relations)) {
  if (dim < 1) throw ConfigError("DistMult dimension must be at least 1");
  for (std::size_t i = 0; i < entity_names_.size(); ++i) entity_index_.emplace(entity_names_[i], i);
  for (std::size_t i = 0; i < relation_names_.size(); ++i) relation_index_.emplace(relation_names_[i], i);
  if (entity_index_.size() != entity_names_.size() || relation_index_.size() != relation_names_.size()) {
    throw DataError("duplicate names in DistMult dictionaries");
  }
  Rng rng(seed);
  entity_ = nn::Parameter("entity", nn::xavier_uniform(entity_names_.size(), dim, rng));
  relation_ = nn::Parameter("relation", nn::xavier_uniform(relation_names_.size(), dim, rng));
}

DistMultModel DistMultModel::for_triples(const std::vector<NamedTriple>& triples, std::size_t dim,
                                         std::uint64_t seed) {
  std::set<std::string> ents, rels;
  for (const auto& t : triples) {
    ents.insert(t.head);
    ents.insert(t.tail);
    rels.insert(t.relation);
  }
  return DistMultModel({ents.begin(), ents.end()}, {rels.begin(), rels.end()}, dim, seed);
}

std::size_t DistMultModel::entity_id(const std::string& name) const {
  auto it = entity_index_.find(name);
  if (it == entity_index_.end()) throw DataError(fmt::format("unknown entity '{}'", name));
  return it->second;
}

std::size_t DistMultModel::relation_id(const std::string& name) const {
  auto it = relation_index_.find(name);
  if (it == relation_index_.end()) throw DataError(fmt::format("unknown relation '{}'", name));
  return it->second;
}

Triple DistMultModel::resolve(const NamedTriple& t) const {
  return Triple{entity_id(t.head), relation_id(t.relation), entity_id(t.tail)};
}

void DistMultModel::check(const Triple& t) const {
  if (t.head >= n_entities()) throw DataError(fmt::format("unknown entity id {}", t.head));
  if (t.tail >= n_entities()) throw DataError(fmt::format("unknown entity id {}", t.tail));
  if (t.relation >= n_relations()) throw DataError(fmt::format("unknown relation id {}", t.relation));
}

double DistMultModel::score(const Triple& t) const {
  check(t);
  const auto h = entity_.value.row(t.head);
  const auto r = relation_.value.row(t.relation);
  const auto e = entity_.value.row(t.tail);
  double s = 0.0;
  // (h * t) first so swapping head and tail gives the identical value.
  for (std::size_t k = 0; k < h.size(); ++k) s += (h[k] * e[k]) * r[k];
  return s;
}

nn::Checkpoint DistMultModel::to_checkpoint() const {
  nn::Checkpoint ckpt;
  ckpt.metadata["model"] = "distmult";
  ckpt.metadata["entities"] = entity_names_;
  ckpt.metadata["relations"] = relation_names_;
  ckpt.add(entity_.name, entity_.value);
  ckpt.add(relation_.name, relation_.value);
  return ckpt;
}

DistMultModel DistMultModel::from_checkpoint(const nn::Checkpoint& ckpt) {
  if (ckpt.metadata.value("model", "") != "distmult") throw DataError("checkpoint is not a DistMult model");
  const nn::Tensor2& ent = ckpt.get("entity");
  DistMultModel m(ckpt.metadata.at("entities").get<std::vector<std::string>>(),
                  ckpt.metadata.at("relations").get<std::vector<std::string>>(), ent.cols(), 0);
  if (ent.rows() != m.n_entities() || ckpt.get("relation").rows() != m.n_relations()) {
    throw DataError("DistMult checkpoint shapes do not match its dictionaries");
  }
  m.entity_.value = ent;
  m.relation_.value = ckpt.get("relation");
  return m;
}

namespace {

// Adds dL/ds · ∂s/∂θ for one triple.
void accumulate_score_grad(DistMultModel& model, const Triple& t, double dscore) {
  auto& E = model.entity_embeddings();
  auto& R = model.relation_embeddings();
  const auto h = E.value.row(t.head);
  const auto r = R.value.row(t.relation);
  const auto e = E.value.row(t.tail);
  auto gh = E.grad.row(t.head);
  auto gr = R.grad.row(t.relation);
  auto ge = E.grad.row(t.tail);
  for (std::size_t k = 0; k < h.size(); ++k) {
    const double hk = h[k], rk = r[k], ek = e[k];
    gh[k] += dscore * rk * ek;
    gr[k] += dscore * hk * ek;
    ge[k] += dscore * hk * rk;
  }
}

}  // namespace

double sample_loss(DistMultModel& model, const TrainingSample& sample, bool accumulate) {
  const double sp = model.score(sample.positive);
  double loss = nn::softplus(-sp);
  std::vector<double> neg_scores;
  for (const Triple& n : sample.negatives) {
    neg_scores.push_back(model.score(n));
    loss += nn::softplus(neg_scores.back());
  }
  if (accumulate) {
    accumulate_score_grad(model, sample.positive, -nn::sigmoid(-sp));
    for (std::size_t i = 0; i < sample.negatives.size(); ++i) {
      accumulate_score_grad(model, sample.negatives[i], nn::sigmoid(neg_scores[i]));
    }
  }
  return loss;
}

TrainingSample corrupt(const Triple& positive, std::size_t n_entities, std::size_t negatives, Rng& rng) {
  TrainingSample s{positive, {}};
  for (std::size_t i = 0; i < negatives; ++i) {
    Triple n = positive;
    if (rng.coin()) {
      n.head = rng.below(n_entities);
    } else {
      n.tail = rng.below(n_entities);
    }
    s.negatives.push_back(n);
  }
  return s;
}

std::vector<double> train_distmult(DistMultModel& model, const std::vector<Triple>& triples,
                                   const DistMultConfig& config) {
  if (triples.empty()) throw DataError("cannot train DistMult without triples");
  nn::Optimizer opt(nn::OptimizerKind::kAdam, config.learning_rate, model.parameters());
  Rng rng(config.seed ^ 0xd15717ULL);
  std::vector<std::size_t> order(triples.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> losses;

  // Loss before training, measured on a fixed draw of negatives.
  {
    Rng probe(config.seed ^ 0xfeedULL);
    double total = 0.0;
    for (const Triple& t : triples) {
      total += sample_loss(model, corrupt(t, model.n_entities(), config.negatives_per_positive, probe), false);
    }
    losses.push_back(total / static_cast<double>(triples.size()));
  }
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double total = 0.0;
    for (std::size_t i : order) {
      const TrainingSample s = corrupt(triples[i], model.n_entities(), config.negatives_per_positive, rng);
      opt.zero_grad();
      total += sample_loss(model, s, true);
      opt.step();
    }
    const double mean = total / static_cast<double>(triples.size());
    if (!std::isfinite(mean)) throw NumericalError(fmt::format("DistMult loss became non-finite in epoch {}", epoch + 1));
    losses.push_back(mean);
  }
  return losses;
}

DistMultTrainResult train_distmult(const std::vector<NamedTriple>& triples, const DistMultConfig& config) {
  if (config.dim < 1) throw ConfigError("DistMult dimension must be at least 1");
  if (triples.empty()) throw DataError("cannot train DistMult without triples");
  DistMultTrainResult result{DistMultModel::for_triples(triples, config.dim, config.seed), {}};
  std::vector<Triple> ids;
  for (const auto& t : triples) ids.push_back(result.model.resolve(t));
  result.epoch_losses = train_distmult(result.model, ids, config);
  return result;
}

RankMetrics rank_eval(const DistMultModel& model, const std::vector<Triple>& test, const std::set<Triple>& known) {
  if (test.empty()) throw DataError("rank evaluation needs at least one test triple");
  RankMetrics m;
  for (const Triple& t : test) {
    const double truth = model.score(t);
    std::size_t rank = 1;
    for (std::size_t e = 0; e < model.n_entities(); ++e) {
      if (e == t.tail) continue;
      const Triple cand{t.head, t.relation, e};
      if (known.count(cand)) continue;
      if (model.score(cand) >= truth) ++rank;
    }
    m.ranks.push_back(rank);
    m.mrr += 1.0 / static_cast<double>(rank);
    m.hits_at_1 += rank <= 1 ? 1.0 : 0.0;
    m.hits_at_10 += rank <= 10 ? 1.0 : 0.0;
  }
  const double n = static_cast<double>(test.size());
  m.mrr /= n;
  m.hits_at_1 /= n;
  m.hits_at_10 /= n;
  return m;
}

nn::Vec phrase_vector(const DistMultModel& model, const std::string& phrase) {
  const std::string norm = normalize_phrase(phrase);
  const auto& E = model.entity_embeddings().value;
  if (model.has_entity(norm)) {
    const auto row = E.row(model.entity_id(norm));
    return nn::Vec(row.begin(), row.end());
  }
  nn::Vec out(model.dim(), 0.0);
  std::size_t found = 0;
  for (const std::string& w : split_words(norm)) {
    if (!model.has_entity(w)) continue;
    const auto row = E.row(model.entity_id(w));
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += row[k];
    ++found;
  }
  if (found > 0) {
    for (double& v : out) v /= static_cast<double>(found);
  }
  return out;
}

}  // namespace xsense::distmult
