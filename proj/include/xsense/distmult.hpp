#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include "xsense/nn/checkpoint.hpp"
#include "xsense/nn/optimizer.hpp"
#include "xsense/nn/tensor.hpp"

namespace xsense::distmult {

struct NamedTriple {
  std::string head;
  std::string relation;
  std::string tail;

  auto operator<=>(const NamedTriple&) const = default;
};

struct Triple {
  std::size_t head = 0;
  std::size_t relation = 0;
  std::size_t tail = 0;

  auto operator<=>(const Triple&) const = default;
};

// TSV "head<TAB>relation<TAB>tail"; entity names are normalized phrases.
std::vector<NamedTriple> load_triples(const std::filesystem::path& path);
std::vector<NamedTriple> parse_triples(std::istream& in);

// score(h, r, t) = Σ_k e_h[k] · w_r[k] · e_t[k]
class DistMultModel {
 public:
  DistMultModel() = default;
  // Dictionaries are the sorted distinct names; embeddings are Xavier-initialized.
  DistMultModel(std::vector<std::string> entities, std::vector<std::string> relations, std::size_t dim,
                std::uint64_t seed);

  static DistMultModel for_triples(const std::vector<NamedTriple>& triples, std::size_t dim, std::uint64_t seed);

  std::size_t dim() const { return entity_.value.cols(); }
  std::size_t n_entities() const { return entity_names_.size(); }
  std::size_t n_relations() const { return relation_names_.size(); }
  const std::vector<std::string>& entity_names() const { return entity_names_; }
  const std::vector<std::string>& relation_names() const { return relation_names_; }

  std::size_t entity_id(const std::string& name) const;
  std::size_t relation_id(const std::string& name) const;
  bool has_entity(const std::string& name) const { return entity_index_.count(name) != 0; }
  Triple resolve(const NamedTriple& t) const;

  double score(const Triple& t) const;
  double score(const NamedTriple& t) const { return score(resolve(t)); }

  nn::Parameter& entity_embeddings() { return entity_; }
  nn::Parameter& relation_embeddings() { return relation_; }
  const nn::Parameter& entity_embeddings() const { return entity_; }
  const nn::Parameter& relation_embeddings() const { return relation_; }
  nn::ParameterList parameters() { return {&entity_, &relation_}; }

  nn::Checkpoint to_checkpoint() const;
  static DistMultModel from_checkpoint(const nn::Checkpoint& ckpt);

 private:
  void check(const Triple& t) const;

  std::vector<std::string> entity_names_;
  std::vector<std::string> relation_names_;
  std::map<std::string, std::size_t> entity_index_;
  std::map<std::string, std::size_t> relation_index_;
  nn::Parameter entity_;
  nn::Parameter relation_;
};

// A positive with its corrupted negatives.
struct TrainingSample {
  Triple positive;
  std::vector<Triple> negatives;
};

// softplus(-s(pos)) + Σ softplus(s(neg)); accumulates gradients on request.
double sample_loss(DistMultModel& model, const TrainingSample& sample, bool accumulate);

// Replaces head or tail (fair coin) with a uniformly drawn entity.
TrainingSample corrupt(const Triple& positive, std::size_t n_entities, std::size_t negatives, Rng& rng);

struct DistMultConfig {
  std::size_t dim = 16;
  std::size_t epochs = 100;
  std::size_t negatives_per_positive = 8;
  double learning_rate = 0.01;
  std::uint64_t seed = 0;
};

struct DistMultTrainResult {
  DistMultModel model;
  std::vector<double> epoch_losses;  // mean loss per positive; [0] before training
};

DistMultTrainResult train_distmult(const std::vector<NamedTriple>& triples, const DistMultConfig& config);
// Trains an existing model in place (dictionaries must cover the triples).
std::vector<double> train_distmult(DistMultModel& model, const std::vector<Triple>& triples,
                                   const DistMultConfig& config);

struct RankMetrics {
  double mrr = 0.0;
  double hits_at_1 = 0.0;
  double hits_at_10 = 0.0;
  std::vector<std::size_t> ranks;
};

// Filtered tail ranking: rank = 1 + #{e != t : (h, r, e) not known, score(e) >= score(t)}.
RankMetrics rank_eval(const DistMultModel& model, const std::vector<Triple>& test, const std::set<Triple>& known);

// Exact entity match, else mean of known word rows, else zeros.
nn::Vec phrase_vector(const DistMultModel& model, const std::string& phrase);

}  // namespace xsense::distmult
