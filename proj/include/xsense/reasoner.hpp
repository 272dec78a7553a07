#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "xsense/corpus.hpp"
#include "xsense/kb.hpp"
#include "xsense/nn/checkpoint.hpp"
#include "xsense/nn/layers.hpp"
#include "xsense/nn/optimizer.hpp"

namespace xsense::reasoner {

inline constexpr std::size_t kBos = 0;
inline constexpr std::size_t kEos = 1;
inline constexpr std::size_t kUnk = 2;

struct ReasonerConfig {
  std::size_t embedding_dim = 50;
  std::size_t hidden_dim = 768;
  std::size_t epochs = 20;
  double learning_rate = 0.005;
  nn::OptimizerKind optimizer = nn::OptimizerKind::kAdam;
  std::uint64_t seed = 0;
};

// GRU encoder-decoder over opinion phrases. The encoder's final hidden state
// is the premise embedding and seeds the decoder.
class Seq2SeqModel {
 public:
  Seq2SeqModel() = default;
  Seq2SeqModel(Vocabulary vocab, std::size_t embedding_dim, std::size_t hidden_dim, std::uint64_t seed);

  const Vocabulary& vocab() const { return vocab_; }
  std::size_t embedding_dim() const { return embedding_.dim(); }
  std::size_t hidden_dim() const { return encoder_.hidden_dim(); }

  std::vector<std::size_t> encode_words(const std::string& phrase) const;

  nn::Vec encode(const std::vector<std::size_t>& ids) const;

  // Teacher-forced cross-entropy summed over the conclusion tokens and EOS.
  // With `accumulate`, adds gradients into the parameters.
  double pair_loss(const std::vector<std::size_t>& premise, const std::vector<std::size_t>& conclusion,
                   bool accumulate);

  // Greedy decoding; BOS and UNK are never emitted.
  std::vector<std::size_t> decode_ids(const std::vector<std::size_t>& premise, std::size_t max_len) const;

  nn::ParameterList parameters();
  nn::ConstParameterList parameters() const;
  nn::Embedding& embedding() { return embedding_; }

  nn::Checkpoint to_checkpoint() const;
  static Seq2SeqModel from_checkpoint(const nn::Checkpoint& ckpt);

  bool operator==(const Seq2SeqModel& o) const;

 private:
  Vocabulary vocab_;
  nn::Embedding embedding_;
  nn::GruCell encoder_;
  nn::GruCell decoder_;
  nn::Dense output_;
};

Vocabulary build_vocabulary(const kb::KnowledgeBase& kb);

struct TrainResult {
  Seq2SeqModel model;
  std::vector<double> epoch_losses;  // mean loss per target token; [0] is before training
};

// One training pair per fact. Throws on an empty fact list.
TrainResult train_reasoner(const kb::KnowledgeBase& kb, const WordVectors* word_vectors,
                           const ReasonerConfig& config);

struct PremiseEmbedding {
  std::string phrase;
  nn::Vec vector;
};

PremiseEmbedding embed_premise(const Seq2SeqModel& model, const std::string& phrase);

std::string decode(const Seq2SeqModel& model, const std::string& phrase, std::size_t max_len);

// Mean cross-entropy per target token over all facts.
double mean_token_loss(Seq2SeqModel& model, const kb::KnowledgeBase& kb);

}  // namespace xsense::reasoner
