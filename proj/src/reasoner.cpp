#include "xsense/reasoner.hpp"

#include <fmt/format.h>

#include <cmath>
#include <numeric>
#include <set>

#include "xsense/error.hpp"
#include "xsense/nn/loss.hpp"

namespace xsense::reasoner {

namespace {

std::vector<std::string> specials() { return {"<bos>", "<eos>", "<unk>"}; }

struct Pair {
  std::vector<std::size_t> premise;
  std::vector<std::size_t> conclusion;
};

}  // namespace

Vocabulary build_vocabulary(const kb::KnowledgeBase& kb) {
  std::vector<std::string> words;
  for (const kb::Fact& f : kb.facts) {
    for (const auto* o : {&f.premise, &f.conclusion}) {
      for (auto& w : split_words(o->key())) words.push_back(std::move(w));
    }
  }
  return Vocabulary(specials(), words);
}

Seq2SeqModel::Seq2SeqModel(Vocabulary vocab, std::size_t embedding_dim, std::size_t hidden_dim,
                           std::uint64_t seed)
    : vocab_(std::move(vocab)) {
  if (embedding_dim == 0 || hidden_dim == 0) throw ConfigError("reasoner dimensions must be positive");
  Rng rng(seed);
  embedding_ = nn::Embedding("embedding", nn::xavier_uniform(vocab_.size(), embedding_dim, rng));
  encoder_ = nn::GruCell("encoder", embedding_dim, hidden_dim, rng);
  decoder_ = nn::GruCell("decoder", embedding_dim, hidden_dim, rng);
  output_ = nn::Dense("output", hidden_dim, vocab_.size(), rng);
}

std::vector<std::size_t> Seq2SeqModel::encode_words(const std::string& phrase) const {
  std::vector<std::size_t> ids;
  for (const std::string& w : split_words(normalize_phrase(phrase))) ids.push_back(vocab_.id_or(w, kUnk));
  return ids;
}

nn::Vec Seq2SeqModel::encode(const std::vector<std::size_t>& ids) const {
  nn::Vec h(hidden_dim(), 0.0);
  for (std::size_t id : ids) h = encoder_.step(embedding_.lookup(id), h);
  return h;
}

double Seq2SeqModel::pair_loss(const std::vector<std::size_t>& premise, const std::vector<std::size_t>& conclusion,
                               bool accumulate) {
  const std::size_t hdim = hidden_dim();
  // Encoder.
  std::vector<nn::GruCache> enc_cache(premise.size());
  nn::Vec h(hdim, 0.0);
  for (std::size_t t = 0; t < premise.size(); ++t) {
    h = encoder_.step(embedding_.lookup(premise[t]), h, &enc_cache[t]);
  }
  // Decoder: inputs BOS c1..cn, targets c1..cn EOS.
  std::vector<std::size_t> inputs{kBos};
  inputs.insert(inputs.end(), conclusion.begin(), conclusion.end());
  std::vector<std::size_t> targets(conclusion.begin(), conclusion.end());
  targets.push_back(kEos);

  const std::size_t steps = inputs.size();
  std::vector<nn::GruCache> dec_cache(steps);
  std::vector<nn::Vec> hiddens(steps);
  std::vector<nn::Vec> dlogits(steps);
  double loss = 0.0;
  for (std::size_t t = 0; t < steps; ++t) {
    h = decoder_.step(embedding_.lookup(inputs[t]), h, &dec_cache[t]);
    hiddens[t] = h;
    nn::LossGrad lg = nn::softmax_xent(output_.forward(h), targets[t]);
    loss += lg.loss;
    dlogits[t] = std::move(lg.grad);
  }
  if (!accumulate) return loss;

  nn::Vec dh(hdim, 0.0);
  for (std::size_t t = steps; t-- > 0;) {
    nn::Vec dh_out = output_.backward(hiddens[t], dlogits[t]);
    for (std::size_t i = 0; i < hdim; ++i) dh_out[i] += dh[i];
    nn::Vec dx(embedding_dim(), 0.0);
    nn::Vec dh_prev(hdim, 0.0);
    decoder_.backward(dec_cache[t], dh_out, dx, dh_prev);
    embedding_.backward(inputs[t], dx);
    dh = std::move(dh_prev);
  }
  for (std::size_t t = premise.size(); t-- > 0;) {
    nn::Vec dx(embedding_dim(), 0.0);
    nn::Vec dh_prev(hdim, 0.0);
    encoder_.backward(enc_cache[t], dh, dx, dh_prev);
    embedding_.backward(premise[t], dx);
    dh = std::move(dh_prev);
  }
  return loss;
}

std::vector<std::size_t> Seq2SeqModel::decode_ids(const std::vector<std::size_t>& premise,
                                                  std::size_t max_len) const {
  nn::Vec h = encode(premise);
  std::vector<std::size_t> out;
  std::size_t input = kBos;
  while (out.size() < max_len) {
    h = decoder_.step(embedding_.lookup(input), h);
    const nn::Vec logits = output_.forward(h);
    std::size_t best = kEos;
    for (std::size_t k = 0; k < logits.size(); ++k) {
      if (k == kBos || k == kUnk) continue;
      if (logits[k] > logits[best]) best = k;
    }
    if (best == kEos) break;
    out.push_back(best);
    input = best;
  }
  return out;
}

nn::ParameterList Seq2SeqModel::parameters() {
  nn::ParameterList out = embedding_.parameters();
  for (auto* p : encoder_.parameters()) out.push_back(p);
  for (auto* p : decoder_.parameters()) out.push_back(p);
  for (auto* p : output_.parameters()) out.push_back(p);
  return out;
}

nn::ConstParameterList Seq2SeqModel::parameters() const {
  nn::ConstParameterList out = embedding_.parameters();
  for (const auto* p : encoder_.parameters()) out.push_back(p);
  for (const auto* p : decoder_.parameters()) out.push_back(p);
  for (const auto* p : output_.parameters()) out.push_back(p);
  return out;
}

nn::Checkpoint Seq2SeqModel::to_checkpoint() const {
  nn::Checkpoint ckpt;
  ckpt.metadata["model"] = "seq2seq";
  ckpt.metadata["vocab"] = vocab_.words();
  ckpt.metadata["embedding_dim"] = embedding_dim();
  ckpt.metadata["hidden_dim"] = hidden_dim();
  for (const nn::Parameter* p : parameters()) ckpt.add(p->name, p->value);
  return ckpt;
}

Seq2SeqModel Seq2SeqModel::from_checkpoint(const nn::Checkpoint& ckpt) {
  if (ckpt.metadata.value("model", "") != "seq2seq") throw DataError("checkpoint is not a seq2seq reasoner");
  Seq2SeqModel m(Vocabulary::from_ordered(ckpt.metadata.at("vocab").get<std::vector<std::string>>()),
                 ckpt.metadata.at("embedding_dim").get<std::size_t>(),
                 ckpt.metadata.at("hidden_dim").get<std::size_t>(), 0);
  for (nn::Parameter* p : m.parameters()) {
    const nn::Tensor2& t = ckpt.get(p->name);
    if (t.rows() != p->value.rows() || t.cols() != p->value.cols()) {
      throw DataError(fmt::format("checkpoint tensor {} has the wrong shape", p->name));
    }
    p->value = t;
  }
  return m;
}

bool Seq2SeqModel::operator==(const Seq2SeqModel& o) const {
  if (!(vocab_ == o.vocab_)) return false;
  const auto pa = parameters();
  const auto pb = o.parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (!(pa[i]->value == pb[i]->value)) return false;
  }
  return true;
}

double mean_token_loss(Seq2SeqModel& model, const kb::KnowledgeBase& kb) {
  double total = 0.0;
  std::size_t tokens = 0;
  for (const kb::Fact& f : kb.facts) {
    const auto c = model.encode_words(f.conclusion.key());
    total += model.pair_loss(model.encode_words(f.premise.key()), c, false);
    tokens += c.size() + 1;
  }
  return tokens == 0 ? 0.0 : total / static_cast<double>(tokens);
}

TrainResult train_reasoner(const kb::KnowledgeBase& kb, const WordVectors* word_vectors,
                           const ReasonerConfig& config) {
  if (kb.facts.empty()) throw DataError("cannot train the reasoner on a knowledge base without facts");
  TrainResult result{Seq2SeqModel(build_vocabulary(kb), config.embedding_dim, config.hidden_dim, config.seed), {}};
  Seq2SeqModel& model = result.model;
  if (word_vectors != nullptr) {
    model.embedding().table().value = nn::from_word_vectors(model.vocab(), *word_vectors, config.embedding_dim);
  }

  std::vector<Pair> pairs;
  std::size_t n_tokens = 0;
  for (const kb::Fact& f : kb.facts) {
    pairs.push_back(Pair{model.encode_words(f.premise.key()), model.encode_words(f.conclusion.key())});
    n_tokens += pairs.back().conclusion.size() + 1;
  }

  nn::ParameterList params = model.parameters();
  nn::Optimizer opt(config.optimizer, config.learning_rate, params);
  Rng rng(config.seed ^ 0x5eed5eedULL);
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), 0);

  result.epoch_losses.push_back(mean_token_loss(model, kb));
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double total = 0.0;
    for (std::size_t i : order) {
      opt.zero_grad();
      total += model.pair_loss(pairs[i].premise, pairs[i].conclusion, true);
      opt.step();
    }
    const double mean = total / static_cast<double>(n_tokens);
    if (!std::isfinite(mean)) {
      throw NumericalError(fmt::format("reasoner loss became non-finite in epoch {}", epoch + 1));
    }
    result.epoch_losses.push_back(mean);
  }
  return result;
}

PremiseEmbedding embed_premise(const Seq2SeqModel& model, const std::string& phrase) {
  return PremiseEmbedding{normalize_phrase(phrase), model.encode(model.encode_words(phrase))};
}

std::string decode(const Seq2SeqModel& model, const std::string& phrase, std::size_t max_len) {
  std::string out;
  for (std::size_t id : model.decode_ids(model.encode_words(phrase), max_len)) {
    if (!out.empty()) out += ' ';
    out += model.vocab().word(id);
  }
  return out;
}

}  // namespace xsense::reasoner
