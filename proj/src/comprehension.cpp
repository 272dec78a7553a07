#include "xsense/comprehension.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "xsense/error.hpp"
#include "xsense/metrics.hpp"
#include "xsense/nn/loss.hpp"

namespace xsense::comprehension {

namespace {

constexpr std::size_t kUnkId = 0;
constexpr std::size_t kClsId = 1;
constexpr std::size_t kSepId = 2;

const OpinionTuple* first_extraction(const std::vector<OpinionTuple>& tuples) {
  if (tuples.empty()) return nullptr;
  return &*std::min_element(tuples.begin(), tuples.end(), [](const OpinionTuple& a, const OpinionTuple& b) {
    return std::tie(a.aspect_span.start, a.modifier_span.start) < std::tie(b.aspect_span.start, b.modifier_span.start);
  });
}

void append_sentence(ModelInput& in, const TokenSequence& sentence, int sentence_id) {
  for (const Token& t : sentence.tokens) {
    in.tokens.tokens.push_back(t);
    in.sentence_of_token.push_back(sentence_id);
  }
}

void append_synthetic(ModelInput& in, Token t) {
  in.tokens.tokens.push_back(std::move(t));
  in.sentence_of_token.push_back(-1);
}

}  // namespace

const char* task_name(Task t) {
  switch (t) {
    case Task::kAE: return "ae";
    case Task::kASC: return "asc";
    case Task::kQA: return "qa";
  }
  return "ae";
}

Task parse_task(std::string_view name) {
  if (name == "ae") return Task::kAE;
  if (name == "asc") return Task::kASC;
  if (name == "qa") return Task::kQA;
  throw ConfigError(fmt::format("unknown task '{}' (expected ae, asc or qa)", name));
}

TokenSequence build_input(Task task, std::span<const TokenSequence> parts) {
  const std::size_t expected = task == Task::kAE ? 1 : 2;
  if (parts.size() != expected) {
    throw DataError(fmt::format("{} input takes {} part(s), got {}", task_name(task), expected, parts.size()));
  }
  TokenSequence out;
  out.tokens.push_back(make_cls());
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out.tokens.push_back(make_sep());
    out.tokens.insert(out.tokens.end(), parts[i].tokens.begin(), parts[i].tokens.end());
  }
  return out;
}

Extractor rule_based_extractor(Lexicon lexicon) {
  return [lex = std::move(lexicon)](const TokenSequence& sentence, std::size_t index) {
    return extract_rule_based(sentence, lex, index);
  };
}

namespace {

std::vector<OpinionTuple> run_extractor(const Extractor& extract, const TokenSequence& sentence, std::size_t k) {
  if (!extract) return {};
  return extract(sentence, k);
}

}  // namespace

ModelInput make_input(const QAExample& ex, const Extractor& extract) {
  // Built part by part so each token keeps its sentence id; the layout is
  // exactly build_input(kQA, {question, review}).
  ModelInput in;
  append_synthetic(in, make_cls());
  append_sentence(in, ex.question, 0);
  in.sentence_extractions.push_back(run_extractor(extract, ex.question, 0));
  append_synthetic(in, make_sep());
  in.segment_begin = in.tokens.size();
  for (std::size_t k = 0; k < ex.review.sentences.size(); ++k) {
    append_sentence(in, ex.review.sentences[k], static_cast<int>(k + 1));
    in.sentence_extractions.push_back(run_extractor(extract, ex.review.sentences[k], k));
  }
  in.segment_end = in.tokens.size();
  return in;
}

ModelInput make_input(Task task, const AbsaExample& ex, const Extractor& extract) {
  if (task == Task::kQA) throw DataError("QA inputs are built from QA examples");
  ModelInput in;
  append_synthetic(in, make_cls());
  in.segment_begin = 1;
  const auto sentences = split_sentences(ex.sentence, ex.text);
  for (std::size_t k = 0; k < sentences.size(); ++k) {
    append_sentence(in, sentences[k], static_cast<int>(k));
    in.sentence_extractions.push_back(run_extractor(extract, sentences[k], k));
  }
  in.segment_end = in.tokens.size();
  if (task == Task::kASC) {
    if (!ex.target_aspect) throw DataError(fmt::format("ASC example {} has no target aspect", ex.id));
    in.cls_takes_first_extraction = true;
    append_synthetic(in, make_sep());
    for (std::size_t i = ex.target_aspect->start; i <= ex.target_aspect->end; ++i) {
      in.tokens.tokens.push_back(ex.sentence[i]);
      in.sentence_of_token.push_back(-1);
    }
  }
  return in;
}

nn::Vec ReasonerSource::vector_for(const OpinionTuple& opinion) const {
  return reasoner::embed_premise(*model_, opinion.key()).vector;
}

nn::Vec DistMultSource::vector_for(const OpinionTuple& opinion) const {
  return distmult::phrase_vector(*model_, opinion.key());
}

std::vector<nn::Vec> commonsense_rows(const ModelInput& input, const CommonsenseSource& source) {
  const std::size_t h = source.width();
  const nn::Vec zeros(h, 0.0);
  auto checked = [&](nn::Vec v) {
    if (v.size() != h) {
      throw DataError(fmt::format("{} source returned {} entries, expected {}", source.name(), v.size(), h));
    }
    return v;
  };
  std::vector<nn::Vec> per_sentence;
  const nn::Vec* input_first = nullptr;
  for (const auto& tuples : input.sentence_extractions) {
    const OpinionTuple* first = first_extraction(tuples);
    per_sentence.push_back(first ? checked(source.vector_for(*first)) : zeros);
    if (first && input_first == nullptr) input_first = &per_sentence.back();
  }
  // per_sentence is fully built; refresh the pointer past any reallocation.
  input_first = nullptr;
  for (std::size_t k = 0; k < per_sentence.size(); ++k) {
    if (first_extraction(input.sentence_extractions[k])) {
      input_first = &per_sentence[k];
      break;
    }
  }
  std::vector<nn::Vec> rows;
  rows.reserve(input.tokens.size());
  for (std::size_t i = 0; i < input.tokens.size(); ++i) {
    const int sid = input.sentence_of_token[i];
    if (sid >= 0) {
      rows.push_back(per_sentence.at(static_cast<std::size_t>(sid)));
    } else if (i == 0 && input.cls_takes_first_extraction && input_first != nullptr) {
      rows.push_back(*input_first);
    } else {
      rows.push_back(zeros);
    }
  }
  return rows;
}

AugmentedEncoderOutput concat_rows(const std::vector<nn::Vec>& encoder_out, const std::vector<nn::Vec>& extra) {
  if (encoder_out.size() != extra.size()) {
    throw DataError(fmt::format("{} encoder rows but {} commonsense rows", encoder_out.size(), extra.size()));
  }
  AugmentedEncoderOutput out;
  out.base_width = encoder_out.empty() ? 0 : encoder_out.front().size();
  out.extra_width = extra.empty() ? 0 : extra.front().size();
  out.rows.reserve(encoder_out.size());
  for (std::size_t i = 0; i < encoder_out.size(); ++i) {
    nn::Vec row = encoder_out[i];
    row.insert(row.end(), extra[i].begin(), extra[i].end());
    out.rows.push_back(std::move(row));
  }
  return out;
}

AugmentedEncoderOutput augment(const std::vector<nn::Vec>& encoder_out, const ModelInput& input,
                               const CommonsenseSource& source) {
  AugmentedEncoderOutput out = concat_rows(encoder_out, commonsense_rows(input, source));
  out.extra_width = source.width();
  return out;
}

// ---------------------------------------------------------------------------
// Encoder

TextEncoder::TextEncoder(Vocabulary vocab, const EncoderConfig& config, Rng& rng) : vocab_(std::move(vocab)) {
  if (config.hidden_dim < 2 || config.hidden_dim % 2 != 0) {
    throw ConfigError(fmt::format("encoder width must be a positive even number, got {}", config.hidden_dim));
  }
  if (config.embedding_dim == 0) throw ConfigError("encoder embedding width must be positive");
  embedding_ = nn::Embedding("encoder.embedding", nn::xavier_uniform(vocab_.size(), config.embedding_dim, rng));
  forward_ = nn::GruCell("encoder.forward", config.embedding_dim, config.hidden_dim / 2, rng);
  backward_ = nn::GruCell("encoder.backward", config.embedding_dim, config.hidden_dim / 2, rng);
}

Vocabulary TextEncoder::build_vocabulary(const std::vector<TokenSequence>& sequences) {
  std::vector<std::string> words;
  for (const auto& seq : sequences) {
    for (const Token& t : seq.tokens) {
      if (!t.synthetic()) words.push_back(to_lower(t.surface));
    }
  }
  return Vocabulary({"<unk>", "[CLS]", "[SEP]"}, words);
}

std::size_t TextEncoder::token_id(const Token& t) const {
  switch (t.kind) {
    case TokenKind::kCls: return kClsId;
    case TokenKind::kSep: return kSepId;
    case TokenKind::kWord: break;
  }
  return vocab_.id_or(to_lower(t.surface), kUnkId);
}

std::vector<nn::Vec> TextEncoder::forward(const TokenSequence& tokens, Cache* cache) const {
  const std::size_t n = tokens.size();
  const std::size_t half = forward_.hidden_dim();
  std::vector<nn::Vec> x(n);
  std::vector<std::size_t> ids(n);
  for (std::size_t t = 0; t < n; ++t) {
    ids[t] = token_id(tokens[t]);
    x[t] = embedding_.lookup(ids[t]);
  }
  std::vector<nn::Vec> out(n, nn::Vec(2 * half));
  if (cache != nullptr) {
    cache->ids = ids;
    cache->forward.assign(n, {});
    cache->backward.assign(n, {});
  }
  nn::Vec h(half, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    h = forward_.step(x[t], h, cache ? &cache->forward[t] : nullptr);
    std::copy(h.begin(), h.end(), out[t].begin());
  }
  h.assign(half, 0.0);
  for (std::size_t t = n; t-- > 0;) {
    h = backward_.step(x[t], h, cache ? &cache->backward[t] : nullptr);
    std::copy(h.begin(), h.end(), out[t].begin() + static_cast<std::ptrdiff_t>(half));
  }
  return out;
}

void TextEncoder::backward(const Cache& cache, const std::vector<nn::Vec>& d_out) {
  const std::size_t n = cache.ids.size();
  const std::size_t half = forward_.hidden_dim();
  std::vector<nn::Vec> dx(n, nn::Vec(embedding_.dim(), 0.0));
  nn::Vec carry(half, 0.0);
  for (std::size_t t = n; t-- > 0;) {
    nn::Vec dh(half);
    for (std::size_t i = 0; i < half; ++i) dh[i] = d_out[t][i] + carry[i];
    nn::Vec next(half, 0.0);
    forward_.backward(cache.forward[t], dh, dx[t], next);
    carry = std::move(next);
  }
  carry.assign(half, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    nn::Vec dh(half);
    for (std::size_t i = 0; i < half; ++i) dh[i] = d_out[t][half + i] + carry[i];
    nn::Vec next(half, 0.0);
    backward_.backward(cache.backward[t], dh, dx[t], next);
    carry = std::move(next);
  }
  for (std::size_t t = 0; t < n; ++t) embedding_.backward(cache.ids[t], dx[t]);
}

nn::ParameterList TextEncoder::parameters() {
  nn::ParameterList out = embedding_.parameters();
  for (auto* p : forward_.parameters()) out.push_back(p);
  for (auto* p : backward_.parameters()) out.push_back(p);
  return out;
}

nn::ConstParameterList TextEncoder::parameters() const {
  nn::ConstParameterList out = embedding_.parameters();
  for (const auto* p : forward_.parameters()) out.push_back(p);
  for (const auto* p : backward_.parameters()) out.push_back(p);
  return out;
}

// ---------------------------------------------------------------------------
// Heads

TaskHead::TaskHead(Task task, std::size_t base_width, std::size_t extra_width, Rng& rng)
    : task_(task), base_width_(base_width), extra_width_(extra_width) {
  const std::size_t in = base_width + extra_width;
  if (task == Task::kQA) {
    primary_ = nn::Dense("head.start", in, 1, rng);
    end_ = nn::Dense("head.end", in, 1, rng);
  } else {
    primary_ = nn::Dense(task == Task::kAE ? "head.bio" : "head.polarity", in, 3, rng);
  }
}

void TaskHead::zero_commonsense_columns() {
  for (nn::Dense* d : {&primary_, &end_}) {
    nn::Tensor2& w = d->weight().value;
    if (w.size() == 0) continue;
    for (std::size_t r = 0; r < w.rows(); ++r) {
      for (std::size_t c = base_width_; c < base_width_ + extra_width_; ++c) w(r, c) = 0.0;
    }
  }
}

nn::ParameterList TaskHead::parameters() {
  nn::ParameterList out = primary_.parameters();
  if (task_ == Task::kQA) {
    for (auto* p : end_.parameters()) out.push_back(p);
  }
  return out;
}

nn::ConstParameterList TaskHead::parameters() const {
  nn::ConstParameterList out = primary_.parameters();
  if (task_ == Task::kQA) {
    for (const auto* p : end_.parameters()) out.push_back(p);
  }
  return out;
}

nn::ParameterList TaskModel::parameters() {
  nn::ParameterList out = encoder.parameters();
  for (auto* p : head.parameters()) out.push_back(p);
  return out;
}

nn::Checkpoint TaskModel::to_checkpoint() const {
  nn::Checkpoint ckpt;
  ckpt.metadata["model"] = "task";
  ckpt.metadata["task"] = task_name(task);
  ckpt.metadata["vocab"] = encoder.vocab().words();
  ckpt.metadata["embedding_dim"] = encoder.embedding_dim();
  ckpt.metadata["hidden_dim"] = encoder.output_dim();
  ckpt.metadata["commonsense_width"] = head.extra_width();
  for (const auto* p : encoder.parameters()) ckpt.add(p->name, p->value);
  for (const auto* p : head.parameters()) ckpt.add(p->name, p->value);
  return ckpt;
}

TaskModel TaskModel::from_checkpoint(const nn::Checkpoint& ckpt) {
  if (ckpt.metadata.value("model", "") != "task") throw DataError("checkpoint is not a task model");
  EncoderConfig cfg{ckpt.metadata.at("embedding_dim").get<std::size_t>(),
                    ckpt.metadata.at("hidden_dim").get<std::size_t>()};
  TaskModel m = init_task_model(parse_task(ckpt.metadata.at("task").get<std::string>()),
                                Vocabulary::from_ordered(ckpt.metadata.at("vocab").get<std::vector<std::string>>()),
                                cfg, ckpt.metadata.at("commonsense_width").get<std::size_t>(), 0);
  for (nn::Parameter* p : m.parameters()) {
    const nn::Tensor2& t = ckpt.get(p->name);
    if (t.rows() != p->value.rows() || t.cols() != p->value.cols()) {
      throw DataError(fmt::format("checkpoint tensor {} has the wrong shape", p->name));
    }
    p->value = t;
  }
  return m;
}

TaskModel init_task_model(Task task, Vocabulary vocab, const EncoderConfig& config, std::size_t commonsense_width,
                          std::uint64_t seed) {
  Rng rng(seed);
  TaskModel m;
  m.task = task;
  m.encoder = TextEncoder(std::move(vocab), config, rng);
  m.head = TaskHead(task, m.encoder.output_dim(), commonsense_width, rng);
  return m;
}

// ---------------------------------------------------------------------------
// Examples

PreparedExample prepare(const QAExample& ex, const Extractor& extract, const CommonsenseSource& source) {
  PreparedExample p;
  p.id = ex.id;
  p.input = make_input(ex, extract);
  p.commonsense = commonsense_rows(p.input, source);
  p.gold_answer = ex.answer_text();
  p.source_text = ex.review.text;
  bool have_start = false, have_end = false;
  for (std::size_t i = p.input.segment_begin; i < p.input.segment_end; ++i) {
    const Token& t = p.input.tokens[i];
    if (!have_start && t.char_end > ex.answer_char_start) {
      p.answer_start_token = i;
      have_start = true;
    }
    if (t.char_start < ex.answer_char_end) {
      p.answer_end_token = i;
      have_end = true;
    }
  }
  if (!have_start || !have_end || p.answer_end_token < p.answer_start_token) {
    throw DataError(fmt::format("answer of QA example {} does not cover any review token", ex.id));
  }
  return p;
}

PreparedExample prepare(Task task, const AbsaExample& ex, const Extractor& extract, const CommonsenseSource& source) {
  PreparedExample p;
  p.id = ex.id;
  p.input = make_input(task, ex, extract);
  p.commonsense = commonsense_rows(p.input, source);
  p.source_text = ex.text;
  p.gold_spans = ex.aspect_spans;
  p.polarity = ex.polarity;
  if (task == Task::kASC && !ex.polarity) throw DataError(fmt::format("ASC example {} has no polarity", ex.id));
  p.token_labels.assign(p.input.tokens.size(), kNoLabel);
  for (std::size_t i = p.input.segment_begin; i < p.input.segment_end; ++i) p.token_labels[i] = kBioO;
  for (const TokenSpan& s : ex.aspect_spans) {
    p.token_labels[p.input.segment_begin + s.start] = kBioB;
    for (std::size_t i = s.start + 1; i <= s.end; ++i) p.token_labels[p.input.segment_begin + i] = kBioI;
  }
  return p;
}

// ---------------------------------------------------------------------------
// Losses and predictions

namespace {

struct Forward {
  TextEncoder::Cache cache;
  AugmentedEncoderOutput aug;
};

Forward run_encoder(const TaskModel& model, const PreparedExample& ex, bool keep_cache) {
  Forward f;
  const auto enc = model.encoder.forward(ex.input.tokens, keep_cache ? &f.cache : nullptr);
  f.aug = concat_rows(enc, ex.commonsense);
  if (f.aug.rows.empty() || f.aug.rows.front().size() != model.head.base_width() + model.head.extra_width()) {
    throw DataError("augmented width does not match the task head");
  }
  return f;
}

void add_base_grad(std::vector<nn::Vec>& d_enc, std::size_t i, const nn::Vec& d_aug, std::size_t base) {
  for (std::size_t k = 0; k < base; ++k) d_enc[i][k] += d_aug[k];
}

}  // namespace

double example_loss(TaskModel& model, const PreparedExample& ex, bool accumulate) {
  Forward f = run_encoder(model, ex, accumulate);
  const std::size_t n = ex.input.tokens.size();
  const std::size_t base = model.head.base_width();
  std::vector<nn::Vec> d_enc(n, nn::Vec(base, 0.0));
  double loss = 0.0;

  switch (model.task) {
    case Task::kAE: {
      std::size_t counted = 0;
      for (std::size_t i = 0; i < n; ++i) counted += ex.token_labels[i] != kNoLabel ? 1 : 0;
      if (counted == 0) return 0.0;
      const double scale = 1.0 / static_cast<double>(counted);
      for (std::size_t i = 0; i < n; ++i) {
        if (ex.token_labels[i] == kNoLabel) continue;
        nn::LossGrad lg = nn::softmax_xent(model.head.primary().forward(f.aug.rows[i]), ex.token_labels[i]);
        loss += scale * lg.loss;
        if (accumulate) {
          for (double& g : lg.grad) g *= scale;
          add_base_grad(d_enc, i, model.head.primary().backward(f.aug.rows[i], lg.grad), base);
        }
      }
      break;
    }
    case Task::kASC: {
      if (!ex.polarity) throw DataError(fmt::format("ASC example {} has no polarity", ex.id));
      nn::LossGrad lg =
          nn::softmax_xent(model.head.primary().forward(f.aug.rows[0]), static_cast<std::size_t>(*ex.polarity));
      loss = lg.loss;
      if (accumulate) add_base_grad(d_enc, 0, model.head.primary().backward(f.aug.rows[0], lg.grad), base);
      break;
    }
    case Task::kQA: {
      const std::size_t b = ex.input.segment_begin;
      const std::size_t e = ex.input.segment_end;
      if (e <= b) throw DataError(fmt::format("QA example {} has an empty review segment", ex.id));
      nn::Vec start(e - b), end(e - b);
      for (std::size_t i = b; i < e; ++i) {
        start[i - b] = model.head.primary().forward(f.aug.rows[i])[0];
        end[i - b] = model.head.end().forward(f.aug.rows[i])[0];
      }
      const nn::LossGrad ls = nn::softmax_xent(start, ex.answer_start_token - b);
      const nn::LossGrad le = nn::softmax_xent(end, ex.answer_end_token - b);
      loss = ls.loss + le.loss;
      if (accumulate) {
        for (std::size_t i = b; i < e; ++i) {
          const double gs[1] = {ls.grad[i - b]};
          const double ge[1] = {le.grad[i - b]};
          add_base_grad(d_enc, i, model.head.primary().backward(f.aug.rows[i], gs), base);
          add_base_grad(d_enc, i, model.head.end().backward(f.aug.rows[i], ge), base);
        }
      }
      break;
    }
  }
  if (accumulate) model.encoder.backward(f.cache, d_enc);
  return loss;
}

Logits compute_logits(const TaskModel& model, const PreparedExample& ex) {
  const Forward f = run_encoder(model, ex, false);
  Logits out;
  switch (model.task) {
    case Task::kAE:
      for (const auto& row : f.aug.rows) out.rows.push_back(model.head.primary().forward(row));
      break;
    case Task::kASC:
      out.rows.push_back(model.head.primary().forward(f.aug.rows[0]));
      break;
    case Task::kQA:
      for (const auto& row : f.aug.rows) {
        out.rows.push_back({model.head.primary().forward(row)[0], model.head.end().forward(row)[0]});
      }
      break;
  }
  return out;
}

std::vector<TokenSpan> ae_decode(const std::vector<BioLabel>& labels) {
  TagSequence tags;
  tags.reserve(labels.size());
  for (BioLabel l : labels) tags.push_back(l == kBioB ? Tag::kBAsp : l == kBioI ? Tag::kIAsp : Tag::kO);
  return spans_from_tags(tags).aspects;
}

std::vector<TokenSpan> ae_predict(const TaskModel& model, const PreparedExample& ex) {
  const Logits logits = compute_logits(model, ex);
  std::vector<BioLabel> labels;
  for (std::size_t i = ex.input.segment_begin; i < ex.input.segment_end; ++i) {
    const auto& row = logits.rows[i];
    labels.push_back(static_cast<BioLabel>(std::max_element(row.begin(), row.end()) - row.begin()));
  }
  return ae_decode(labels);
}

Polarity asc_decode(std::span<const double> logits) {
  if (logits.size() != kNumPolarities) throw DataError("ASC logits must have three entries");
  return static_cast<Polarity>(std::max_element(logits.begin(), logits.end()) - logits.begin());
}

Polarity asc_predict(const TaskModel& model, const PreparedExample& ex) {
  return asc_decode(compute_logits(model, ex).rows.front());
}

SpanChoice best_span(std::span<const double> start_logits, std::span<const double> end_logits, std::size_t begin,
                     std::size_t stop, std::size_t max_tokens) {
  if (stop <= begin) throw DataError("cannot pick an answer from an empty review segment");
  SpanChoice best{begin, begin, -std::numeric_limits<double>::infinity()};
  for (std::size_t i = begin; i < stop; ++i) {
    const std::size_t last = std::min(stop - 1, i + max_tokens);
    for (std::size_t j = i; j <= last; ++j) {
      const double s = start_logits[i] + end_logits[j];
      if (s > best.score) best = SpanChoice{i, j, s};
    }
  }
  return best;
}

CharSpan qa_predict(const TaskModel& model, const PreparedExample& ex, std::size_t max_answer_tokens) {
  if (ex.input.segment_end <= ex.input.segment_begin) throw DataError("review segment is empty");
  const Logits logits = compute_logits(model, ex);
  nn::Vec start(logits.rows.size()), end(logits.rows.size());
  for (std::size_t i = 0; i < logits.rows.size(); ++i) {
    start[i] = logits.rows[i][0];
    end[i] = logits.rows[i][1];
  }
  const SpanChoice c = best_span(start, end, ex.input.segment_begin, ex.input.segment_end, max_answer_tokens);
  return CharSpan{ex.input.tokens[c.start].char_start, ex.input.tokens[c.end].char_end};
}

std::map<std::string, double> evaluate(const TaskModel& model, const std::vector<PreparedExample>& data,
                                       std::size_t max_answer_tokens) {
  if (data.empty()) throw DataError("evaluation needs at least one example");
  std::map<std::string, double> out;
  switch (model.task) {
    case Task::kQA: {
      double f1 = 0.0, exact = 0.0;
      for (const auto& ex : data) {
        const CharSpan s = qa_predict(model, ex, max_answer_tokens);
        const auto score = metrics::token_f1(ex.source_text.substr(s.char_start, s.char_end - s.char_start),
                                             ex.gold_answer);
        f1 += score.f1;
        exact += score.exact;
      }
      out["f1"] = f1 / static_cast<double>(data.size());
      out["exact"] = exact / static_cast<double>(data.size());
      break;
    }
    case Task::kAE: {
      std::vector<std::vector<TokenSpan>> pred, gold;
      for (const auto& ex : data) {
        pred.push_back(ae_predict(model, ex));
        gold.push_back(ex.gold_spans);
      }
      const metrics::Prf prf = metrics::span_prf(pred, gold);
      out["precision"] = prf.precision;
      out["recall"] = prf.recall;
      out["f1"] = prf.f1;
      break;
    }
    case Task::kASC: {
      std::vector<Polarity> pred, gold;
      for (const auto& ex : data) {
        pred.push_back(asc_predict(model, ex));
        gold.push_back(ex.polarity.value());
      }
      const metrics::ClsScore s = metrics::cls_scores(pred, gold);
      out["accuracy"] = s.accuracy;
      out["macro_f1"] = s.macro_f1;
      break;
    }
  }
  return out;
}

double selection_metric(Task task, const std::map<std::string, double>& scores) {
  return scores.at(task == Task::kASC ? "macro_f1" : "f1");
}

nlohmann::json prediction_json(const TaskModel& model, const PreparedExample& ex, std::size_t max_answer_tokens) {
  switch (model.task) {
    case Task::kQA: {
      const CharSpan s = qa_predict(model, ex, max_answer_tokens);
      return {{"id", ex.id},
              {"char_start", s.char_start},
              {"char_end", s.char_end},
              {"text", ex.source_text.substr(s.char_start, s.char_end - s.char_start)}};
    }
    case Task::kAE: {
      nlohmann::json spans = nlohmann::json::array();
      for (const TokenSpan& s : ae_predict(model, ex)) spans.push_back({{"start", s.start}, {"end", s.end}});
      return {{"id", ex.id}, {"spans", spans}};
    }
    case Task::kASC:
      return {{"id", ex.id}, {"polarity", polarity_name(asc_predict(model, ex))}};
  }
  return {};
}

TaskConfig TaskConfig::full_run(Task task) {
  TaskConfig c;
  c.encoder = EncoderConfig{16, 1024};
  if (task == Task::kQA) {
    c.epochs = 10;
    c.learning_rate = 3e-6;
  } else {
    c.epochs = 20;
    c.learning_rate = 5e-5;
  }
  return c;
}

std::vector<PreparedExample> prepare_all(Task task, const TaskDataset& data, const Extractor& extract,
                                         const CommonsenseSource& source) {
  std::vector<PreparedExample> out;
  if (task == Task::kQA) {
    const auto* qa = std::get_if<std::vector<QAExample>>(&data);
    if (qa == nullptr) throw DataError("the QA task needs a QA dataset");
    for (const auto& ex : *qa) out.push_back(prepare(ex, extract, source));
  } else {
    const auto* absa = std::get_if<std::vector<AbsaExample>>(&data);
    if (absa == nullptr) throw DataError(fmt::format("the {} task needs an ABSA dataset", task_name(task)));
    for (const auto& ex : *absa) {
      if (task == Task::kASC && !ex.polarity) {
        throw DataError(fmt::format("ABSA example {} lacks a target/polarity for ASC", ex.id));
      }
      out.push_back(prepare(task, ex, extract, source));
    }
  }
  return out;
}

TrainedTask train_task(Task task, const std::vector<PreparedExample>& train,
                       const std::vector<PreparedExample>& validation, const TaskConfig& config,
                       std::size_t commonsense_width) {
  if (train.empty()) throw DataError("cannot train on an empty dataset");
  std::vector<TokenSequence> seqs;
  for (const auto& ex : train) seqs.push_back(ex.input.tokens);
  TrainedTask result{
      init_task_model(task, TextEncoder::build_vocabulary(seqs), config.encoder, commonsense_width, config.seed), {},
      0};
  TaskModel working = result.model;
  nn::Optimizer opt(config.optimizer, config.learning_rate, working.parameters());
  Rng rng(config.seed ^ 0x7a5cULL);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  double best = -std::numeric_limits<double>::infinity();

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double total = 0.0;
    for (std::size_t i : order) {
      opt.zero_grad();
      total += example_loss(working, train[i], true);
      opt.step();
    }
    if (!std::isfinite(total)) throw NumericalError(fmt::format("{} loss became non-finite in epoch {}", task_name(task), epoch));
    const double score = validation.empty()
                             ? static_cast<double>(epoch)
                             : selection_metric(task, evaluate(working, validation, config.max_answer_tokens));
    result.validation_scores.push_back(score);
    if (score > best) {
      best = score;
      result.model = working;
      result.best_epoch = epoch;
    }
  }
  return result;
}

TrainedTask train_task(Task task, const TaskDataset& train, const TaskDataset& validation, const TaskConfig& config,
                       const CommonsenseSource& source, const Extractor& extract) {
  const auto prepared_train = prepare_all(task, train, extract, source);
  if (prepared_train.empty()) throw DataError("cannot train on an empty dataset");
  const auto prepared_val = prepare_all(task, validation, extract, source);
  return train_task(task, prepared_train, prepared_val, config, source.width());
}

}  // namespace xsense::comprehension
