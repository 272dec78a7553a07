#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "xsense/corpus.hpp"
#include "xsense/distmult.hpp"
#include "xsense/nn/checkpoint.hpp"
#include "xsense/nn/layers.hpp"
#include "xsense/nn/optimizer.hpp"
#include "xsense/opinion.hpp"
#include "xsense/reasoner.hpp"

namespace xsense::comprehension {

enum class Task { kAE, kASC, kQA };

const char* task_name(Task t);
Task parse_task(std::string_view name);

// AE: [CLS] review
// ASC: [CLS] review [SEP] aspect
// QA: [CLS] question [SEP] review
TokenSequence build_input(Task task, std::span<const TokenSequence> parts);

// Sentence-level extractor used to pick commonsense vectors. An empty
// extractor yields no tuples.
using Extractor = std::function<std::vector<OpinionTuple>(const TokenSequence& sentence, std::size_t sentence_index)>;

Extractor rule_based_extractor(Lexicon lexicon);

// A built input plus what augmentation needs to know about it.
struct ModelInput {
  TokenSequence tokens;
  // Sentence id per token, -1 for tokens outside any sentence.
  std::vector<int> sentence_of_token;
  std::vector<std::vector<OpinionTuple>> sentence_extractions;
  // ASC: the CLS token carries the first extraction of the whole input.
  bool cls_takes_first_extraction = false;
  // Review (AE/QA) or sentence (ASC) tokens: [segment_begin, segment_end).
  std::size_t segment_begin = 0;
  std::size_t segment_end = 0;
};

ModelInput make_input(const QAExample& ex, const Extractor& extract);
ModelInput make_input(Task task, const AbsaExample& ex, const Extractor& extract);

class CommonsenseSource {
 public:
  virtual ~CommonsenseSource() = default;
  virtual std::size_t width() const = 0;
  virtual nn::Vec vector_for(const OpinionTuple& opinion) const = 0;
  virtual std::string name() const = 0;
};

class ZeroSource : public CommonsenseSource {
 public:
  explicit ZeroSource(std::size_t width) : width_(width) {}
  std::size_t width() const override { return width_; }
  nn::Vec vector_for(const OpinionTuple&) const override { return nn::Vec(width_, 0.0); }
  std::string name() const override { return "zero"; }

 private:
  std::size_t width_;
};

// Encoder final state of the seq2seq reasoner for "modifier aspect".
class ReasonerSource : public CommonsenseSource {
 public:
  explicit ReasonerSource(const reasoner::Seq2SeqModel& model) : model_(&model) {}
  std::size_t width() const override { return model_->hidden_dim(); }
  nn::Vec vector_for(const OpinionTuple& opinion) const override;
  std::string name() const override { return "reasoner"; }

 private:
  const reasoner::Seq2SeqModel* model_;
};

class DistMultSource : public CommonsenseSource {
 public:
  explicit DistMultSource(const distmult::DistMultModel& model) : model_(&model) {}
  std::size_t width() const override { return model_->dim(); }
  nn::Vec vector_for(const OpinionTuple& opinion) const override;
  std::string name() const override { return "distmult"; }

 private:
  const distmult::DistMultModel* model_;
};

// The H-wide vector appended to each token: the first extraction of the
// token's sentence, zeros when that sentence has none.
std::vector<nn::Vec> commonsense_rows(const ModelInput& input, const CommonsenseSource& source);

struct AugmentedEncoderOutput {
  std::size_t base_width = 0;
  std::size_t extra_width = 0;
  std::vector<nn::Vec> rows;
};

AugmentedEncoderOutput augment(const std::vector<nn::Vec>& encoder_out, const ModelInput& input,
                               const CommonsenseSource& source);
AugmentedEncoderOutput concat_rows(const std::vector<nn::Vec>& encoder_out, const std::vector<nn::Vec>& extra);

struct EncoderConfig {
  std::size_t embedding_dim = 16;
  // D; each direction gets D / 2.
  std::size_t hidden_dim = 32;
};

// Bidirectional GRU stand-in for the pre-trained encoder.
class TextEncoder {
 public:
  struct Cache {
    std::vector<std::size_t> ids;
    std::vector<nn::GruCache> forward;
    std::vector<nn::GruCache> backward;
  };

  TextEncoder() = default;
  TextEncoder(Vocabulary vocab, const EncoderConfig& config, Rng& rng);

  static Vocabulary build_vocabulary(const std::vector<TokenSequence>& sequences);

  std::size_t output_dim() const { return 2 * forward_.hidden_dim(); }
  std::size_t embedding_dim() const { return embedding_.dim(); }
  const Vocabulary& vocab() const { return vocab_; }

  std::size_t token_id(const Token& t) const;
  std::vector<nn::Vec> forward(const TokenSequence& tokens, Cache* cache = nullptr) const;
  void backward(const Cache& cache, const std::vector<nn::Vec>& d_out);

  nn::ParameterList parameters();
  nn::ConstParameterList parameters() const;

 private:
  Vocabulary vocab_;
  nn::Embedding embedding_;
  nn::GruCell forward_;
  nn::GruCell backward_;
};

// AE: dense (D+H -> 3) per token over {B, I, O}; ASC: dense (D+H -> 3) on CLS;
// QA: two dense (D+H -> 1) layers for start and end.
class TaskHead {
 public:
  TaskHead() = default;
  TaskHead(Task task, std::size_t base_width, std::size_t extra_width, Rng& rng);

  Task task() const { return task_; }
  std::size_t base_width() const { return base_width_; }
  std::size_t extra_width() const { return extra_width_; }

  nn::Dense& primary() { return primary_; }
  nn::Dense& end() { return end_; }
  const nn::Dense& primary() const { return primary_; }
  const nn::Dense& end() const { return end_; }

  // Zeroes the weight columns reading the appended commonsense entries.
  void zero_commonsense_columns();

  nn::ParameterList parameters();
  nn::ConstParameterList parameters() const;

 private:
  Task task_ = Task::kAE;
  std::size_t base_width_ = 0;
  std::size_t extra_width_ = 0;
  nn::Dense primary_;
  nn::Dense end_;
};

struct TaskModel {
  Task task = Task::kAE;
  TextEncoder encoder;
  TaskHead head;

  nn::ParameterList parameters();
  nn::Checkpoint to_checkpoint() const;
  static TaskModel from_checkpoint(const nn::Checkpoint& ckpt);
};

TaskModel init_task_model(Task task, Vocabulary vocab, const EncoderConfig& config, std::size_t commonsense_width,
                          std::uint64_t seed);

enum BioLabel : std::size_t { kBioB = 0, kBioI = 1, kBioO = 2 };
inline constexpr std::size_t kNoLabel = static_cast<std::size_t>(-1);

// A model-ready example with its fixed commonsense rows and gold labels.
struct PreparedExample {
  std::string id;
  ModelInput input;
  std::vector<nn::Vec> commonsense;
  // AE: BIO label per input token (kNoLabel outside the segment / synthetic).
  std::vector<std::size_t> token_labels;
  std::vector<TokenSpan> gold_spans;
  std::optional<Polarity> polarity;
  std::size_t answer_start_token = 0;
  std::size_t answer_end_token = 0;
  std::string gold_answer;
  std::string source_text;
};

PreparedExample prepare(const QAExample& ex, const Extractor& extract, const CommonsenseSource& source);
PreparedExample prepare(Task task, const AbsaExample& ex, const Extractor& extract, const CommonsenseSource& source);

// Loss of one example; with `accumulate` adds gradients into every parameter.
double example_loss(TaskModel& model, const PreparedExample& ex, bool accumulate);

struct Logits {
  std::vector<nn::Vec> rows;  // per-token logits (AE/QA) or a single CLS row (ASC)
};

Logits compute_logits(const TaskModel& model, const PreparedExample& ex);

// BIO argmax decoding with orphan-I repair. Indices are segment-relative.
std::vector<TokenSpan> ae_decode(const std::vector<BioLabel>& labels);
std::vector<TokenSpan> ae_predict(const TaskModel& model, const PreparedExample& ex);

// Ties resolve in the order positive, negative, neutral.
Polarity asc_decode(std::span<const double> logits);
Polarity asc_predict(const TaskModel& model, const PreparedExample& ex);

struct SpanChoice {
  std::size_t start = 0;
  std::size_t end = 0;
  double score = 0.0;
};

// Maximizes start[i] + end[j] over begin <= i <= j < stop with j - i <= max_tokens;
// ties go to the smaller i, then the smaller j.
SpanChoice best_span(std::span<const double> start_logits, std::span<const double> end_logits, std::size_t begin,
                     std::size_t stop, std::size_t max_tokens);

struct CharSpan {
  std::size_t char_start = 0;
  std::size_t char_end = 0;
};

CharSpan qa_predict(const TaskModel& model, const PreparedExample& ex, std::size_t max_answer_tokens = 50);

// Task metrics: QA {f1, exact}, AE {precision, recall, f1}, ASC {accuracy, macro_f1}.
std::map<std::string, double> evaluate(const TaskModel& model, const std::vector<PreparedExample>& data,
                                       std::size_t max_answer_tokens = 50);

// Selection metric: token F1 (QA), span F1 (AE), macro-F1 (ASC).
double selection_metric(Task task, const std::map<std::string, double>& scores);

nlohmann::json prediction_json(const TaskModel& model, const PreparedExample& ex, std::size_t max_answer_tokens = 50);

struct TaskConfig {
  EncoderConfig encoder;
  std::size_t epochs = 10;
  double learning_rate = 3e-6;
  nn::OptimizerKind optimizer = nn::OptimizerKind::kAdam;
  std::uint64_t seed = 0;
  std::size_t max_answer_tokens = 50;

  // Full-run schedule: QA 10 epochs at 3e-6, AE/ASC 20 epochs at 5e-5.
  static TaskConfig full_run(Task task);
};

using TaskDataset = std::variant<std::vector<QAExample>, std::vector<AbsaExample>>;

std::vector<PreparedExample> prepare_all(Task task, const TaskDataset& data, const Extractor& extract,
                                         const CommonsenseSource& source);

struct TrainedTask {
  TaskModel model;
  std::vector<double> validation_scores;  // selection metric after each epoch
  std::size_t best_epoch = 0;             // 0 = the initialization
};

TrainedTask train_task(Task task, const std::vector<PreparedExample>& train,
                       const std::vector<PreparedExample>& validation, const TaskConfig& config,
                       std::size_t commonsense_width);

// Validates task/dataset shape, prepares both splits and trains.
TrainedTask train_task(Task task, const TaskDataset& train, const TaskDataset& validation, const TaskConfig& config,
                       const CommonsenseSource& source, const Extractor& extract);

}  // namespace xsense::comprehension
