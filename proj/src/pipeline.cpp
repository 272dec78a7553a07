#include "xsense/pipeline.hpp"

#include <fmt/format.h>
#include <openssl/evp.h>
#include <spdlog/spdlog.h>

#include <fstream>
#include <memory>
#include <optional>
#include <set>
#include <sstream>

#include "xsense/error.hpp"
#include "xsense/metrics.hpp"

namespace xsense::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> kNames = {"extract",        "build-kb", "train-reasoner",
                                                  "embed",          "train-distmult", "train-task",
                                                  "evaluate",       "overlap",  "repro-report"};
  return kNames;
}

const json& default_config() {
  static const json kDefaults = {
      {"reviews", ""},
      {"lexicon", ""},
      {"tagger_data", ""},
      {"tuples", ""},
      {"kb", ""},
      {"edges", ""},
      {"word_vectors", ""},
      {"triples", ""},
      {"test_triples", ""},
      {"checkpoint", ""},
      {"phrases", ""},
      {"train", ""},
      {"validation", ""},
      {"test", ""},
      {"predictions", ""},
      {"output", ""},
      {"domain", "domain"},
      {"seed", 0},
      {"overwrite", false},
      {"top_entities", 2000},
      {"top_extractions", 5000},
      {"npmi_threshold", 0.3},
      {"min_support", 3},
      {"tagger_epochs", 10},
      {"optimizer", "adam"},
      {"reasoner_embedding_dim", 50},
      {"reasoner_hidden_dim", 768},
      {"reasoner_epochs", 20},
      {"reasoner_lr", 0.005},
      {"max_decode_len", 10},
      {"distmult_dim", 16},
      {"distmult_epochs", 100},
      {"distmult_negatives", 8},
      {"distmult_lr", 0.01},
      {"task", "qa"},
      {"task_epochs", nullptr},
      {"task_lr", nullptr},
      {"encoder_embedding_dim", 16},
      {"encoder_hidden_dim", 32},
      {"max_answer_tokens", 50},
      {"source", "zero"},
      {"source_checkpoint", ""},
      {"commonsense_width", 16},
      {"repro_seeds", {0, 1, 2, 3, 4}},
      {"repro_reasoner_epochs", nullptr},
      {"repro_task_epochs", nullptr},
  };
  return kDefaults;
}

namespace {

bool compatible(const json& def, const json& value) {
  if (def.is_null()) return value.is_null() || value.is_number();
  if (def.is_boolean()) return value.is_boolean();
  if (def.is_number_integer()) return value.is_number_integer() && value.get<long long>() >= 0;
  if (def.is_number()) return value.is_number();
  if (def.is_string()) return value.is_string();
  if (def.is_array()) {
    if (!value.is_array()) return false;
    for (const auto& v : value) {
      if (!v.is_number_integer() || v.get<long long>() < 0) return false;
    }
    return true;
  }
  return false;
}

}  // namespace

json merge_config(json base, const json& overrides) {
  if (!overrides.is_object()) throw ConfigError("config must be a JSON object");
  const json& defaults = default_config();
  for (const auto& [key, value] : overrides.items()) {
    if (!defaults.contains(key)) throw ConfigError(fmt::format("unknown config key '{}'", key));
    if (!compatible(defaults.at(key), value)) {
      throw ConfigError(fmt::format("config key '{}' has the wrong type: {}", key, value.dump()));
    }
    base[key] = value;
  }
  return base;
}

json load_config_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot open config file {}", path.string()));
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(fmt::format("config file {} is not valid JSON: {}", path.string(), e.what()));
  }
}

json parse_flag_value(const std::string& key, const std::string& text) {
  const json& defaults = default_config();
  if (!defaults.contains(key)) throw ConfigError(fmt::format("unknown config key '{}'", key));
  const json& def = defaults.at(key);
  if (def.is_string()) return text;
  try {
    json v = json::parse(text);
    if (!compatible(def, v)) throw ConfigError("");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(fmt::format("cannot parse value '{}' for --{}", text, key));
  }
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw DataError("SHA-256 computation failed");
  }
  std::string out;
  for (unsigned int i = 0; i < len; ++i) out += fmt::format("{:02x}", digest[i]);
  return out;
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot read {}", path.string()));
  std::ostringstream buf;
  buf << in.rdbuf();
  return sha256_hex(buf.str());
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e) != nullptr) return 2;
  if (dynamic_cast<const DataError*>(&e) != nullptr) return 3;
  if (dynamic_cast<const NumericalError*>(&e) != nullptr) return 4;
  return 1;
}

// ---------------------------------------------------------------------------
// Experiments shared by repro-report and the acceptance suite

std::map<std::string, double> disambiguation_run(const fixtures::DisambiguationSuite& suite, SourceKind source,
                                                 std::uint64_t seed, const ExperimentSettings& settings) {
  const auto extract = comprehension::rule_based_extractor(suite.lexicon);
  comprehension::TaskConfig task = settings.task;
  task.seed = seed;
  std::optional<reasoner::Seq2SeqModel> model;
  std::unique_ptr<comprehension::CommonsenseSource> src;
  if (source == SourceKind::kReasoner) {
    reasoner::ReasonerConfig rc = settings.reasoner;
    rc.seed = seed;
    model = reasoner::train_reasoner(suite.kb, nullptr, rc).model;
    src = std::make_unique<comprehension::ReasonerSource>(*model);
  } else {
    src = std::make_unique<comprehension::ZeroSource>(settings.reasoner.hidden_dim);
  }
  const auto trained = comprehension::train_task(comprehension::Task::kQA, suite.train, suite.validation, task,
                                                 *src, extract);
  const auto test = comprehension::prepare_all(comprehension::Task::kQA, suite.test, extract, *src);
  return comprehension::evaluate(trained.model, test, task.max_answer_tokens);
}

namespace {

std::vector<std::vector<OpinionTuple>> extract_all(const std::vector<Review>& reviews,
                                                   const comprehension::Extractor& extract) {
  std::vector<std::vector<OpinionTuple>> out;
  for (const Review& r : reviews) {
    std::vector<OpinionTuple> tuples;
    for (std::size_t k = 0; k < r.sentences.size(); ++k) {
      for (auto& t : extract(r.sentences[k], k)) tuples.push_back(std::move(t));
    }
    out.push_back(std::move(tuples));
  }
  return out;
}

struct MinedKb {
  kb::BuiltMatrices built;
  kb::Selection selection;
  kb::KnowledgeBase kb;
};

MinedKb mine_kb(const std::string& domain, const std::vector<Review>& reviews,
                const std::vector<std::vector<OpinionTuple>>& tuples, std::size_t top_entities,
                std::size_t top_extractions, const kb::MiningOptions& mining) {
  MinedKb m;
  m.built = kb::build_matrix(reviews, tuples);
  m.selection = kb::select(m.built.matrix, top_entities, top_extractions);
  m.kb = kb::build_kb(domain, m.selection, kb::mine_facts(m.selection.restricted, mining));
  if (m.kb.facts.empty()) {
    throw DataError("no facts were mined; lower npmi_threshold or min_support, or supply more reviews");
  }
  return m;
}

}  // namespace

json kb_statistics_table(const std::string& domain, const std::vector<Review>& reviews, const Lexicon& lexicon,
                         const EdgeList& edges, std::size_t top_entities, std::size_t top_extractions,
                         const kb::MiningOptions& mining) {
  const auto tuples = extract_all(reviews, comprehension::rule_based_extractor(lexicon));
  const MinedKb m = mine_kb(domain, reviews, tuples, top_entities, top_extractions, mining);
  return {{"table", "kb_statistics"},
          {"columns",
           {"domain", "n_entities", "n_extractions", "n_unique_opinions", "n_facts", "extraction_overlap",
            "relation_overlap"}},
          {"rows", json::array({kb::to_json(kb::stats(m.kb, m.selection.restricted, edges))})}};
}

json qa_results_table(const fixtures::DisambiguationSuite& suite, const std::vector<std::uint64_t>& seeds,
                      const ExperimentSettings& settings) {
  if (seeds.empty()) throw ConfigError("repro_seeds must list at least one seed");
  json rows = json::array();
  for (const auto& [name, kind] : {std::pair{"no-commonsense", SourceKind::kZero},
                                   std::pair{"reasoner", SourceKind::kReasoner}}) {
    std::vector<std::map<std::string, double>> runs;
    for (std::uint64_t seed : seeds) {
      spdlog::info("disambiguation QA: source={} seed={}", name, seed);
      runs.push_back(disambiguation_run(suite, kind, seed, settings));
    }
    json report = metrics::score_report("qa", runs, seeds);
    report["system"] = name;
    rows.push_back(std::move(report));
  }
  return {{"table", "qa_results"},
          {"dataset", "synthetic-disambiguation"},
          {"columns", {"f1", "exact"}},
          {"rows", rows}};
}

// ---------------------------------------------------------------------------
// Stages

namespace {

struct InputRecord {
  std::string key;
  fs::path path;
};

class Stage {
 public:
  Stage(std::string name, const json& config) : name_(std::move(name)), cfg_(config) {}

  const json& cfg() const { return cfg_; }
  std::string str(const std::string& key) const { return cfg_.at(key).get<std::string>(); }
  std::size_t size(const std::string& key) const { return cfg_.at(key).get<std::size_t>(); }
  double real(const std::string& key) const { return cfg_.at(key).get<double>(); }
  std::uint64_t seed() const { return cfg_.at("seed").get<std::uint64_t>(); }

  fs::path require_input(const std::string& key) {
    const std::string p = str(key);
    if (p.empty()) throw ConfigError(fmt::format("{} needs an input: set --{}", name_, flag(key)));
    return add_input(key, p);
  }

  std::optional<fs::path> optional_input(const std::string& key) {
    const std::string p = str(key);
    if (p.empty()) return std::nullopt;
    return add_input(key, p);
  }

  fs::path require_output_base() const {
    const std::string p = str("output");
    if (p.empty()) throw ConfigError(fmt::format("{} needs --output", name_));
    return p;
  }

  // A file read alongside another input, such as the KB opinion sidecar.
  void add_companion(const std::string& key, const fs::path& p) { add_input(key, p); }

  void declare_output(const fs::path& p) { outputs_.push_back(p); }

  // All inputs exist and are fresh, no output would be clobbered.
  void validate() const {
    for (const auto& in : inputs_) {
      if (!fs::exists(in.path)) {
        throw ConfigError(fmt::format("input file not found: {} (set by --{})", in.path.string(), flag(in.key)));
      }
      check_fresh(in.path);
    }
    if (!cfg_.at("overwrite").get<bool>()) {
      for (const auto& out : outputs_) {
        if (fs::exists(out)) {
          throw ConfigError(fmt::format("refusing to overwrite {}; pass --overwrite to replace it", out.string()));
        }
      }
    }
    for (const auto& out : outputs_) {
      if (out.has_parent_path()) fs::create_directories(out.parent_path());
    }
  }

  void write_manifest(const fs::path& primary, json params) const {
    json inputs = json::array();
    for (const auto& in : inputs_) {
      inputs.push_back({{"key", in.key}, {"path", in.path.string()}, {"sha256", sha256_file(in.path)}});
    }
    json outputs = json::array();
    for (const auto& out : outputs_) {
      outputs.push_back({{"file", out.filename().string()}, {"sha256", sha256_file(out)}});
    }
    const json manifest = {{"stage", name_},   {"version", kVersion}, {"seed", seed()},
                           {"inputs", inputs}, {"outputs", outputs},  {"parameters", std::move(params)}};
    write_text(manifest_path(primary), manifest.dump(2) + "\n");
  }

  static fs::path manifest_path(const fs::path& primary) { return fs::path(primary.string() + ".manifest.json"); }

  static void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError(fmt::format("cannot write {}", path.string()));
    out << text;
    if (!out) throw DataError(fmt::format("failed writing {}", path.string()));
  }

 private:
  static std::string flag(std::string key) {
    for (char& c : key) {
      if (c == '_') c = '-';
    }
    return key;
  }

  fs::path add_input(const std::string& key, const fs::path& p) {
    inputs_.push_back({key, p});
    return p;
  }

  // An upstream artifact whose own manifest lists a different hash was
  // changed after the stage that produced it.
  static void check_fresh(const fs::path& input) {
    const fs::path mpath = manifest_path(input);
    if (!fs::exists(mpath)) return;
    std::ifstream in(mpath);
    json m;
    try {
      m = json::parse(in);
    } catch (const json::parse_error&) {
      throw DataError(fmt::format("manifest {} is not valid JSON", mpath.string()));
    }
    for (const auto& out : m.value("outputs", json::array())) {
      if (out.value("file", "") == input.filename().string() && out.value("sha256", "") != sha256_file(input)) {
        throw DataError(fmt::format("{} no longer matches its manifest; rerun the stage that produced it",
                                    input.string()));
      }
    }
  }

  std::string name_;
  json cfg_;
  std::vector<InputRecord> inputs_;
  std::vector<fs::path> outputs_;
};

comprehension::Extractor make_extractor(const std::optional<fs::path>& lexicon) {
  if (!lexicon) {
    return [](const TokenSequence&, std::size_t) { return std::vector<OpinionTuple>{}; };
  }
  return comprehension::rule_based_extractor(load_lexicon(*lexicon));
}

json tuple_json(const OpinionTuple& t) {
  return {{"modifier", t.modifier},
          {"aspect", t.aspect},
          {"sentence", t.sentence_index},
          {"modifier_span", {t.modifier_span.start, t.modifier_span.end}},
          {"aspect_span", {t.aspect_span.start, t.aspect_span.end}}};
}

void run_extract(Stage& st) {
  const fs::path reviews_path = st.require_input("reviews");
  const fs::path lexicon_path = st.require_input("lexicon");
  const auto tagger_path = st.optional_input("tagger_data");
  const fs::path out = st.require_output_base();
  st.declare_output(out);
  st.validate();

  const auto reviews = load_reviews(reviews_path);
  const Lexicon lexicon = load_lexicon(lexicon_path);
  comprehension::Extractor extract = comprehension::rule_based_extractor(lexicon);
  if (tagger_path) {
    TaggerOptions opts;
    opts.epochs = st.size("tagger_epochs");
    opts.seed = st.seed();
    opts.lexicon = lexicon;
    auto model = std::make_shared<TaggerModel>(train_tagger(load_labeled_tags(*tagger_path), opts));
    extract = [model](const TokenSequence& s, std::size_t k) { return pair(tag(*model, s), s, k); };
  }
  std::string text;
  std::size_t n_tuples = 0;
  const auto all = extract_all(reviews, extract);
  for (std::size_t i = 0; i < reviews.size(); ++i) {
    json tuples = json::array();
    for (const auto& t : all[i]) tuples.push_back(tuple_json(t));
    n_tuples += all[i].size();
    text += json{{"review_id", reviews[i].id}, {"entity", reviews[i].entity_id}, {"tuples", tuples}}.dump() + "\n";
  }
  Stage::write_text(out, text);
  spdlog::info("extract: {} reviews, {} tuples", reviews.size(), n_tuples);
  st.write_manifest(out, {{"extractor", tagger_path ? "tagger" : "rule"}});
}

std::pair<std::vector<Review>, std::vector<std::vector<OpinionTuple>>> load_tuples(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot read {}", path.string()));
  std::vector<Review> reviews;
  std::vector<std::vector<OpinionTuple>> tuples;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json j = json::parse(line);
      Review r;
      r.id = j.at("review_id").get<std::string>();
      r.entity_id = j.at("entity").get<std::string>();
      std::vector<OpinionTuple> ts;
      for (const auto& t : j.at("tuples")) {
        OpinionTuple o;
        o.modifier = t.at("modifier").get<std::string>();
        o.aspect = t.at("aspect").get<std::string>();
        o.sentence_index = t.value("sentence", std::size_t{0});
        ts.push_back(std::move(o));
      }
      reviews.push_back(std::move(r));
      tuples.push_back(std::move(ts));
    } catch (const json::exception& e) {
      throw DataError(fmt::format("{} line {}: {}", path.string(), lineno, e.what()));
    }
  }
  return {std::move(reviews), std::move(tuples)};
}

kb::MiningOptions mining_options(const Stage& st) {
  return kb::MiningOptions{st.real("npmi_threshold"), st.size("min_support")};
}

void run_build_kb(Stage& st) {
  const fs::path tuples_path = st.require_input("tuples");
  const auto edges_path = st.optional_input("edges");
  const fs::path out = st.require_output_base();
  const fs::path stats_path = out.string() + ".stats.json";
  st.declare_output(out);
  st.declare_output(kb::opinions_path(out));
  st.declare_output(stats_path);
  st.validate();

  const auto [reviews, tuples] = load_tuples(tuples_path);
  const MinedKb m =
      mine_kb(st.str("domain"), reviews, tuples, st.size("top_entities"), st.size("top_extractions"), mining_options(st));
  if (!kb::marginals_consistent(m.built)) throw DataError("matrix and tensor counts disagree");
  const EdgeList edges = edges_path ? load_edge_list(*edges_path) : EdgeList{};
  kb::save_kb(m.kb, out);
  Stage::write_text(stats_path, kb::to_json(kb::stats(m.kb, m.selection.restricted, edges)).dump(2) + "\n");
  spdlog::info("build-kb: {} opinions, {} facts", m.kb.opinions.size(), m.kb.facts.size());
  st.write_manifest(out, {{"domain", st.str("domain")},
                          {"top_entities", st.size("top_entities")},
                          {"top_extractions", st.size("top_extractions")},
                          {"npmi_threshold", st.real("npmi_threshold")},
                          {"min_support", st.size("min_support")}});
}

void run_train_reasoner(Stage& st) {
  const fs::path kb_path = st.require_input("kb");
  st.add_companion("kb", kb::opinions_path(kb_path));
  const auto wv_path = st.optional_input("word_vectors");
  const fs::path out = st.require_output_base();
  st.declare_output(out);
  st.declare_output(nn::payload_path(out));
  st.validate();

  reasoner::ReasonerConfig cfg;
  cfg.embedding_dim = st.size("reasoner_embedding_dim");
  cfg.hidden_dim = st.size("reasoner_hidden_dim");
  cfg.epochs = st.size("reasoner_epochs");
  cfg.learning_rate = st.real("reasoner_lr");
  cfg.optimizer = nn::parse_optimizer(st.str("optimizer"));
  cfg.seed = st.seed();
  const kb::KnowledgeBase kb = kb::load_kb(kb_path);
  std::optional<WordVectors> wv;
  if (wv_path) wv = load_word_vectors(*wv_path);
  const auto result = reasoner::train_reasoner(kb, wv ? &*wv : nullptr, cfg);
  nn::save_checkpoint(result.model.to_checkpoint(), out);
  spdlog::info("train-reasoner: loss {:.4f} -> {:.4f}", result.epoch_losses.front(), result.epoch_losses.back());
  st.write_manifest(out, {{"embedding_dim", cfg.embedding_dim},
                          {"hidden_dim", cfg.hidden_dim},
                          {"epochs", cfg.epochs},
                          {"learning_rate", cfg.learning_rate},
                          {"optimizer", nn::optimizer_name(cfg.optimizer)},
                          {"epoch_losses", result.epoch_losses}});
}

void run_embed(Stage& st) {
  const fs::path ckpt_path = st.require_input("checkpoint");
  const fs::path phrases_path = st.require_input("phrases");
  const fs::path out = st.require_output_base();
  st.declare_output(out);
  st.validate();

  const nn::Checkpoint ckpt = nn::load_checkpoint(ckpt_path);
  const std::string kind = ckpt.metadata.value("model", "");
  std::function<nn::Vec(const std::string&)> embed;
  std::optional<reasoner::Seq2SeqModel> s2s;
  std::optional<distmult::DistMultModel> dm;
  if (kind == "seq2seq") {
    s2s = reasoner::Seq2SeqModel::from_checkpoint(ckpt);
    embed = [&](const std::string& p) { return reasoner::embed_premise(*s2s, p).vector; };
  } else if (kind == "distmult") {
    dm = distmult::DistMultModel::from_checkpoint(ckpt);
    embed = [&](const std::string& p) { return distmult::phrase_vector(*dm, p); };
  } else {
    throw DataError(fmt::format("{} is neither a reasoner nor a DistMult checkpoint", ckpt_path.string()));
  }
  std::ifstream in(phrases_path);
  std::string line, text;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    const std::string phrase = normalize_phrase(line);
    if (phrase.empty()) continue;
    text += json{{"phrase", phrase}, {"vector", embed(phrase)}}.dump() + "\n";
    ++n;
  }
  Stage::write_text(out, text);
  spdlog::info("embed: {} phrases with a {} model", n, kind);
  st.write_manifest(out, {{"model", kind}});
}

void run_train_distmult(Stage& st) {
  const fs::path triples_path = st.require_input("triples");
  const auto test_path = st.optional_input("test_triples");
  const fs::path out = st.require_output_base();
  const fs::path metrics_path = out.string() + ".metrics.json";
  st.declare_output(out);
  st.declare_output(nn::payload_path(out));
  if (test_path) st.declare_output(metrics_path);
  st.validate();

  distmult::DistMultConfig cfg;
  cfg.dim = st.size("distmult_dim");
  cfg.epochs = st.size("distmult_epochs");
  cfg.negatives_per_positive = st.size("distmult_negatives");
  cfg.learning_rate = st.real("distmult_lr");
  cfg.seed = st.seed();
  const auto train = distmult::load_triples(triples_path);
  const auto test = test_path ? distmult::load_triples(*test_path) : std::vector<distmult::NamedTriple>{};
  std::vector<distmult::NamedTriple> all = train;
  all.insert(all.end(), test.begin(), test.end());
  distmult::DistMultModel model = distmult::DistMultModel::for_triples(all, cfg.dim, cfg.seed);
  std::vector<distmult::Triple> train_ids;
  for (const auto& t : train) train_ids.push_back(model.resolve(t));
  const auto losses = distmult::train_distmult(model, train_ids, cfg);
  nn::save_checkpoint(model.to_checkpoint(), out);
  json params = {{"dim", cfg.dim},
                 {"epochs", cfg.epochs},
                 {"negatives", cfg.negatives_per_positive},
                 {"learning_rate", cfg.learning_rate},
                 {"epoch_losses", losses}};
  if (test_path) {
    std::set<distmult::Triple> known;
    std::vector<distmult::Triple> test_ids;
    for (const auto& t : all) known.insert(model.resolve(t));
    for (const auto& t : test) test_ids.push_back(model.resolve(t));
    const auto m = distmult::rank_eval(model, test_ids, known);
    Stage::write_text(metrics_path,
                      json{{"mrr", m.mrr}, {"hits_at_1", m.hits_at_1}, {"hits_at_10", m.hits_at_10}}.dump(2) + "\n");
    spdlog::info("train-distmult: filtered MRR {:.4f}", m.mrr);
  }
  st.write_manifest(out, std::move(params));
}

// Owns whichever model backs the commonsense source.
struct SourceHolder {
  std::optional<reasoner::Seq2SeqModel> reasoner_model;
  std::optional<distmult::DistMultModel> distmult_model;
  std::unique_ptr<comprehension::CommonsenseSource> source;
};

SourceHolder make_source(Stage& st) {
  SourceHolder h;
  const std::string kind = st.str("source");
  if (kind == "zero") {
    h.source = std::make_unique<comprehension::ZeroSource>(st.size("commonsense_width"));
    return h;
  }
  if (kind != "reasoner" && kind != "distmult") {
    throw ConfigError(fmt::format("unknown source '{}' (expected zero, reasoner or distmult)", kind));
  }
  st.require_input("source_checkpoint");  // loaded by load_source once validated
  return h;
}

void load_source(Stage& st, SourceHolder& h) {
  if (h.source) return;
  const nn::Checkpoint ckpt = nn::load_checkpoint(st.str("source_checkpoint"));
  if (st.str("source") == "reasoner") {
    h.reasoner_model = reasoner::Seq2SeqModel::from_checkpoint(ckpt);
    h.source = std::make_unique<comprehension::ReasonerSource>(*h.reasoner_model);
  } else {
    h.distmult_model = distmult::DistMultModel::from_checkpoint(ckpt);
    h.source = std::make_unique<comprehension::DistMultSource>(*h.distmult_model);
  }
}

comprehension::TaskDataset load_dataset(comprehension::Task task, const fs::path& path,
                                        const std::optional<fs::path>& reviews) {
  if (task == comprehension::Task::kQA) {
    if (!reviews) throw ConfigError("QA datasets need --reviews to resolve review ids");
    return load_qa_dataset(path, *reviews);
  }
  return load_absa_dataset(path);
}

comprehension::TaskConfig task_config(const Stage& st, comprehension::Task task) {
  comprehension::TaskConfig cfg = comprehension::TaskConfig::full_run(task);
  cfg.encoder = comprehension::EncoderConfig{st.size("encoder_embedding_dim"), st.size("encoder_hidden_dim")};
  if (!st.cfg().at("task_epochs").is_null()) cfg.epochs = st.size("task_epochs");
  if (!st.cfg().at("task_lr").is_null()) cfg.learning_rate = st.real("task_lr");
  cfg.optimizer = nn::parse_optimizer(st.str("optimizer"));
  cfg.seed = st.seed();
  cfg.max_answer_tokens = st.size("max_answer_tokens");
  return cfg;
}

void run_train_task(Stage& st) {
  const auto task = comprehension::parse_task(st.str("task"));
  const fs::path train_path = st.require_input("train");
  const auto val_path = st.optional_input("validation");
  const auto reviews_path = task == comprehension::Task::kQA ? std::optional(st.require_input("reviews"))
                                                              : st.optional_input("reviews");
  const auto lexicon_path = st.optional_input("lexicon");
  SourceHolder src = make_source(st);
  const fs::path out = st.require_output_base();
  const fs::path scores_path = out.string() + ".scores.json";
  st.declare_output(out);
  st.declare_output(nn::payload_path(out));
  st.declare_output(scores_path);
  st.validate();
  load_source(st, src);

  const comprehension::TaskConfig cfg = task_config(st, task);
  const auto extract = make_extractor(lexicon_path);
  const auto train = load_dataset(task, train_path, reviews_path);
  const auto val = val_path ? load_dataset(task, *val_path, reviews_path)
                            : (task == comprehension::Task::kQA ? comprehension::TaskDataset{std::vector<QAExample>{}}
                                                                : comprehension::TaskDataset{std::vector<AbsaExample>{}});
  const auto trained = comprehension::train_task(task, train, val, cfg, *src.source, extract);
  nn::Checkpoint ckpt = trained.model.to_checkpoint();
  ckpt.metadata["source"] = src.source->name();
  nn::save_checkpoint(ckpt, out);
  Stage::write_text(scores_path,
                    json{{"validation_scores", trained.validation_scores}, {"best_epoch", trained.best_epoch}}.dump(2) +
                        "\n");
  spdlog::info("train-task: {} best epoch {}", comprehension::task_name(task), trained.best_epoch);
  st.write_manifest(out, {{"task", comprehension::task_name(task)},
                          {"source", src.source->name()},
                          {"epochs", cfg.epochs},
                          {"learning_rate", cfg.learning_rate},
                          {"encoder_hidden_dim", cfg.encoder.hidden_dim},
                          {"encoder_embedding_dim", cfg.encoder.embedding_dim}});
}

std::map<std::string, json> read_predictions(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot read {}", path.string()));
  std::map<std::string, json> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      json j = json::parse(line);
      out[j.at("id").get<std::string>()] = std::move(j);
    } catch (const json::exception& e) {
      throw DataError(fmt::format("{} line {}: {}", path.string(), lineno, e.what()));
    }
  }
  return out;
}

std::map<std::string, double> score_predictions(comprehension::Task task, const comprehension::TaskDataset& gold,
                                                const std::map<std::string, json>& preds) {
  auto find = [&](const std::string& id) -> const json& {
    const auto it = preds.find(id);
    if (it == preds.end()) throw DataError(fmt::format("no prediction for example {}", id));
    return it->second;
  };
  std::map<std::string, double> out;
  if (task == comprehension::Task::kQA) {
    const auto& examples = std::get<std::vector<QAExample>>(gold);
    if (examples.empty()) throw DataError("evaluation needs at least one example");
    double f1 = 0.0, exact = 0.0;
    for (const auto& ex : examples) {
      const auto s = metrics::token_f1(find(ex.id).at("text").get<std::string>(), ex.answer_text());
      f1 += s.f1;
      exact += s.exact;
    }
    out["f1"] = f1 / static_cast<double>(examples.size());
    out["exact"] = exact / static_cast<double>(examples.size());
    return out;
  }
  const auto& examples = std::get<std::vector<AbsaExample>>(gold);
  if (examples.empty()) throw DataError("evaluation needs at least one example");
  if (task == comprehension::Task::kAE) {
    std::vector<std::vector<TokenSpan>> pred, ref;
    for (const auto& ex : examples) {
      std::vector<TokenSpan> spans;
      for (const auto& s : find(ex.id).at("spans")) {
        spans.push_back({s.at("start").get<std::size_t>(), s.at("end").get<std::size_t>()});
      }
      pred.push_back(std::move(spans));
      ref.push_back(ex.aspect_spans);
    }
    const auto prf = metrics::span_prf(pred, ref);
    out = {{"precision", prf.precision}, {"recall", prf.recall}, {"f1", prf.f1}};
    return out;
  }
  std::vector<Polarity> pred, ref;
  for (const auto& ex : examples) {
    if (!ex.polarity) throw DataError(fmt::format("ASC example {} has no gold polarity", ex.id));
    pred.push_back(parse_polarity(find(ex.id).at("polarity").get<std::string>()));
    ref.push_back(*ex.polarity);
  }
  const auto s = metrics::cls_scores(pred, ref);
  out = {{"accuracy", s.accuracy}, {"macro_f1", s.macro_f1}};
  return out;
}

void run_evaluate(Stage& st) {
  const auto task = comprehension::parse_task(st.str("task"));
  const fs::path test_path = st.require_input("test");
  const auto reviews_path = task == comprehension::Task::kQA ? std::optional(st.require_input("reviews"))
                                                              : st.optional_input("reviews");
  const auto preds_path = st.optional_input("predictions");
  std::optional<fs::path> ckpt_path;
  SourceHolder src;
  std::optional<fs::path> lexicon_path;
  const fs::path out = st.require_output_base();
  const fs::path written_preds = out.string() + ".predictions.jsonl";
  if (!preds_path) {
    ckpt_path = st.require_input("checkpoint");
    lexicon_path = st.optional_input("lexicon");
    src = make_source(st);
    st.declare_output(written_preds);
  }
  st.declare_output(out);
  st.validate();

  const auto gold = load_dataset(task, test_path, reviews_path);
  std::map<std::string, json> preds;
  if (preds_path) {
    preds = read_predictions(*preds_path);
  } else {
    load_source(st, src);
    const auto model = comprehension::TaskModel::from_checkpoint(nn::load_checkpoint(*ckpt_path));
    if (model.task != task) throw ConfigError("checkpoint task differs from --task");
    if (model.head.extra_width() != src.source->width()) {
      throw ConfigError(fmt::format("checkpoint expects {} commonsense entries but the {} source gives {}",
                                    model.head.extra_width(), src.source->name(), src.source->width()));
    }
    const auto prepared = comprehension::prepare_all(task, gold, make_extractor(lexicon_path), *src.source);
    std::string text;
    for (const auto& ex : prepared) {
      json p = comprehension::prediction_json(model, ex, st.size("max_answer_tokens"));
      text += p.dump() + "\n";
      preds[ex.id] = std::move(p);
    }
    Stage::write_text(written_preds, text);
  }
  const auto scores = score_predictions(task, gold, preds);
  Stage::write_text(out, metrics::score_report(comprehension::task_name(task), {scores}, {st.seed()}).dump(2) + "\n");
  spdlog::info("evaluate: {} examples scored", preds.size());
  st.write_manifest(out, {{"task", comprehension::task_name(task)}});
}

void run_overlap(Stage& st) {
  const fs::path kb_path = st.require_input("kb");
  st.add_companion("kb", kb::opinions_path(kb_path));
  const fs::path edges_path = st.require_input("edges");
  const fs::path out = st.require_output_base();
  st.declare_output(out);
  st.validate();

  const kb::KnowledgeBase kb = kb::load_kb(kb_path);
  const EdgeList edges = load_edge_list(edges_path);
  const json report = {{"domain", kb.domain_name},
                       {"n_opinions", kb.opinions.size()},
                       {"n_facts", kb.facts.size()},
                       {"extraction_overlap", kb::extraction_overlap(kb, edges)},
                       {"relation_overlap", kb::relation_overlap(kb, edges)}};
  Stage::write_text(out, report.dump(2) + "\n");
  spdlog::info("overlap: extraction {:.1f}%, relation {:.1f}%", report["extraction_overlap"].get<double>(),
               report["relation_overlap"].get<double>());
  st.write_manifest(out, json::object());
}

void run_repro_report(Stage& st) {
  const auto reviews_path = st.optional_input("reviews");
  const auto lexicon_path = st.optional_input("lexicon");
  const auto edges_path = st.optional_input("edges");
  const bool custom = reviews_path || lexicon_path || edges_path;
  if (custom && !(reviews_path && lexicon_path && edges_path)) {
    throw ConfigError("repro-report takes --reviews, --lexicon and --edges together, or none of them");
  }
  const fs::path dir = st.require_output_base();
  const fs::path table1 = dir / "table1_kb_statistics.json";
  const fs::path table3 = dir / "table3_qa_results.json";
  st.declare_output(table1);
  st.declare_output(table3);
  st.validate();

  const std::vector<Review> reviews = custom ? load_reviews(*reviews_path) : fixtures::thin_walls_reviews();
  const Lexicon lexicon = custom ? load_lexicon(*lexicon_path) : fixtures::thin_walls_lexicon();
  const EdgeList edges = custom ? load_edge_list(*edges_path) : fixtures::thin_walls_edges();
  const std::string domain = custom ? st.str("domain") : "thin-walls-fixture";
  Stage::write_text(table1, kb_statistics_table(domain, reviews, lexicon, edges, st.size("top_entities"),
                                                st.size("top_extractions"), mining_options(st))
                                    .dump(2) +
                                "\n");

  ExperimentSettings settings;
  if (!st.cfg().at("repro_reasoner_epochs").is_null()) settings.reasoner.epochs = st.size("repro_reasoner_epochs");
  if (!st.cfg().at("repro_task_epochs").is_null()) settings.task.epochs = st.size("repro_task_epochs");
  const auto seeds = st.cfg().at("repro_seeds").get<std::vector<std::uint64_t>>();
  Stage::write_text(table3, qa_results_table(fixtures::disambiguation_suite(), seeds, settings).dump(2) + "\n");
  spdlog::info("repro-report: wrote {} and {}", table1.string(), table3.string());
  st.write_manifest(dir / "repro", {{"seeds", seeds},
                                    {"reasoner_epochs", settings.reasoner.epochs},
                                    {"task_epochs", settings.task.epochs}});
}

}  // namespace

void run(const std::string& subcommand, const json& config) {
  const json cfg = merge_config(default_config(), config);
  Stage st(subcommand, cfg);
  if (subcommand == "extract") return run_extract(st);
  if (subcommand == "build-kb") return run_build_kb(st);
  if (subcommand == "train-reasoner") return run_train_reasoner(st);
  if (subcommand == "embed") return run_embed(st);
  if (subcommand == "train-distmult") return run_train_distmult(st);
  if (subcommand == "train-task") return run_train_task(st);
  if (subcommand == "evaluate") return run_evaluate(st);
  if (subcommand == "overlap") return run_overlap(st);
  if (subcommand == "repro-report") return run_repro_report(st);
  throw ConfigError(fmt::format("unknown subcommand '{}'", subcommand));
}

}  // namespace xsense::pipeline
