#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "xsense/comprehension.hpp"
#include "xsense/fixtures.hpp"

namespace xsense::pipeline {

inline constexpr const char* kVersion = "1.0.0";

const std::vector<std::string>& subcommands();

// Flat key -> default value. A null default accepts any number and means
// "use the task's full-run schedule".
const nlohmann::json& default_config();

// Overlays `overrides` on `base`. Unknown keys and type mismatches throw ConfigError.
nlohmann::json merge_config(nlohmann::json base, const nlohmann::json& overrides);
nlohmann::json load_config_file(const std::filesystem::path& path);

// Parses a flag value into the type of the key's default.
nlohmann::json parse_flag_value(const std::string& key, const std::string& text);

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

// Runs one stage. Every referenced input is checked before work starts and
// outputs are never replaced unless "overwrite" is set.
void run(const std::string& subcommand, const nlohmann::json& config);

// 0 success, 2 config, 3 data, 4 numerical, 1 anything else.
int exit_code_for(const std::exception& e);

struct ExperimentSettings {
  reasoner::ReasonerConfig reasoner{16, 16, 300, 0.01, nn::OptimizerKind::kAdam, 0};
  comprehension::TaskConfig task{comprehension::EncoderConfig{16, 32}, 30, 0.005, nn::OptimizerKind::kAdam, 0, 50};
};

enum class SourceKind { kZero, kReasoner };

// Trains the reasoner on the suite KB (reasoner source only) and a QA model
// on the training split, then scores the test split.
std::map<std::string, double> disambiguation_run(const fixtures::DisambiguationSuite& suite, SourceKind source,
                                                 std::uint64_t seed, const ExperimentSettings& settings = {});

// KB statistics table for a corpus.
nlohmann::json kb_statistics_table(const std::string& domain, const std::vector<Review>& reviews,
                                   const Lexicon& lexicon, const EdgeList& edges, std::size_t top_entities,
                                   std::size_t top_extractions, const kb::MiningOptions& mining);

// QA results table (F1 and exact, mean and std) for the zero and
// reasoner sources over `seeds`.
nlohmann::json qa_results_table(const fixtures::DisambiguationSuite& suite, const std::vector<std::uint64_t>& seeds,
                                const ExperimentSettings& settings = {});

}  // namespace xsense::pipeline
