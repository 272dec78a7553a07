#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"
#include "xsense/error.hpp"
#include "xsense/pipeline.hpp"

namespace {

std::string dashed(std::string key) {
  for (char& c : key) {
    if (c == '_') c = '-';
  }
  return key;
}

const std::map<std::string, std::string>& descriptions() {
  static const std::map<std::string, std::string> kText = {
      {"extract", "Extract opinion tuples from a reviews JSONL file"},
      {"build-kb", "Build the knowledge base TSV and its statistics from extracted tuples"},
      {"train-reasoner", "Train the seq2seq reasoner on a knowledge base"},
      {"embed", "Embed opinion phrases with a reasoner or DistMult checkpoint"},
      {"train-distmult", "Train DistMult on a triple TSV"},
      {"train-task", "Train an AE, ASC or QA model with commonsense augmentation"},
      {"evaluate", "Score predictions, or a task checkpoint on a dataset"},
      {"overlap", "Measure a knowledge base against a reference edge list"},
      {"repro-report", "Run the fixture suite and write the KB statistics and QA result tables"},
  };
  return kText;
}

}  // namespace

int main(int argc, char** argv) {
  auto logger = spdlog::stderr_color_mt("xsense");
  spdlog::set_default_logger(logger);

  CLI::App app{"xsense: commonsense knowledge mining and review comprehension"};
  app.set_version_flag("--version", xsense::pipeline::kVersion);
  app.require_subcommand(1);

  const nlohmann::json& defaults = xsense::pipeline::default_config();
  std::string config_path;
  bool overwrite = false;
  bool verbose = false;
  std::map<std::string, std::map<std::string, std::string>> values;
  std::map<std::string, std::map<std::string, CLI::Option*>> options;

  for (const std::string& name : xsense::pipeline::subcommands()) {
    CLI::App* sub = app.add_subcommand(name, descriptions().at(name));
    sub->add_option("--config", config_path, "JSON config file; flags override its values");
    sub->add_flag("--overwrite", overwrite, "Replace existing outputs");
    sub->add_flag("-v,--verbose", verbose, "Debug logging");
    for (const auto& [key, def] : defaults.items()) {
      if (key == "overwrite") continue;
      const std::string help = def.is_null() ? "default: task schedule" : "default: " + def.dump();
      options[name][key] = sub->add_option("--" + dashed(key), values[name][key], help);
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  if (verbose) spdlog::set_level(spdlog::level::debug);

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    nlohmann::json cfg = nlohmann::json::object();
    if (!config_path.empty()) {
      cfg = xsense::pipeline::merge_config(cfg, xsense::pipeline::load_config_file(config_path));
    }
    nlohmann::json flags = nlohmann::json::object();
    for (const auto& [key, opt] : options[name]) {
      if (opt->count() > 0) flags[key] = xsense::pipeline::parse_flag_value(key, values[name][key]);
    }
    if (overwrite) flags["overwrite"] = true;
    cfg = xsense::pipeline::merge_config(cfg, flags);
    xsense::pipeline::run(name, cfg);
  } catch (const std::exception& e) {
    spdlog::error("{}: {}", name, e.what());
    return xsense::pipeline::exit_code_for(e);
  }
  return 0;
}
