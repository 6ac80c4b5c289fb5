#include <iostream>

#include "CLI11.hpp"
#include "tandem/pipeline/commands.hpp"

int main(int argc, char** argv) {
  CLI::App app{"tandem: reasoning-trace generation, assessment and curation pipeline"};
  app.require_subcommand(1);

  tandem::pipeline::CommandOptions options;
  std::uint64_t seed = 0;
  std::size_t parallelism = 0;

  const auto add_common = [&](CLI::App* sub, bool needs_model) {
    sub->add_option("--config", options.config, "Run configuration (JSON)");
    sub->add_option("--input", options.input, "Input file or upstream work directory");
    sub->add_option("--output", options.output, "Output work directory (default: config work_dir)");
    sub->add_option("--seed-override", seed, "Replace the config seed");
    sub->add_option("--parallelism", parallelism, "Worker threads");
    if (needs_model) {
      sub->add_option("--mock-script", options.mock_script,
                      "Serve model calls from a scripted JSONL file instead of HTTP");
    }
  };

  add_common(app.add_subcommand("generate", "Sample reasoning traces for a query corpus"), true);
  add_common(app.add_subcommand("assess", "Judge answers and score reasoning paths"), true);
  add_common(app.add_subcommand("curate", "Build SFT, summary and preference corpora"), false);
  add_common(app.add_subcommand("reward-eval", "Score outputs with the RL reward functions"), false);
  add_common(app.add_subcommand("grpo-check", "Run the numeric oracle suite"), false);
  add_common(app.add_subcommand("evolve", "Run one reasoner/summarizer evolution cycle"), true);
  add_common(app.add_subcommand("report", "Print corpus statistics for a work directory"), false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return tandem::pipeline::kExitConfig;
  }

  const CLI::App* sub = app.get_subcommands().front();
  options.command = sub->get_name();
  if (sub->count("--seed-override") > 0) options.seed_override = seed;
  if (sub->count("--parallelism") > 0) options.parallelism = parallelism;
  return tandem::pipeline::run_command(options, std::cout, std::cerr);
}
