// semwm: command-line front end for the watermarking pipeline.
//
//   semwm <subcommand> --out DIR [--config FILE] [flags...]
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 other failure.

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "semwm/common.hpp"
#include "semwm/llm_client.hpp"
#include "semwm/pipeline.hpp"
#include "semwm/run_config.hpp"

namespace {

struct Flag {
  const char* name;  // CLI flag
  const char* key;   // config key
  const char* help;
};

constexpr Flag kFlags[] = {
    {"--seed", "seed", "random seed"},
    {"--jobs", "jobs", "worker threads (0 = all cores)"},
    {"--delta", "delta", "watermark strength"},
    {"--entropy-threshold", "entropy_threshold", "entropy gate in nats"},
    {"--temperature", "temperature", "sampling temperature"},
    {"--top-p", "top_p", "nucleus mass"},
    {"--scheme", "scheme", "semantic | kgw | unigram"},
    {"--conditioning", "conditioning", "global | prefix"},
    {"--fidelity-weight", "fidelity_weight", "bonus for the original token and its synonyms"},
    {"--margin", "margin", "triplet margin"},
    {"--epochs", "epochs", "training epochs"},
    {"--lr", "lr", "learning rate"},
    {"--batch-size", "batch_size", "training batch size"},
};

const char* kCommands[][2] = {
    {"ingest", "filter the corpus, split it and build the vocabulary"},
    {"train-lm", "train the n-gram language model"},
    {"make-dataset", "build the triplet dataset"},
    {"train-mapper", "train the semantic mapping model"},
    {"watermark", "watermark texts (default: held-out documents)"},
    {"detect", "score texts for the watermark"},
    {"attack", "apply a transform to texts (default: watermarked outputs)"},
    {"evaluate", "run the detection and attack suite"},
    {"steal", "run the stealing attack"},
    {"sweep", "sweep the watermark strength"},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semantic-aware text watermarking pipeline"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path, out_dir, input_path;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "key=value config file")->check(CLI::ExistingFile);
  app.add_option("--out", out_dir, "artifact directory")->required();
  app.add_option("--input", input_path, "input texts, one per line");
  app.add_option("--set", overrides, "extra config override key=value (repeatable)");
  std::vector<std::string> flag_values(std::size(kFlags));
  std::vector<CLI::Option*> flag_opts;
  for (std::size_t i = 0; i < std::size(kFlags); ++i) {
    flag_opts.push_back(app.add_option(kFlags[i].name, flag_values[i], kFlags[i].help));
  }
  std::string attack_kind;
  app.add_option("--kind", attack_kind, "attack transform: paraphrase | sentiment_reversal | "
                                        "latter_half_reversal | hate_insertion");

  for (const auto& c : kCommands) app.add_subcommand(c[0], c[1]);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    semwm::RunConfig cfg;
    if (!config_path.empty()) cfg.load_file(config_path);
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw semwm::UsageError("--set expects key=value, got '" + kv + "'");
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    for (std::size_t i = 0; i < std::size(kFlags); ++i) {
      if (flag_opts[i]->count() > 0) cfg.set(kFlags[i].key, flag_values[i]);
    }
    if (!attack_kind.empty()) cfg.set("attack_kind", attack_kind);

    const std::filesystem::path out(out_dir);
    const std::string cmd = app.get_subcommands().front()->get_name();
    namespace p = semwm::pipeline;
    if (cmd == "ingest") {
      p::ingest(cfg, out, std::cout);
    } else if (cmd == "train-lm") {
      p::train_lm_stage(cfg, out, std::cout);
    } else if (cmd == "make-dataset") {
      p::make_dataset(cfg, out, std::cout);
    } else if (cmd == "train-mapper") {
      p::train_mapper(cfg, out, std::cout);
    } else if (cmd == "watermark") {
      p::watermark(cfg, out, input_path, std::cout);
    } else if (cmd == "detect") {
      p::detect(cfg, out, input_path, std::cout);
    } else if (cmd == "attack") {
      p::attack(cfg, out, input_path, std::cout);
    } else if (cmd == "evaluate") {
      p::evaluate(cfg, out, std::cout);
    } else if (cmd == "steal") {
      p::steal(cfg, out, std::cout);
    } else if (cmd == "sweep") {
      p::sweep(cfg, out, std::cout);
    }
  } catch (const semwm::UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const semwm::DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
