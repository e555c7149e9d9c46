// Command-line front end: one subcommand per pipeline stage, each run writing
// its outputs and a run.manifest.json into a fresh run directory.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bspa/attack.hpp"
#include "bspa/config.hpp"
#include "bspa/corpus.hpp"
#include "bspa/error.hpp"
#include "bspa/eval.hpp"
#include "bspa/gradcheck.hpp"
#include "bspa/hash.hpp"
#include "bspa/remote.hpp"
#include "bspa/sim_world.hpp"
#include "bspa/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitEndpoint = 2;

// Streams for synthesized data, kept apart so adding one never shifts another.
constexpr std::uint64_t kTrainInputs = 1;
constexpr std::uint64_t kHeldOutInputs = 2;
constexpr std::uint64_t kCorpusStream = 10;
constexpr std::uint64_t kExplicitPool = 20;
constexpr std::uint64_t kStealthyPool = 21;

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string world;
  bool remote = false;
  std::optional<int> max_inflight;
  std::optional<int> top_m;
  std::optional<int> epochs;
  std::map<std::string, std::string> paths;  // config path overrides, by key
  // gradcheck
  std::vector<std::size_t> dims{2, 8};
  std::vector<std::size_t> batches{2, 4};
  int trials = 5;
  // benchmark sampling
  std::optional<std::uint64_t> sample_round;
};

/// Everything a subcommand needs: the resolved config, endpoints and run directory.
class Run {
 public:
  Run(std::string command, const Flags& flags) : command_(std::move(command)) {
    if (!flags.config.empty()) {
      config_ = bspa::RunConfig::load(flags.config);
      record_input("config", flags.config);
    } else if (!flags.seed) {
      throw bspa::ValidationError("a seed is mandatory: pass --seed or --config");
    }
    if (flags.seed) {
      config_.seed = *flags.seed;
      config_.training.seed = *flags.seed;
    }
    if (!flags.out.empty()) config_.paths.out = flags.out;
    if (!flags.world.empty()) config_.world.world_path = flags.world;
    if (flags.max_inflight) config_.max_inflight = *flags.max_inflight;
    if (flags.top_m) config_.top_m = *flags.top_m;
    if (flags.epochs) config_.training.epochs = *flags.epochs;
    auto& p = config_.paths;
    const std::map<std::string, std::string*> targets = {
        {"corpus", &p.corpus},         {"inputs", &p.inputs},
        {"words", &p.words},           {"checkpoint", &p.checkpoint},
        {"explicit", &p.explicit_pool}, {"stealthy", &p.stealthy_pool},
        {"benchmark", &p.benchmark},   {"outcomes", &p.outcomes},
        {"annotations", &p.annotations}};
    for (const auto& [key, value] : flags.paths) *targets.at(key) = value;
    config_.validate();

    if (config_.world.remote != flags.remote) {
      throw bspa::ValidationError(config_.world.remote
                                      ? "the config enables remote endpoints; pass --remote to confirm"
                                      : "--remote given but the config has no remote world enabled");
    }
    dir_ = make_run_dir(config_.paths.out, command_);
  }

  const bspa::RunConfig& config() const noexcept { return config_; }
  const fs::path& dir() const noexcept { return dir_; }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  /// Endpoints, built on first use so commands that need none never touch them.
  const bspa::EndpointSuite& suite() {
    if (!suite_) {
      if (config_.world.remote) {
        auto remote = config_.world.remote_suite();
        remote.max_inflight = config_.max_inflight;
        suite_ = bspa::make_remote_suite(remote);
      } else {
        suite_ = world().suite(config_.max_inflight);
      }
    }
    return *suite_;
  }

  /// The SimWorld; only valid when remote mode is off.
  const bspa::SimWorld& world() {
    if (config_.world.remote) {
      throw bspa::ValidationError(command_ + ": remote mode has no synthetic world; give every input path in the config");
    }
    if (!world_) {
      if (!config_.world.world_path.empty()) {
        world_ = bspa::SimWorld::load(config_.world.world_path);
        record_input("world", config_.world.world_path);
      } else {
        world_ = bspa::SimWorld::generate(config_.seed, config_.world.shape);
        manifest_inputs_["world"] = {{"generated", true}, {"sha256", bspa::sha256_hex(world_->to_json().dump())}};
      }
    }
    return *world_;
  }

  std::vector<bspa::Prompt> prompts_or(const std::string& file, const std::string& role,
                                       const std::function<std::vector<bspa::Prompt>()>& synth) {
    if (!file.empty()) {
      record_input(role, file);
      return bspa::read_prompts_jsonl(file);
    }
    auto prompts = synth();
    bspa::write_prompts_jsonl(path(role + ".synth.jsonl"), prompts);
    return prompts;
  }

  std::vector<bspa::SensitiveWord> words() {
    if (!config_.paths.words.empty()) {
      record_input("words", config_.paths.words);
      return bspa::read_words_jsonl(config_.paths.words);
    }
    return world().sensitive_words();
  }

  void record_input(const std::string& role, const std::string& file) {
    manifest_inputs_[role] = {{"path", file}, {"sha256", bspa::sha256_file(file)}};
  }

  void write_json(const std::string& name, const json& j) const {
    bspa::write_text_file(path(name), j.dump(2) + "\n");
  }

  void finish() const {
    write_json("run.manifest.json", {{"command", command_},
                                     {"version", bspa::kVersion},
                                     {"seed", config_.seed},
                                     {"config", config_.to_json()},
                                     {"inputs", manifest_inputs_}});
    std::cout << "run directory: " << dir_.string() << "\n";
  }

 private:
  static fs::path make_run_dir(const std::string& root, const std::string& command) {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y%m%dT%H%M%SZ", &tm);
    const fs::path base = fs::path(root) / (command + "-" + stamp);
    fs::path dir = base;
    for (int n = 2; fs::exists(dir); ++n) dir = base.string() + "-" + std::to_string(n);
    fs::create_directories(dir);
    return dir;
  }

  std::string command_;
  bspa::RunConfig config_;
  fs::path dir_;
  std::optional<bspa::SimWorld> world_;
  std::optional<bspa::EndpointSuite> suite_;
  json manifest_inputs_ = json::object();
};

bspa::EncoderParams load_encoder(Run& run) {
  const auto& file = run.config().paths.checkpoint;
  if (file.empty()) throw bspa::ValidationError("paths.checkpoint is required (an encoder or training checkpoint)");
  run.record_input("checkpoint", file);
  json j;
  try {
    j = json::parse(bspa::read_text_file(file));
  } catch (const json::parse_error& e) {
    throw bspa::ValidationError(file + ": " + e.what());
  }
  if (j.contains("state")) return bspa::TrainState::from_json(j["state"]).params;
  return bspa::EncoderParams::from_json(j);
}

std::vector<bspa::Prompt> training_inputs(Run& run) {
  return run.prompts_or(run.config().paths.inputs, "inputs", [&] {
    return run.world().make_inputs(run.config().synth.inputs, kTrainInputs, "tr");
  });
}

std::vector<bspa::Prompt> attack_inputs(Run& run) {
  return run.prompts_or(run.config().paths.inputs, "inputs", [&] {
    return run.world().make_inputs(run.config().synth.inputs / 2, kHeldOutInputs, "te");
  });
}

std::vector<bspa::Prompt> explicit_pool(Run& run) {
  return run.prompts_or(run.config().paths.explicit_pool, "explicit_pool", [&] {
    return run.world().make_explicit(run.config().synth.pool, kExplicitPool, "ex");
  });
}

/// Stealthy prompts from random (caption, sensitive word) pairs of the world.
std::vector<bspa::Prompt> stealthy_pool(Run& run) {
  return run.prompts_or(run.config().paths.stealthy_pool, "stealthy_pool", [&] {
    const auto& world = run.world();
    const auto captions = world.make_inputs(run.config().synth.pool, kStealthyPool, "sp");
    const auto words = world.sensitive_words();
    bspa::Rng rng(bspa::derive_seed(run.config().seed, kStealthyPool));
    std::vector<bspa::Prompt> out;
    for (const auto& x : captions) {
      out.push_back(bspa::generate_stealthy(run.suite(), x, words[rng.below(words.size())]));
    }
    return out;
  });
}

int cmd_extract_words(Run& run) {
  const auto& cfg = run.config();
  const auto corpus = run.prompts_or(cfg.paths.corpus, "corpus", [&] {
    return run.world().make_corpus(cfg.synth.corpus, kCorpusStream, "cp");
  });
  const auto cleaned = bspa::clean_prompts(corpus);
  const auto& filter = *run.suite().text_filter;
  const auto words = bspa::build_sensitive_word_set(cleaned, filter, cfg.word_set_size, cfg.thresholds.toxic_theta);
  bspa::write_words_jsonl(run.path("words.jsonl"), words);
  const auto stats = bspa::dataset_stats(cleaned, filter, cfg.thresholds.toxic_theta);
  run.write_json("corpus_stats.json", {{"prompts", stats.prompt_count},
                                       {"dropped", corpus.size() - cleaned.size()},
                                       {"avg_length", stats.avg_length},
                                       {"tokens", stats.token_count},
                                       {"toxic_rate", stats.toxic_rate}});
  std::cout << "extracted " << words.size() << " sensitive words from " << cleaned.size() << " prompts\n";
  return kExitOk;
}

int cmd_train(Run& run) {
  const auto& cfg = run.config();
  const auto inputs = training_inputs(run);
  const auto words = run.words();
  fs::create_directories(run.dir() / "checkpoints");
  std::string log;
  std::string labels_log;
  bspa::TrainHooks hooks;
  hooks.on_epoch = [&](const bspa::TrainState& state, const std::vector<bspa::PseudoLabelSet>& labels,
                       const bspa::WordIndex&) {
    const auto& h = state.history.back();
    log += json{{"epoch", h.epoch}, {"l_clo", h.l_clo}, {"l_div", h.l_div}, {"l", h.l}}.dump() + "\n";
    char name[32];
    std::snprintf(name, sizeof name, "checkpoints/epoch-%03d.json", h.epoch);
    run.write_json(name, {{"seed", cfg.seed}, {"config", cfg.training.to_json()}, {"state", state.to_json()}});
    labels_log.clear();
    for (const auto& set : labels) {
      for (const auto& r : set.records) labels_log += bspa::to_json(r).dump() + "\n";
    }
    std::cout << "epoch " << h.epoch << "  L=" << h.l << "  L_clo=" << h.l_clo << "  L_div=" << h.l_div;
    if (h.dropped) std::cout << "  (dropped " << h.dropped << " rows with duplicate positives)";
    std::cout << "\n";
  };
  const auto state = bspa::train(cfg.training, inputs, words, run.suite(), nullptr, hooks);
  bspa::write_text_file(run.path("train_log.jsonl"), log);
  bspa::write_text_file(run.path("scores.jsonl"), labels_log);
  run.write_json("encoder.json", state.params.to_json());
  return kExitOk;
}

json attack_summary(const std::vector<bspa::AttackOutcome>& outcomes, std::size_t inputs) {
  std::size_t success = 0, errors = 0, blocked = 0;
  for (const auto& o : outcomes) {
    success += o.success;
    errors += !o.error.empty();
    blocked += o.text_blocked;
  }
  const double n = outcomes.empty() ? 1.0 : static_cast<double>(outcomes.size());
  return {{"inputs", inputs},
          {"outcomes", outcomes.size()},
          {"success_rate", static_cast<double>(success) / n},
          {"text_blocked_rate", static_cast<double>(blocked) / n},
          {"errors", errors}};
}

int cmd_attack(Run& run) {
  const auto& cfg = run.config();
  const auto inputs = attack_inputs(run);
  const bspa::Attacker attacker(load_encoder(run), run.words(), run.suite(), cfg.thresholds);
  std::vector<bspa::AttackOutcome> outcomes;
  for (const auto& x : inputs) {
    for (auto& o : attacker.run(x, cfg.top_m)) outcomes.push_back(std::move(o));
  }
  bspa::write_text_file(run.path("outcomes.jsonl"), bspa::outcome_log_jsonl(outcomes));
  const auto summary = attack_summary(outcomes, inputs.size());
  run.write_json("report.json", summary);
  std::cout << "success rate " << bspa::percent(summary["success_rate"].get<double>()) << " over "
            << outcomes.size() << " attacks\n";
  return kExitOk;
}

int cmd_gen_dataset(Run& run) {
  const auto& cfg = run.config();
  const auto inputs = attack_inputs(run);
  const bspa::Attacker attacker(load_encoder(run), run.words(), run.suite(), cfg.thresholds);
  std::vector<bspa::AttackOutcome> outcomes;
  const auto dataset = bspa::generate_dataset(inputs, attacker, cfg.top_m, cfg.thresholds.toxic_theta, &outcomes);
  bspa::write_prompts_jsonl(run.path("stealthy.jsonl"), dataset);
  bspa::write_text_file(run.path("outcomes.jsonl"), bspa::outcome_log_jsonl(outcomes));
  const auto stats = bspa::dataset_stats(dataset, *run.suite().text_filter, cfg.thresholds.toxic_theta);
  auto summary = attack_summary(outcomes, inputs.size());
  summary["dataset"] = {{"prompts", stats.prompt_count},
                        {"avg_length", stats.avg_length},
                        {"tokens", stats.token_count},
                        {"toxic_rate", stats.toxic_rate}};
  run.write_json("report.json", summary);
  std::cout << "kept " << dataset.size() << " of " << outcomes.size() << " generated prompts\n";
  return kExitOk;
}

int cmd_build_benchmark(Run& run, const Flags& flags) {
  const auto& cfg = run.config();
  const auto explicit_prompts = explicit_pool(run);
  const auto stealthy_prompts = stealthy_pool(run);
  const auto split = bspa::build_benchmark(explicit_prompts, stealthy_prompts, cfg.seed);
  bspa::write_benchmark(run.path("benchmark"), split);
  if (flags.sample_round) {
    const auto sample = bspa::sample_private(split, *flags.sample_round);
    bspa::write_prompts_jsonl(run.path("sample/explicit.jsonl"), sample.explicit_prompts);
    bspa::write_prompts_jsonl(run.path("sample/stealthy.jsonl"), sample.stealthy_prompts);
  }
  std::cout << "public " << split.public_explicit.size() << "+" << split.public_stealthy.size() << ", private "
            << split.private_explicit.size() << "+" << split.private_stealthy.size() << "\n";
  return kExitOk;
}

int cmd_evaluate(Run& run) {
  const auto& cfg = run.config();
  std::vector<bspa::Prompt> explicit_prompts, stealthy_prompts;
  if (!cfg.paths.benchmark.empty()) {
    const auto split = bspa::read_benchmark(cfg.paths.benchmark);
    run.record_input("benchmark", (fs::path(cfg.paths.benchmark) / "manifest.json").string());
    explicit_prompts = split.public_explicit;
    stealthy_prompts = split.public_stealthy;
  } else {
    explicit_prompts = explicit_pool(run);
    stealthy_prompts = stealthy_pool(run);
  }
  std::map<std::string, bspa::HumanFlag> annotations;
  if (!cfg.paths.annotations.empty()) {
    run.record_input("annotations", cfg.paths.annotations);
    annotations = bspa::read_annotations(cfg.paths.annotations);
  }
  const auto ev = bspa::evaluate_endpoint(explicit_prompts, stealthy_prompts, run.suite(), annotations, cfg.thresholds);
  bspa::write_text_file(run.path("outcomes.jsonl"), bspa::outcome_log_jsonl(ev.outcomes));
  run.write_json("report.json", {{"explicit", ev.explicit_report.to_json()}, {"stealthy", ev.stealthy_report.to_json()}});
  const auto table = bspa::format_benchmark_table({ev.explicit_report, ev.stealthy_report});
  bspa::write_text_file(run.path("table.txt"), table);
  std::cout << table;
  return kExitOk;
}

int cmd_report(Run& run) {
  const auto& cfg = run.config();
  if (cfg.paths.outcomes.empty()) throw bspa::ValidationError("paths.outcomes is required for report");
  run.record_input("outcomes", cfg.paths.outcomes);
  auto outcomes = bspa::read_outcome_log(cfg.paths.outcomes);
  if (!cfg.paths.annotations.empty()) {
    run.record_input("annotations", cfg.paths.annotations);
    const auto annotations = bspa::read_annotations(cfg.paths.annotations);
    std::set<std::string> ids;
    for (auto& o : outcomes) {
      ids.insert(o.outcome_id);
      if (const auto it = annotations.find(o.outcome_id); it != annotations.end()) o.human_flag = it->second;
    }
    for (const auto& [id, flag] : annotations) {
      if (!ids.count(id)) throw bspa::ValidationError("annotation '" + id + "' matches no outcome");
    }
  }
  std::vector<std::string> categories;
  for (const auto& o : outcomes) {
    if (std::find(categories.begin(), categories.end(), o.category) == categories.end()) {
      categories.push_back(o.category);
    }
  }
  std::vector<bspa::MetricsReport> reports;
  json j = json::object();
  std::vector<bspa::Prompt> texts;
  for (const auto& c : categories) {
    reports.push_back(bspa::summarize_outcomes(c, outcomes, cfg.thresholds));
    if (reports.back().category.empty()) reports.back().category = "attack";
    j[reports.back().category] = reports.back().to_json();
  }
  for (const auto& o : outcomes) {
    if (o.error.empty()) texts.emplace_back(o.outcome_id, o.text, bspa::Role::stealthy, bspa::Source::generated);
  }
  run.write_json("report.json", j);
  const auto table = bspa::format_benchmark_table(reports);
  bspa::write_text_file(run.path("table.txt"), table);
  if (!texts.empty()) {
    bspa::write_text_file(run.path("word_frequencies.csv"),
                          bspa::word_frequencies_csv(bspa::word_frequencies(texts)));
  }
  std::cout << table;
  return kExitOk;
}

int cmd_gradcheck(Run& run, const Flags& flags) {
  const auto report = bspa::run_gradcheck(flags.dims, flags.batches, flags.trials, run.config().seed);
  json cases = json::array();
  for (const auto& c : report.cases) {
    cases.push_back({{"dim", c.dim}, {"batch", c.batch}, {"k", c.k}, {"rel_error", c.rel_error}});
  }
  run.write_json("gradcheck.json", {{"max_rel_error", report.max_rel_error}, {"cases", cases}});
  std::cout << "max relative error " << report.max_rel_error << " over " << report.cases.size() << " cases\n";
  return report.max_rel_error < 1e-4 ? kExitOk : kExitValidation;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stealthy prompt-attack research toolkit"};
  app.require_subcommand(1);
  Flags flags;
  app.add_option("--config", flags.config, "JSON run config")->check(CLI::ExistingFile);
  app.add_option("--seed", flags.seed, "Run seed (overrides the config)");
  app.add_option("--out", flags.out, "Root directory for run directories");
  app.add_option("--world", flags.world, "SimWorld JSON file")->check(CLI::ExistingFile);
  app.add_flag("--remote", flags.remote, "Confirm use of the remote endpoints in the config");
  app.add_option("--max-inflight", flags.max_inflight, "Concurrent endpoint calls")->check(CLI::PositiveNumber);
  app.add_option("--top-m", flags.top_m, "Words retrieved per input")->check(CLI::PositiveNumber);
  app.add_option("--epochs", flags.epochs, "Training epochs")->check(CLI::NonNegativeNumber);
  for (const char* key : {"corpus", "inputs", "words", "checkpoint", "explicit", "stealthy", "benchmark",
                          "outcomes", "annotations"}) {
    app.add_option_function<std::string>(
           std::string("--") + key, [&flags, key](const std::string& v) { flags.paths[key] = v; },
           std::string("Overrides paths.") + key + " of the config")
        ->check(CLI::ExistingPath);
  }

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"extract-words", "Build the sensitive-word set from a corpus"},
      {"train", "Train the retriever encoder"},
      {"attack", "Run retrieval, generation and both filters for each input"},
      {"gen-dataset", "Generate and clean a stealthy prompt dataset"},
      {"build-benchmark", "Split explicit and stealthy pools into public and private parts"},
      {"evaluate", "Score benchmark prompts against the endpoints"},
      {"gradcheck", "Compare analytic and finite-difference gradients"},
      {"report", "Recompute metrics from an outcome log and annotations"}};
  std::map<std::string, CLI::App*> sub;
  for (const auto& [name, help] : commands) sub[name] = app.add_subcommand(name, help)->fallthrough();
  sub["gradcheck"]->add_option("--dims", flags.dims, "Embedding dimensions")->delimiter(',');
  sub["gradcheck"]->add_option("--batch", flags.batches, "Batch sizes")->delimiter(',');
  sub["gradcheck"]->add_option("--trials", flags.trials, "Random configurations per (dim, batch)");
  sub["build-benchmark"]->add_option("--sample-round", flags.sample_round,
                                     "Also draw a private sample with this round seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  std::string command;
  for (const auto& [name, s] : sub) {
    if (s->parsed()) command = name;
  }
  try {
    if (command == "gradcheck" && !flags.seed && flags.config.empty()) flags.seed = 0;
    Run run(command, flags);
    int code = kExitOk;
    if (command == "extract-words") code = cmd_extract_words(run);
    else if (command == "train") code = cmd_train(run);
    else if (command == "attack") code = cmd_attack(run);
    else if (command == "gen-dataset") code = cmd_gen_dataset(run);
    else if (command == "build-benchmark") code = cmd_build_benchmark(run, flags);
    else if (command == "evaluate") code = cmd_evaluate(run);
    else if (command == "report") code = cmd_report(run);
    else if (command == "gradcheck") code = cmd_gradcheck(run, flags);
    run.finish();
    return code;
  } catch (const bspa::EndpointError& e) {
    std::cerr << "endpoint error: " << e.what() << "\n";
    return kExitEndpoint;
  } catch (const bspa::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const bspa::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
}
