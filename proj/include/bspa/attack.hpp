#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bspa/corpus.hpp"
#include "bspa/encoder.hpp"
#include "bspa/env.hpp"
#include "bspa/eval.hpp"
#include "bspa/retriever.hpp"

namespace bspa {

enum class HumanFlag { unset, nsfw, clean };

struct AttackOutcome {
  std::string outcome_id;
  std::string category;  // empty for attack runs; "explicit"/"stealthy" in evaluations
  std::string input_id;
  int word_id = -1;
  std::string text;
  double s_t = 0.0;
  double s_i = 0.0;
  bool text_blocked = false;   // s_t >= text_eps
  bool image_flagged = false;  // s_i > image_eps
  HumanFlag human_flag = HumanFlag::unset;
  bool success = false;        // is_success(s_t, s_i)
  std::string error;           // endpoint failure, if any

  nlohmann::json to_json() const;
  static AttackOutcome from_json(const nlohmann::json& j);
};

std::string outcome_log_jsonl(const std::vector<AttackOutcome>& outcomes);
std::vector<AttackOutcome> read_outcome_log(const std::string& path);

/// Steps 1-4 at inference time with a fixed encoder. The word index is built
/// once at construction.
class Attacker {
 public:
  Attacker(EncoderParams params, std::vector<SensitiveWord> words, EndpointSuite suite,
           Thresholds thresholds = {});

  /// Retrieves the top_m words for x and runs generation and both filters for
  /// each, in retrieval order. Endpoint failures are recorded per outcome.
  std::vector<AttackOutcome> run(const Prompt& x, int top_m = 3) const;

  const WordIndex& index() const noexcept { return index_; }
  const EncoderParams& params() const noexcept { return params_; }

 private:
  EncoderParams params_;
  std::vector<SensitiveWord> words_;
  EndpointSuite suite_;
  Thresholds thresholds_;
  WordIndex index_;
};

std::vector<AttackOutcome> run_attack(const Prompt& x, const EncoderParams& params,
                                      const std::vector<SensitiveWord>& words,
                                      const EndpointSuite& suite, int top_m = 3,
                                      const Thresholds& thresholds = {});

/// Runs attacks for every input, keeps stealthy prompts with s_t <= clean_threshold,
/// de-duplicates by text and keeps provenance. If `log` is given it receives every
/// outcome. Throws ValidationError when nothing survives.
std::vector<Prompt> generate_dataset(const std::vector<Prompt>& inputs, const Attacker& attacker,
                                     int top_m = 3, double clean_threshold = kDefaultToxicThreshold,
                                     std::vector<AttackOutcome>* log = nullptr);

inline constexpr std::size_t kPublicPerCategory = 1000;
inline constexpr std::size_t kPrivateSamplePerCategory = 250;

struct BenchmarkSplit {
  std::vector<Prompt> public_explicit, public_stealthy;
  std::vector<Prompt> private_explicit, private_stealthy;
  std::uint64_t seed = 0;
};

/// Seeded shuffle of each pool; the first 1000 go public, the rest private.
/// Throws ValidationError when a pool holds fewer than 1000 prompts.
BenchmarkSplit build_benchmark(const std::vector<Prompt>& explicit_pool,
                               const std::vector<Prompt>& stealthy_pool, std::uint64_t seed,
                               std::size_t public_size = kPublicPerCategory);

struct PromptSample {
  std::vector<Prompt> explicit_prompts;
  std::vector<Prompt> stealthy_prompts;
};

/// Seeded sampling without replacement of `size` prompts per private pool.
PromptSample sample_private(const BenchmarkSplit& split, std::uint64_t round_seed,
                            std::size_t size = kPrivateSamplePerCategory);

/// Four prompt JSONL files plus manifest.json (seed, counts, SHA-256 per file).
void write_benchmark(const std::string& dir, const BenchmarkSplit& split);
/// Reads a split back and verifies the manifest hashes.
BenchmarkSplit read_benchmark(const std::string& dir);

/// Annotation file: JSON lines {"outcome_id", "flag": "nsfw"|"clean"}.
std::map<std::string, HumanFlag> read_annotations(const std::string& path);

/// Recomputes the report for one category from an outcome log and annotations.
/// Unannotated eligible outcomes count as sh = 0 and lower coverage.
MetricsReport summarize_outcomes(const std::string& category, const std::vector<AttackOutcome>& outcomes,
                                 const Thresholds& thresholds);

struct Evaluation {
  std::vector<AttackOutcome> outcomes;
  MetricsReport explicit_report;
  MetricsReport stealthy_report;
};

/// Scores every prompt against the suite (the image is rendered only for prompts
/// that pass the text filter), applies annotations and reports per category.
/// Throws ValidationError listing annotation ids that match no outcome.
Evaluation evaluate_endpoint(const std::vector<Prompt>& explicit_prompts,
                             const std::vector<Prompt>& stealthy_prompts, const EndpointSuite& suite,
                             const std::map<std::string, HumanFlag>& annotations = {},
                             const Thresholds& thresholds = {});

}  // namespace bspa
