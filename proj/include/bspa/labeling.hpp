#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "bspa/corpus.hpp"
#include "bspa/encoder.hpp"
#include "bspa/endpoints.hpp"
#include "bspa/text.hpp"

namespace bspa {

struct LabelWeights {
  double alpha = 1.0;  // text-toxicity penalty
  double beta = 0.5;   // input-similarity bonus
};

/// Endpoint-side results for one (input, word) pair. Independent of encoder
/// parameters, so they are computed once and reused across epochs.
struct EndpointScores {
  Prompt stealthy;
  double s_t = 0.0;
  double s_i = 0.0;
};

/// Generates and scores x_s for every word, with at most suite.max_inflight
/// calls in flight. Endpoint errors are rethrown naming the word id.
std::vector<EndpointScores> score_pairs(const EndpointSuite& suite, const Prompt& x,
                                        const std::vector<SensitiveWord>& words);

/// Per-input endpoint scores keyed by input id.
class ScoreCache {
 public:
  const std::vector<EndpointScores>& get(const EndpointSuite& suite, const Prompt& x,
                                         const std::vector<SensitiveWord>& words);
  bool contains(const std::string& input_id) const { return entries_.count(input_id) > 0; }
  std::size_t size() const noexcept { return entries_.size(); }

 private:
  std::map<std::string, std::vector<EndpointScores>> entries_;
};

struct ScoreRecord {
  std::string input_id;
  int word_id = 0;
  double s_t = 0.0;
  double s_i = 0.0;
  double sim = 0.0;  // cosine(e_x(x), e_x(x_s)) under the current parameters
  double s = 0.0;    // s_i - alpha * s_t + beta * sim
};

nlohmann::json to_json(const ScoreRecord& r);

struct PseudoLabelSet {
  std::string input_id;
  std::vector<ScoreRecord> records;  // one per word, in word order
  int positive = 0;                  // word id with the largest s, lowest id on ties
  std::vector<int> negatives;
};

double pseudo_label(double s_t, double s_i, double sim, const LabelWeights& weights);

/// Builds the pseudo-label set from already-computed endpoint scores.
PseudoLabelSet label_from_scores(const Prompt& x, const std::vector<SensitiveWord>& words,
                                 const std::vector<EndpointScores>& scores,
                                 const EncoderParams& params, const LabelWeights& weights);

/// Scores every word for input x and picks the positive. When a cache is given,
/// endpoint results are taken from (or stored into) it; sim is always recomputed.
PseudoLabelSet compute_pseudo_labels(const Prompt& x, const std::vector<SensitiveWord>& words,
                                     const EndpointSuite& suite, const EncoderParams& params,
                                     const LabelWeights& weights, ScoreCache* cache = nullptr);

}  // namespace bspa
