#include "bspa/labeling.hpp"

#include <optional>

#include "bspa/env.hpp"
#include "bspa/parallel.hpp"

namespace bspa {

std::vector<EndpointScores> score_pairs(const EndpointSuite& suite, const Prompt& x,
                                        const std::vector<SensitiveWord>& words) {
  if (words.empty()) throw ValidationError("no sensitive words to score");
  std::vector<std::optional<EndpointScores>> slots(words.size());
  parallel_for(words.size(), suite.max_inflight, [&](std::size_t i) {
    try {
      auto xs = generate_stealthy(suite, x, words[i]);
      const double st = score_text(suite, xs);
      const double si = score_image(suite, xs);
      slots[i] = EndpointScores{std::move(xs), st, si};
    } catch (const EndpointError& e) {
      throw EndpointError("input '" + x.id() + "', word " + std::to_string(words[i].id) + ": " +
                              e.what(),
                          e.attempts());
    }
  });
  std::vector<EndpointScores> out;
  out.reserve(words.size());
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

const std::vector<EndpointScores>& ScoreCache::get(const EndpointSuite& suite, const Prompt& x,
                                                   const std::vector<SensitiveWord>& words) {
  auto it = entries_.find(x.id());
  if (it == entries_.end()) it = entries_.emplace(x.id(), score_pairs(suite, x, words)).first;
  if (it->second.size() != words.size()) {
    throw ValidationError("score cache for '" + x.id() + "' was built for a different word set");
  }
  return it->second;
}

nlohmann::json to_json(const ScoreRecord& r) {
  return {{"input_id", r.input_id}, {"word_id", r.word_id}, {"s_t", r.s_t},
          {"s_i", r.s_i},           {"sim", r.sim},         {"s", r.s}};
}

double pseudo_label(double s_t, double s_i, double sim, const LabelWeights& weights) {
  return s_i - weights.alpha * s_t + weights.beta * sim;
}

PseudoLabelSet label_from_scores(const Prompt& x, const std::vector<SensitiveWord>& words,
                                 const std::vector<EndpointScores>& scores,
                                 const EncoderParams& params, const LabelWeights& weights) {
  if (words.empty()) throw ValidationError("no sensitive words to label");
  if (weights.alpha < 0.0 || weights.beta < 0.0) {
    throw ValidationError("alpha and beta must be non-negative");
  }
  const auto ex = encode(params, x.tokens());
  PseudoLabelSet set;
  set.input_id = x.id();
  set.records.reserve(words.size());
  std::size_t best = 0;
  for (std::size_t i = 0; i < words.size(); ++i) {
    const auto& sc = scores[i];
    const double sim = cosine_sim(ex, encode(params, sc.stealthy.tokens()));
    set.records.push_back({x.id(), words[i].id, sc.s_t, sc.s_i, sim,
                           pseudo_label(sc.s_t, sc.s_i, sim, weights)});
    const auto& r = set.records[i];
    const auto& b = set.records[best];
    if (r.s > b.s || (r.s == b.s && r.word_id < b.word_id)) best = i;
  }
  set.positive = words[best].id;
  for (const auto& w : words) {
    if (w.id != set.positive) set.negatives.push_back(w.id);
  }
  return set;
}

PseudoLabelSet compute_pseudo_labels(const Prompt& x, const std::vector<SensitiveWord>& words,
                                     const EndpointSuite& suite, const EncoderParams& params,
                                     const LabelWeights& weights, ScoreCache* cache) {
  if (cache) return label_from_scores(x, words, cache->get(suite, x, words), params, weights);
  return label_from_scores(x, words, score_pairs(suite, x, words), params, weights);
}

}  // namespace bspa
