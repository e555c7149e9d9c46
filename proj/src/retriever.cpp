#include "bspa/retriever.hpp"

#include <algorithm>
#include <numeric>

namespace bspa {

WordIndex::WordIndex(std::vector<SensitiveWord> words, Matrix vectors,
                     std::string params_fingerprint)
    : words_(std::move(words)), vectors_(std::move(vectors)), fingerprint_(std::move(params_fingerprint)) {
  if (words_.empty()) throw ValidationError("word index needs at least one word");
  if (vectors_.rows() != words_.size()) throw ValidationError("word index row count mismatch");
}

WordIndex build_index(const EncoderParams& params, const std::vector<SensitiveWord>& words) {
  if (words.empty()) throw ValidationError("build_index: no sensitive words");
  Matrix vectors(words.size(), params.dim());
  for (std::size_t i = 0; i < words.size(); ++i) {
    const auto tokens = tokenize(words[i].surface);
    if (tokens.empty()) {
      throw ValidationError("sensitive word '" + words[i].surface + "' tokenizes to nothing");
    }
    const auto e = encode(params, tokens);
    std::copy(e.values.begin(), e.values.end(), vectors.row(i).begin());
  }
  return WordIndex(words, std::move(vectors), params.fingerprint());
}

std::vector<Retrieved> retrieve_topk(const WordIndex& index, const Embedding& query, int k) {
  const auto n = index.size();
  if (k <= 0) throw ValidationError("retrieve_topk: k must be positive");
  if (static_cast<std::size_t>(k) > n) {
    throw ValidationError("retrieve_topk: k=" + std::to_string(k) + " exceeds index size " +
                          std::to_string(n));
  }
  std::vector<double> scores(n);
  for (std::size_t i = 0; i < n; ++i) scores[i] = cosine_sim(query.values, index.vectors().row(i));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const auto& words = index.words();
  std::partial_sort(order.begin(), order.begin() + k, order.end(),
                    [&](std::size_t a, std::size_t b) {
                      if (scores[a] != scores[b]) return scores[a] > scores[b];
                      return words[a].id < words[b].id;
                    });
  std::vector<Retrieved> out;
  out.reserve(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) out.push_back({words[order[i]], scores[order[i]]});
  return out;
}

}  // namespace bspa
