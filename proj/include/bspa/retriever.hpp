#pragma once

#include <string>
#include <vector>

#include "bspa/corpus.hpp"
#include "bspa/encoder.hpp"

namespace bspa {

/// Encoded sensitive words. Row i of vectors() is the encoding of words()[i].
class WordIndex {
 public:
  WordIndex(std::vector<SensitiveWord> words, Matrix vectors, std::string params_fingerprint);

  const std::vector<SensitiveWord>& words() const noexcept { return words_; }
  const Matrix& vectors() const noexcept { return vectors_; }
  std::size_t size() const noexcept { return words_.size(); }
  const std::string& params_fingerprint() const noexcept { return fingerprint_; }

  /// False when the index was built from different parameters.
  bool built_from(const EncoderParams& params) const { return params.fingerprint() == fingerprint_; }

 private:
  std::vector<SensitiveWord> words_;
  Matrix vectors_;
  std::string fingerprint_;
};

WordIndex build_index(const EncoderParams& params, const std::vector<SensitiveWord>& words);

struct Retrieved {
  SensitiveWord word;
  double score = 0.0;
};

/// Exact scan: the k words with largest cosine similarity to `query`,
/// descending, ties by ascending word id.
std::vector<Retrieved> retrieve_topk(const WordIndex& index, const Embedding& query, int k);

}  // namespace bspa
