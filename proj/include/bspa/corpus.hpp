#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "bspa/endpoints.hpp"
#include "bspa/error.hpp"
#include "bspa/text.hpp"

namespace bspa {

/// Default toxicity cut used wherever a text score is thresholded.
inline constexpr double kDefaultToxicThreshold = 0.3;

struct SensitiveWord {
  int id = 0;
  std::string surface;
  int df = 0;
  double tfidf = 0.0;
  friend bool operator==(const SensitiveWord&, const SensitiveWord&) = default;
};

struct TermScore {
  std::string token;
  double score = 0.0;
};

/// Corpus-level TF-IDF: tf(t) = count(t) / total tokens, idf(t) = ln(N / df(t)).
/// Sorted by score descending, ties lexicographically ascending.
/// Throws ValidationError("empty corpus") when no document has tokens.
std::vector<TermScore> tfidf_rank(const std::vector<TokenList>& docs);

/// Drops prompts whose text tokenizes to nothing and later duplicates of the
/// same token sequence. Order of survivors is preserved.
std::vector<Prompt> clean_prompts(const std::vector<Prompt>& prompts);

class InsufficientWordsError : public ValidationError {
 public:
  InsufficientWordsError(std::size_t achievable, std::size_t requested);
  std::size_t achievable() const noexcept { return achievable_; }

 private:
  std::size_t achievable_;
};

/// Keeps prompts the filter scores at or below `threshold`, TF-IDF ranks the
/// survivors and returns the top `size` tokens with ids in rank order.
std::vector<SensitiveWord> build_sensitive_word_set(const std::vector<Prompt>& corpus,
                                                    const TextFilter& text_filter,
                                                    std::size_t size = 50,
                                                    double threshold = kDefaultToxicThreshold);

struct CorpusStats {
  std::size_t prompt_count = 0;
  double avg_length = 0.0;
  std::size_t token_count = 0;  // distinct tokens
  double toxic_rate = 0.0;      // fraction with score strictly above threshold
};

CorpusStats dataset_stats(const std::vector<Prompt>& prompts, const TextFilter& text_filter,
                          double threshold = kDefaultToxicThreshold);

void write_words_jsonl(const std::string& path, const std::vector<SensitiveWord>& words);
std::string words_to_jsonl(const std::vector<SensitiveWord>& words);
/// Validates that ids are 0..n-1 without gaps and surfaces are unique.
std::vector<SensitiveWord> read_words_jsonl(const std::string& path);
void validate_word_set(const std::vector<SensitiveWord>& words);

}  // namespace bspa
