#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "bspa/matrix.hpp"
#include "bspa/text.hpp"

namespace bspa {

inline constexpr std::size_t kDefaultEmbeddingDim = 64;
inline constexpr double kInitScale = 0.1;

/// Trainable token-embedding table shared by the input and word encoders.
/// Rows 0..|vocab|-1 belong to vocabulary tokens; the last row is the OOV row.
class EncoderParams {
 public:
  /// Table drawn i.i.d. uniform in [-kInitScale, kInitScale] from `seed`.
  static EncoderParams initialize(TokenList vocab, std::size_t dim, std::uint64_t seed);

  /// Validates: dim >= 2, vocabulary injective, table sized (|vocab|+1) x dim, all finite.
  EncoderParams(TokenList vocab, std::size_t dim, std::vector<double> table, std::uint64_t seed);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t row_count() const noexcept { return vocab_.size() + 1; }
  std::size_t oov_row() const noexcept { return vocab_.size(); }
  std::uint64_t seed() const noexcept { return seed_; }
  const TokenList& vocab() const noexcept { return vocab_; }

  /// Row index of a token, or oov_row() when unknown.
  std::size_t row_of(std::string_view token) const;

  std::span<const double> row(std::size_t r) const { return {table_.data() + r * dim_, dim_}; }
  std::span<double> row(std::size_t r) { return {table_.data() + r * dim_, dim_}; }

  std::span<const double> values() const noexcept { return table_; }
  std::span<double> values() noexcept { return table_; }

  nlohmann::json to_json() const;
  static EncoderParams from_json(const nlohmann::json& j);

  /// SHA-256 over the canonical JSON dump.
  std::string fingerprint() const;

  friend bool operator==(const EncoderParams& a, const EncoderParams& b) {
    return a.dim_ == b.dim_ && a.seed_ == b.seed_ && a.vocab_ == b.vocab_ && a.table_ == b.table_;
  }

 private:
  TokenList vocab_;
  std::unordered_map<std::string, std::size_t> index_;
  std::size_t dim_;
  std::vector<double> table_;
  std::uint64_t seed_;
};

/// Sorted, de-duplicated union of the given token lists.
TokenList build_vocab(const std::vector<TokenList>& sources);

struct Embedding {
  std::vector<double> values;
};

/// (row, weight) pairs whose weighted sum is the mean-pooled encoding.
/// Duplicate tokens are merged into one entry with weight count/len.
std::vector<std::pair<std::size_t, double>> pooling_weights(const EncoderParams& params,
                                                            const TokenList& tokens);

/// Mean of the token rows; unknown tokens use the OOV row.
/// Throws ValidationError("cannot encode empty text") for an empty list.
Embedding encode(const EncoderParams& params, const TokenList& tokens);

/// u.v / (|u||v|). Throws ValidationError("degenerate embedding") on a zero vector.
double cosine_sim(std::span<const double> u, std::span<const double> v);
inline double cosine_sim(const Embedding& u, const Embedding& v) {
  return cosine_sim(u.values, v.values);
}

/// B x B matrix with entry (i, j) = cosine_sim(encode(inputs[i]), encode(words[j])).
Matrix similarity_matrix(const EncoderParams& params, const std::vector<TokenList>& inputs,
                         const std::vector<TokenList>& words);

}  // namespace bspa
