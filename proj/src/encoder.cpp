#include "bspa/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "bspa/error.hpp"
#include "bspa/hash.hpp"
#include "bspa/rng.hpp"

namespace bspa {

EncoderParams EncoderParams::initialize(TokenList vocab, std::size_t dim, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> table((vocab.size() + 1) * dim);
  for (auto& x : table) x = rng.uniform(-kInitScale, kInitScale);
  return EncoderParams(std::move(vocab), dim, std::move(table), seed);
}

EncoderParams::EncoderParams(TokenList vocab, std::size_t dim, std::vector<double> table,
                             std::uint64_t seed)
    : vocab_(std::move(vocab)), dim_(dim), table_(std::move(table)), seed_(seed) {
  if (dim_ < 2) throw ValidationError("embedding dimension must be >= 2");
  if (table_.size() != (vocab_.size() + 1) * dim_) {
    throw ValidationError("embedding table has " + std::to_string(table_.size()) +
                          " entries, expected " + std::to_string((vocab_.size() + 1) * dim_));
  }
  for (double x : table_) {
    if (!std::isfinite(x)) throw ValidationError("embedding table contains a non-finite value");
  }
  index_.reserve(vocab_.size());
  for (std::size_t i = 0; i < vocab_.size(); ++i) {
    if (!index_.emplace(vocab_[i], i).second) {
      throw ValidationError("duplicate vocabulary token '" + vocab_[i] + "'");
    }
  }
}

std::size_t EncoderParams::row_of(std::string_view token) const {
  const auto it = index_.find(std::string(token));
  return it == index_.end() ? oov_row() : it->second;
}

nlohmann::json EncoderParams::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t r = 0; r < row_count(); ++r) {
    const auto v = row(r);
    rows.push_back(std::vector<double>(v.begin(), v.end()));
  }
  return {{"format", "bspa.encoder.v1"}, {"dim", dim_},         {"seed", seed_},
          {"vocab", vocab_},             {"oov_row", oov_row()}, {"table", std::move(rows)}};
}

EncoderParams EncoderParams::from_json(const nlohmann::json& j) {
  try {
    if (j.at("format").get<std::string>() != "bspa.encoder.v1") {
      throw ValidationError("unsupported encoder checkpoint format");
    }
    auto vocab = j.at("vocab").get<TokenList>();
    const auto dim = j.at("dim").get<std::size_t>();
    if (j.at("oov_row").get<std::size_t>() != vocab.size()) {
      throw ValidationError("encoder checkpoint oov_row must equal vocabulary size");
    }
    std::vector<double> table;
    for (const auto& r : j.at("table")) {
      if (r.size() != dim) throw ValidationError("encoder checkpoint row has wrong width");
      for (const auto& x : r) table.push_back(x.get<double>());
    }
    return EncoderParams(std::move(vocab), dim, std::move(table), j.at("seed").get<std::uint64_t>());
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed encoder checkpoint: ") + e.what());
  }
}

std::string EncoderParams::fingerprint() const { return sha256_hex(to_json().dump()); }

TokenList build_vocab(const std::vector<TokenList>& sources) {
  std::set<std::string> all;
  for (const auto& s : sources) all.insert(s.begin(), s.end());
  return TokenList(all.begin(), all.end());
}

std::vector<std::pair<std::size_t, double>> pooling_weights(const EncoderParams& params,
                                                            const TokenList& tokens) {
  if (tokens.empty()) throw ValidationError("cannot encode empty text");
  std::map<std::size_t, std::size_t> counts;
  for (const auto& t : tokens) ++counts[params.row_of(t)];
  std::vector<std::pair<std::size_t, double>> out;
  out.reserve(counts.size());
  const auto n = static_cast<double>(tokens.size());
  for (const auto& [r, c] : counts) out.emplace_back(r, static_cast<double>(c) / n);
  return out;
}

Embedding encode(const EncoderParams& params, const TokenList& tokens) {
  if (tokens.empty()) throw ValidationError("cannot encode empty text");
  Embedding e{std::vector<double>(params.dim(), 0.0)};
  for (const auto& t : tokens) {
    const auto r = params.row(params.row_of(t));
    for (std::size_t k = 0; k < r.size(); ++k) e.values[k] += r[k];
  }
  const auto n = static_cast<double>(tokens.size());
  for (auto& x : e.values) x /= n;
  return e;
}

double cosine_sim(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw ValidationError("cosine_sim: dimension mismatch");
  double dot = 0.0, uu = 0.0, vv = 0.0;
  for (std::size_t k = 0; k < u.size(); ++k) {
    dot += u[k] * v[k];
    uu += u[k] * u[k];
    vv += v[k] * v[k];
  }
  if (uu == 0.0 || vv == 0.0) throw ValidationError("degenerate embedding");
  return std::clamp(dot / (std::sqrt(uu) * std::sqrt(vv)), -1.0, 1.0);
}

Matrix similarity_matrix(const EncoderParams& params, const std::vector<TokenList>& inputs,
                         const std::vector<TokenList>& words) {
  if (inputs.size() != words.size()) {
    throw ValidationError("similarity_matrix: batch sizes differ (" +
                          std::to_string(inputs.size()) + " vs " + std::to_string(words.size()) +
                          ")");
  }
  if (inputs.empty()) throw ValidationError("similarity_matrix: empty batch");
  std::vector<Embedding> u, v;
  for (const auto& x : inputs) u.push_back(encode(params, x));
  for (const auto& w : words) v.push_back(encode(params, w));
  Matrix s(inputs.size(), words.size());
  for (std::size_t i = 0; i < u.size(); ++i)
    for (std::size_t j = 0; j < v.size(); ++j) s(i, j) = cosine_sim(u[i], v[j]);
  return s;
}

}  // namespace bspa
