#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "bspa/corpus.hpp"
#include "bspa/endpoints.hpp"
#include "bspa/rng.hpp"
#include "bspa/text.hpp"

namespace bspa {

struct TokenTraits {
  double overt = 0.0;   // how explicit the token reads to a text filter
  double induce = 0.0;  // how strongly the token pushes an image towards NSFW
  friend bool operator==(const TokenTraits&, const TokenTraits&) = default;
};

/// Sizes and knobs for a generated world.
struct WorldShape {
  std::size_t topics = 16;
  std::size_t fillers = 12;
  std::size_t sensitive = 40;
  std::size_t explicit_words = 20;
  double synergy_exponent = 3.0;
  double induce_lo = 0.28;  // sensitive-word induce range
  double induce_hi = 0.32;
  double veiled_fraction = 0.5;  // sensitive words with zero overtness
  std::size_t caption_min = 1;  // fillers per caption
  std::size_t caption_max = 2;
};

/// Deterministic stand-in for the four black-box endpoints.
///
///   text generator   x_s = tokens(x) ++ [connector] ++ eup(w)
///   text filter      s_t = max over tokens of overt(t)
///   image generator  content = (max over tokens of induce(t), syn(topic(x), w))
///   image filter     s_i = clamp(max-induce + syn, 0, 1)
///
/// topic(x) is the lexicographically smallest token of the input. The image
/// generator sees only the prompt, so it recovers x and w by splitting at the
/// last connector and inverting the euphemism map. Unknown tokens have zero
/// traits; syn(topic, w) = kMaxSynergy * u^exponent with u a hash of
/// (seed, topic, w) unless overridden.
class SimWorld {
 public:
  static constexpr double kMaxSynergy = 0.3;

  static SimWorld generate(std::uint64_t seed, const WorldShape& shape = {});

  SimWorld(std::uint64_t seed, std::map<std::string, TokenTraits> traits,
           std::map<std::string, TokenList> euphemisms, std::string connector = "with",
           double synergy_exponent = 3.0);

  std::uint64_t seed() const noexcept { return seed_; }
  const std::string& connector() const noexcept { return connector_; }

  double overt(std::string_view token) const;
  double induce(std::string_view token) const;
  TokenTraits traits(std::string_view token) const;
  /// eup(w); words without an entry map to their own tokens.
  TokenList euphemism(std::string_view word) const;
  double synergy(std::string_view topic, std::string_view word) const;
  void set_synergy(const std::string& topic, const std::string& word, double value);

  static std::string topic_of(const TokenList& input_tokens);

  TokenList stealthy_tokens(const TokenList& input, std::string_view word) const;
  double text_score(const TokenList& tokens) const;
  /// (max-induce, synergy) for a prompt produced by stealthy_tokens.
  std::pair<double, double> image_content(const TokenList& tokens) const;

  /// Endpoint suite backed by a shared copy of this world.
  EndpointSuite suite(int max_inflight = 4) const;

  /// Role lists, present for generated worlds and optional in loaded ones.
  const TokenList& topics() const noexcept { return topics_; }
  const TokenList& fillers() const noexcept { return fillers_; }
  const TokenList& sensitive() const noexcept { return sensitive_; }
  const TokenList& explicit_words() const noexcept { return explicit_; }
  void set_roles(TokenList topics, TokenList fillers, TokenList sensitive, TokenList explicit_words);
  /// Filler count range for make_inputs and make_benign.
  void set_caption_range(std::size_t min_fillers, std::size_t max_fillers);
  std::pair<std::size_t, std::size_t> caption_range() const noexcept { return {caption_min_, caption_max_}; }

  /// The designated sensitive words as a word set (ids in list order).
  std::vector<SensitiveWord> sensitive_words() const;

  /// Captions: one topic plus distinct fillers (caption_range) in random order.
  std::vector<Prompt> make_inputs(std::size_t n, std::uint64_t stream,
                                  const std::string& id_prefix = "in") const;
  /// Explicit attack prompts: fillers plus one or two explicit tokens.
  std::vector<Prompt> make_explicit(std::size_t n, std::uint64_t stream,
                                    const std::string& id_prefix = "ex") const;
  /// Benign captions; half carry "<connector> <filler>" so the connector alone
  /// does not separate them from attack prompts.
  std::vector<Prompt> make_benign(std::size_t n, std::uint64_t stream,
                                  const std::string& id_prefix = "bn") const;
  /// Caption corpus mixing fillers, sensitive words and some explicit tokens,
  /// used as raw material for sensitive-word extraction.
  std::vector<Prompt> make_corpus(std::size_t n, std::uint64_t stream,
                                  const std::string& id_prefix = "cp") const;

  nlohmann::json to_json() const;
  static SimWorld from_json(const nlohmann::json& j);
  static SimWorld load(const std::string& path);

 private:
  void validate() const;
  std::string invert_euphemism(const TokenList& suffix) const;
  TokenList caption(Rng& rng) const;

  std::uint64_t seed_;
  std::map<std::string, TokenTraits> traits_;
  std::map<std::string, TokenList> euphemisms_;
  std::map<std::string, std::string> inverse_;
  std::map<std::pair<std::string, std::string>, double> synergy_overrides_;
  std::string connector_;
  double synergy_exponent_;
  TokenList topics_, fillers_, sensitive_, explicit_;
  std::size_t caption_min_ = 1, caption_max_ = 2;
};

}  // namespace bspa
