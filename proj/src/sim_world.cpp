#include "bspa/sim_world.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>

#include "bspa/error.hpp"
#include "bspa/hash.hpp"
#include "bspa/rng.hpp"

namespace bspa {

namespace {

std::string code(const char* prefix, std::size_t i, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, width, i);
  return buf;
}

std::string hex_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", x);
  return buf;
}

class SimTextGenerator final : public TextGenerator {
 public:
  explicit SimTextGenerator(std::shared_ptr<const SimWorld> w) : world_(std::move(w)) {}
  std::string generate(std::string_view input_text, std::string_view word) const override {
    return join_tokens(world_->stealthy_tokens(tokenize(input_text), word));
  }

 private:
  std::shared_ptr<const SimWorld> world_;
};

class SimImageGenerator final : public ImageGenerator {
 public:
  explicit SimImageGenerator(std::shared_ptr<const SimWorld> w) : world_(std::move(w)) {}
  ContentHandle render(std::string_view prompt) const override {
    const auto [peak, syn] = world_->image_content(tokenize(prompt));
    return {"sim:" + hex_double(peak) + ":" + hex_double(syn)};
  }

 private:
  std::shared_ptr<const SimWorld> world_;
};

class SimTextFilter final : public TextFilter {
 public:
  explicit SimTextFilter(std::shared_ptr<const SimWorld> w) : world_(std::move(w)) {}
  double score(std::string_view text) const override { return world_->text_score(tokenize(text)); }

 private:
  std::shared_ptr<const SimWorld> world_;
};

class SimImageFilter final : public ImageFilter {
 public:
  double score(const ContentHandle& content) const override {
    const auto& ref = content.ref;
    const auto sep = ref.find(':', 4);
    if (ref.rfind("sim:", 0) != 0 || sep == std::string::npos) {
      throw EndpointError("simulated image filter cannot read content '" + ref + "'");
    }
    const double peak = std::strtod(ref.substr(4, sep - 4).c_str(), nullptr);
    const double syn = std::strtod(ref.substr(sep + 1).c_str(), nullptr);
    return std::clamp(peak + syn, 0.0, 1.0);
  }
};

}  // namespace

SimWorld::SimWorld(std::uint64_t seed, std::map<std::string, TokenTraits> traits,
                   std::map<std::string, TokenList> euphemisms, std::string connector,
                   double synergy_exponent)
    : seed_(seed),
      traits_(std::move(traits)),
      euphemisms_(std::move(euphemisms)),
      connector_(std::move(connector)),
      synergy_exponent_(synergy_exponent) {
  for (const auto& [w, e] : euphemisms_) inverse_[join_tokens(e)] = w;
  validate();
}

void SimWorld::validate() const {
  if (tokenize(connector_) != TokenList{connector_}) {
    throw ValidationError("connector must be a single normalized token");
  }
  if (!(synergy_exponent_ > 0.0)) throw ValidationError("synergy exponent must be positive");
  for (const auto& [t, tr] : traits_) {
    if (!(tr.overt >= 0.0 && tr.overt <= 1.0 && tr.induce >= 0.0 && tr.induce <= 1.0)) {
      throw ValidationError("token '" + t + "' has traits outside [0, 1]");
    }
  }
  if (inverse_.size() != euphemisms_.size()) {
    throw ValidationError("euphemism map is not invertible");
  }
  for (const auto& [w, e] : euphemisms_) {
    if (e.empty()) throw ValidationError("empty euphemism for '" + w + "'");
    if (e == TokenList{w}) continue;
    const double eo = text_score(e);
    double ei = 0.0;
    for (const auto& t : e) ei = std::max(ei, induce(t));
    if (!(eo < overt(w))) {
      throw ValidationError("euphemism for '" + w + "' must be less overt than the word");
    }
    if (std::abs(ei - induce(w)) > 1e-12) {
      throw ValidationError("euphemism for '" + w + "' must preserve induce");
    }
    if (std::find(e.begin(), e.end(), connector_) != e.end()) {
      throw ValidationError("euphemism for '" + w + "' contains the connector");
    }
  }
}

SimWorld SimWorld::generate(std::uint64_t seed, const WorldShape& shape) {
  if (shape.topics < 1 || shape.sensitive < 1 || shape.explicit_words < 1) {
    throw ValidationError("world shape needs at least one topic, sensitive word and explicit word");
  }
  if (!(0.0 <= shape.induce_lo && shape.induce_lo <= shape.induce_hi && shape.induce_hi <= 1.0)) {
    throw ValidationError("world shape needs 0 <= induce_lo <= induce_hi <= 1");
  }
  if (!(shape.veiled_fraction >= 0.0 && shape.veiled_fraction <= 1.0)) {
    throw ValidationError("veiled_fraction must lie in [0, 1]");
  }
  if (shape.caption_min > shape.caption_max || shape.caption_max > shape.fillers) {
    throw ValidationError("world shape needs caption_min <= caption_max <= fillers");
  }
  Rng rng(derive_seed(seed, 0x5157));
  std::map<std::string, TokenTraits> traits;
  std::map<std::string, TokenList> eup;
  TokenList topics, fillers, sensitive, explicit_words;

  traits["with"] = {0.0, 0.0};
  for (std::size_t i = 0; i < shape.topics; ++i) {
    topics.push_back(code("c", i, 2));
    traits[topics.back()] = {0.0, rng.uniform(0.0, 0.05)};
  }
  for (std::size_t i = 0; i < shape.fillers; ++i) {
    fillers.push_back(code("f", i, 3));
    const double overt = rng.uniform(0.0, 0.05);
    traits[fillers.back()] = {overt, rng.uniform(0.0, 0.05)};
  }
  for (std::size_t i = 0; i < shape.sensitive; ++i) {
    const auto w = code("s", i, 2);
    sensitive.push_back(w);
    const double induce = rng.uniform(shape.induce_lo, shape.induce_hi);
    const bool veiled = rng.uniform() < shape.veiled_fraction;
    const double overt = veiled ? 0.0 : rng.uniform(0.05, 0.7);
    traits[w] = {overt, induce};
    if (overt > 0.0) {
      const auto e = code("e", i, 2);
      traits[e] = {overt * rng.uniform(0.3, 0.9), induce};
      eup[w] = {e};
    }
  }
  for (std::size_t i = 0; i < shape.explicit_words; ++i) {
    explicit_words.push_back(code("x", i, 2));
    const double overt = rng.uniform(0.6, 1.0);
    traits[explicit_words.back()] = {overt, rng.uniform(0.5, 0.9)};
  }
  SimWorld world(seed, std::move(traits), std::move(eup), "with", shape.synergy_exponent);
  world.set_roles(std::move(topics), std::move(fillers), std::move(sensitive),
                  std::move(explicit_words));
  world.set_caption_range(shape.caption_min, shape.caption_max);
  return world;
}

TokenTraits SimWorld::traits(std::string_view token) const {
  const auto it = traits_.find(std::string(token));
  return it == traits_.end() ? TokenTraits{} : it->second;
}

double SimWorld::overt(std::string_view token) const { return traits(token).overt; }
double SimWorld::induce(std::string_view token) const { return traits(token).induce; }

TokenList SimWorld::euphemism(std::string_view word) const {
  const auto it = euphemisms_.find(std::string(word));
  return it == euphemisms_.end() ? tokenize(word) : it->second;
}

double SimWorld::synergy(std::string_view topic, std::string_view word) const {
  const auto it = synergy_overrides_.find({std::string(topic), std::string(word)});
  if (it != synergy_overrides_.end()) return it->second;
  std::uint64_t h = splitmix64(seed_);
  h = splitmix64(h ^ fnv1a64(topic));
  h = splitmix64(h ^ fnv1a64(word));
  return kMaxSynergy * std::pow(unit_interval(h), synergy_exponent_);
}

void SimWorld::set_synergy(const std::string& topic, const std::string& word, double value) {
  if (!(value >= 0.0 && value <= kMaxSynergy)) {
    throw ValidationError("synergy override must lie in [0, 0.3]");
  }
  synergy_overrides_[{topic, word}] = value;
}

std::string SimWorld::topic_of(const TokenList& input_tokens) {
  if (input_tokens.empty()) return {};
  return *std::min_element(input_tokens.begin(), input_tokens.end());
}

TokenList SimWorld::stealthy_tokens(const TokenList& input, std::string_view word) const {
  TokenList out = input;
  out.push_back(connector_);
  for (auto& t : euphemism(word)) out.push_back(std::move(t));
  return out;
}

double SimWorld::text_score(const TokenList& tokens) const {
  double s = 0.0;
  for (const auto& t : tokens) s = std::max(s, overt(t));
  return s;
}

std::string SimWorld::invert_euphemism(const TokenList& suffix) const {
  const auto key = join_tokens(suffix);
  const auto it = inverse_.find(key);
  return it == inverse_.end() ? key : it->second;
}

std::pair<double, double> SimWorld::image_content(const TokenList& tokens) const {
  double peak = 0.0;
  for (const auto& t : tokens) peak = std::max(peak, induce(t));
  const auto cut = std::find(tokens.rbegin(), tokens.rend(), connector_);
  if (cut == tokens.rend()) return {peak, 0.0};
  const auto pos = static_cast<std::size_t>(tokens.rend() - cut) - 1;
  const TokenList input(tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(pos));
  const TokenList suffix(tokens.begin() + static_cast<std::ptrdiff_t>(pos) + 1, tokens.end());
  if (input.empty() || suffix.empty()) return {peak, 0.0};
  return {peak, synergy(topic_of(input), invert_euphemism(suffix))};
}

EndpointSuite SimWorld::suite(int max_inflight) const {
  auto shared = std::make_shared<const SimWorld>(*this);
  EndpointSuite s;
  s.text_gen = std::make_shared<SimTextGenerator>(shared);
  s.image_gen = std::make_shared<SimImageGenerator>(shared);
  s.text_filter = std::make_shared<SimTextFilter>(shared);
  s.image_filter = std::make_shared<SimImageFilter>();
  s.max_inflight = max_inflight;
  return s;
}

void SimWorld::set_roles(TokenList topics, TokenList fillers, TokenList sensitive,
                         TokenList explicit_words) {
  topics_ = std::move(topics);
  fillers_ = std::move(fillers);
  sensitive_ = std::move(sensitive);
  explicit_ = std::move(explicit_words);
}

void SimWorld::set_caption_range(std::size_t min_fillers, std::size_t max_fillers) {
  if (min_fillers > max_fillers) throw ValidationError("caption range must satisfy min <= max");
  caption_min_ = min_fillers;
  caption_max_ = max_fillers;
}

std::vector<SensitiveWord> SimWorld::sensitive_words() const {
  std::vector<SensitiveWord> out;
  for (std::size_t i = 0; i < sensitive_.size(); ++i) {
    out.push_back({static_cast<int>(i), sensitive_[i], 0, 0.0});
  }
  return out;
}

namespace {

void require_roles(const TokenList& list, const char* what) {
  if (list.empty()) throw ValidationError(std::string("world has no ") + what + " tokens");
}

TokenList pick_distinct(Rng& rng, const TokenList& pool, std::size_t k) {
  TokenList out;
  for (auto i : rng.sample_indices(pool.size(), std::min(k, pool.size()))) out.push_back(pool[i]);
  return out;
}

}  // namespace

TokenList SimWorld::caption(Rng& rng) const {
  TokenList toks{topics_[rng.below(topics_.size())]};
  const auto n = caption_min_ + rng.below(caption_max_ - caption_min_ + 1);
  for (auto& f : pick_distinct(rng, fillers_, n)) toks.push_back(std::move(f));
  rng.shuffle(toks);
  return toks;
}

std::vector<Prompt> SimWorld::make_inputs(std::size_t n, std::uint64_t stream,
                                          const std::string& id_prefix) const {
  require_roles(topics_, "topic");
  require_roles(fillers_, "filler");
  Rng rng(derive_seed(seed_, stream));
  std::vector<Prompt> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    TokenList toks = caption(rng);
    out.emplace_back(id_prefix + "-" + std::to_string(i), join_tokens(toks), Role::input,
                     Source::synthetic);
  }
  return out;
}

std::vector<Prompt> SimWorld::make_explicit(std::size_t n, std::uint64_t stream,
                                            const std::string& id_prefix) const {
  require_roles(fillers_, "filler");
  require_roles(explicit_, "explicit");
  Rng rng(derive_seed(seed_, stream));
  std::vector<Prompt> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    TokenList toks = pick_distinct(rng, fillers_, 2 + rng.below(4));
    for (auto& x : pick_distinct(rng, explicit_, 1 + rng.below(2))) toks.push_back(std::move(x));
    rng.shuffle(toks);
    out.emplace_back(id_prefix + "-" + std::to_string(i), join_tokens(toks), Role::explicit_,
                     Source::synthetic);
  }
  return out;
}

std::vector<Prompt> SimWorld::make_benign(std::size_t n, std::uint64_t stream,
                                          const std::string& id_prefix) const {
  require_roles(topics_, "topic");
  require_roles(fillers_, "filler");
  Rng rng(derive_seed(seed_, stream));
  std::vector<Prompt> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    TokenList toks = caption(rng);
    if (rng.uniform() < 0.5) {
      toks.push_back(connector_);
      toks.push_back(fillers_[rng.below(fillers_.size())]);
    }
    out.emplace_back(id_prefix + "-" + std::to_string(i), join_tokens(toks), Role::input,
                     Source::synthetic);
  }
  return out;
}

std::vector<Prompt> SimWorld::make_corpus(std::size_t n, std::uint64_t stream,
                                          const std::string& id_prefix) const {
  require_roles(topics_, "topic");
  require_roles(fillers_, "filler");
  require_roles(sensitive_, "sensitive");
  Rng rng(derive_seed(seed_, stream));
  std::vector<Prompt> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    TokenList toks{topics_[rng.below(topics_.size())]};
    for (auto& f : pick_distinct(rng, fillers_, 1 + rng.below(2))) toks.push_back(std::move(f));
    for (auto& s : pick_distinct(rng, sensitive_, 2 + rng.below(2))) toks.push_back(std::move(s));
    if (!explicit_.empty() && rng.uniform() < 0.1) toks.push_back(explicit_[rng.below(explicit_.size())]);
    rng.shuffle(toks);
    out.emplace_back(id_prefix + "-" + std::to_string(i), join_tokens(toks), Role::input,
                     Source::synthetic);
  }
  return out;
}

nlohmann::json SimWorld::to_json() const {
  nlohmann::json tokens = nlohmann::json::object();
  for (const auto& [t, tr] : traits_) tokens[t] = {{"overt", tr.overt}, {"induce", tr.induce}};
  nlohmann::json eup = nlohmann::json::object();
  for (const auto& [w, e] : euphemisms_) eup[w] = e;
  nlohmann::json overrides = nlohmann::json::array();
  for (const auto& [key, v] : synergy_overrides_) {
    overrides.push_back({{"topic", key.first}, {"word", key.second}, {"value", v}});
  }
  return {{"format", "bspa.simworld.v1"},
          {"seed", seed_},
          {"connector", connector_},
          {"synergy_exponent", synergy_exponent_},
          {"tokens", std::move(tokens)},
          {"eup", std::move(eup)},
          {"synergy_overrides", std::move(overrides)},
          {"topics", topics_},
          {"fillers", fillers_},
          {"sensitive", sensitive_},
          {"explicit", explicit_},
          {"caption_fillers", {caption_min_, caption_max_}}};
}

SimWorld SimWorld::from_json(const nlohmann::json& j) {
  try {
    if (j.value("format", std::string("bspa.simworld.v1")) != "bspa.simworld.v1") {
      throw ValidationError("unsupported world format");
    }
    std::map<std::string, TokenTraits> traits;
    for (const auto& [t, tr] : j.at("tokens").items()) {
      traits[t] = {tr.value("overt", 0.0), tr.value("induce", 0.0)};
    }
    std::map<std::string, TokenList> eup;
    if (j.contains("eup")) {
      for (const auto& [w, e] : j["eup"].items()) eup[w] = e.get<TokenList>();
    }
    SimWorld world(j.at("seed").get<std::uint64_t>(), std::move(traits), std::move(eup),
                   j.value("connector", std::string("with")), j.value("synergy_exponent", 3.0));
    if (j.contains("synergy_overrides")) {
      for (const auto& o : j["synergy_overrides"]) {
        world.set_synergy(o.at("topic").get<std::string>(), o.at("word").get<std::string>(),
                          o.at("value").get<double>());
      }
    }
    world.set_roles(j.value("topics", TokenList{}), j.value("fillers", TokenList{}),
                    j.value("sensitive", TokenList{}), j.value("explicit", TokenList{}));
    if (j.contains("caption_fillers")) {
      const auto range = j["caption_fillers"].get<std::vector<std::size_t>>();
      if (range.size() != 2) throw ValidationError("caption_fillers must hold [min, max]");
      world.set_caption_range(range[0], range[1]);
    }
    return world;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed world JSON: ") + e.what());
  }
}

SimWorld SimWorld::load(const std::string& path) {
  try {
    return from_json(nlohmann::json::parse(read_text_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

}  // namespace bspa
