#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "bspa/env.hpp"
#include "bspa/error.hpp"
#include "bspa/labeling.hpp"
#include "test_util.hpp"

namespace bspa {
namespace {

using testing::CountingSuite;
using testing::tiny_world;

std::vector<SensitiveWord> tiny_words() { return {{0, "soft"}, {1, "lace"}, {2, "gore"}}; }

std::vector<Prompt> tiny_inputs() {
  std::vector<Prompt> out;
  const char* texts[] = {"a-cat red", "b-dog blue", "red blue a-cat", "b-dog", "blue b-dog red"};
  for (int i = 0; i < 5; ++i) out.emplace_back("t" + std::to_string(i), texts[i], Role::input, Source::synthetic);
  return out;
}

/// Table-driven recomputation of the tiny world's endpoint formulas.
struct TinyOracle {
  std::map<std::string, double> overt = {{"red", 0.05}, {"silk", 0.2}, {"gore", 0.9}};
  std::map<std::string, double> induce = {{"a-cat", 0.01}, {"b-dog", 0.02}, {"blue", 0.03},
                                          {"soft", 0.3},   {"silk", 0.4},   {"gore", 0.8}};
  std::map<std::pair<std::string, std::string>, double> syn = {
      {{"a-cat", "soft"}, 0.25}, {{"a-cat", "lace"}, 0.0}, {{"a-cat", "gore"}, 0.0},
      {{"b-dog", "soft"}, 0.0},  {{"b-dog", "lace"}, 0.2}, {{"b-dog", "gore"}, 0.1}};

  double lookup(const std::map<std::string, double>& m, const std::string& t) const {
    auto it = m.find(t);
    return it == m.end() ? 0.0 : it->second;
  }
  TokenList stealthy(const TokenList& x, const std::string& w) const {
    TokenList out = x;
    out.push_back("with");
    out.push_back(w == "lace" ? "silk" : w);
    return out;
  }
  double s_t(const TokenList& xs) const {
    double m = 0;
    for (const auto& t : xs) m = std::max(m, lookup(overt, t));
    return m;
  }
  double s_i(const TokenList& x, const std::string& w) const {
    double m = 0;
    for (const auto& t : stealthy(x, w)) m = std::max(m, lookup(induce, t));
    const auto topic = *std::min_element(x.begin(), x.end());
    return std::min(1.0, m + syn.at({topic, w}));
  }
};

TEST(PseudoLabel, HandArithmetic) {
  EXPECT_NEAR(pseudo_label(0.4, 0.8, 0.5, {1.0, 0.5}), 0.65, 1e-15);
  EXPECT_DOUBLE_EQ(pseudo_label(0.4, 0.8, 0.5, {0.0, 0.0}), 0.8);
}

TEST(PseudoLabel, MonotoneInScores) {
  const LabelWeights w{1.0, 0.5};
  EXPECT_LT(pseudo_label(0.2, 0.5, 0.1, w), pseudo_label(0.2, 0.6, 0.1, w));
  EXPECT_GT(pseudo_label(0.2, 0.5, 0.1, w), pseudo_label(0.3, 0.5, 0.1, w));
}

TEST(ComputePseudoLabels, ZeroWeightsPickMaxImageScore) {
  const auto suite = tiny_world().suite();
  const auto params = EncoderParams::initialize({"a-cat", "b-dog", "red", "blue", "with", "soft", "silk", "gore"}, 8, 1);
  const TinyOracle oracle;
  for (const auto& x : tiny_inputs()) {
    const auto set = compute_pseudo_labels(x, tiny_words(), suite, params, {0.0, 0.0});
    int best = 0;
    double best_si = -1;
    for (const auto& w : tiny_words()) {
      const double si = oracle.s_i(x.tokens(), w.surface);
      if (si > best_si) best_si = si, best = w.id;
    }
    EXPECT_EQ(set.positive, best) << x.text();
    for (const auto& r : set.records) EXPECT_DOUBLE_EQ(r.s, r.s_i);
  }
}

TEST(ComputePseudoLabels, MatchesBruteForceArgmax) {
  const auto suite = tiny_world().suite();
  const auto params = EncoderParams::initialize({"a-cat", "b-dog", "red", "blue", "with", "soft", "silk", "gore"}, 8, 2);
  const TinyOracle oracle;
  for (const LabelWeights weights : {LabelWeights{0, 0}, LabelWeights{1, 0}, LabelWeights{1, 0.5}}) {
    for (const auto& x : tiny_inputs()) {
      const auto set = compute_pseudo_labels(x, tiny_words(), suite, params, weights);
      ASSERT_EQ(set.records.size(), 3u);
      int best = -1;
      double best_s = 0;
      for (const auto& w : tiny_words()) {
        const auto xs = oracle.stealthy(x.tokens(), w.surface);
        const auto& r = set.records[w.id];
        EXPECT_DOUBLE_EQ(r.s_t, oracle.s_t(xs));
        EXPECT_NEAR(r.s_i, oracle.s_i(x.tokens(), w.surface), 1e-15);
        const double sim = cosine_sim(encode(params, x.tokens()), encode(params, xs));
        EXPECT_NEAR(r.sim, sim, 1e-12);
        const double s = r.s_i - weights.alpha * r.s_t + weights.beta * sim;
        EXPECT_NEAR(r.s, s, 1e-12);
        if (best < 0 || s > best_s) best_s = s, best = w.id;
      }
      EXPECT_EQ(set.positive, best) << x.text();
      EXPECT_EQ(set.negatives.size(), 2u);
      EXPECT_EQ(std::count(set.negatives.begin(), set.negatives.end(), set.positive), 0);
    }
  }
}

TEST(ComputePseudoLabels, TiesGoToLowestId) {
  SimWorld w(0, {{"x", {0, 0}}, {"p", {0, 0.6}}, {"q", {0, 0.6}}}, {});
  w.set_synergy("x", "p", 0.0);
  w.set_synergy("x", "q", 0.0);
  const auto params = EncoderParams::initialize({"x", "p", "q", "with"}, 4, 0);
  const Prompt x("i", "x", Role::input, Source::synthetic);
  const auto set = compute_pseudo_labels(x, {{0, "q"}, {1, "p"}}, w.suite(), params, {1, 0});
  EXPECT_EQ(set.positive, 0);
}

TEST(ComputePseudoLabels, ShiftingImageScoresKeepsPositive) {
  const auto params = EncoderParams::initialize({"a-cat", "red", "with", "soft", "silk", "gore"}, 8, 3);
  const auto world = tiny_world();
  const Prompt x("i", "a-cat red", Role::input, Source::synthetic);
  auto scores = score_pairs(world.suite(), x, tiny_words());
  const auto base = label_from_scores(x, tiny_words(), scores, params, {1, 0.5});
  for (auto& s : scores) s.s_i += 0.37;
  EXPECT_EQ(label_from_scores(x, tiny_words(), scores, params, {1, 0.5}).positive, base.positive);
}

TEST(ComputePseudoLabels, CacheReusesEndpointScoresButRecomputesSim) {
  CountingSuite counting(tiny_world().suite());
  const auto words = tiny_words();
  auto p1 = EncoderParams::initialize({"a-cat", "red", "with", "soft", "silk", "gore"}, 8, 4);
  const auto p2 = EncoderParams::initialize({"a-cat", "red", "with", "soft", "silk", "gore"}, 8, 5);
  const Prompt x("i", "a-cat red", Role::input, Source::synthetic);
  ScoreCache cache;
  const auto a = compute_pseudo_labels(x, words, counting.suite, p1, {1, 0.5}, &cache);
  const auto b = compute_pseudo_labels(x, words, counting.suite, p2, {1, 0.5}, &cache);
  EXPECT_EQ(counting.generate->load(), 3);
  EXPECT_EQ(counting.text_scores->load(), 3);
  EXPECT_EQ(counting.renders->load(), 3);
  EXPECT_TRUE(cache.contains("i"));
  bool sim_changed = false;
  for (std::size_t i = 0; i < 3; ++i) {
    EXPECT_EQ(a.records[i].s_t, b.records[i].s_t);
    EXPECT_EQ(a.records[i].s_i, b.records[i].s_i);
    sim_changed |= a.records[i].sim != b.records[i].sim;
  }
  EXPECT_TRUE(sim_changed);
}

TEST(ComputePseudoLabels, DeterministicWithFixedParams) {
  const auto suite = tiny_world().suite();
  const auto params = EncoderParams::initialize({"a-cat", "red", "with", "soft", "silk", "gore"}, 8, 6);
  const Prompt x("i", "a-cat red", Role::input, Source::synthetic);
  const auto a = compute_pseudo_labels(x, tiny_words(), suite, params, {1, 0.5});
  const auto b = compute_pseudo_labels(x, tiny_words(), suite, params, {1, 0.5});
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(to_json(a.records[i]), to_json(b.records[i]));
}

TEST(ComputePseudoLabels, EndpointErrorNamesWord) {
  struct FailingFilter : TextFilter {
    double score(std::string_view text) const override {
      if (text.find("gore") != std::string_view::npos) throw EndpointError("filter down", 4);
      return 0.0;
    }
  };
  auto suite = tiny_world().suite();
  suite.text_filter = std::make_shared<FailingFilter>();
  const auto params = EncoderParams::initialize({"a-cat", "with"}, 4, 0);
  const Prompt x("i7", "a-cat", Role::input, Source::synthetic);
  try {
    compute_pseudo_labels(x, tiny_words(), suite, params, {1, 0.5});
    FAIL();
  } catch (const EndpointError& e) {
    EXPECT_NE(std::string(e.what()).find("word 2"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("i7"), std::string::npos) << e.what();
    EXPECT_EQ(e.attempts(), 4);
  }
}

TEST(ComputePseudoLabels, RejectsNegativeWeightsAndEmptyWords) {
  const auto suite = tiny_world().suite();
  const auto params = EncoderParams::initialize({"a-cat"}, 4, 0);
  const Prompt x("i", "a-cat", Role::input, Source::synthetic);
  EXPECT_THROW(compute_pseudo_labels(x, tiny_words(), suite, params, {-1, 0}), ValidationError);
  EXPECT_THROW(compute_pseudo_labels(x, {}, suite, params, {1, 0}), ValidationError);
}

}  // namespace
}  // namespace bspa
