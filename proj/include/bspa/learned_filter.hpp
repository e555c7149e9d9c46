#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "bspa/endpoints.hpp"
#include "bspa/text.hpp"

namespace bspa {

struct LabeledPrompt {
  Prompt prompt;
  int label = 0;  // 1 = attack prompt, 0 = benign
};

/// Bag-of-tokens logistic classifier usable as a text-filter endpoint.
class LearnedFilter final : public TextFilter {
 public:
  LearnedFilter() = default;
  LearnedFilter(std::map<std::string, double> weights, double bias, double threshold = 0.5);

  /// logistic(sum of token weights + bias); unknown tokens weigh 0.
  double classify(const TokenList& tokens) const;
  double score(std::string_view text) const override { return classify(tokenize(text)); }
  bool blocks(std::string_view text) const { return score(text) >= threshold_; }

  const std::map<std::string, double>& weights() const noexcept { return weights_; }
  double bias() const noexcept { return bias_; }
  double threshold() const noexcept { return threshold_; }

  nlohmann::json to_json() const;
  static LearnedFilter from_json(const nlohmann::json& j);

 private:
  std::map<std::string, double> weights_;
  double bias_ = 0.0;
  double threshold_ = 0.5;
};

/// Full-batch gradient descent on the mean logistic loss from an all-zero start.
/// If `loss_history` is given, it receives the loss at the start of every epoch.
/// Throws ValidationError unless both labels are present.
LearnedFilter train_learned_filter(const std::vector<LabeledPrompt>& labeled, int epochs,
                                   double lr, std::vector<double>* loss_history = nullptr);

}  // namespace bspa
