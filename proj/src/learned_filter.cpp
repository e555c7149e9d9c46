#include "bspa/learned_filter.hpp"

#include <cmath>
#include <unordered_map>

#include "bspa/error.hpp"

namespace bspa {

namespace {

double logistic(double z) {
  return z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

// log(1 + e^z) without overflow.
double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

}  // namespace

LearnedFilter::LearnedFilter(std::map<std::string, double> weights, double bias, double threshold)
    : weights_(std::move(weights)), bias_(bias), threshold_(threshold) {}

double LearnedFilter::classify(const TokenList& tokens) const {
  double z = bias_;
  for (const auto& t : tokens) {
    const auto it = weights_.find(t);
    if (it != weights_.end()) z += it->second;
  }
  return logistic(z);
}

nlohmann::json LearnedFilter::to_json() const {
  return {{"format", "bspa.learned_filter.v1"},
          {"bias", bias_},
          {"threshold", threshold_},
          {"weights", weights_}};
}

LearnedFilter LearnedFilter::from_json(const nlohmann::json& j) {
  try {
    return LearnedFilter(j.at("weights").get<std::map<std::string, double>>(),
                         j.at("bias").get<double>(), j.value("threshold", 0.5));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed learned filter: ") + e.what());
  }
}

LearnedFilter train_learned_filter(const std::vector<LabeledPrompt>& labeled, int epochs,
                                   double lr, std::vector<double>* loss_history) {
  bool has0 = false, has1 = false;
  for (const auto& lp : labeled) {
    if (lp.label != 0 && lp.label != 1) throw ValidationError("labels must be 0 or 1");
    (lp.label ? has1 : has0) = true;
  }
  if (!has0 || !has1) throw ValidationError("learned filter needs both labels in the training set");
  if (epochs < 0 || !(lr > 0.0)) throw ValidationError("epochs must be >= 0 and lr > 0");

  // Dense feature ids in first-seen order; the final map is sorted anyway.
  std::unordered_map<std::string, std::size_t> ids;
  std::vector<std::string> names;
  std::vector<std::vector<std::size_t>> features;
  for (const auto& lp : labeled) {
    std::vector<std::size_t> f;
    for (const auto& t : lp.prompt.tokens()) {
      auto [it, fresh] = ids.emplace(t, names.size());
      if (fresh) names.push_back(t);
      f.push_back(it->second);
    }
    features.push_back(std::move(f));
  }

  std::vector<double> w(names.size(), 0.0), grad(names.size());
  double b = 0.0;
  const auto n = static_cast<double>(labeled.size());
  for (int epoch = 0; epoch < epochs; ++epoch) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double gb = 0.0, loss = 0.0;
    for (std::size_t i = 0; i < labeled.size(); ++i) {
      double z = b;
      for (auto f : features[i]) z += w[f];
      const double y = labeled[i].label;
      loss += softplus(z) - y * z;
      const double r = logistic(z) - y;
      for (auto f : features[i]) grad[f] += r;
      gb += r;
    }
    if (loss_history) loss_history->push_back(loss / n);
    for (std::size_t k = 0; k < w.size(); ++k) w[k] -= lr * grad[k] / n;
    b -= lr * gb / n;
  }

  std::map<std::string, double> weights;
  for (std::size_t k = 0; k < names.size(); ++k) weights[names[k]] = w[k];
  return LearnedFilter(std::move(weights), b);
}

}  // namespace bspa
