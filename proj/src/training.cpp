#include "bspa/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "bspa/error.hpp"
#include "bspa/losses.hpp"
#include "bspa/rng.hpp"

namespace bspa {

void TrainingConfig::validate() const {
  if (batch_size < 2) throw ValidationError("batch_size must be >= 2 for in-batch negatives");
  if (k < 1 || static_cast<std::size_t>(k) > batch_size) {
    throw ValidationError("k must satisfy 1 <= k <= batch_size");
  }
  if (!(lr > 0.0)) throw ValidationError("lr must be positive");
  if (epochs < 0) throw ValidationError("epochs must be >= 0");
  if (!(temperature > 0.0)) throw ValidationError("temperature must be positive");
  if (dim < 2) throw ValidationError("dim must be >= 2");
  if (weights.alpha < 0.0 || weights.beta < 0.0) throw ValidationError("alpha and beta must be >= 0");
}

nlohmann::json TrainingConfig::to_json() const {
  return {{"batch_size", batch_size},
          {"lr", lr},
          {"epochs", epochs},
          {"alpha", weights.alpha},
          {"beta", weights.beta},
          {"k", k},
          {"temperature", temperature},
          {"use_div", use_div},
          {"dim", dim},
          {"seed", seed},
          {"adam", {{"beta1", adam.beta1}, {"beta2", adam.beta2}, {"eps", adam.eps}}}};
}

namespace {

void reject_unknown(const nlohmann::json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ValidationError(where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw ValidationError("unknown key '" + key + "' in " + where);
  }
}

}  // namespace

TrainingConfig TrainingConfig::from_json(const nlohmann::json& j) {
  TrainingConfig c;
  reject_unknown(j, {"batch_size", "lr", "epochs", "alpha", "beta", "k", "temperature", "use_div", "dim", "seed", "adam"},
                 "training");
  if (j.contains("adam")) reject_unknown(j["adam"], {"beta1", "beta2", "eps"}, "training.adam");
  try {
    c.batch_size = j.value("batch_size", c.batch_size);
    c.lr = j.value("lr", c.lr);
    c.epochs = j.value("epochs", c.epochs);
    c.weights.alpha = j.value("alpha", c.weights.alpha);
    c.weights.beta = j.value("beta", c.weights.beta);
    c.k = j.value("k", c.k);
    c.temperature = j.value("temperature", c.temperature);
    c.use_div = j.value("use_div", c.use_div);
    c.dim = j.value("dim", c.dim);
    c.seed = j.value("seed", c.seed);
    if (j.contains("adam")) {
      const auto& a = j["adam"];
      c.adam.beta1 = a.value("beta1", c.adam.beta1);
      c.adam.beta2 = a.value("beta2", c.adam.beta2);
      c.adam.eps = a.value("eps", c.adam.eps);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed training config: ") + e.what());
  }
  c.validate();
  return c;
}

void adam_update(std::span<double> params, std::span<const double> grad, AdamMoments& moments,
                 double lr, const AdamConfig& cfg) {
  if (grad.size() != params.size()) throw ValidationError("gradient is not shaped like params");
  for (double g : grad) {
    if (!std::isfinite(g)) throw NumericError("non-finite gradient entry; step aborted");
  }
  if (moments.m.empty()) {
    moments.m.assign(params.size(), 0.0);
    moments.v.assign(params.size(), 0.0);
  }
  if (moments.m.size() != params.size()) throw ValidationError("Adam moments are not shaped like params");
  ++moments.step;
  const double t = static_cast<double>(moments.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    moments.m[i] = cfg.beta1 * moments.m[i] + (1.0 - cfg.beta1) * grad[i];
    moments.v[i] = cfg.beta2 * moments.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
    const double mhat = moments.m[i] / c1;
    const double vhat = moments.v[i] / c2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
}

nlohmann::json TrainState::to_json() const {
  nlohmann::json hist = nlohmann::json::array();
  for (const auto& h : history) {
    hist.push_back({{"epoch", h.epoch}, {"l_clo", h.l_clo}, {"l_div", h.l_div}, {"l", h.l},
                    {"steps", h.steps}, {"dropped", h.dropped}});
  }
  return {{"format", "bspa.train_state.v1"},
          {"encoder", params.to_json()},
          {"adam", {{"step", adam.step}, {"m", adam.m}, {"v", adam.v}}},
          {"history", std::move(hist)}};
}

TrainState TrainState::from_json(const nlohmann::json& j) {
  try {
    TrainState s{EncoderParams::from_json(j.at("encoder")), {}, {}};
    const auto& a = j.at("adam");
    s.adam.step = a.at("step").get<std::uint64_t>();
    s.adam.m = a.at("m").get<std::vector<double>>();
    s.adam.v = a.at("v").get<std::vector<double>>();
    if (!s.adam.m.empty() && (s.adam.m.size() != s.params.values().size() ||
                              s.adam.v.size() != s.adam.m.size())) {
      throw ValidationError("Adam moments are not shaped like the encoder table");
    }
    for (const auto& h : j.at("history")) {
      s.history.push_back({h.at("epoch").get<int>(), h.at("l_clo").get<double>(),
                           h.at("l_div").get<double>(), h.at("l").get<double>(),
                           h.value("steps", std::size_t{0}), h.value("dropped", std::size_t{0})});
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed training checkpoint: ") + e.what());
  }
}

namespace {

struct Pooled {
  std::vector<std::pair<std::size_t, double>> weights;
  std::vector<double> vec;
  double norm = 0.0;
};

Pooled pool(const EncoderParams& params, const TokenList& tokens) {
  Pooled p{pooling_weights(params, tokens), std::vector<double>(params.dim(), 0.0), 0.0};
  for (const auto& [r, a] : p.weights) {
    const auto row = params.row(r);
    for (std::size_t k = 0; k < row.size(); ++k) p.vec[k] += a * row[k];
  }
  double sq = 0.0;
  for (double x : p.vec) sq += x * x;
  p.norm = std::sqrt(sq);
  if (p.norm == 0.0) throw NumericError("degenerate embedding");
  return p;
}

double cos_of(const Pooled& a, const Pooled& b) {
  double dot = 0.0;
  for (std::size_t k = 0; k < a.vec.size(); ++k) dot += a.vec[k] * b.vec[k];
  return dot / (a.norm * b.norm);
}

// Adds coef * d cos(a, b) / d a into out.
void add_cos_grad(const Pooled& a, const Pooled& b, double cosab, double coef, std::vector<double>& out) {
  const double inv = 1.0 / (a.norm * b.norm);
  const double self = cosab / (a.norm * a.norm);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] += coef * (b.vec[k] * inv - self * a.vec[k]);
}

void scatter(const Pooled& p, const std::vector<double>& g, std::size_t dim, std::vector<double>& grad) {
  for (const auto& [r, a] : p.weights) {
    for (std::size_t k = 0; k < dim; ++k) grad[r * dim + k] += a * g[k];
  }
}

}  // namespace

LossBreakdown total_loss_and_grad(const EncoderParams& params, const std::vector<BatchRow>& batch,
                                  const TrainingConfig& config, std::vector<double>* grad) {
  const std::size_t n = batch.size();
  if (n < 2) throw ValidationError("a batch needs at least two rows");
  const int k = std::min<int>(config.k, static_cast<int>(n));
  const std::size_t dim = params.dim();

  std::vector<Pooled> u, v, z;
  u.reserve(n);
  v.reserve(n);
  z.reserve(n);
  for (const auto& row : batch) {
    u.push_back(pool(params, row.input));
    v.push_back(pool(params, row.word));
    z.push_back(pool(params, row.stealthy));
  }
  Matrix c(n, n), d(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      c(i, j) = cos_of(u[i], v[j]);
      d(i, j) = cos_of(u[i], z[j]);
    }
  }

  // dL/dC and dL/dD.
  Matrix gc(n, n), gd(n, n);
  const double inv_n = 1.0 / static_cast<double>(n);
  LossBreakdown out;
  std::vector<double> logits(n), glog(n), grow(n);
  for (std::size_t i = 0; i < n; ++i) {
    // Positive first, then the other columns in order.
    logits[0] = config.temperature * c(i, i);
    for (std::size_t j = 0, p = 1; j < n; ++j) {
      if (j != i) logits[p++] = config.temperature * c(i, j);
    }
    out.l_clo += loss_clo(logits, glog) * inv_n;
    gc(i, i) = glog[0] * config.temperature * inv_n;
    for (std::size_t j = 0, p = 1; j < n; ++j) {
      if (j != i) gc(i, j) = glog[p++] * config.temperature * inv_n;
    }
    out.l_div += topk_softmax_mass(d.row(i), k, grow) * inv_n;
    if (config.use_div) {
      for (std::size_t j = 0; j < n; ++j) gd(i, j) = grow[j] * inv_n;
    }
  }
  out.total = out.l_clo + (config.use_div ? out.l_div : 0.0);
  if (!grad) return out;

  grad->assign(params.values().size(), 0.0);
  std::vector<double> g(dim);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(g.begin(), g.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      add_cos_grad(u[i], v[j], c(i, j), gc(i, j), g);
      if (config.use_div) add_cos_grad(u[i], z[j], d(i, j), gd(i, j), g);
    }
    scatter(u[i], g, dim, *grad);
  }
  for (std::size_t j = 0; j < n; ++j) {
    std::fill(g.begin(), g.end(), 0.0);
    for (std::size_t i = 0; i < n; ++i) add_cos_grad(v[j], u[i], c(i, j), gc(i, j), g);
    scatter(v[j], g, dim, *grad);
    if (config.use_div) {
      std::fill(g.begin(), g.end(), 0.0);
      for (std::size_t i = 0; i < n; ++i) add_cos_grad(z[j], u[i], d(i, j), gd(i, j), g);
      scatter(z[j], g, dim, *grad);
    }
  }
  return out;
}

std::vector<BatchRow> arrange_batch(const std::vector<const Prompt*>& inputs,
                                    const std::vector<const PseudoLabelSet*>& labels,
                                    const std::vector<SensitiveWord>& words,
                                    const std::vector<const std::vector<EndpointScores>*>& scores,
                                    std::size_t* dropped) {
  std::set<int> seen;
  std::vector<BatchRow> rows;
  std::size_t drops = 0;
  for (std::size_t b = 0; b < inputs.size(); ++b) {
    const int pos = labels[b]->positive;
    if (!seen.insert(pos).second) {
      ++drops;
      continue;
    }
    const auto w = static_cast<std::size_t>(pos);
    rows.push_back({inputs[b]->tokens(), tokenize(words.at(w).surface),
                    (*scores[b]).at(w).stealthy.tokens()});
  }
  if (dropped) *dropped = drops;
  return rows;
}

TrainState init_train_state(const TrainingConfig& config, const std::vector<Prompt>& inputs,
                            const std::vector<SensitiveWord>& words, ScoreCache& cache,
                            const EndpointSuite& suite) {
  std::vector<TokenList> sources;
  for (const auto& x : inputs) {
    sources.push_back(x.tokens());
    for (const auto& sc : cache.get(suite, x, words)) sources.push_back(sc.stealthy.tokens());
  }
  for (const auto& w : words) sources.push_back(tokenize(w.surface));
  return TrainState{EncoderParams::initialize(build_vocab(sources), config.dim, config.seed), {}, {}};
}

TrainState train(const TrainingConfig& config, const std::vector<Prompt>& inputs,
                 const std::vector<SensitiveWord>& words, const EndpointSuite& suite,
                 ScoreCache* cache, const TrainHooks& hooks) {
  config.validate();
  suite.validate();
  validate_word_set(words);
  if (inputs.size() < config.batch_size) {
    throw ValidationError("need at least batch_size=" + std::to_string(config.batch_size) +
                          " inputs, got " + std::to_string(inputs.size()));
  }
  ScoreCache local;
  ScoreCache& scores = cache ? *cache : local;
  TrainState state = init_train_state(config, inputs, words, scores, suite);

  std::vector<const std::vector<EndpointScores>*> per_input;
  for (const auto& x : inputs) per_input.push_back(&scores.get(suite, x, words));

  std::vector<double> grad;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    std::vector<PseudoLabelSet> labels;
    labels.reserve(inputs.size());
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      labels.push_back(label_from_scores(inputs[i], words, *per_input[i], state.params, config.weights));
    }

    std::vector<std::size_t> order(inputs.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(config.seed, 1000 + static_cast<std::uint64_t>(epoch)));
    rng.shuffle(order);

    EpochLoss summary{epoch};
    std::size_t batch_no = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_no) {
      const auto end = std::min(order.size(), start + config.batch_size);
      std::vector<const Prompt*> bx;
      std::vector<const PseudoLabelSet*> bl;
      std::vector<const std::vector<EndpointScores>*> bs;
      for (auto p = start; p < end; ++p) {
        bx.push_back(&inputs[order[p]]);
        bl.push_back(&labels[order[p]]);
        bs.push_back(per_input[order[p]]);
      }
      std::size_t dropped = 0;
      const auto rows = arrange_batch(bx, bl, words, bs, &dropped);
      summary.dropped += dropped;
      if (dropped && hooks.warn) {
        hooks.warn("epoch " + std::to_string(epoch) + " batch " + std::to_string(batch_no) +
                   ": dropped " + std::to_string(dropped) + " rows with duplicate positives");
      }
      if (rows.size() < 2) continue;
      try {
        const auto loss = total_loss_and_grad(state.params, rows, config, &grad);
        adam_update(state.params.values(), grad, state.adam, config.lr, config.adam);
        summary.l_clo += loss.l_clo;
        summary.l_div += loss.l_div;
        summary.l += loss.total;
        ++summary.steps;
      } catch (const NumericError& e) {
        throw NumericError("epoch " + std::to_string(epoch) + " batch " + std::to_string(batch_no) +
                           ": " + e.what());
      }
    }
    if (summary.steps) {
      const auto s = static_cast<double>(summary.steps);
      summary.l_clo /= s;
      summary.l_div /= s;
      summary.l /= s;
    }
    state.history.push_back(summary);
    const auto index = build_index(state.params, words);
    if (hooks.on_epoch) hooks.on_epoch(state, labels, index);
  }
  return state;
}

}  // namespace bspa
