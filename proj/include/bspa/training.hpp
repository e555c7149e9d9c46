#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "bspa/corpus.hpp"
#include "bspa/encoder.hpp"
#include "bspa/labeling.hpp"
#include "bspa/retriever.hpp"

namespace bspa {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainingConfig {
  std::size_t batch_size = 32;
  double lr = 2e-4;
  int epochs = 30;
  LabelWeights weights;
  int k = 5;                  // top-k of the diversity term
  double temperature = 10.0;  // scale applied to cosine logits in the closeness term
  bool use_div = true;        // when false the diversity term is logged but not optimized
  std::size_t dim = kDefaultEmbeddingDim;
  std::uint64_t seed = 0;
  AdamConfig adam;

  void validate() const;
  nlohmann::json to_json() const;
  static TrainingConfig from_json(const nlohmann::json& j);
};

/// First and second moment estimates for Adam.
struct AdamMoments {
  std::vector<double> m, v;
  std::uint64_t step = 0;
};

/// One bias-corrected Adam update of `params` in place. Throws NumericError,
/// leaving everything untouched, if any gradient entry is non-finite.
void adam_update(std::span<double> params, std::span<const double> grad, AdamMoments& moments,
                 double lr, const AdamConfig& cfg);

struct EpochLoss {
  int epoch = 0;
  double l_clo = 0.0;
  double l_div = 0.0;
  double l = 0.0;
  std::size_t steps = 0;
  std::size_t dropped = 0;  // rows dropped for duplicate positives
};

struct TrainState {
  EncoderParams params;
  AdamMoments adam;
  std::vector<EpochLoss> history;

  nlohmann::json to_json() const;
  static TrainState from_json(const nlohmann::json& j);
};

/// One in-batch row: input x_i, its positive word w_i and the stealthy prompt
/// generated from (x_i, w_i). Row i's positive sits at column i.
struct BatchRow {
  TokenList input;
  TokenList word;
  TokenList stealthy;
};

struct LossBreakdown {
  double l_clo = 0.0;
  double l_div = 0.0;
  double total = 0.0;
};

/// L = mean_i loss_clo(temperature * C_i, positive i) + loss_div(D, k), where
/// C_ij = cos(e(x_i), e(w_j)) and D_ij = cos(e(x_i), e(x_s,j)). k is clamped to
/// the batch size. If `grad` is non-null it is resized to the table size and
/// receives dL/dparams (the diversity part only when config.use_div).
LossBreakdown total_loss_and_grad(const EncoderParams& params, const std::vector<BatchRow>& batch,
                                  const TrainingConfig& config, std::vector<double>* grad);

/// Builds the B rows for a batch of inputs, dropping later rows whose positive
/// word already appears (the diagonal arrangement needs distinct positives).
std::vector<BatchRow> arrange_batch(const std::vector<const Prompt*>& inputs,
                                    const std::vector<const PseudoLabelSet*>& labels,
                                    const std::vector<SensitiveWord>& words,
                                    const std::vector<const std::vector<EndpointScores>*>& scores,
                                    std::size_t* dropped = nullptr);

/// Fresh state: vocabulary from inputs, word surfaces and generated prompts;
/// table drawn from config.seed; zero moments.
TrainState init_train_state(const TrainingConfig& config, const std::vector<Prompt>& inputs,
                            const std::vector<SensitiveWord>& words, ScoreCache& cache,
                            const EndpointSuite& suite);

struct TrainHooks {
  /// Called after every epoch with the labels used in it and the rebuilt index.
  std::function<void(const TrainState&, const std::vector<PseudoLabelSet>&, const WordIndex&)> on_epoch;
  std::function<void(const std::string&)> warn;
};

/// In-batch training loop. Each epoch recomputes pseudo-labels (endpoint scores
/// cached, similarity fresh), shuffles inputs with an epoch-derived seed,
/// takes one Adam step per batch and rebuilds the word index.
TrainState train(const TrainingConfig& config, const std::vector<Prompt>& inputs,
                 const std::vector<SensitiveWord>& words, const EndpointSuite& suite,
                 ScoreCache* cache = nullptr, const TrainHooks& hooks = {});

}  // namespace bspa
