#pragma once

#include <cstdint>
#include <vector>

#include "bspa/encoder.hpp"
#include "bspa/training.hpp"

namespace bspa {

struct GradcheckCase {
  std::size_t dim = 0;
  std::size_t batch = 0;
  int k = 0;
  double rel_error = 0.0;  // |g_analytic - g_numeric| / max(|g_analytic|, |g_numeric|), 2-norms
};

struct GradcheckReport {
  std::vector<GradcheckCase> cases;
  double max_rel_error = 0.0;
};

/// A random batch with distinct single-token positive words; stealthy rows are
/// input ++ ["with", word]. Used by gradcheck and its tests.
std::vector<BatchRow> random_batch(std::size_t batch, std::uint64_t seed);

/// Central-difference gradient of total_loss_and_grad's loss with respect to every table entry.
std::vector<double> numeric_gradient(const EncoderParams& params, const std::vector<BatchRow>& batch,
                                     const TrainingConfig& config, double h = 1e-5);

/// Runs `trials` random configurations for every (dim, batch) pair, alternating
/// k between 1 and the batch size.
GradcheckReport run_gradcheck(const std::vector<std::size_t>& dims, const std::vector<std::size_t>& batches,
                              int trials, std::uint64_t seed);

}  // namespace bspa
