#pragma once

#include <span>

#include "bspa/matrix.hpp"

namespace bspa {

/// Negative log-likelihood of logits[0] under a softmax over all logits
/// (positive first, at least one negative). Max-subtracted for stability.
/// If `grad` is non-empty it receives d loss / d logits.
/// Throws NumericError on a non-finite logit, ValidationError without negatives.
double loss_clo(std::span<const double> logits, std::span<double> grad = {});

/// Sum of the k largest softmax probabilities of one row. If `grad` is
/// non-empty it receives d / d row, which is p_l * ([l in top-k] - h).
double topk_softmax_mass(std::span<const double> row, int k, std::span<double> grad = {});

/// Mean over rows of topk_softmax_mass. Throws ValidationError unless 1 <= k <= cols.
double loss_div(const Matrix& sim_rows, int k);

}  // namespace bspa
