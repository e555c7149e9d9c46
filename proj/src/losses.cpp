#include "bspa/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "bspa/error.hpp"

namespace bspa {

namespace {

std::vector<double> softmax(std::span<const double> z) {
  for (double x : z) {
    if (!std::isfinite(x)) throw NumericError("non-finite logit");
  }
  const double m = *std::max_element(z.begin(), z.end());
  std::vector<double> p(z.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) sum += p[i] = std::exp(z[i] - m);
  for (auto& x : p) x /= sum;
  return p;
}

}  // namespace

double loss_clo(std::span<const double> logits, std::span<double> grad) {
  if (logits.size() < 2) throw ValidationError("loss_clo needs at least one negative");
  for (double x : logits) {
    if (!std::isfinite(x)) throw NumericError("non-finite logit");
  }
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double x : logits) sum += std::exp(x - m);
  const double lse = m + std::log(sum);
  if (!grad.empty()) {
    for (std::size_t i = 0; i < logits.size(); ++i) grad[i] = std::exp(logits[i] - lse);
    grad[0] -= 1.0;
  }
  return lse - logits[0];
}

double topk_softmax_mass(std::span<const double> row, int k, std::span<double> grad) {
  if (k < 1 || static_cast<std::size_t>(k) > row.size()) {
    throw ValidationError("loss_div: k=" + std::to_string(k) + " outside [1, " +
                          std::to_string(row.size()) + "]");
  }
  const auto p = softmax(row);
  std::vector<std::size_t> order(p.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] > p[b]; });
  double h = 0.0;
  for (int i = 0; i < k; ++i) h += p[order[i]];
  if (!grad.empty()) {
    for (std::size_t l = 0; l < p.size(); ++l) grad[l] = -h * p[l];
    for (int i = 0; i < k; ++i) grad[order[i]] += p[order[i]];
  }
  return h;
}

double loss_div(const Matrix& sim_rows, int k) {
  if (sim_rows.rows() == 0) throw ValidationError("loss_div: empty matrix");
  double total = 0.0;
  for (std::size_t i = 0; i < sim_rows.rows(); ++i) total += topk_softmax_mass(sim_rows.row(i), k);
  return total / static_cast<double>(sim_rows.rows());
}

}  // namespace bspa
