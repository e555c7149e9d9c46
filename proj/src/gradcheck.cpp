#include "bspa/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bspa/error.hpp"
#include "bspa/rng.hpp"

namespace bspa {

std::vector<BatchRow> random_batch(std::size_t batch, std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t fillers = 8;
  const auto words = rng.sample_indices(12, batch);
  std::vector<BatchRow> rows;
  for (std::size_t i = 0; i < batch; ++i) {
    BatchRow r;
    const auto len = 2 + rng.below(3);
    for (std::uint64_t t = 0; t < len; ++t) r.input.push_back("t" + std::to_string(rng.below(fillers)));
    r.word = {"w" + std::to_string(words[i])};
    r.stealthy = r.input;
    r.stealthy.push_back("with");
    r.stealthy.push_back(r.word.front());
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<double> numeric_gradient(const EncoderParams& params, const std::vector<BatchRow>& batch,
                                     const TrainingConfig& config, double h) {
  EncoderParams p = params;
  auto values = p.values();
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double orig = values[i];
    values[i] = orig + h;
    const double up = total_loss_and_grad(p, batch, config, nullptr).total;
    values[i] = orig - h;
    const double down = total_loss_and_grad(p, batch, config, nullptr).total;
    values[i] = orig;
    out[i] = (up - down) / (2.0 * h);
  }
  return out;
}

GradcheckReport run_gradcheck(const std::vector<std::size_t>& dims, const std::vector<std::size_t>& batches,
                              int trials, std::uint64_t seed) {
  if (trials < 1) throw ValidationError("gradcheck needs at least one trial");
  if (dims.empty() || batches.empty()) throw ValidationError("gradcheck needs dims and batch sizes");
  GradcheckReport report;
  std::uint64_t stream = 0;
  for (auto d : dims) {
    for (auto b : batches) {
      if (b < 2 || b > 12) throw ValidationError("gradcheck batch sizes must lie in [2, 12]");
      for (int t = 0; t < trials; ++t) {
        const auto case_seed = derive_seed(seed, stream++);
        const auto batch = random_batch(b, case_seed);
        std::vector<TokenList> sources;
        for (const auto& r : batch) {
          sources.push_back(r.input);
          sources.push_back(r.stealthy);
        }
        const auto params = EncoderParams::initialize(build_vocab(sources), d, derive_seed(case_seed, 1));
        TrainingConfig cfg;
        cfg.dim = d;
        cfg.batch_size = b;
        cfg.k = t % 2 == 0 ? 1 : static_cast<int>(b);
        std::vector<double> analytic;
        total_loss_and_grad(params, batch, cfg, &analytic);
        const auto numeric = numeric_gradient(params, batch, cfg);
        double diff = 0.0, na = 0.0, nn = 0.0;
        for (std::size_t i = 0; i < analytic.size(); ++i) {
          diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
          na += analytic[i] * analytic[i];
          nn += numeric[i] * numeric[i];
        }
        const double denom = std::max({std::sqrt(na), std::sqrt(nn), 1e-12});
        const GradcheckCase c{d, b, cfg.k, std::sqrt(diff) / denom};
        report.max_rel_error = std::max(report.max_rel_error, c.rel_error);
        report.cases.push_back(c);
      }
    }
  }
  return report;
}

}  // namespace bspa
