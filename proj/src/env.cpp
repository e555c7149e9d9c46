#include "bspa/env.hpp"

#include <algorithm>
#include <cmath>

namespace bspa {

void EndpointSuite::validate() const {
  if (!text_gen || !image_gen || !text_filter || !image_filter) {
    throw ValidationError("endpoint suite is missing a generator or filter");
  }
  if (max_inflight < 1) throw ValidationError("max_inflight must be >= 1");
}

namespace {

double checked_score(double s, const char* what) {
  if (!std::isfinite(s)) throw EndpointError(std::string(what) + " returned a non-finite score");
  return std::clamp(s, 0.0, 1.0);
}

}  // namespace

Prompt generate_stealthy(const EndpointSuite& suite, const Prompt& x, const SensitiveWord& w) {
  if (x.role() != Role::input) {
    throw ValidationError("generate_stealthy expects an input prompt, got role " +
                          std::string(to_string(x.role())) + " for '" + x.id() + "'");
  }
  auto text = suite.text_gen->generate(x.text(), w.surface);
  if (tokenize(text).empty()) {
    throw EndpointError("text generator returned empty text for input '" + x.id() + "', word " +
                        std::to_string(w.id));
  }
  return Prompt(x.id() + "/w" + std::to_string(w.id), std::move(text), Role::stealthy,
                Source::generated, Provenance{x.id(), w.id});
}

double score_text(const EndpointSuite& suite, std::string_view text) {
  return checked_score(suite.text_filter->score(text), "text filter");
}

double score_text(const EndpointSuite& suite, const Prompt& stealthy) {
  return score_text(suite, stealthy.text());
}

double score_image(const EndpointSuite& suite, const Prompt& stealthy) {
  const auto content = suite.image_gen->render(stealthy.text());
  return checked_score(suite.image_filter->score(content), "image filter");
}

}  // namespace bspa
