#include "bspa/config.hpp"

#include <algorithm>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include "bspa/error.hpp"

namespace bspa {

namespace {

void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ValidationError(where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; });
    if (!known) throw ValidationError("unknown key '" + key + "' in " + where);
  }
}

nlohmann::json shape_json(const WorldShape& s) {
  return {{"topics", s.topics},
          {"fillers", s.fillers},
          {"sensitive", s.sensitive},
          {"explicit", s.explicit_words},
          {"synergy_exponent", s.synergy_exponent},
          {"induce_lo", s.induce_lo},
          {"induce_hi", s.induce_hi},
          {"veiled_fraction", s.veiled_fraction},
          {"caption_min", s.caption_min},
          {"caption_max", s.caption_max}};
}

WorldShape shape_from_json(const nlohmann::json& j) {
  check_keys(j,
             {"topics", "fillers", "sensitive", "explicit", "synergy_exponent", "induce_lo", "induce_hi",
              "veiled_fraction", "caption_min", "caption_max"},
             "world.shape");
  WorldShape s;
  s.topics = j.value("topics", s.topics);
  s.fillers = j.value("fillers", s.fillers);
  s.sensitive = j.value("sensitive", s.sensitive);
  s.explicit_words = j.value("explicit", s.explicit_words);
  s.synergy_exponent = j.value("synergy_exponent", s.synergy_exponent);
  s.induce_lo = j.value("induce_lo", s.induce_lo);
  s.induce_hi = j.value("induce_hi", s.induce_hi);
  s.veiled_fraction = j.value("veiled_fraction", s.veiled_fraction);
  s.caption_min = j.value("caption_min", s.caption_min);
  s.caption_max = j.value("caption_max", s.caption_max);
  return s;
}

}  // namespace

RemoteSuiteConfig WorldConfig::remote_suite() const {
  if (remote_block.is_null()) throw ValidationError("remote mode needs a world.remote block in the config");
  return remote_suite_from_json(remote_block);
}

void RunConfig::validate() const {
  training.validate();
  if (word_set_size < 1) throw ValidationError("word_set_size must be >= 1");
  if (top_m < 1) throw ValidationError("top_m must be >= 1");
  if (max_inflight < 1) throw ValidationError("max_inflight must be >= 1");
  for (double t : {thresholds.text_eps, thresholds.image_eps, thresholds.toxic_theta}) {
    if (!(t >= 0.0 && t <= 1.0)) throw ValidationError("thresholds must lie in [0, 1]");
  }
  if (world.remote && !world.world_path.empty()) {
    throw ValidationError("world.remote and world.path are mutually exclusive");
  }
  if (world.remote) world.remote_suite();
  if (paths.out.empty()) throw ValidationError("paths.out must not be empty");
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json w = {{"remote", world.remote}, {"shape", shape_json(world.shape)}};
  if (!world.world_path.empty()) w["path"] = world.world_path;
  if (!world.remote_block.is_null()) w["remote_endpoints"] = world.remote_block;
  return {{"seed", seed},
          {"world", std::move(w)},
          {"training", training.to_json()},
          {"thresholds",
           {{"toxic_theta", thresholds.toxic_theta}, {"text_eps", thresholds.text_eps},
            {"image_eps", thresholds.image_eps}}},
          {"paths",
           {{"corpus", paths.corpus},
            {"inputs", paths.inputs},
            {"words", paths.words},
            {"checkpoint", paths.checkpoint},
            {"explicit_pool", paths.explicit_pool},
            {"stealthy_pool", paths.stealthy_pool},
            {"benchmark", paths.benchmark},
            {"outcomes", paths.outcomes},
            {"annotations", paths.annotations},
            {"out", paths.out}}},
          {"synth", {{"corpus", synth.corpus}, {"inputs", synth.inputs}, {"pool", synth.pool}}},
          {"word_set_size", word_set_size},
          {"top_m", top_m},
          {"max_inflight", max_inflight}};
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  RunConfig c;
  try {
    check_keys(j, {"seed", "world", "training", "thresholds", "paths", "synth", "word_set_size", "top_m",
                   "max_inflight"},
               "config");
    if (!j.contains("seed")) throw ValidationError("config is missing the mandatory 'seed'");
    c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("world")) {
      const auto& w = j["world"];
      check_keys(w, {"remote", "path", "shape", "remote_endpoints"}, "world");
      c.world.remote = w.value("remote", false);
      c.world.world_path = w.value("path", std::string());
      if (w.contains("shape")) c.world.shape = shape_from_json(w["shape"]);
      if (w.contains("remote_endpoints")) c.world.remote_block = w["remote_endpoints"];
    }
    if (j.contains("training")) c.training = TrainingConfig::from_json(j["training"]);
    if (!j.contains("training") || !j["training"].contains("seed")) c.training.seed = c.seed;
    if (j.contains("thresholds")) {
      const auto& t = j["thresholds"];
      check_keys(t, {"toxic_theta", "text_eps", "image_eps"}, "thresholds");
      c.thresholds.toxic_theta = t.value("toxic_theta", c.thresholds.toxic_theta);
      c.thresholds.text_eps = t.value("text_eps", c.thresholds.text_eps);
      c.thresholds.image_eps = t.value("image_eps", c.thresholds.image_eps);
    }
    if (j.contains("paths")) {
      const auto& p = j["paths"];
      check_keys(p, {"corpus", "inputs", "words", "checkpoint", "explicit_pool", "stealthy_pool", "benchmark",
                     "outcomes", "annotations", "out"},
                 "paths");
      c.paths.corpus = p.value("corpus", c.paths.corpus);
      c.paths.inputs = p.value("inputs", c.paths.inputs);
      c.paths.words = p.value("words", c.paths.words);
      c.paths.checkpoint = p.value("checkpoint", c.paths.checkpoint);
      c.paths.explicit_pool = p.value("explicit_pool", c.paths.explicit_pool);
      c.paths.stealthy_pool = p.value("stealthy_pool", c.paths.stealthy_pool);
      c.paths.benchmark = p.value("benchmark", c.paths.benchmark);
      c.paths.outcomes = p.value("outcomes", c.paths.outcomes);
      c.paths.annotations = p.value("annotations", c.paths.annotations);
      c.paths.out = p.value("out", c.paths.out);
    }
    if (j.contains("synth")) {
      const auto& s = j["synth"];
      check_keys(s, {"corpus", "inputs", "pool"}, "synth");
      c.synth.corpus = s.value("corpus", c.synth.corpus);
      c.synth.inputs = s.value("inputs", c.synth.inputs);
      c.synth.pool = s.value("pool", c.synth.pool);
    }
    c.word_set_size = j.value("word_set_size", c.word_set_size);
    c.top_m = j.value("top_m", c.top_m);
    c.max_inflight = j.value("max_inflight", c.max_inflight);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed config: ") + e.what());
  }
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError(path + ": cannot open config");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    const auto upto = std::min<std::size_t>(e.byte, text.size());
    const auto line = 1 + std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(upto), '\n');
    throw ValidationError(path + ":" + std::to_string(line) + ": " + e.what());
  }
  try {
    return from_json(j);
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

}  // namespace bspa
