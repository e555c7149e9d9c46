#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "bspa/env.hpp"
#include "bspa/remote.hpp"
#include "bspa/sim_world.hpp"
#include "bspa/training.hpp"

namespace bspa {

inline constexpr const char* kVersion = "0.1.0";

/// Where the four endpoints come from. A SimWorld is either loaded from
/// `world_path` or generated from the run seed and `shape`; the remote block is
/// used only when `remote` is set in the file and --remote is passed.
struct WorldConfig {
  bool remote = false;
  std::string world_path;
  WorldShape shape;
  nlohmann::json remote_block;  // raw block, parsed by remote_suite()

  RemoteSuiteConfig remote_suite() const;
};

/// Input files. Empty entries are synthesized from the SimWorld.
struct PathsConfig {
  std::string corpus;
  std::string inputs;
  std::string words;
  std::string checkpoint;
  std::string explicit_pool;
  std::string stealthy_pool;
  std::string benchmark;
  std::string outcomes;
  std::string annotations;
  std::string out = "runs";
};

/// Sizes of synthesized data when no file is given.
struct SynthConfig {
  std::size_t corpus = 2000;
  std::size_t inputs = 200;
  std::size_t pool = 1500;
};

struct RunConfig {
  std::uint64_t seed = 0;
  WorldConfig world;
  TrainingConfig training;
  Thresholds thresholds;
  PathsConfig paths;
  SynthConfig synth;
  std::size_t word_set_size = 50;
  int top_m = 3;
  int max_inflight = 4;

  void validate() const;
  nlohmann::json to_json() const;
  /// Requires "seed"; every other key is optional. Unknown keys are rejected.
  static RunConfig from_json(const nlohmann::json& j);
  /// Parse errors name the file and line.
  static RunConfig load(const std::string& path);
};

}  // namespace bspa
