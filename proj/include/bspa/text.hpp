#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace bspa {

using TokenList = std::vector<std::string>;

/// Lowercases, splits on ASCII whitespace and strips leading/trailing ASCII
/// punctuation from every token. Tokens left empty are dropped.
TokenList tokenize(std::string_view text);

/// Joins tokens with single spaces.
std::string join_tokens(const TokenList& tokens);

enum class Role { input, merged, stealthy, explicit_ };
enum class Source { synthetic, external, generated };

std::string_view to_string(Role role);
std::string_view to_string(Source source);
Role parse_role(std::string_view s);
Source parse_source(std::string_view s);

/// Where a generated prompt came from: the input prompt and sensitive word id.
struct Provenance {
  std::string input_id;
  int word_id = -1;
  friend bool operator==(const Provenance&, const Provenance&) = default;
};

/// A text item with a fixed role. Tokens are computed once at construction.
class Prompt {
 public:
  Prompt(std::string id, std::string text, Role role, Source source,
         std::optional<Provenance> provenance = std::nullopt);

  const std::string& id() const noexcept { return id_; }
  const std::string& text() const noexcept { return text_; }
  Role role() const noexcept { return role_; }
  Source source() const noexcept { return source_; }
  const TokenList& tokens() const noexcept { return tokens_; }
  const std::optional<Provenance>& provenance() const noexcept { return provenance_; }

  friend bool operator==(const Prompt& a, const Prompt& b) {
    return a.id_ == b.id_ && a.text_ == b.text_ && a.role_ == b.role_ &&
           a.source_ == b.source_ && a.provenance_ == b.provenance_;
  }

 private:
  std::string id_;
  std::string text_;
  Role role_;
  Source source_;
  std::optional<Provenance> provenance_;
  TokenList tokens_;
};

nlohmann::json to_json(const Prompt& p);
Prompt prompt_from_json(const nlohmann::json& j);

/// One JSON object per line, LF endings. Errors carry the offending line number.
std::vector<Prompt> read_prompts_jsonl(const std::string& path);
void write_prompts_jsonl(const std::string& path, const std::vector<Prompt>& prompts);
std::string prompts_to_jsonl(const std::vector<Prompt>& prompts);

/// Reads a JSON-lines file; blank lines are skipped.
std::vector<nlohmann::json> read_jsonl(const std::string& path);
void write_text_file(const std::string& path, std::string_view content);
std::string read_text_file(const std::string& path);

}  // namespace bspa
