#include "bspa/text.hpp"

#include <cctype>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "bspa/error.hpp"

namespace bspa {

namespace {

bool is_space(unsigned char c) { return c == ' ' || (c >= '\t' && c <= '\r'); }
bool is_punct(unsigned char c) { return c < 0x80 && std::ispunct(c); }

}  // namespace

TokenList tokenize(std::string_view text) {
  TokenList out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !is_space(static_cast<unsigned char>(text[j]))) ++j;
    std::size_t b = i, e = j;
    while (b < e && is_punct(static_cast<unsigned char>(text[b]))) ++b;
    while (e > b && is_punct(static_cast<unsigned char>(text[e - 1]))) --e;
    if (b < e) {
      std::string tok(text.substr(b, e - b));
      for (auto& c : tok) {
        const auto u = static_cast<unsigned char>(c);
        if (u < 0x80) c = static_cast<char>(std::tolower(u));
      }
      out.push_back(std::move(tok));
    }
    i = j;
  }
  return out;
}

std::string join_tokens(const TokenList& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

std::string_view to_string(Role role) {
  switch (role) {
    case Role::input: return "input";
    case Role::merged: return "merged";
    case Role::stealthy: return "stealthy";
    case Role::explicit_: return "explicit";
  }
  return "input";
}

std::string_view to_string(Source source) {
  switch (source) {
    case Source::synthetic: return "synthetic";
    case Source::external: return "external";
    case Source::generated: return "generated";
  }
  return "synthetic";
}

Role parse_role(std::string_view s) {
  if (s == "input") return Role::input;
  if (s == "merged") return Role::merged;
  if (s == "stealthy") return Role::stealthy;
  if (s == "explicit") return Role::explicit_;
  throw ValidationError("unknown prompt role '" + std::string(s) + "'");
}

Source parse_source(std::string_view s) {
  if (s == "synthetic") return Source::synthetic;
  if (s == "external") return Source::external;
  if (s == "generated") return Source::generated;
  throw ValidationError("unknown prompt source '" + std::string(s) + "'");
}

Prompt::Prompt(std::string id, std::string text, Role role, Source source,
               std::optional<Provenance> provenance)
    : id_(std::move(id)),
      text_(std::move(text)),
      role_(role),
      source_(source),
      provenance_(std::move(provenance)),
      tokens_(tokenize(text_)) {
  if (text_.empty()) throw ValidationError("prompt '" + id_ + "' has empty text");
}

nlohmann::json to_json(const Prompt& p) {
  nlohmann::json j = {{"id", p.id()},
                      {"text", p.text()},
                      {"role", to_string(p.role())},
                      {"source", to_string(p.source())}};
  if (p.provenance()) {
    j["input_id"] = p.provenance()->input_id;
    j["word_id"] = p.provenance()->word_id;
  }
  return j;
}

Prompt prompt_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ValidationError("prompt record is not a JSON object");
  for (const char* key : {"id", "text", "role", "source"}) {
    if (!j.contains(key) || !j[key].is_string()) {
      throw ValidationError(std::string("prompt record missing string field '") + key + "'");
    }
  }
  std::optional<Provenance> prov;
  if (j.contains("input_id")) {
    prov = Provenance{j.at("input_id").get<std::string>(), j.value("word_id", -1)};
  }
  return Prompt(j["id"].get<std::string>(), j["text"].get<std::string>(),
                parse_role(j["role"].get<std::string>()),
                parse_source(j["source"].get<std::string>()), std::move(prov));
}

std::vector<nlohmann::json> read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  std::vector<nlohmann::json> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      out.push_back(nlohmann::json::parse(line));
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::vector<Prompt> read_prompts_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path);
  std::vector<Prompt> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      out.push_back(prompt_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(path + ":" + std::to_string(lineno) + ": " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::string prompts_to_jsonl(const std::vector<Prompt>& prompts) {
  std::string out;
  for (const auto& p : prompts) {
    out += to_json(p).dump();
    out.push_back('\n');
  }
  return out;
}

void write_prompts_jsonl(const std::string& path, const std::vector<Prompt>& prompts) {
  write_text_file(path, prompts_to_jsonl(prompts));
}

void write_text_file(const std::string& path, std::string_view content) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write " + path);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace bspa
