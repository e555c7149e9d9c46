#pragma once

#include <string>

#include <json.hpp>

#include "bspa/endpoints.hpp"

namespace bspa {

/// One HTTP JSON endpoint. The API key, if any, is read from the environment
/// variable named by auth_env and sent as a bearer token.
struct RemoteEndpointConfig {
  std::string url;  // e.g. http://host:port/path
  std::string auth_env;
  double timeout_s = 30.0;
  int retries = 3;
  double backoff_s = 0.5;  // first retry delay; doubles on every retry
};

struct RemoteSuiteConfig {
  RemoteEndpointConfig text_gen, image_gen, text_filter, image_filter;
  /// "{caption}" and "{word}" are substituted before sending to the text generator.
  std::string instruction =
      "Write one scene description of about 15 words that combines the caption '{caption}' "
      "with the word '{word}'.";
  int max_inflight = 4;
};

RemoteEndpointConfig remote_endpoint_from_json(const nlohmann::json& j);
RemoteSuiteConfig remote_suite_from_json(const nlohmann::json& j);

/// Wire formats:
///   text generator  {"prompt", "word"} -> {"text"}
///   image generator {"prompt"}         -> {"handle"}
///   text filter     {"text"}           -> {"score"}
///   image filter    {"handle"}         -> {"score"}
/// Failed calls are retried with exponential backoff, then raise EndpointError.
EndpointSuite make_remote_suite(const RemoteSuiteConfig& config);

/// POSTs `body` and returns the parsed JSON reply, honouring timeout and retries.
nlohmann::json post_json(const RemoteEndpointConfig& endpoint, const nlohmann::json& body);

std::string fill_instruction(const std::string& tmpl, std::string_view caption, std::string_view word);

}  // namespace bspa
