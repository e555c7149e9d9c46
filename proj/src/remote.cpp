#include "bspa/remote.hpp"

#include <chrono>
#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "bspa/error.hpp"

namespace bspa {

namespace {

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

ParsedUrl parse_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw ValidationError("endpoint url lacks a scheme: " + url);
  const auto slash = url.find('/', scheme + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

std::string api_key(const RemoteEndpointConfig& cfg) {
  if (cfg.auth_env.empty()) return {};
  const char* v = std::getenv(cfg.auth_env.c_str());
  if (!v) throw ValidationError("environment variable " + cfg.auth_env + " is not set");
  return v;
}

double reply_score(const nlohmann::json& reply, const std::string& url) {
  if (!reply.contains("score") || !reply["score"].is_number()) {
    throw EndpointError(url + ": reply has no numeric 'score'");
  }
  return reply["score"].get<double>();
}

class RemoteTextGenerator final : public TextGenerator {
 public:
  RemoteTextGenerator(RemoteEndpointConfig cfg, std::string instruction)
      : cfg_(std::move(cfg)), instruction_(std::move(instruction)) {}
  std::string generate(std::string_view input_text, std::string_view word) const override {
    const auto reply = post_json(
        cfg_, {{"prompt", fill_instruction(instruction_, input_text, word)}, {"word", word}});
    if (!reply.contains("text") || !reply["text"].is_string()) {
      throw EndpointError(cfg_.url + ": reply has no 'text'");
    }
    return reply["text"].get<std::string>();
  }

 private:
  RemoteEndpointConfig cfg_;
  std::string instruction_;
};

class RemoteImageGenerator final : public ImageGenerator {
 public:
  explicit RemoteImageGenerator(RemoteEndpointConfig cfg) : cfg_(std::move(cfg)) {}
  ContentHandle render(std::string_view prompt) const override {
    const auto reply = post_json(cfg_, {{"prompt", prompt}});
    if (!reply.contains("handle") || !reply["handle"].is_string()) {
      throw EndpointError(cfg_.url + ": reply has no 'handle'");
    }
    return {reply["handle"].get<std::string>()};
  }

 private:
  RemoteEndpointConfig cfg_;
};

class RemoteTextFilter final : public TextFilter {
 public:
  explicit RemoteTextFilter(RemoteEndpointConfig cfg) : cfg_(std::move(cfg)) {}
  double score(std::string_view text) const override {
    return reply_score(post_json(cfg_, {{"text", text}}), cfg_.url);
  }

 private:
  RemoteEndpointConfig cfg_;
};

class RemoteImageFilter final : public ImageFilter {
 public:
  explicit RemoteImageFilter(RemoteEndpointConfig cfg) : cfg_(std::move(cfg)) {}
  double score(const ContentHandle& content) const override {
    return reply_score(post_json(cfg_, {{"handle", content.ref}}), cfg_.url);
  }

 private:
  RemoteEndpointConfig cfg_;
};

}  // namespace

std::string fill_instruction(const std::string& tmpl, std::string_view caption, std::string_view word) {
  std::string out;
  for (std::size_t i = 0; i < tmpl.size();) {
    if (tmpl.compare(i, 9, "{caption}") == 0) {
      out += caption;
      i += 9;
    } else if (tmpl.compare(i, 6, "{word}") == 0) {
      out += word;
      i += 6;
    } else {
      out.push_back(tmpl[i++]);
    }
  }
  return out;
}

nlohmann::json post_json(const RemoteEndpointConfig& endpoint, const nlohmann::json& body) {
  const auto url = parse_url(endpoint.url);
  const auto key = api_key(endpoint);
  const auto timeout = std::chrono::duration<double>(endpoint.timeout_s);
  const auto timeout_us = std::chrono::duration_cast<std::chrono::microseconds>(timeout);
  const int attempts = 1 + std::max(0, endpoint.retries);
  std::string last_error;
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    httplib::Client client(url.origin);
    client.set_connection_timeout(timeout_us);
    client.set_read_timeout(timeout_us);
    client.set_write_timeout(timeout_us);
    httplib::Headers headers;
    if (!key.empty()) headers.emplace("Authorization", "Bearer " + key);
    auto res = client.Post(url.path, headers, body.dump(), "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
    } else if (res->status < 200 || res->status >= 300) {
      last_error = "HTTP " + std::to_string(res->status);
    } else {
      try {
        return nlohmann::json::parse(res->body);
      } catch (const nlohmann::json::parse_error&) {
        last_error = "reply is not JSON";
      }
    }
    if (attempt < attempts) {
      const double delay = endpoint.backoff_s * static_cast<double>(1 << (attempt - 1));
      std::this_thread::sleep_for(std::chrono::duration<double>(delay));
    }
  }
  throw EndpointError(endpoint.url + ": " + last_error + " after " + std::to_string(attempts) +
                          " attempts",
                      attempts);
}

RemoteEndpointConfig remote_endpoint_from_json(const nlohmann::json& j) {
  RemoteEndpointConfig c;
  c.url = j.at("url").get<std::string>();
  c.auth_env = j.value("auth_env", std::string());
  c.timeout_s = j.value("timeout_s", 30.0);
  c.retries = j.value("retries", 3);
  c.backoff_s = j.value("backoff_s", 0.5);
  parse_url(c.url);
  return c;
}

RemoteSuiteConfig remote_suite_from_json(const nlohmann::json& j) {
  try {
    RemoteSuiteConfig c;
    c.text_gen = remote_endpoint_from_json(j.at("text_gen"));
    c.image_gen = remote_endpoint_from_json(j.at("image_gen"));
    c.text_filter = remote_endpoint_from_json(j.at("text_filter"));
    c.image_filter = remote_endpoint_from_json(j.at("image_filter"));
    c.instruction = j.value("instruction", c.instruction);
    c.max_inflight = j.value("max_inflight", 4);
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed remote block: ") + e.what());
  }
}

EndpointSuite make_remote_suite(const RemoteSuiteConfig& config) {
  for (const auto* e : {&config.text_gen, &config.image_gen, &config.text_filter, &config.image_filter}) {
    parse_url(e->url);
    api_key(*e);
  }
  EndpointSuite s;
  s.text_gen = std::make_shared<RemoteTextGenerator>(config.text_gen, config.instruction);
  s.image_gen = std::make_shared<RemoteImageGenerator>(config.image_gen);
  s.text_filter = std::make_shared<RemoteTextFilter>(config.text_filter);
  s.image_filter = std::make_shared<RemoteImageFilter>(config.image_filter);
  s.max_inflight = config.max_inflight;
  return s;
}

}  // namespace bspa
