#include <cstdlib>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "alterforge/completion.hpp"
#include "alterforge/embedder.hpp"
#include "alterforge/error.hpp"

namespace alterforge {

namespace {

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;    // base path without trailing slash
};

Endpoint split_url(const std::string& url) {
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) throw Error(Errc::invalid_argument, "endpoint URL needs a scheme: " + url);
  const auto slash = url.find('/', scheme + 3);
  Endpoint ep{url.substr(0, slash), slash == std::string::npos ? "" : url.substr(slash)};
  while (!ep.path.empty() && ep.path.back() == '/') ep.path.pop_back();
  return ep;
}

nlohmann::json post_json(const std::string& base_url, const std::string& api_key, int timeout_s,
                         const std::string& route, const nlohmann::json& body) {
  const auto ep = split_url(base_url);
  httplib::Client client(ep.origin);
  client.set_connection_timeout(timeout_s);
  client.set_read_timeout(timeout_s);
  client.set_write_timeout(timeout_s);
  httplib::Headers headers;
  if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);
  auto response = client.Post(ep.path + route, headers, body.dump(), "application/json");
  if (!response) {
    throw Error(Errc::transport, "request to " + base_url + route + " failed: " + httplib::to_string(response.error()));
  }
  if (response->status < 200 || response->status >= 300) {
    throw Error(Errc::transport, "endpoint answered HTTP " + std::to_string(response->status) + ": " +
                                     response->body.substr(0, 300));
  }
  try {
    return nlohmann::json::parse(response->body);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::transport, std::string("endpoint returned invalid JSON: ") + e.what());
  }
}

std::string env_or_throw(const char* name) {
  const char* value = std::getenv(name);
  if (value == nullptr || *value == '\0') {
    throw Error(Errc::invalid_argument, std::string(name) + " is not set");
  }
  return value;
}

}  // namespace

HttpCompletionClient::HttpCompletionClient(std::string base_url, std::string api_key, int timeout_s)
    : base_url_(std::move(base_url)), api_key_(std::move(api_key)), timeout_s_(timeout_s) {}

std::unique_ptr<HttpCompletionClient> HttpCompletionClient::from_environment() {
  const char* key = std::getenv("ALTERFORGE_LLM_KEY");
  return std::make_unique<HttpCompletionClient>(env_or_throw("ALTERFORGE_LLM_URL"), key ? key : "");
}

std::string HttpCompletionClient::send(const ChatRequest& request) {
  request.validate();
  const nlohmann::json body = {
      {"model", request.model},
      {"temperature", request.temperature},
      {"max_tokens", request.max_tokens},
      {"messages",
       {{{"role", "system"}, {"content", request.system}}, {{"role", "user"}, {"content", request.user}}}},
  };
  const auto reply = post_json(base_url_, api_key_, timeout_s_, "/chat/completions", body);
  try {
    return reply.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::transport, std::string("unexpected completion payload: ") + e.what());
  }
}

HttpEmbedder::HttpEmbedder(std::string base_url, std::string api_key, std::string model, std::size_t dimension)
    : base_url_(std::move(base_url)), api_key_(std::move(api_key)), model_(std::move(model)), dimension_(dimension) {}

std::vector<double> HttpEmbedder::embed(std::string_view text) const {
  const nlohmann::json body = {{"model", model_}, {"input", std::string(text)}};
  const auto reply = post_json(base_url_, api_key_, 60, "/embeddings", body);
  std::vector<double> vector;
  try {
    vector = reply.at("data").at(0).at("embedding").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::transport, std::string("unexpected embedding payload: ") + e.what());
  }
  if (vector.size() != dimension_) {
    throw Error(Errc::transport, "embedding has dimension " + std::to_string(vector.size()) + ", expected " +
                                     std::to_string(dimension_));
  }
  normalize(vector);
  return vector;
}

}  // namespace alterforge
