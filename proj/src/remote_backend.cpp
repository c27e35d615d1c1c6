#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <thread>

#include <httplib.h>

#include "influence/backend.hpp"

namespace influence {

nlohmann::json completion_request_body(const PromptText& prompt, const CompletionParams& params) {
  return {{"model", params.model_name},
          {"prompt", prompt.text},
          {"temperature", params.temperature},
          {"max_tokens", params.max_tokens}};
}

RemoteBackend::RemoteBackend(RemoteOptions options) : options_(std::move(options)) {
  const auto scheme_end = options_.url.find("://");
  if (scheme_end == std::string::npos) throw std::invalid_argument("endpoint URL needs a scheme: " + options_.url);
  const auto path_start = options_.url.find('/', scheme_end + 3);
  scheme_host_port_ = options_.url.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : options_.url.substr(path_start);
  if (!options_.sleep)
    options_.sleep = [](double s) { std::this_thread::sleep_for(std::chrono::duration<double>(s)); };
}

std::string RemoteBackend::do_complete(const PromptText& prompt, const CompletionParams& params) {
  const char* key = std::getenv(options_.api_key_env.c_str());
  if (key == nullptr || *key == '\0')
    throw BackendError(BackendError::Kind::AuthMissing, "environment variable " + options_.api_key_env + " is not set");

  httplib::Client client(scheme_host_port_);
  const auto timeout = std::chrono::duration_cast<std::chrono::microseconds>(
      std::chrono::duration<double>(options_.timeout_s));
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  const httplib::Headers headers{{"Authorization", std::string("Bearer ") + key}};
  const std::string body = completion_request_body(prompt, params).dump();

  double backoff = options_.initial_backoff_s;
  std::string last_error;
  bool rate_limited = false;
  for (int attempt = 0; attempt <= options_.max_retries; ++attempt) {
    if (attempt > 0) {
      options_.sleep(backoff);
      backoff = std::min(backoff * 2.0, options_.max_backoff_s);
    }
    auto res = client.Post(path_, headers, body, "application/json");
    if (!res) {
      last_error = "transport: " + httplib::to_string(res.error());
      rate_limited = false;
      continue;
    }
    if (res->status == 429) {
      last_error = "HTTP 429";
      rate_limited = true;
      continue;
    }
    if (res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      rate_limited = false;
      continue;
    }
    if (res->status == 401 || res->status == 403)
      throw BackendError(BackendError::Kind::AuthMissing, "endpoint rejected credential (HTTP " +
                                                              std::to_string(res->status) + ")");
    if (res->status != 200)
      throw BackendError(BackendError::Kind::TransportError,
                         "HTTP " + std::to_string(res->status) + ": " + res->body.substr(0, 200));
    try {
      const auto j = nlohmann::json::parse(res->body);
      return j.at("choices").at(0).at("text").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw BackendError(BackendError::Kind::BadResponse, std::string("unexpected response: ") + e.what());
    }
  }
  throw BackendError(rate_limited ? BackendError::Kind::RateLimited : BackendError::Kind::TransportError,
                     "giving up after " + std::to_string(options_.max_retries + 1) + " attempts (" + last_error + ")");
}

}  // namespace influence
