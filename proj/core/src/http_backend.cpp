#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "t2sc/llm_backend.hpp"

namespace t2sc {

HttpBackendConfig HttpBackendConfig::from_env() {
  HttpBackendConfig cfg;
  if (const char* base = std::getenv("LLM_API_BASE")) cfg.api_base = base;
  if (const char* key = std::getenv("LLM_API_KEY")) cfg.api_key = key;
  return cfg;
}

HttpBackend::HttpBackend(HttpBackendConfig config) : config_(std::move(config)) {
  if (config_.api_base.empty()) throw Error("LLM_API_BASE is not set");
  const auto scheme_end = config_.api_base.find("://");
  if (scheme_end == std::string::npos) throw Error("api base must include a scheme: " + config_.api_base);
  const auto path_start = config_.api_base.find('/', scheme_end + 3);
  if (path_start == std::string::npos) {
    scheme_host_ = config_.api_base;
  } else {
    scheme_host_ = config_.api_base.substr(0, path_start);
    path_prefix_ = config_.api_base.substr(path_start);
  }
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
}

HttpBackend::~HttpBackend() = default;

void HttpBackend::wait_for_rate_limit() {
  if (config_.requests_per_minute <= 0) return;
  const auto interval = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
      std::chrono::duration<double>(60.0 / config_.requests_per_minute));
  std::chrono::steady_clock::time_point slot;
  {
    std::lock_guard lock(rate_mu_);
    const auto now = std::chrono::steady_clock::now();
    slot = std::max(now, next_slot_);
    next_slot_ = slot + interval;
  }
  std::this_thread::sleep_until(slot);
}

LlmResponse HttpBackend::complete(const LlmRequest& req) {
  const std::string body = chat_request_body(req).dump();
  const std::string path = path_prefix_ + "/chat/completions";

  httplib::Client client(scheme_host_);
  client.set_connection_timeout(std::chrono::seconds(30));
  client.set_read_timeout(config_.request_timeout);
  client.set_write_timeout(std::chrono::seconds(60));
  if (!config_.api_key.empty()) client.set_bearer_token_auth(config_.api_key);

  auto backoff = config_.initial_backoff;
  std::string last_error;
  for (int attempt = 0; attempt <= config_.transport_retries; ++attempt) {
    if (attempt > 0) {
      ++transport_retries_;
      std::this_thread::sleep_for(backoff);
      backoff *= 2;
    }
    wait_for_rate_limit();
    const auto started = std::chrono::steady_clock::now();
    auto res = client.Post(path, body, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status == 401 || res->status == 403) {
      throw AuthError("authentication rejected (HTTP " + std::to_string(res->status) + ")");
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      throw Error("chat completion failed with HTTP " + std::to_string(res->status) + ": " + res->body);
    }
    nlohmann::json parsed;
    try {
      parsed = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::parse_error& e) {
      throw Error(std::string("chat completion body is not JSON: ") + e.what());
    }
    LlmResponse resp = parse_chat_response(parsed);
    resp.latency =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started);
    return resp;
  }
  throw TransportError("chat completion transport failed after " + std::to_string(config_.transport_retries) +
                       " retries: " + last_error);
}

}  // namespace t2sc
