#pragma once

// JSON-over-HTTP POST used by the remote embedder and generator.

#include <chrono>
#include <cstdint>
#include <string>
#include <thread>

// Clients that omit Content-Type send papers as form-urlencoded; httplib
// rejects those above 8 KiB unless the cap is raised before it is included.
#ifndef CPPHTTPLIB_FORM_URL_ENCODED_PAYLOAD_MAX_LENGTH
#define CPPHTTPLIB_FORM_URL_ENCODED_PAYLOAD_MAX_LENGTH (64u << 20)
#endif
#include <httplib.h>
#include <json.hpp>

#include "d2s/error.hpp"

namespace d2s {

struct HttpOptions {
  std::int64_t timeout_ms = 30000;
  int retries = 2;  // extra attempts after the first on 5xx / connection failure
  std::int64_t retry_backoff_ms = 50;
};

class JsonPostClient {
 public:
  /// `url` is "http://host:port" optionally followed by a path prefix.
  explicit JsonPostClient(std::string url, HttpOptions options = {})
      : options_(options) {
    const auto scheme = url.find("://");
    const auto path_start = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
    if (path_start == std::string::npos) {
      base_ = url;
    } else {
      base_ = url.substr(0, path_start);
      prefix_ = url.substr(path_start);
      while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
    }
    if (base_.empty()) throw Error(ErrorCode::ConfigError, "empty service URL");
  }

  const HttpOptions& options() const { return options_; }

  /// POSTs `body` to prefix + path and returns the parsed JSON response.
  /// Each call owns its own connection, so one client may be shared.
  nlohmann::json post(const std::string& path, const nlohmann::json& body) const {
    const std::string payload = body.dump();
    std::string last_error;
    for (int attempt = 0; attempt <= options_.retries; ++attempt) {
      if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(options_.retry_backoff_ms));
      httplib::Client cli(base_);
      const auto timeout = std::chrono::milliseconds(options_.timeout_ms);
      cli.set_connection_timeout(timeout);
      cli.set_read_timeout(timeout);
      cli.set_write_timeout(timeout);
      auto res = cli.Post(prefix_ + path, payload, "application/json");
      if (!res) {
        const auto err = res.error();
        if (err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout) {
          throw Error(ErrorCode::Timeout, base_ + prefix_ + path + " did not answer within " +
                                              std::to_string(options_.timeout_ms) + " ms");
        }
        last_error = httplib::to_string(err);
        continue;
      }
      if (res->status >= 500) {
        last_error = "HTTP " + std::to_string(res->status);
        continue;
      }
      if (res->status != 200) {
        throw Error(ErrorCode::ServiceUnavailable,
                    base_ + prefix_ + path + " answered HTTP " + std::to_string(res->status));
      }
      try {
        return nlohmann::json::parse(res->body);
      } catch (const nlohmann::json::parse_error& e) {
        throw Error(ErrorCode::SchemaError, std::string("malformed service response: ") + e.what());
      }
    }
    throw Error(ErrorCode::ServiceUnavailable, base_ + prefix_ + path + ": " + last_error);
  }

 private:
  std::string base_;
  std::string prefix_;
  HttpOptions options_;
};

}  // namespace d2s
