#pragma once

// Chat-completion client over plain HTTP. Speaks the common
// {"model", "messages", "temperature"} -> choices[0].message.content contract.

#include <string>

#include "httplib.h"
#include "trustlab/llm_adapter.hpp"

namespace trustlab {

class HttpChatClient : public GenerationClient {
public:
  explicit HttpChatClient(GenerationConfig cfg) : cfg_(std::move(cfg)) { cfg_.check(); }

  std::string generate(const GenerationRequest& req) override {
    const Json body{{"model", cfg_.model},
                    {"messages", Json::array({Json{{"role", "user"}, {"content", req.prompt}}})},
                    {"temperature", req.temperature},
                    {"n", 1}};
    std::string last_error;
    for (int attempt = 0; attempt <= cfg_.retries; ++attempt) {
      // one client per call: httplib clients are not safe to share across threads
      httplib::Client cli(cfg_.base_url);
      const auto secs = cfg_.timeout_ms / 1000;
      const auto usecs = (cfg_.timeout_ms % 1000) * 1000;
      cli.set_connection_timeout(secs, usecs);
      cli.set_read_timeout(secs, usecs);
      cli.set_write_timeout(secs, usecs);
      auto res = cli.Post(cfg_.path, body.dump(), "application/json");
      if (!res) {
        last_error = httplib::to_string(res.error());
        continue;
      }
      if (res->status != 200) {
        last_error = "HTTP " + std::to_string(res->status);
        continue;
      }
      try {
        return Json::parse(res->body).at("choices").at(0).at("message").at("content").get<std::string>();
      } catch (const Json::exception& e) {
        last_error = std::string("malformed response: ") + e.what();
      }
    }
    throw GenerationError("generation request failed after " + std::to_string(cfg_.retries + 1) +
                          " attempt(s): " + last_error);
  }

private:
  GenerationConfig cfg_;
};

}  // namespace trustlab
