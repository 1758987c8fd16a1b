#pragma once

// In-process playback server for remote-generation tests: answers POSTs with
// canned text keyed by the incoming prompt, or with scripted failures.

#include <atomic>
#include <functional>
#include <optional>
#include <string>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace testutil {

class MockModelServer {
public:
    // handler(prompt, audio_b64) -> response text, or nullopt for a 500
    using Handler = std::function<std::optional<std::string>(const std::string&,
                                                             const std::string&)>;

    explicit MockModelServer(Handler handler) : handler_(std::move(handler)) {
        server_.Post("/generate", [this](const httplib::Request& req, httplib::Response& res) {
            ++hits_;
            auto body = nlohmann::json::parse(req.body);
            auto text = handler_(body.value("prompt", ""), body.value("audio_b64", ""));
            if (!text) {
                res.status = 500;
                res.set_content("backend unavailable", "text/plain");
                return;
            }
            nlohmann::json envelope = {{"text", *text}};
            res.set_content(envelope.dump(), "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }

    ~MockModelServer() {
        server_.stop();
        if (thread_.joinable()) thread_.join();
    }

    std::string endpoint() const {
        return "http://127.0.0.1:" + std::to_string(port_) + "/generate";
    }
    int hits() const { return hits_; }

private:
    httplib::Server server_;
    Handler handler_;
    std::thread thread_;
    int port_ = 0;
    std::atomic<int> hits_{0};
};

} // namespace testutil
