#pragma once

#include "crowdtrend/platform.hpp"

#include <memory>
#include <string>

namespace crowdtrend {

/// JSON API under /v1 on top of a Platform.
class HttpService {
public:
    explicit HttpService(Platform& platform);
    ~HttpService();
    HttpService(const HttpService&) = delete;
    HttpService& operator=(const HttpService&) = delete;

    /// Binds and serves on a background thread. Port 0 picks a free port.
    /// Returns the bound port; throws std::runtime_error when binding fails.
    int start(const std::string& host, int port);
    void stop();
    bool running() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// "host:port" with either part optional; defaults 127.0.0.1:8080.
std::pair<std::string, int> parse_listen_address(const std::string& text);

}  // namespace crowdtrend
