#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace medsum::net {

struct Response {
    int status = 0;
    std::string body;
    /// Non-empty when the request failed below HTTP (connect, TLS, timeout).
    std::string transport_error;
};

/// POST a JSON body to a full URL ("http[s]://host[:port]/path").
Response post_json(const std::string& url, const std::string& body,
                   const std::vector<std::pair<std::string, std::string>>& headers, int timeout_seconds);

/// Process-wide count of HTTP requests attempted through post_json.
std::uint64_t requests_issued();

}  // namespace medsum::net
