#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "medsum/net.hpp"

#include <httplib.h>

#include <atomic>

#include "medsum/error.hpp"

namespace medsum::net {

namespace {

std::atomic<std::uint64_t> g_requests{0};

struct ParsedUrl {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

ParsedUrl split_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) throw Error(ErrorCode::InvalidConfig, "URL lacks a scheme: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

Response post_json(const std::string& url, const std::string& body,
                   const std::vector<std::pair<std::string, std::string>>& headers, int timeout_seconds) {
    const ParsedUrl parsed = split_url(url);
    httplib::Client client(parsed.origin);
    client.set_connection_timeout(timeout_seconds, 0);
    client.set_read_timeout(timeout_seconds, 0);
    client.set_write_timeout(timeout_seconds, 0);
    httplib::Headers hdrs;
    for (const auto& [k, v] : headers) hdrs.emplace(k, v);

    g_requests.fetch_add(1);
    auto result = client.Post(parsed.path, hdrs, body, "application/json");
    Response out;
    if (!result) {
        out.transport_error = httplib::to_string(result.error());
        return out;
    }
    out.status = result->status;
    out.body = result->body;
    return out;
}

std::uint64_t requests_issued() { return g_requests.load(); }

}  // namespace medsum::net
