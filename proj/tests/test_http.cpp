// Remote embedder and chat provider against a local HTTP server.

#include <gtest/gtest.h>

// Must match the library build so httplib classes have one layout.
#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <atomic>
#include <thread>

#include <json.hpp>

#include "medsum/embedding.hpp"
#include "medsum/llm_client.hpp"
#include "medsum/net.hpp"
#include "support/expect_error.hpp"

using namespace medsum;
using nlohmann::json;

namespace {

class LocalServer {
  public:
    LocalServer() {
        server_.Post("/v1/embeddings", [this](const httplib::Request& req, httplib::Response& res) {
            last_auth = req.get_header_value("Authorization");
            const auto body = json::parse(req.body);
            json data = json::array();
            for (const auto& text : body.at("input")) {
                const auto s = text.get<std::string>();
                data.push_back({{"embedding", {static_cast<double>(s.size()), 1.0, 0.5}}});
            }
            res.set_content(json{{"data", data}, {"model", body.at("model")}}.dump(), "application/json");
        });
        server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
            last_auth = req.get_header_value("Authorization");
            if (chat_failures.load() > 0) {
                --chat_failures;
                res.status = 429;
                res.set_content("slow down", "text/plain");
                return;
            }
            const auto body = json::parse(req.body);
            const auto content = body.at("messages").at(0).at("content").get<std::string>();
            res.set_content(json{{"choices", {{{"message", {{"role", "assistant"}, {"content", "echo: " + content}}}}}}}.dump(),
                            "application/json");
        });
        server_.Post("/v1/bad", [](const httplib::Request&, httplib::Response& res) {
            res.status = 400;
            res.set_content("bad", "text/plain");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~LocalServer() {
        server_.stop();
        thread_.join();
    }
    std::string url(const std::string& path) const { return "http://127.0.0.1:" + std::to_string(port_) + path; }

    std::string last_auth;
    std::atomic<int> chat_failures{0};

  private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

}  // namespace

TEST(Http, RemoteEmbedderRoundTrip) {
    LocalServer server;
    RemoteEmbedder embedder({server.url("/v1/embeddings"), "test-embed", "secret", 5});
    const ExampleSet set({{"a", "one", "", {}, Task::B}, {"b", "three", "", {}, Task::B}}, Task::B);
    const auto before = net::requests_issued();
    const auto index = embed_corpus(embedder, set, {1, 1, 0});
    EXPECT_EQ(net::requests_issued() - before, 2u);
    EXPECT_EQ(index.dimension(), 3u);
    EXPECT_EQ(server.last_auth, "Bearer secret");
    EXPECT_NE(index.provider_tag().find("test-embed"), std::string::npos);
}

TEST(Http, ChatProviderRetriesRateLimits) {
    LocalServer server;
    server.chat_failures = 2;
    HttpChatProvider chat({server.url("/v1/chat/completions"), "k", 5});
    ClientOptions opts;
    opts.sleep = [](std::chrono::milliseconds) {};
    Prompt p;
    p.text = "hi";
    const auto r = complete_with_cache(chat, p, {}, nullptr, opts);
    EXPECT_EQ(r.text, "echo: hi");
    EXPECT_EQ(server.chat_failures.load(), 0);
}

TEST(Http, ClientErrorIsNotRetried) {
    LocalServer server;
    HttpChatProvider chat({server.url("/v1/bad"), "", 5});
    try {
        chat.complete("x", {});
        FAIL();
    } catch (const ProviderError& e) {
        EXPECT_FALSE(e.retryable());
    }
}

TEST(Http, TransportFailureIsRetryable) {
    HttpChatProvider chat({"http://127.0.0.1:1/v1/chat/completions", "", 1});
    try {
        chat.complete("x", {});
        FAIL();
    } catch (const ProviderError& e) {
        EXPECT_TRUE(e.retryable());
    }
}

TEST(Http, RemoteEmbedderErrorsSurfaceAsProviderFailure) {
    LocalServer server;
    RemoteEmbedder embedder({server.url("/v1/bad"), "m", "", 5});
    const ExampleSet set({{"a", "one", "", {}, Task::B}}, Task::B);
    EXPECT_MEDSUM_ERROR(embed_corpus(embedder, set), ErrorCode::ProviderFailure);
}
