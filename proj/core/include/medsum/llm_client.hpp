#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "medsum/error.hpp"
#include "medsum/prompting.hpp"

namespace medsum {

/// Decoding parameters. Temperature defaults to 0 for reproducibility; the
/// published runs used 1.0, which is available through configuration.
struct GenerationConfig {
    std::string model = "gpt-4";
    int n = 1;
    double temperature = 0.0;
    double top_p = 1.0;
    int max_tokens = 800;

    /// Throws InvalidConfig.
    void validate() const;
    /// Canonical JSON (sorted keys) used for cache keys and manifests.
    std::string canonical_json() const;

    bool operator==(const GenerationConfig&) const = default;
};

/// SHA-256 over the canonical JSON of {config, prompt}; the model is part of the config.
std::string completion_key(std::string_view prompt_text, const GenerationConfig& config);

struct Completion {
    std::string text;
    std::string prompt_hash;
    GenerationConfig config;
    std::int64_t provider_latency_ms = 0;
    bool from_cache = false;
};

/// Thrown by providers. Retryable failures (rate limits, 5xx, transport) are
/// retried by complete_with_cache; others fail immediately.
class ProviderError : public Error {
  public:
    ProviderError(const std::string& message, bool retryable)
        : Error(ErrorCode::ProviderError, message), retryable_(retryable) {}
    bool retryable() const noexcept { return retryable_; }

  private:
    bool retryable_;
};

class ProviderExhausted : public Error {
  public:
    ProviderExhausted(const std::string& message, int attempts)
        : Error(ErrorCode::ProviderExhausted, message), attempts_(attempts) {}
    int attempts() const noexcept { return attempts_; }

  private:
    int attempts_;
};

class CompletionProvider {
  public:
    virtual ~CompletionProvider() = default;
    virtual std::string name() const = 0;
    /// Must be safe to call concurrently.
    virtual std::string complete(std::string_view prompt, const GenerationConfig& config) = 0;
};

/// Offline provider. Without a responder it returns canned text derived from
/// the completion key; with one it returns whatever the responder computes.
class MockProvider final : public CompletionProvider {
  public:
    using Responder = std::function<std::string(std::string_view prompt, const GenerationConfig& config)>;

    MockProvider() = default;
    explicit MockProvider(Responder responder) : responder_(std::move(responder)) {}

    std::string name() const override { return "mock"; }
    std::string complete(std::string_view prompt, const GenerationConfig& config) override;

    std::uint64_t calls() const noexcept { return calls_.load(); }

  private:
    Responder responder_;
    std::atomic<std::uint64_t> calls_{0};
};

struct HttpProviderConfig {
    /// Chat-completions URL, e.g. "https://api.openai.com/v1/chat/completions".
    std::string endpoint = "https://api.openai.com/v1/chat/completions";
    std::string api_key;
    int timeout_seconds = 120;
};

/// Chat-style JSON over HTTP: one user message carrying the prompt; returns
/// choices[0].message.content.
class HttpChatProvider final : public CompletionProvider {
  public:
    explicit HttpChatProvider(HttpProviderConfig config);
    std::string name() const override { return "http-chat:" + config_.endpoint; }
    std::string complete(std::string_view prompt, const GenerationConfig& config) override;

    /// Request body sent for a prompt (exposed for tests).
    static std::string request_body(std::string_view prompt, const GenerationConfig& config);

  private:
    HttpProviderConfig config_;
};

/// Content-addressed store: <dir>/<first two hex>/<key>.json holding
/// {prompt, config, text, text_sha256, timestamp}. Reads verify that the
/// stored prompt and config re-hash to the file name and the text to its digest.
class ResponseCache {
  public:
    explicit ResponseCache(std::filesystem::path dir);

    const std::filesystem::path& dir() const noexcept { return dir_; }
    std::filesystem::path path_for(std::string_view key) const;

    /// nullopt on miss. Throws CacheCorrupt when the entry fails verification.
    std::optional<std::string> get(std::string_view key) const;
    void put(std::string_view key, std::string_view prompt, const GenerationConfig& config, std::string_view text);
    void erase(std::string_view key);

  private:
    std::filesystem::path dir_;
    mutable std::mutex write_mutex_;
};

struct RetryPolicy {
    int max_attempts = 5;
    std::chrono::milliseconds initial_backoff{1000};
    double multiplier = 2.0;
    /// Each delay is scaled by a uniform factor in [1 - jitter, 1 + jitter].
    double jitter = 0.25;
    std::uint64_t jitter_seed = 0;

    std::chrono::milliseconds delay_before_retry(int retry_index, double unit_random) const;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

struct ClientOptions {
    RetryPolicy retry;
    /// Defaults to std::this_thread::sleep_for.
    Sleeper sleep;
    /// Skip cache lookups (results are still written).
    bool bypass_cache_reads = false;
};

/// Cache hit returns the stored text; a miss calls the provider with retries
/// and stores the result. `cache` may be null (no caching).
Completion complete_with_cache(CompletionProvider& provider, const Prompt& prompt, const GenerationConfig& config,
                               ResponseCache* cache, const ClientOptions& options = {});

struct BatchItem {
    std::optional<Completion> completion;
    std::optional<Error> error;

    bool ok() const noexcept { return completion.has_value(); }
};

/// Completes all prompts with at most `max_in_flight` outstanding requests.
/// Output order follows input order; failures land in per-item error slots.
std::vector<BatchItem> run_batch(CompletionProvider& provider, std::span<const Prompt> prompts,
                                 const GenerationConfig& config, ResponseCache* cache, std::size_t max_in_flight,
                                 const ClientOptions& options = {});

}  // namespace medsum
