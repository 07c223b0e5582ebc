#include "medsum/llm_client.hpp"

#include <algorithm>
#include <cmath>
#include <ctime>
#include <random>
#include <thread>

#include <json.hpp>

#include "medsum/digest.hpp"
#include "medsum/net.hpp"

namespace medsum {

using nlohmann::json;

namespace {

json config_json(const GenerationConfig& c) {
    return json{{"max_tokens", c.max_tokens}, {"model", c.model},         {"n", c.n},
                {"temperature", c.temperature}, {"top_p", c.top_p}};
}

GenerationConfig config_from_json(const json& j) {
    GenerationConfig c;
    c.model = j.at("model").get<std::string>();
    c.n = j.at("n").get<int>();
    c.temperature = j.at("temperature").get<double>();
    c.top_p = j.at("top_p").get<double>();
    c.max_tokens = j.at("max_tokens").get<int>();
    return c;
}

std::string utc_now_iso8601() {
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace

void GenerationConfig::validate() const {
    if (model.empty()) throw Error(ErrorCode::InvalidConfig, "model name is empty");
    if (n < 1) throw Error(ErrorCode::InvalidConfig, "n must be positive");
    if (!(temperature >= 0.0) || !std::isfinite(temperature)) {
        throw Error(ErrorCode::InvalidConfig, "temperature must be finite and >= 0");
    }
    if (!(top_p > 0.0 && top_p <= 1.0)) throw Error(ErrorCode::InvalidConfig, "top_p must lie in (0, 1]");
    if (max_tokens < 1) throw Error(ErrorCode::InvalidConfig, "max_tokens must be positive");
}

std::string GenerationConfig::canonical_json() const { return config_json(*this).dump(); }

std::string completion_key(std::string_view prompt_text, const GenerationConfig& config) {
    const json doc{{"config", config_json(config)}, {"prompt", std::string(prompt_text)}};
    return sha256_hex(doc.dump());
}

std::string MockProvider::complete(std::string_view prompt, const GenerationConfig& config) {
    calls_.fetch_add(1);
    if (responder_) return responder_(prompt, config);
    return "mock completion " + completion_key(prompt, config).substr(0, 16);
}

HttpChatProvider::HttpChatProvider(HttpProviderConfig config) : config_(std::move(config)) {
    if (config_.endpoint.empty()) throw Error(ErrorCode::InvalidConfig, "chat provider needs an endpoint");
}

std::string HttpChatProvider::request_body(std::string_view prompt, const GenerationConfig& config) {
    json body{{"model", config.model},
              {"messages", json::array({json{{"role", "user"}, {"content", std::string(prompt)}}})},
              {"n", config.n},
              {"temperature", config.temperature},
              {"top_p", config.top_p},
              {"max_tokens", config.max_tokens}};
    return body.dump();
}

std::string HttpChatProvider::complete(std::string_view prompt, const GenerationConfig& config) {
    std::vector<std::pair<std::string, std::string>> headers;
    if (!config_.api_key.empty()) headers.emplace_back("Authorization", "Bearer " + config_.api_key);
    const net::Response resp =
        net::post_json(config_.endpoint, request_body(prompt, config), headers, config_.timeout_seconds);
    if (!resp.transport_error.empty()) throw ProviderError("transport failure: " + resp.transport_error, true);
    if (resp.status == 429 || resp.status >= 500) {
        throw ProviderError("HTTP " + std::to_string(resp.status) + ": " + resp.body.substr(0, 200), true);
    }
    if (resp.status != 200) {
        throw ProviderError("HTTP " + std::to_string(resp.status) + ": " + resp.body.substr(0, 200), false);
    }
    try {
        const json body = json::parse(resp.body);
        return body.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw ProviderError(std::string("malformed completion response: ") + e.what(), false);
    }
}

ResponseCache::ResponseCache(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
}

std::filesystem::path ResponseCache::path_for(std::string_view key) const {
    const std::string k(key);
    return dir_ / k.substr(0, 2) / (k + ".json");
}

std::optional<std::string> ResponseCache::get(std::string_view key) const {
    const auto path = path_for(key);
    std::error_code ec;
    if (!std::filesystem::exists(path, ec)) return std::nullopt;
    const std::string raw = read_file(path);
    try {
        const json doc = json::parse(raw);
        const std::string prompt = doc.at("prompt").get<std::string>();
        const GenerationConfig config = config_from_json(doc.at("config"));
        std::string text = doc.at("text").get<std::string>();
        if (completion_key(prompt, config) != key || sha256_hex(text) != doc.at("text_sha256").get<std::string>()) {
            throw Error(ErrorCode::CacheCorrupt, "digest mismatch in " + path.string());
        }
        return text;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::CacheCorrupt, "unreadable cache entry " + path.string() + ": " + e.what());
    }
}

void ResponseCache::put(std::string_view key, std::string_view prompt, const GenerationConfig& config,
                        std::string_view text) {
    const json doc{{"config", config_json(config)},
                   {"prompt", std::string(prompt)},
                   {"text", std::string(text)},
                   {"text_sha256", sha256_hex(text)},
                   {"timestamp", utc_now_iso8601()}};
    std::lock_guard lock(write_mutex_);
    write_file_atomic(path_for(key), doc.dump(2) + "\n");
}

void ResponseCache::erase(std::string_view key) {
    std::lock_guard lock(write_mutex_);
    std::error_code ec;
    std::filesystem::remove(path_for(key), ec);
}

std::chrono::milliseconds RetryPolicy::delay_before_retry(int retry_index, double unit_random) const {
    const double base = static_cast<double>(initial_backoff.count()) * std::pow(multiplier, retry_index);
    const double factor = 1.0 + jitter * (2.0 * unit_random - 1.0);
    return std::chrono::milliseconds(static_cast<std::int64_t>(std::llround(std::max(0.0, base * factor))));
}

Completion complete_with_cache(CompletionProvider& provider, const Prompt& prompt, const GenerationConfig& config,
                               ResponseCache* cache, const ClientOptions& options) {
    config.validate();
    const std::string key = completion_key(prompt.text, config);
    Completion out;
    out.prompt_hash = key;
    out.config = config;

    if (cache && !options.bypass_cache_reads) {
        if (auto hit = cache->get(key)) {
            out.text = std::move(*hit);
            out.from_cache = true;
            return out;
        }
    }

    const RetryPolicy& policy = options.retry;
    const int attempts_allowed = std::max(1, policy.max_attempts);
    // Seeded from the key so retry timing is reproducible on every platform.
    std::mt19937_64 jitter_rng(policy.jitter_seed ^ std::stoull(key.substr(0, 16), nullptr, 16));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::string last_error;
    int attempt = 0;
    for (; attempt < attempts_allowed; ++attempt) {
        if (attempt > 0) {
            const auto delay = policy.delay_before_retry(attempt - 1, unit(jitter_rng));
            if (options.sleep) {
                options.sleep(delay);
            } else {
                std::this_thread::sleep_for(delay);
            }
        }
        const auto start = std::chrono::steady_clock::now();
        try {
            out.text = provider.complete(prompt.text, config);
        } catch (const ProviderError& e) {
            last_error = e.what();
            if (!e.retryable()) {
                ++attempt;
                throw ProviderExhausted("non-retryable provider failure after " + std::to_string(attempt) +
                                            " attempt(s): " + last_error,
                                        attempt);
            }
            continue;
        }
        out.provider_latency_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                                      std::chrono::steady_clock::now() - start)
                                      .count();
        if (cache) cache->put(key, prompt.text, config, out.text);
        return out;
    }
    throw ProviderExhausted("provider failed " + std::to_string(attempt) + " time(s): " + last_error, attempt);
}

std::vector<BatchItem> run_batch(CompletionProvider& provider, std::span<const Prompt> prompts,
                                 const GenerationConfig& config, ResponseCache* cache, std::size_t max_in_flight,
                                 const ClientOptions& options) {
    if (max_in_flight < 1) throw Error(ErrorCode::InvalidArgument, "max_in_flight must be >= 1");
    config.validate();
    std::vector<BatchItem> items(prompts.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < prompts.size(); i = next.fetch_add(1)) {
            try {
                items[i].completion = complete_with_cache(provider, prompts[i], config, cache, options);
            } catch (const Error& e) {
                items[i].error = e;
            } catch (const std::exception& e) {
                items[i].error = Error(ErrorCode::ProviderError, e.what());
            }
        }
    };
    const std::size_t threads = std::min(max_in_flight, prompts.size());
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    return items;
}

}  // namespace medsum
