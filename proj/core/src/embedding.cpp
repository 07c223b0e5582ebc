#include "medsum/embedding.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <charconv>
#include <cmath>
#include <exception>
#include <iomanip>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "medsum/digest.hpp"
#include "medsum/error.hpp"
#include "medsum/net.hpp"

namespace medsum {

EmbeddingVector::EmbeddingVector(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) throw Error(ErrorCode::InvalidArgument, "embedding vector must have dimension >= 1");
    for (double v : values_) {
        if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteValue, "embedding vector has a non-finite entry");
    }
}

double EmbeddingVector::norm() const { return std::sqrt(dot(values_, values_)); }

EmbeddingVector EmbeddingVector::normalized() const {
    const double n = norm();
    if (!(n > 0.0)) throw Error(ErrorCode::ZeroVector, "cannot normalize a zero vector");
    std::vector<double> out(values_.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = values_[i] / n;
    return EmbeddingVector(std::move(out));
}

double dot(std::span<const double> a, std::span<const double> b) {
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
    return sum;
}

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (a.dimension() != b.dimension()) {
        throw Error(ErrorCode::DimensionMismatch,
                    std::to_string(a.dimension()) + " vs " + std::to_string(b.dimension()));
    }
    const double na = a.norm();
    const double nb = b.norm();
    if (!(na > 0.0) || !(nb > 0.0)) throw Error(ErrorCode::ZeroVector, "cosine similarity of a zero vector");
    return std::clamp(dot(a.values(), b.values()) / (na * nb), -1.0, 1.0);
}

namespace {

std::uint64_t mix64(std::uint64_t x) {
    // splitmix64 finalizer
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t token_hash(std::string_view token, std::uint64_t seed) {
    std::uint64_t h = 0xcbf29ce484222325ULL ^ mix64(seed);
    for (unsigned char c : token) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return mix64(h);
}

}  // namespace

EmbeddingVector hash_embed(std::string_view text, std::size_t dimension, std::uint64_t seed) {
    if (dimension < 2) throw Error(ErrorCode::InvalidArgument, "hash_embed dimension must be >= 2");
    std::vector<double> acc(dimension, 0.0);
    std::size_t tokens = 0;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        const std::size_t start = i;
        while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
        if (i > start) {
            const std::uint64_t h = token_hash(text.substr(start, i - start), seed);
            acc[h % dimension] += (h >> 63) ? -1.0 : 1.0;
            ++tokens;
        }
    }
    if (tokens == 0) throw Error(ErrorCode::EmptyText, "hash_embed of text without tokens");
    return EmbeddingVector(std::move(acc)).normalized();
}

HashEmbedder::HashEmbedder(std::size_t dimension, std::uint64_t seed) : dimension_(dimension), seed_(seed) {
    if (dimension < 2) throw Error(ErrorCode::InvalidArgument, "hash embedder dimension must be >= 2");
}

std::string HashEmbedder::tag() const {
    return "hash-v1:dim=" + std::to_string(dimension_) + ":seed=" + std::to_string(seed_);
}

std::vector<EmbeddingVector> HashEmbedder::embed_batch(std::span<const EmbedInput> inputs) {
    std::vector<EmbeddingVector> out;
    out.reserve(inputs.size());
    for (const auto& in : inputs) out.push_back(hash_embed(in.text, dimension_, seed_));
    return out;
}

PrecomputedEmbedder::PrecomputedEmbedder(std::unordered_map<std::string, EmbeddingVector> vectors, std::string tag)
    : vectors_(std::move(vectors)), tag_(std::move(tag)) {
    for (const auto& [id, v] : vectors_) {
        if (dimension_ == 0) dimension_ = v.dimension();
        if (v.dimension() != dimension_) {
            throw Error(ErrorCode::DimensionMismatch, "precomputed vector for " + id + " has dimension " +
                                                          std::to_string(v.dimension()) + ", expected " +
                                                          std::to_string(dimension_));
        }
    }
}

PrecomputedEmbedder PrecomputedEmbedder::load(const std::filesystem::path& path, std::string tag) {
    const std::string text = read_file(path);
    std::unordered_map<std::string, EmbeddingVector> vectors;
    std::istringstream lines(text);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(lines, line)) {
        ++line_no;
        std::istringstream fields(line);
        std::string id;
        if (!(fields >> id) || id.front() == '#') continue;
        std::vector<double> values;
        std::string tok;
        while (fields >> tok) {
            double v = 0.0;
            const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
            if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size()) {
                throw Error(ErrorCode::MalformedFile,
                            path.string() + ":" + std::to_string(line_no) + ": not a number '" + tok + "'");
            }
            values.push_back(v);
        }
        if (values.empty()) {
            throw Error(ErrorCode::MalformedFile, path.string() + ":" + std::to_string(line_no) + ": no values");
        }
        if (!vectors.emplace(id, EmbeddingVector(std::move(values))).second) {
            throw Error(ErrorCode::DuplicateId, path.string() + ":" + std::to_string(line_no) + ": " + id);
        }
    }
    if (tag.empty()) tag = "precomputed:" + path.filename().string() + ":" + sha256_hex(text).substr(0, 12);
    return PrecomputedEmbedder(std::move(vectors), std::move(tag));
}

std::vector<EmbeddingVector> PrecomputedEmbedder::embed_batch(std::span<const EmbedInput> inputs) {
    std::vector<EmbeddingVector> out;
    out.reserve(inputs.size());
    for (const auto& in : inputs) {
        auto it = vectors_.find(std::string(in.id));
        if (it == vectors_.end()) {
            throw Error(ErrorCode::ProviderFailure, "no precomputed vector for id " + std::string(in.id));
        }
        out.push_back(it->second);
    }
    return out;
}

RemoteEmbedder::RemoteEmbedder(RemoteEmbedderConfig config) : config_(std::move(config)) {
    if (config_.endpoint.empty()) throw Error(ErrorCode::InvalidConfig, "remote embedder needs an endpoint");
}

std::string RemoteEmbedder::tag() const { return "remote:" + config_.model + "@" + config_.endpoint; }

std::vector<EmbeddingVector> RemoteEmbedder::embed_batch(std::span<const EmbedInput> inputs) {
    nlohmann::json request;
    request["model"] = config_.model;
    request["input"] = nlohmann::json::array();
    for (const auto& in : inputs) request["input"].push_back(std::string(in.text));

    std::vector<std::pair<std::string, std::string>> headers;
    if (!config_.api_key.empty()) headers.emplace_back("Authorization", "Bearer " + config_.api_key);
    const net::Response resp = net::post_json(config_.endpoint, request.dump(), headers, config_.timeout_seconds);
    if (!resp.transport_error.empty()) {
        throw Error(ErrorCode::ProviderFailure, "embedding request failed: " + resp.transport_error);
    }
    if (resp.status != 200) {
        throw Error(ErrorCode::ProviderFailure,
                    "embedding endpoint returned HTTP " + std::to_string(resp.status) + ": " + resp.body.substr(0, 200));
    }
    std::vector<EmbeddingVector> out;
    try {
        const auto body = nlohmann::json::parse(resp.body);
        const auto& data = body.at("data");
        if (data.size() != inputs.size()) {
            throw Error(ErrorCode::ProviderFailure, "embedding endpoint returned " + std::to_string(data.size()) +
                                                        " vectors for " + std::to_string(inputs.size()) + " inputs");
        }
        for (const auto& item : data) out.emplace_back(item.at("embedding").get<std::vector<double>>());
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::ProviderFailure, std::string("malformed embedding response: ") + e.what());
    }
    return out;
}

EmbeddingIndex::EmbeddingIndex(std::vector<std::string> ids, std::vector<EmbeddingVector> vectors,
                               std::string provider_tag)
    : ids_(std::move(ids)), provider_tag_(std::move(provider_tag)) {
    if (ids_.size() != vectors.size()) throw Error(ErrorCode::InvalidArgument, "ids and vectors differ in length");
    if (ids_.empty()) throw Error(ErrorCode::EmptySet, "embedding index needs at least one entry");
    dimension_ = vectors.front().dimension();
    vectors_.reserve(vectors.size());
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        if (vectors[i].dimension() != dimension_) {
            throw Error(ErrorCode::DimensionMismatch, "vector for " + ids_[i] + " has dimension " +
                                                          std::to_string(vectors[i].dimension()));
        }
        if (!by_id_.emplace(ids_[i], i).second) throw Error(ErrorCode::DuplicateId, ids_[i]);
        vectors_.push_back(vectors[i].normalized());
    }
}

const EmbeddingVector* EmbeddingIndex::find(std::string_view id) const {
    auto it = by_id_.find(std::string(id));
    return it == by_id_.end() ? nullptr : &vectors_[it->second];
}

EmbeddingIndex EmbeddingIndex::subset(std::span<const std::string> ids) const {
    std::vector<std::string> out_ids;
    std::vector<EmbeddingVector> out_vecs;
    for (const auto& id : ids) {
        const EmbeddingVector* v = find(id);
        if (!v) throw Error(ErrorCode::UnknownId, "id not in index: " + id);
        out_ids.push_back(id);
        out_vecs.push_back(*v);
    }
    return EmbeddingIndex(std::move(out_ids), std::move(out_vecs), provider_tag_);
}

std::string EmbeddingIndex::to_text() const {
    std::ostringstream out;
    out << std::setprecision(17);
    for (std::size_t i = 0; i < ids_.size(); ++i) {
        out << ids_[i];
        for (double v : vectors_[i].values()) out << ' ' << v;
        out << '\n';
    }
    return out.str();
}

void EmbeddingIndex::save(const std::filesystem::path& path) const { write_file_atomic(path, to_text()); }

std::string_view truncate_utf8(std::string_view text, std::size_t max_bytes) {
    if (text.size() <= max_bytes) return text;
    std::size_t cut = max_bytes;
    // Back off continuation bytes (10xxxxxx) so the cut lands on a sequence start.
    while (cut > 0 && (static_cast<unsigned char>(text[cut]) & 0xC0) == 0x80) --cut;
    return text.substr(0, cut);
}

EmbeddingIndex embed_corpus(EmbeddingProvider& provider, const ExampleSet& set, const EmbedOptions& options) {
    if (set.empty()) throw Error(ErrorCode::EmptySet, "cannot embed an empty example set");
    const std::size_t batch = std::max<std::size_t>(1, options.batch_size);
    const std::size_t n_batches = (set.size() + batch - 1) / batch;

    std::vector<EmbedInput> inputs;
    inputs.reserve(set.size());
    for (const Example& ex : set) {
        std::string_view text = ex.dialogue;
        if (options.truncate_chars > 0) text = truncate_utf8(text, options.truncate_chars);
        inputs.push_back({ex.id, text});
    }

    std::vector<std::vector<EmbeddingVector>> results(n_batches);
    std::vector<std::optional<Error>> errors(n_batches);
    std::atomic<std::size_t> next{0};

    auto worker = [&] {
        for (std::size_t b = next.fetch_add(1); b < n_batches; b = next.fetch_add(1)) {
            const std::size_t begin = b * batch;
            const std::size_t count = std::min(batch, set.size() - begin);
            const std::span<const EmbedInput> chunk(inputs.data() + begin, count);
            try {
                auto vecs = provider.embed_batch(chunk);
                if (vecs.size() != count) {
                    throw Error(ErrorCode::ProviderFailure, "provider returned " + std::to_string(vecs.size()) +
                                                                " vectors for " + std::to_string(count) + " inputs");
                }
                results[b] = std::move(vecs);
            } catch (const std::exception& e) {
                errors[b] = Error(ErrorCode::ProviderFailure,
                                  "embedding failed for example " + std::string(chunk.front().id) + ": " + e.what());
            }
        }
    };

    const std::size_t threads = std::min(std::max<std::size_t>(1, options.max_in_flight), n_batches);
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(threads);
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    for (auto& err : errors) {
        if (err) throw *err;
    }

    std::vector<std::string> ids;
    std::vector<EmbeddingVector> vectors;
    ids.reserve(set.size());
    vectors.reserve(set.size());
    for (const Example& ex : set) ids.push_back(ex.id);
    for (auto& r : results) {
        for (auto& v : r) vectors.push_back(std::move(v));
    }
    return EmbeddingIndex(std::move(ids), std::move(vectors), provider.tag());
}

}  // namespace medsum
