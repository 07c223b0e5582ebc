#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "medsum/corpus.hpp"

namespace medsum {

/// Dense real vector with finite entries.
class EmbeddingVector {
  public:
    EmbeddingVector() = default;
    /// Throws NonFiniteValue on NaN/inf and InvalidArgument when empty.
    explicit EmbeddingVector(std::vector<double> values);

    std::size_t dimension() const noexcept { return values_.size(); }
    std::span<const double> values() const noexcept { return values_; }
    double operator[](std::size_t i) const { return values_[i]; }

    double norm() const;
    /// Unit-length copy. Throws ZeroVector.
    EmbeddingVector normalized() const;

    bool operator==(const EmbeddingVector&) const = default;

  private:
    std::vector<double> values_;
};

/// Sequential left-to-right dot product (fixed summation order).
double dot(std::span<const double> a, std::span<const double> b);

/// dot(a,b) / (|a||b|), clamped to [-1, 1]. Throws DimensionMismatch, ZeroVector.
double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

/// Signed feature hashing of whitespace tokens into `dimension` buckets,
/// normalized to unit length. Tokens are hashed with 64-bit FNV-1a mixed
/// with `seed`; the low bits pick the bucket, the top bit the sign.
/// Throws EmptyText when the text has no tokens, InvalidArgument when
/// dimension < 2, ZeroVector when colliding tokens cancel exactly.
EmbeddingVector hash_embed(std::string_view text, std::size_t dimension, std::uint64_t seed = 0);

/// One text to embed, with the id of the example it came from.
struct EmbedInput {
    std::string_view id;
    std::string_view text;
};

/// Maps texts to fixed-dimension vectors. Implementations must be
/// deterministic for identical inputs within one tag().
class EmbeddingProvider {
  public:
    virtual ~EmbeddingProvider() = default;
    /// Identifies the embedder and its version; recorded in every index and report.
    virtual std::string tag() const = 0;
    virtual std::vector<EmbeddingVector> embed_batch(std::span<const EmbedInput> inputs) = 0;
};

class HashEmbedder final : public EmbeddingProvider {
  public:
    explicit HashEmbedder(std::size_t dimension = 256, std::uint64_t seed = 0);
    std::string tag() const override;
    std::vector<EmbeddingVector> embed_batch(std::span<const EmbedInput> inputs) override;

  private:
    std::size_t dimension_;
    std::uint64_t seed_;
};

/// Vectors read from a file with one record per line: an id followed by
/// `dimension` whitespace-separated reals. Lookup is by example id.
class PrecomputedEmbedder final : public EmbeddingProvider {
  public:
    PrecomputedEmbedder(std::unordered_map<std::string, EmbeddingVector> vectors, std::string tag);
    static PrecomputedEmbedder load(const std::filesystem::path& path, std::string tag = {});

    std::string tag() const override { return tag_; }
    std::vector<EmbeddingVector> embed_batch(std::span<const EmbedInput> inputs) override;
    std::size_t dimension() const noexcept { return dimension_; }
    std::size_t size() const noexcept { return vectors_.size(); }

  private:
    std::unordered_map<std::string, EmbeddingVector> vectors_;
    std::string tag_;
    std::size_t dimension_ = 0;
};

struct RemoteEmbedderConfig {
    /// Full URL, e.g. "https://api.openai.com/v1/embeddings".
    std::string endpoint;
    std::string model;
    /// Sent as "Authorization: Bearer <token>" when non-empty.
    std::string api_key;
    int timeout_seconds = 60;
};

/// JSON over HTTP: POST {model, input: [texts]} and read {data: [{embedding: [...]}]}.
class RemoteEmbedder final : public EmbeddingProvider {
  public:
    explicit RemoteEmbedder(RemoteEmbedderConfig config);
    std::string tag() const override;
    std::vector<EmbeddingVector> embed_batch(std::span<const EmbedInput> inputs) override;

  private:
    RemoteEmbedderConfig config_;
};

/// Unit-normalized vectors keyed by example id, in corpus order.
class EmbeddingIndex {
  public:
    EmbeddingIndex() = default;
    /// Normalizes every vector. Throws DimensionMismatch, DuplicateId, EmptySet.
    EmbeddingIndex(std::vector<std::string> ids, std::vector<EmbeddingVector> vectors, std::string provider_tag);

    std::size_t size() const noexcept { return ids_.size(); }
    bool empty() const noexcept { return ids_.empty(); }
    std::size_t dimension() const noexcept { return dimension_; }
    const std::string& provider_tag() const noexcept { return provider_tag_; }
    const std::vector<std::string>& ids() const noexcept { return ids_; }
    const EmbeddingVector& vector(std::size_t i) const { return vectors_[i]; }
    /// nullptr when absent.
    const EmbeddingVector* find(std::string_view id) const;

    /// Sub-index over the given ids, in the order given.
    EmbeddingIndex subset(std::span<const std::string> ids) const;

    /// Precomputed-vector file format; doubles printed with round-trip precision.
    std::string to_text() const;
    void save(const std::filesystem::path& path) const;

    bool operator==(const EmbeddingIndex& other) const {
        return ids_ == other.ids_ && vectors_ == other.vectors_ && provider_tag_ == other.provider_tag_;
    }

  private:
    std::vector<std::string> ids_;
    std::vector<EmbeddingVector> vectors_;
    std::unordered_map<std::string, std::size_t> by_id_;
    std::size_t dimension_ = 0;
    std::string provider_tag_;
};

struct EmbedOptions {
    std::size_t batch_size = 32;
    /// Concurrent embed_batch calls; the provider must be thread-safe when > 1.
    std::size_t max_in_flight = 1;
    /// Truncate each dialogue to this many bytes (at a UTF-8 boundary) before
    /// embedding. 0 disables truncation.
    std::size_t truncate_chars = 0;
};

/// Embeds every dialogue in `set`. Failures surface as ProviderFailure naming
/// the first example id of the failing batch.
EmbeddingIndex embed_corpus(EmbeddingProvider& provider, const ExampleSet& set, const EmbedOptions& options = {});

/// Longest prefix of at most `max_bytes` bytes that does not split a UTF-8 sequence.
std::string_view truncate_utf8(std::string_view text, std::size_t max_bytes);

}  // namespace medsum
