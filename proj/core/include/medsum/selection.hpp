#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "medsum/embedding.hpp"

namespace medsum {

enum class SelectionMethod { TopKSimilarity, Mmr };

std::string_view to_string(SelectionMethod method);
std::optional<SelectionMethod> parse_selection_method(std::string_view text);

struct ScoredId {
    std::string id;
    double score = 0.0;

    bool operator==(const ScoredId&) const = default;
};

struct SelectionResult {
    /// In selection order. For top-k the score is the cosine similarity to the
    /// query; for MMR it is the marginal-relevance value at the step the
    /// candidate was picked.
    std::vector<ScoredId> chosen;
    SelectionMethod method = SelectionMethod::TopKSimilarity;
    std::size_t k = 0;
    /// Set for MMR only.
    std::optional<double> lambda;
    std::optional<std::string> query_id;

    std::vector<std::string> ids() const;
};

using IdSet = std::set<std::string, std::less<>>;

/// The k candidates most cosine-similar to `query`, descending, ties broken by
/// ascending id. Throws InvalidK, EmptyCandidatePool, DimensionMismatch.
SelectionResult top_k_similar(const EmbeddingIndex& index, const EmbeddingVector& query, std::size_t k,
                              const IdSet& exclude = {});

inline constexpr double kDefaultMmrLambda = 0.5;

/// Greedy maximal marginal relevance. Each step picks the remaining candidate
/// maximizing  lambda * sim(d, query) - (1 - lambda) * max_{s in chosen} sim(d, s)
/// (the redundancy term is 0 while nothing is chosen), ties broken by ascending id.
/// Throws InvalidK, InvalidLambda, EmptyCandidatePool, DimensionMismatch.
SelectionResult mmr_select(const EmbeddingIndex& index, const EmbeddingVector& query, std::size_t k, double lambda,
                           const IdSet& exclude = {});

}  // namespace medsum
