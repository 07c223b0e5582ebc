#include "medsum/selection.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>

#include "medsum/error.hpp"

namespace medsum {

std::string_view to_string(SelectionMethod method) {
    return method == SelectionMethod::Mmr ? "mmr" : "similarity";
}

std::optional<SelectionMethod> parse_selection_method(std::string_view text) {
    std::string key;
    for (unsigned char c : text) {
        if (std::isalnum(c)) key.push_back(static_cast<char>(std::tolower(c)));
    }
    if (key == "mmr") return SelectionMethod::Mmr;
    if (key == "similarity" || key == "semantic" || key == "topk" || key == "topksimilarity") {
        return SelectionMethod::TopKSimilarity;
    }
    return std::nullopt;
}

std::vector<std::string> SelectionResult::ids() const {
    std::vector<std::string> out;
    out.reserve(chosen.size());
    for (const auto& c : chosen) out.push_back(c.id);
    return out;
}

namespace {

struct Candidate {
    std::size_t index;
    double relevance;
};

// Validates inputs and returns the unit query plus the non-excluded candidates
// with their query similarity.
std::vector<Candidate> candidate_pool(const EmbeddingIndex& index, const EmbeddingVector& query, std::size_t k,
                                      const IdSet& exclude, EmbeddingVector& unit_query) {
    if (k == 0) throw Error(ErrorCode::InvalidK, "k must be positive");
    if (!index.empty() && query.dimension() != index.dimension()) {
        throw Error(ErrorCode::DimensionMismatch, "query dimension " + std::to_string(query.dimension()) +
                                                      " vs index dimension " + std::to_string(index.dimension()));
    }
    std::vector<Candidate> pool;
    pool.reserve(index.size());
    for (std::size_t i = 0; i < index.size(); ++i) {
        if (!exclude.contains(index.ids()[i])) pool.push_back({i, 0.0});
    }
    if (pool.empty()) throw Error(ErrorCode::EmptyCandidatePool, "no candidates left after exclusion");
    unit_query = query.normalized();
    for (auto& c : pool) c.relevance = dot(index.vector(c.index).values(), unit_query.values());
    return pool;
}

}  // namespace

SelectionResult top_k_similar(const EmbeddingIndex& index, const EmbeddingVector& query, std::size_t k,
                              const IdSet& exclude) {
    EmbeddingVector unit_query;
    std::vector<Candidate> pool = candidate_pool(index, query, k, exclude, unit_query);
    const std::size_t take = std::min(k, pool.size());
    const auto& ids = index.ids();
    std::partial_sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(take), pool.end(),
                      [&](const Candidate& a, const Candidate& b) {
                          if (a.relevance != b.relevance) return a.relevance > b.relevance;
                          return ids[a.index] < ids[b.index];
                      });
    SelectionResult result;
    result.method = SelectionMethod::TopKSimilarity;
    result.k = k;
    result.chosen.reserve(take);
    for (std::size_t i = 0; i < take; ++i) result.chosen.push_back({ids[pool[i].index], pool[i].relevance});
    return result;
}

SelectionResult mmr_select(const EmbeddingIndex& index, const EmbeddingVector& query, std::size_t k, double lambda,
                           const IdSet& exclude) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw Error(ErrorCode::InvalidLambda, "lambda must lie in [0, 1]");
    EmbeddingVector unit_query;
    std::vector<Candidate> pool = candidate_pool(index, query, k, exclude, unit_query);
    const std::size_t take = std::min(k, pool.size());
    const auto& ids = index.ids();

    // Highest similarity of each remaining candidate to anything chosen so far.
    std::vector<double> redundancy(pool.size(), 0.0);
    std::vector<bool> taken(pool.size(), false);

    SelectionResult result;
    result.method = SelectionMethod::Mmr;
    result.k = k;
    result.lambda = lambda;
    result.chosen.reserve(take);

    for (std::size_t step = 0; step < take; ++step) {
        std::size_t best = pool.size();
        double best_score = -std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < pool.size(); ++c) {
            if (taken[c]) continue;
            const double red = step == 0 ? 0.0 : redundancy[c];
            const double score = lambda * pool[c].relevance - (1.0 - lambda) * red;
            if (best == pool.size() || score > best_score ||
                (score == best_score && ids[pool[c].index] < ids[pool[best].index])) {
                best = c;
                best_score = score;
            }
        }
        taken[best] = true;
        result.chosen.push_back({ids[pool[best].index], best_score});

        const auto chosen_vec = index.vector(pool[best].index).values();
        for (std::size_t c = 0; c < pool.size(); ++c) {
            if (taken[c]) continue;
            const double sim = dot(index.vector(pool[c].index).values(), chosen_vec);
            redundancy[c] = step == 0 ? sim : std::max(redundancy[c], sim);
        }
    }
    return result;
}

}  // namespace medsum
