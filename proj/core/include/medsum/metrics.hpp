#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "medsum/corpus.hpp"

namespace medsum {

using TokenSequence = std::vector<std::string>;

/// Lowercases ASCII letters and splits on every run of characters that are
/// not ASCII letters or digits. Bytes >= 0x80 count as word characters, so
/// UTF-8 words stay intact.
TokenSequence tokenize(std::string_view text);

enum class RougeVariant { R1, R2, RL };

std::string_view to_string(RougeVariant variant);

struct RougeScore {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    RougeVariant variant = RougeVariant::R1;
};

/// Clipped n-gram overlap for n in {1, 2}. Both sequences empty scores 1;
/// otherwise a side with no n-grams scores 0. Throws InvalidArgument for other n.
RougeScore rouge_n(const TokenSequence& candidate, const TokenSequence& reference, int n);

/// Longest-common-subsequence ROUGE with the same empty-side convention.
RougeScore rouge_l(const TokenSequence& candidate, const TokenSequence& reference);

std::size_t lcs_length(const TokenSequence& a, const TokenSequence& b);

struct Fragment {
    std::size_t article_start = 0;
    std::size_t summary_start = 0;
    std::size_t length = 0;

    bool operator==(const Fragment&) const = default;
};

/// Greedy left-to-right pass over the summary: at each position take the
/// longest token match starting anywhere in the article (earliest article
/// position on ties) and jump past it, or advance by one when nothing matches.
/// Fragments are disjoint in the summary.
std::vector<Fragment> extractive_fragments(const TokenSequence& article, const TokenSequence& summary);

struct ExtractivenessScores {
    double coverage = 0.0;
    double density = 0.0;
    double compression = 0.0;
};

/// coverage = sum(len) / |summary|, density = sum(len^2) / |summary|,
/// compression = |article| / |summary|. Throws EmptySummary, EmptyArticle.
ExtractivenessScores extractiveness(const TokenSequence& article, const TokenSequence& summary);

struct HistogramBucket {
    long long lower = 0;  // inclusive
    long long upper = 0;  // exclusive
    std::size_t count = 0;
};

struct LengthDiffStats {
    std::vector<long long> differences;
    std::vector<HistogramBucket> histogram;
    double mean = 0.0;
    double median = 0.0;
    long long min = 0;
    long long max = 0;
};

/// Statistics of dialogue_len - summary_len over (dialogue, summary) token
/// counts. Buckets are [w*i, w*(i+1)) covering min..max contiguously.
/// Throws EmptySet, InvalidArgument when bucket_width < 1.
LengthDiffStats length_diff_stats(const std::vector<std::pair<std::size_t, std::size_t>>& lengths,
                                  long long bucket_width = 50);

struct ExampleMetrics {
    std::string id;
    RougeScore rouge1;
    RougeScore rouge2;
    RougeScore rougeL;
    /// Extractiveness of the generation against the dialogue; absent when the
    /// generation has no tokens.
    std::optional<ExtractivenessScores> generated;
    /// Extractiveness of the reference against the dialogue.
    std::optional<ExtractivenessScores> reference;
    std::size_t dialogue_tokens = 0;
    std::size_t reference_tokens = 0;
    std::size_t generated_tokens = 0;
    /// Externally computed scores merged later (e.g. "bertscore_f1", "bleurt").
    std::map<std::string, double> external;
};

struct MetricReport {
    std::vector<ExampleMetrics> rows;
    /// Macro averages keyed by metric name (see metric_names()).
    std::map<std::string, double> macro;
    std::vector<std::string> missing;
    std::size_t evaluated = 0;
    std::string averaging = "macro";

    /// Stable key order, round-trip double formatting.
    std::string to_json() const;
    /// One row per example.
    std::string to_csv() const;
    /// Aligned plain-text table of the macro scores.
    std::string to_text() const;
};

/// Names of the aggregated metrics in report order.
const std::vector<std::string>& metric_names();

/// Scores every example that has a non-empty generation; examples without one
/// are listed in `missing` and excluded from the averages. Throws UnknownId
/// when a generation names an id absent from `examples`.
MetricReport corpus_report(const ExampleSet& examples, const std::map<std::string, std::string>& generated);

/// Adds externally computed per-example scores and recomputes their macro
/// averages. Throws UnknownId.
void merge_external_metrics(MetricReport& report,
                            const std::map<std::string, std::map<std::string, double>>& external);

}  // namespace medsum
