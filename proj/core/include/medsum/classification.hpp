#pragma once

#include <array>
#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "medsum/corpus.hpp"

namespace medsum {

enum class PredictionSource { Llm, Finetuned, Ensemble };

std::string_view to_string(PredictionSource source);

struct HeaderPrediction {
    std::string example_id;
    SectionHeader label = SectionHeader::Genhx;
    PredictionSource source = PredictionSource::Llm;

    bool operator==(const HeaderPrediction&) const = default;
};

/// Labels for which the fine-tuned classifier's prediction overrides the LLM's.
struct EnsembleRule {
    std::set<SectionHeader> override_labels{SectionHeader::Ros, SectionHeader::Genhx, SectionHeader::CC};
};

/// First header label found in an LLM completion. The whole completion is
/// tried first (after dropping case and punctuation); otherwise the text is
/// scanned word by word, also joining adjacent words so that "FAM/SOCHX" or
/// "Other history" match. Throws UnparseableLabel.
SectionHeader parse_llm_label(std::string_view completion_text);

/// finetuned.label when it is in rule.override_labels, llm.label otherwise.
/// Throws IdMismatch.
SectionHeader ensemble_predict(const HeaderPrediction& llm, const HeaderPrediction& finetuned,
                               const EnsembleRule& rule = {});

/// Two-column CSV (example_id, label). A first row whose label column reads
/// "label" is treated as a header. Throws InvalidHeader (with row number),
/// DuplicateId, MalformedFile.
std::vector<HeaderPrediction> load_finetuned_predictions(const std::filesystem::path& path);
std::vector<HeaderPrediction> parse_predictions(std::string_view text, PredictionSource source,
                                                std::string_view origin = "<memory>");

using ConfusionMatrix = std::array<std::array<std::size_t, kSectionHeaderCount>, kSectionHeaderCount>;

struct AccuracyReport {
    double accuracy = 0.0;
    std::size_t correct = 0;
    /// Scored predictions; confusion and gold_counts cover exactly these.
    std::size_t total = 0;
    /// Gold examples left without any prediction. Callers that track them fold
    /// them into `accuracy` as errors; accuracy() itself never sets this.
    std::size_t abstained = 0;
    /// confusion[gold][predicted]
    ConfusionMatrix confusion{};
    std::array<std::size_t, kSectionHeaderCount> gold_counts{};

    std::string to_json() const;
};

/// Exact-match accuracy of predictions against gold headers. An empty
/// prediction list scores 0. Throws UnknownId.
AccuracyReport accuracy(const std::vector<HeaderPrediction>& predictions, const ExampleSet& gold);

}  // namespace medsum
