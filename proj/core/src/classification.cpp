#include "medsum/classification.hpp"

#include <algorithm>
#include <cctype>
#include <unordered_set>

#include <json.hpp>

#include "medsum/csv.hpp"
#include "medsum/digest.hpp"
#include "medsum/error.hpp"

namespace medsum {

std::string_view to_string(PredictionSource source) {
    switch (source) {
        case PredictionSource::Llm: return "llm";
        case PredictionSource::Finetuned: return "finetuned";
        case PredictionSource::Ensemble: return "ensemble";
    }
    return "unknown";
}

namespace {

std::vector<std::string> words_of(std::string_view text) {
    std::vector<std::string> words;
    std::string cur;
    for (unsigned char c : text) {
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::toupper(c)));
        } else if (!cur.empty()) {
            words.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) words.push_back(std::move(cur));
    return words;
}

}  // namespace

SectionHeader parse_llm_label(std::string_view completion_text) {
    if (auto whole = parse_section_header(completion_text)) return *whole;
    const auto words = words_of(completion_text);
    // Labels span at most two words ("FAM/SOCHX", "OTHER_HISTORY").
    for (std::size_t i = 0; i < words.size(); ++i) {
        if (i + 1 < words.size()) {
            if (auto two = parse_section_header(words[i] + words[i + 1])) return *two;
        }
        if (auto one = parse_section_header(words[i])) return *one;
    }
    std::string excerpt(completion_text.substr(0, 80));
    throw Error(ErrorCode::UnparseableLabel, "no section header label in completion: '" + excerpt + "'");
}

SectionHeader ensemble_predict(const HeaderPrediction& llm, const HeaderPrediction& finetuned,
                               const EnsembleRule& rule) {
    if (llm.example_id != finetuned.example_id) {
        throw Error(ErrorCode::IdMismatch, llm.example_id + " vs " + finetuned.example_id);
    }
    return rule.override_labels.contains(finetuned.label) ? finetuned.label : llm.label;
}

std::vector<HeaderPrediction> parse_predictions(std::string_view text, PredictionSource source,
                                                std::string_view origin) {
    // Parse with a synthetic header so the first data row is not swallowed.
    const std::string framed = "example_id,label\n" + std::string(text);
    const csv::Table table = csv::parse(framed);
    std::vector<HeaderPrediction> out;
    std::unordered_set<std::string> seen;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        const std::size_t line = table.row_lines[r] - 1;
        if (r == 0 && !parse_section_header(row[1])) {
            std::string key;
            for (unsigned char c : row[1]) key.push_back(static_cast<char>(std::tolower(c)));
            if (key == "label") continue;
        }
        const auto label = parse_section_header(row[1]);
        if (!label) {
            throw Error(ErrorCode::InvalidHeader, std::string(origin) + " row " + std::to_string(line) +
                                                      ": unknown label '" + row[1] + "'");
        }
        if (!seen.insert(row[0]).second) {
            throw Error(ErrorCode::DuplicateId, std::string(origin) + " row " + std::to_string(line) +
                                                    ": duplicate example id '" + row[0] + "'");
        }
        out.push_back({row[0], *label, source});
    }
    return out;
}

std::vector<HeaderPrediction> load_finetuned_predictions(const std::filesystem::path& path) {
    return parse_predictions(read_file(path), PredictionSource::Finetuned, path.string());
}

AccuracyReport accuracy(const std::vector<HeaderPrediction>& predictions, const ExampleSet& gold) {
    AccuracyReport report;
    for (const auto& p : predictions) {
        const Example* ex = gold.find(p.example_id);
        if (!ex || !ex->header) throw Error(ErrorCode::UnknownId, "no gold header for " + p.example_id);
        const auto g = static_cast<std::size_t>(*ex->header);
        const auto q = static_cast<std::size_t>(p.label);
        ++report.confusion[g][q];
        ++report.gold_counts[g];
        if (g == q) ++report.correct;
    }
    report.total = predictions.size();
    report.accuracy = report.total ? static_cast<double>(report.correct) / static_cast<double>(report.total) : 0.0;
    return report;
}

std::string AccuracyReport::to_json() const {
    nlohmann::ordered_json j;
    j["accuracy"] = accuracy;
    j["correct"] = correct;
    j["total"] = total;
    j["abstained"] = abstained;
    nlohmann::ordered_json labels = nlohmann::ordered_json::array();
    for (SectionHeader h : all_section_headers()) labels.push_back(std::string(to_string(h)));
    j["labels"] = labels;
    nlohmann::ordered_json matrix = nlohmann::ordered_json::array();
    for (const auto& row : confusion) matrix.push_back(row);
    j["confusion"] = matrix;
    j["gold_counts"] = gold_counts;
    return j.dump(2);
}

}  // namespace medsum
