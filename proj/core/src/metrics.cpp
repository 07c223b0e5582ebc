#include "medsum/metrics.hpp"

#include <algorithm>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "medsum/csv.hpp"
#include "medsum/error.hpp"

namespace medsum {

TokenSequence tokenize(std::string_view text) {
    TokenSequence tokens;
    std::string cur;
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        const bool word = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
        if (word) {
            cur.push_back((c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : ch);
        } else if (!cur.empty()) {
            tokens.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
    return tokens;
}

std::string_view to_string(RougeVariant variant) {
    switch (variant) {
        case RougeVariant::R1: return "rouge1";
        case RougeVariant::R2: return "rouge2";
        case RougeVariant::RL: return "rougeL";
    }
    return "rouge";
}

namespace {

RougeScore from_counts(double matches, double candidate_total, double reference_total, RougeVariant variant) {
    RougeScore s;
    s.variant = variant;
    if (candidate_total == 0.0 || reference_total == 0.0 || matches == 0.0) return s;
    s.precision = matches / candidate_total;
    s.recall = matches / reference_total;
    s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
    return s;
}

RougeScore perfect(RougeVariant variant) { return RougeScore{1.0, 1.0, 1.0, variant}; }

std::map<std::vector<std::string_view>, std::size_t> ngram_counts(const TokenSequence& tokens, std::size_t n) {
    std::map<std::vector<std::string_view>, std::size_t> counts;
    if (tokens.size() < n) return counts;
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
        std::vector<std::string_view> gram(tokens.begin() + static_cast<std::ptrdiff_t>(i),
                                           tokens.begin() + static_cast<std::ptrdiff_t>(i + n));
        ++counts[gram];
    }
    return counts;
}

}  // namespace

RougeScore rouge_n(const TokenSequence& candidate, const TokenSequence& reference, int n) {
    if (n != 1 && n != 2) throw Error(ErrorCode::InvalidArgument, "ROUGE-N supports n = 1 or 2");
    const RougeVariant variant = n == 1 ? RougeVariant::R1 : RougeVariant::R2;
    if (candidate.empty() && reference.empty()) return perfect(variant);
    const auto nn = static_cast<std::size_t>(n);
    const auto cand = ngram_counts(candidate, nn);
    const auto ref = ngram_counts(reference, nn);
    std::size_t matches = 0;
    for (const auto& [gram, count] : cand) {
        auto it = ref.find(gram);
        if (it != ref.end()) matches += std::min(count, it->second);
    }
    const double cand_total = candidate.size() >= nn ? static_cast<double>(candidate.size() - nn + 1) : 0.0;
    const double ref_total = reference.size() >= nn ? static_cast<double>(reference.size() - nn + 1) : 0.0;
    return from_counts(static_cast<double>(matches), cand_total, ref_total, variant);
}

std::size_t lcs_length(const TokenSequence& a, const TokenSequence& b) {
    if (a.empty() || b.empty()) return 0;
    std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

RougeScore rouge_l(const TokenSequence& candidate, const TokenSequence& reference) {
    if (candidate.empty() && reference.empty()) return perfect(RougeVariant::RL);
    return from_counts(static_cast<double>(lcs_length(candidate, reference)), static_cast<double>(candidate.size()),
                       static_cast<double>(reference.size()), RougeVariant::RL);
}

std::vector<Fragment> extractive_fragments(const TokenSequence& article, const TokenSequence& summary) {
    // Intern tokens so the inner loops compare integers.
    std::unordered_map<std::string_view, int> ids;
    auto intern = [&](const TokenSequence& seq) {
        std::vector<int> out;
        out.reserve(seq.size());
        for (const auto& t : seq) out.push_back(ids.emplace(t, static_cast<int>(ids.size())).first->second);
        return out;
    };
    const std::vector<int> a = intern(article);
    const std::vector<int> s = intern(summary);

    std::vector<Fragment> fragments;
    std::size_t i = 0;
    while (i < s.size()) {
        std::size_t best_len = 0;
        std::size_t best_start = 0;
        for (std::size_t j = 0; j < a.size(); ++j) {
            if (a[j] != s[i]) continue;
            std::size_t len = 0;
            while (i + len < s.size() && j + len < a.size() && s[i + len] == a[j + len]) ++len;
            if (len > best_len) {
                best_len = len;
                best_start = j;
            }
        }
        if (best_len > 0) {
            fragments.push_back({best_start, i, best_len});
            i += best_len;
        } else {
            ++i;
        }
    }
    return fragments;
}

ExtractivenessScores extractiveness(const TokenSequence& article, const TokenSequence& summary) {
    if (summary.empty()) throw Error(ErrorCode::EmptySummary, "extractiveness of an empty summary");
    if (article.empty()) throw Error(ErrorCode::EmptyArticle, "compression against an empty article");
    double sum = 0.0;
    double sum_sq = 0.0;
    for (const auto& f : extractive_fragments(article, summary)) {
        const auto len = static_cast<double>(f.length);
        sum += len;
        sum_sq += len * len;
    }
    const auto n = static_cast<double>(summary.size());
    return {sum / n, sum_sq / n, static_cast<double>(article.size()) / n};
}

LengthDiffStats length_diff_stats(const std::vector<std::pair<std::size_t, std::size_t>>& lengths,
                                  long long bucket_width) {
    if (lengths.empty()) throw Error(ErrorCode::EmptySet, "length statistics need at least one pair");
    if (bucket_width < 1) throw Error(ErrorCode::InvalidArgument, "bucket width must be >= 1");
    LengthDiffStats st;
    st.differences.reserve(lengths.size());
    for (const auto& [dialogue, summary] : lengths) {
        st.differences.push_back(static_cast<long long>(dialogue) - static_cast<long long>(summary));
    }
    std::vector<long long> sorted = st.differences;
    std::sort(sorted.begin(), sorted.end());
    st.min = sorted.front();
    st.max = sorted.back();
    const std::size_t n = sorted.size();
    st.median = n % 2 ? static_cast<double>(sorted[n / 2])
                      : (static_cast<double>(sorted[n / 2 - 1]) + static_cast<double>(sorted[n / 2])) / 2.0;
    st.mean = static_cast<double>(std::accumulate(sorted.begin(), sorted.end(), 0LL)) / static_cast<double>(n);

    auto bucket_of = [bucket_width](long long d) {
        // floor division, also for negative differences
        return d >= 0 ? d / bucket_width : -((-d + bucket_width - 1) / bucket_width);
    };
    const long long first = bucket_of(st.min);
    const long long last = bucket_of(st.max);
    for (long long b = first; b <= last; ++b) st.histogram.push_back({b * bucket_width, (b + 1) * bucket_width, 0});
    for (long long d : st.differences) ++st.histogram[static_cast<std::size_t>(bucket_of(d) - first)].count;
    return st;
}

const std::vector<std::string>& metric_names() {
    static const std::vector<std::string> names = {
        "rouge1_precision", "rouge1_recall",  "rouge1_f1",          "rouge2_precision",   "rouge2_recall",
        "rouge2_f1",        "rougeL_precision", "rougeL_recall",    "rougeL_f1",          "coverage",
        "density",          "compression",    "reference_coverage", "reference_density",  "reference_compression",
        "dialogue_tokens",  "reference_tokens", "generated_tokens",
    };
    return names;
}

namespace {

bool is_blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

// Metric values of one row by name; absent entries are skipped in averages.
std::map<std::string, double> row_values(const ExampleMetrics& r) {
    std::map<std::string, double> v;
    auto add_rouge = [&](const std::string& prefix, const RougeScore& s) {
        v[prefix + "_precision"] = s.precision;
        v[prefix + "_recall"] = s.recall;
        v[prefix + "_f1"] = s.f1;
    };
    add_rouge("rouge1", r.rouge1);
    add_rouge("rouge2", r.rouge2);
    add_rouge("rougeL", r.rougeL);
    if (r.generated) {
        v["coverage"] = r.generated->coverage;
        v["density"] = r.generated->density;
        v["compression"] = r.generated->compression;
    }
    if (r.reference) {
        v["reference_coverage"] = r.reference->coverage;
        v["reference_density"] = r.reference->density;
        v["reference_compression"] = r.reference->compression;
    }
    v["dialogue_tokens"] = static_cast<double>(r.dialogue_tokens);
    v["reference_tokens"] = static_cast<double>(r.reference_tokens);
    v["generated_tokens"] = static_cast<double>(r.generated_tokens);
    for (const auto& [k, x] : r.external) v[k] = x;
    return v;
}

std::map<std::string, double> macro_average(const std::vector<ExampleMetrics>& rows) {
    std::map<std::string, std::pair<double, std::size_t>> acc;
    for (const auto& r : rows) {
        for (const auto& [k, x] : row_values(r)) {
            auto& slot = acc[k];
            slot.first += x;
            ++slot.second;
        }
    }
    std::map<std::string, double> out;
    for (const auto& [k, sc] : acc) out[k] = sc.first / static_cast<double>(sc.second);
    return out;
}

std::optional<ExtractivenessScores> maybe_extractiveness(const TokenSequence& article, const TokenSequence& summary) {
    if (article.empty() || summary.empty()) return std::nullopt;
    return extractiveness(article, summary);
}

}  // namespace

MetricReport corpus_report(const ExampleSet& examples, const std::map<std::string, std::string>& generated) {
    for (const auto& [id, text] : generated) {
        if (!examples.find(id)) throw Error(ErrorCode::UnknownId, "generation for unknown example id " + id);
    }
    MetricReport report;
    for (const Example& ex : examples) {
        auto it = generated.find(ex.id);
        if (it == generated.end() || is_blank(it->second)) {
            report.missing.push_back(ex.id);
            continue;
        }
        const TokenSequence dialogue = tokenize(ex.dialogue);
        const TokenSequence reference = tokenize(ex.summary);
        const TokenSequence candidate = tokenize(it->second);
        ExampleMetrics m;
        m.id = ex.id;
        m.rouge1 = rouge_n(candidate, reference, 1);
        m.rouge2 = rouge_n(candidate, reference, 2);
        m.rougeL = rouge_l(candidate, reference);
        m.generated = maybe_extractiveness(dialogue, candidate);
        m.reference = maybe_extractiveness(dialogue, reference);
        m.dialogue_tokens = dialogue.size();
        m.reference_tokens = reference.size();
        m.generated_tokens = candidate.size();
        report.rows.push_back(std::move(m));
    }
    report.evaluated = report.rows.size();
    report.macro = macro_average(report.rows);
    return report;
}

void merge_external_metrics(MetricReport& report,
                            const std::map<std::string, std::map<std::string, double>>& external) {
    std::unordered_map<std::string, ExampleMetrics*> by_id;
    for (auto& r : report.rows) by_id[r.id] = &r;
    for (const auto& [id, values] : external) {
        auto it = by_id.find(id);
        if (it == by_id.end()) throw Error(ErrorCode::UnknownId, "external metrics for unscored id " + id);
        for (const auto& [k, x] : values) it->second->external[k] = x;
    }
    report.macro = macro_average(report.rows);
}

namespace {

using ojson = nlohmann::ordered_json;

ojson rouge_json(const RougeScore& s) { return ojson{{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}}; }

ojson extractive_json(const std::optional<ExtractivenessScores>& e) {
    if (!e) return nullptr;
    return ojson{{"coverage", e->coverage}, {"density", e->density}, {"compression", e->compression}};
}

std::vector<std::string> ordered_macro_keys(const std::map<std::string, double>& macro) {
    std::vector<std::string> keys;
    for (const auto& name : metric_names()) {
        if (macro.contains(name)) keys.push_back(name);
    }
    for (const auto& [k, v] : macro) {
        if (std::find(keys.begin(), keys.end(), k) == keys.end()) keys.push_back(k);
    }
    return keys;
}

}  // namespace

std::string MetricReport::to_json() const {
    ojson j;
    j["averaging"] = averaging;
    j["evaluated"] = evaluated;
    j["missing_count"] = missing.size();
    j["missing"] = missing;
    ojson m = ojson::object();
    for (const auto& k : ordered_macro_keys(macro)) m[k] = macro.at(k);
    j["macro"] = m;
    // Reserved for externally computed scores; null until merged.
    j["bertscore_f1"] = macro.contains("bertscore_f1") ? ojson(macro.at("bertscore_f1")) : ojson(nullptr);
    j["bleurt"] = macro.contains("bleurt") ? ojson(macro.at("bleurt")) : ojson(nullptr);
    ojson rows_json = ojson::array();
    for (const auto& r : rows) {
        ojson row;
        row["id"] = r.id;
        row["rouge1"] = rouge_json(r.rouge1);
        row["rouge2"] = rouge_json(r.rouge2);
        row["rougeL"] = rouge_json(r.rougeL);
        row["generated_extractiveness"] = extractive_json(r.generated);
        row["reference_extractiveness"] = extractive_json(r.reference);
        row["dialogue_tokens"] = r.dialogue_tokens;
        row["reference_tokens"] = r.reference_tokens;
        row["generated_tokens"] = r.generated_tokens;
        ojson ext = ojson::object();
        for (const auto& [k, x] : r.external) ext[k] = x;
        row["external"] = ext;
        rows_json.push_back(std::move(row));
    }
    j["examples"] = rows_json;
    return j.dump(2) + "\n";
}

std::string MetricReport::to_csv() const {
    std::vector<std::string> columns;
    for (const auto& r : rows) {
        for (const auto& [k, v] : r.external) {
            if (std::find(columns.begin(), columns.end(), k) == columns.end()) columns.push_back(k);
        }
    }
    csv::Row header{"id"};
    header.insert(header.end(), metric_names().begin(), metric_names().end());
    header.insert(header.end(), columns.begin(), columns.end());
    std::vector<csv::Row> out_rows;
    for (const auto& r : rows) {
        const auto values = row_values(r);
        csv::Row row{r.id};
        for (std::size_t c = 1; c < header.size(); ++c) {
            auto it = values.find(header[c]);
            if (it == values.end()) {
                row.emplace_back();
            } else {
                std::ostringstream ss;
                ss << std::setprecision(17) << it->second;
                row.push_back(ss.str());
            }
        }
        out_rows.push_back(std::move(row));
    }
    return csv::render(header, out_rows);
}

std::string MetricReport::to_text() const {
    std::ostringstream out;
    const auto keys = ordered_macro_keys(macro);
    std::size_t width = 6;
    for (const auto& k : keys) width = std::max(width, k.size());
    out << std::left << std::setw(static_cast<int>(width)) << "metric" << "  " << "value" << '\n';
    out << std::string(width, '-') << "  " << std::string(10, '-') << '\n';
    for (const auto& k : keys) {
        out << std::left << std::setw(static_cast<int>(width)) << k << "  " << std::fixed << std::setprecision(4)
            << macro.at(k) << '\n';
    }
    out << "evaluated: " << evaluated << "  missing: " << missing.size() << '\n';
    return out.str();
}

}  // namespace medsum
