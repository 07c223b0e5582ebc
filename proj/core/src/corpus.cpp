#include "medsum/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <random>

#include "medsum/csv.hpp"
#include "medsum/digest.hpp"
#include "medsum/error.hpp"

namespace medsum {

namespace {

std::string normalize_label(std::string_view text) {
    std::string out;
    for (unsigned char c : text) {
        if (std::isalnum(c)) out.push_back(static_cast<char>(std::toupper(c)));
    }
    return out;
}

bool is_blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

constexpr std::array<std::string_view, kSectionHeaderCount> kHeaderNames = {
    "FAM/SOCHX", "GENHX", "PASTMEDICALHX", "CC",     "PASTSURGICAL", "ALLERGY",    "GYNHX",
    "OTHER_HISTORY", "IMMUNIZATIONS", "MEDICATIONS", "ROS", "EXAM", "IMAGING", "PROCEDURES",
    "LABS", "ASSESSMENT", "DIAGNOSIS", "PLAN", "EDCOURSE", "DISPOSITION",
};

constexpr std::array<std::string_view, kMajorSectionCount> kMajorNames = {
    "HISTORY OF PRESENT ILLNESS", "PHYSICAL EXAM", "RESULTS", "ASSESSMENT AND PLAN"};

constexpr std::array<std::string_view, kMajorSectionCount> kMajorSlugs = {
    "history_of_present_illness", "physical_exam", "results", "assessment_and_plan"};

}  // namespace

const std::array<SectionHeader, kSectionHeaderCount>& all_section_headers() {
    static const auto headers = [] {
        std::array<SectionHeader, kSectionHeaderCount> a{};
        for (std::size_t i = 0; i < a.size(); ++i) a[i] = static_cast<SectionHeader>(i);
        return a;
    }();
    return headers;
}

std::string_view to_string(SectionHeader header) { return kHeaderNames.at(static_cast<std::size_t>(header)); }

std::optional<SectionHeader> parse_section_header(std::string_view text) {
    const std::string key = normalize_label(text);
    if (key.empty()) return std::nullopt;
    for (std::size_t i = 0; i < kHeaderNames.size(); ++i) {
        if (normalize_label(kHeaderNames[i]) == key) return static_cast<SectionHeader>(i);
    }
    return std::nullopt;
}

const std::array<MajorSection, kMajorSectionCount>& all_major_sections() {
    static const std::array<MajorSection, kMajorSectionCount> sections = {
        MajorSection::HistoryOfPresentIllness, MajorSection::PhysicalExam, MajorSection::Results,
        MajorSection::AssessmentAndPlan};
    return sections;
}

std::string_view to_string(MajorSection section) { return kMajorNames.at(static_cast<std::size_t>(section)); }

std::string_view slug(MajorSection section) { return kMajorSlugs.at(static_cast<std::size_t>(section)); }

std::optional<MajorSection> parse_major_section(std::string_view text) {
    const std::string key = normalize_label(text);
    for (std::size_t i = 0; i < kMajorNames.size(); ++i) {
        if (normalize_label(kMajorNames[i]) == key) return static_cast<MajorSection>(i);
    }
    // Common abbreviations.
    if (key == "HPI") return MajorSection::HistoryOfPresentIllness;
    if (key == "AP") return MajorSection::AssessmentAndPlan;
    return std::nullopt;
}

std::vector<MajorSection> major_sections_of(SectionHeader header) {
    using H = SectionHeader;
    using M = MajorSection;
    switch (header) {
        case H::FamSochx:
        case H::Genhx:
        case H::PastMedicalHx:
        case H::CC:
        case H::PastSurgical:
        case H::Allergy:
        case H::Gynhx:
        case H::OtherHistory:
        case H::Immunizations:
            return {M::HistoryOfPresentIllness};
        case H::Medications:
            return {M::HistoryOfPresentIllness, M::AssessmentAndPlan};
        case H::Ros:
        case H::Exam:
            return {M::PhysicalExam};
        case H::Imaging:
        case H::Procedures:
        case H::Labs:
            return {M::Results};
        case H::Assessment:
        case H::Diagnosis:
        case H::Plan:
        case H::EdCourse:
        case H::Disposition:
            return {M::AssessmentAndPlan};
    }
    return {};
}

std::string_view to_string(Task task) { return task == Task::A ? "A" : "B"; }

std::optional<Task> parse_task(std::string_view text) {
    const std::string key = normalize_label(text);
    if (key == "A") return Task::A;
    if (key == "B") return Task::B;
    return std::nullopt;
}

ExampleSet::ExampleSet(std::vector<Example> examples, Task task) : examples_(std::move(examples)), task_(task) {
    by_id_.reserve(examples_.size());
    for (std::size_t i = 0; i < examples_.size(); ++i) {
        const Example& ex = examples_[i];
        if (ex.task != task) throw Error(ErrorCode::InvalidArgument, "example " + ex.id + " belongs to another task");
        if (is_blank(ex.dialogue)) throw Error(ErrorCode::EmptyDialogue, "example " + ex.id + " has an empty dialogue");
        if (task == Task::A && !ex.header) {
            throw Error(ErrorCode::InvalidHeader, "Task A example " + ex.id + " has no section header");
        }
        if (task == Task::B && ex.header) {
            throw Error(ErrorCode::InvalidArgument, "Task B example " + ex.id + " carries a section header");
        }
        if (!by_id_.emplace(ex.id, i).second) throw Error(ErrorCode::DuplicateId, "duplicate example id " + ex.id);
    }
}

const Example* ExampleSet::find(std::string_view id) const {
    auto it = by_id_.find(std::string(id));
    return it == by_id_.end() ? nullptr : &examples_[it->second];
}

ColumnMapping ColumnMapping::defaults_for(Task task) {
    if (task == Task::A) return ColumnMapping{"ID", "dialogue", "section_text", "section_header", ','};
    return ColumnMapping{"encounter_id", "dialogue", "note", "", ','};
}

ExampleSet parse_examples(std::string_view text, const ColumnMapping& schema, Task task, std::string_view source) {
    const csv::Table table = csv::parse(text, schema.delimiter);

    auto column = [&](const std::string& name) -> std::optional<std::size_t> {
        if (name.empty()) return std::nullopt;
        auto it = std::find(table.header.begin(), table.header.end(), name);
        if (it == table.header.end()) {
            throw Error(ErrorCode::MissingColumn, "column '" + name + "' not found in " + std::string(source));
        }
        return static_cast<std::size_t>(it - table.header.begin());
    };
    const auto id_col = column(schema.id);
    const auto dialogue_col = column(schema.dialogue);
    const auto summary_col = column(schema.summary);
    const auto header_col = task == Task::A ? column(schema.header) : std::nullopt;
    if (!id_col || !dialogue_col) {
        throw Error(ErrorCode::MissingColumn, "id and dialogue columns must be named");
    }
    if (task == Task::A && !header_col) {
        throw Error(ErrorCode::MissingColumn, "Task A requires a header column");
    }

    std::vector<Example> examples;
    examples.reserve(table.rows.size());
    std::string bad_headers;
    std::size_t bad_count = 0;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        Example ex;
        ex.id = row[*id_col];
        ex.dialogue = row[*dialogue_col];
        if (summary_col) ex.summary = row[*summary_col];
        ex.task = task;
        if (is_blank(ex.dialogue)) {
            throw Error(ErrorCode::EmptyDialogue, "empty dialogue at row " + std::to_string(r + 1) + " (line " +
                                                      std::to_string(table.row_lines[r]) + ") of " +
                                                      std::string(source));
        }
        if (header_col) {
            ex.header = parse_section_header(row[*header_col]);
            if (!ex.header) {
                if (bad_count++ < 20) {
                    if (!bad_headers.empty()) bad_headers += ", ";
                    bad_headers += "line " + std::to_string(table.row_lines[r]) + " '" + row[*header_col] + "'";
                }
                continue;
            }
        }
        examples.push_back(std::move(ex));
    }
    if (bad_count) {
        throw Error(ErrorCode::InvalidHeader, std::to_string(bad_count) + " row(s) with unknown section header in " +
                                                  std::string(source) + ": " + bad_headers);
    }
    return ExampleSet(std::move(examples), task);
}

ExampleSet load_examples(const std::filesystem::path& path, const ColumnMapping& schema, Task task) {
    return parse_examples(read_file(path), schema, task, path.string());
}

std::string render_examples(const ExampleSet& set, const ColumnMapping& schema) {
    csv::Row header{schema.id, schema.dialogue};
    const bool with_summary = !schema.summary.empty();
    const bool with_header = set.task() == Task::A && !schema.header.empty();
    if (with_summary) header.push_back(schema.summary);
    if (with_header) header.push_back(schema.header);
    std::vector<csv::Row> rows;
    rows.reserve(set.size());
    for (const Example& ex : set) {
        csv::Row row{ex.id, ex.dialogue};
        if (with_summary) row.push_back(ex.summary);
        if (with_header) row.emplace_back(to_string(*ex.header));
        rows.push_back(std::move(row));
    }
    return csv::render(header, rows, schema.delimiter);
}

std::pair<ExampleSet, ExampleSet> split_train_validation(const ExampleSet& set, double train_fraction,
                                                         std::uint64_t seed) {
    if (set.empty()) throw Error(ErrorCode::EmptySet, "cannot split an empty set");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "train_fraction must lie in (0, 1)");
    }
    const std::size_t n = set.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;

    std::mt19937_64 rng(seed);
    // Uniform draw in [0, bound] by rejection; std::uniform_int_distribution is
    // implementation-defined and would make splits platform dependent.
    auto draw = [&rng](std::uint64_t bound) {
        if (bound == 0) return std::uint64_t{0};
        const std::uint64_t range = bound + 1;
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % range;
        std::uint64_t x;
        do {
            x = rng();
        } while (x >= limit);
        return x % range;
    };
    for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[draw(i)]);

    const auto train_size = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(n)));
    std::vector<std::size_t> train_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(train_size));
    std::vector<std::size_t> val_idx(order.begin() + static_cast<std::ptrdiff_t>(train_size), order.end());
    std::sort(train_idx.begin(), train_idx.end());
    std::sort(val_idx.begin(), val_idx.end());

    auto gather = [&](const std::vector<std::size_t>& idx) {
        std::vector<Example> out;
        out.reserve(idx.size());
        for (std::size_t i : idx) out.push_back(set[i]);
        return ExampleSet(std::move(out), set.task());
    };
    return {gather(train_idx), gather(val_idx)};
}

}  // namespace medsum
