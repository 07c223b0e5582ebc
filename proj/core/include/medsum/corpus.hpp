#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace medsum {

/// The 20 section-header labels of the section-level dialogue dataset.
enum class SectionHeader {
    FamSochx,
    Genhx,
    PastMedicalHx,
    CC,
    PastSurgical,
    Allergy,
    Gynhx,
    OtherHistory,
    Immunizations,
    Medications,
    Ros,
    Exam,
    Imaging,
    Procedures,
    Labs,
    Assessment,
    Diagnosis,
    Plan,
    EdCourse,
    Disposition,
};

inline constexpr std::size_t kSectionHeaderCount = 20;

/// All headers in declaration order.
const std::array<SectionHeader, kSectionHeaderCount>& all_section_headers();

/// Canonical dataset spelling, e.g. "FAM/SOCHX", "OTHER_HISTORY".
std::string_view to_string(SectionHeader header);

/// Case-insensitive; ignores whitespace and punctuation, so "fam/sochx",
/// "FAMSOCHX" and " GENHX " all parse. Unknown labels yield nullopt.
std::optional<SectionHeader> parse_section_header(std::string_view text);

/// The four top-level divisions of a clinical note.
enum class MajorSection {
    HistoryOfPresentIllness,
    PhysicalExam,
    Results,
    AssessmentAndPlan,
};

inline constexpr std::size_t kMajorSectionCount = 4;

const std::array<MajorSection, kMajorSectionCount>& all_major_sections();

/// "HISTORY OF PRESENT ILLNESS", "PHYSICAL EXAM", "RESULTS", "ASSESSMENT AND PLAN".
std::string_view to_string(MajorSection section);

/// Lowercase snake-case key used for template file names, e.g. "physical_exam".
std::string_view slug(MajorSection section);

std::optional<MajorSection> parse_major_section(std::string_view text);

/// Grouping of headers into major sections. MEDICATIONS belongs to both
/// HISTORY OF PRESENT ILLNESS and ASSESSMENT AND PLAN; every other header to
/// exactly one. Returned in MajorSection declaration order.
std::vector<MajorSection> major_sections_of(SectionHeader header);

enum class Task { A, B };

std::string_view to_string(Task task);
std::optional<Task> parse_task(std::string_view text);

struct Example {
    std::string id;
    std::string dialogue;
    std::string summary;
    std::optional<SectionHeader> header;
    Task task = Task::A;

    bool operator==(const Example&) const = default;
};

/// Ordered, id-unique collection of examples for one task.
class ExampleSet {
  public:
    ExampleSet() = default;
    /// Validates id uniqueness, non-empty dialogues and header presence per task.
    ExampleSet(std::vector<Example> examples, Task task);

    Task task() const noexcept { return task_; }
    std::size_t size() const noexcept { return examples_.size(); }
    bool empty() const noexcept { return examples_.empty(); }
    const std::vector<Example>& examples() const noexcept { return examples_; }
    const Example& operator[](std::size_t i) const { return examples_[i]; }
    auto begin() const noexcept { return examples_.begin(); }
    auto end() const noexcept { return examples_.end(); }

    const Example* find(std::string_view id) const;

    bool operator==(const ExampleSet& other) const {
        return task_ == other.task_ && examples_ == other.examples_;
    }

  private:
    std::vector<Example> examples_;
    Task task_ = Task::A;
    std::unordered_map<std::string, std::size_t> by_id_;
};

/// Column names in the delimiter-separated input. An empty `header` column
/// means the file carries no header labels (Task B). An empty `summary`
/// column name means references are absent (generation-only input).
struct ColumnMapping {
    std::string id;
    std::string dialogue;
    std::string summary;
    std::string header;
    char delimiter = ',';

    /// Task A: MTS-Dialog release (ID, section_header, section_text, dialogue).
    /// Task B: ACI-Bench release (encounter_id, dialogue, note).
    static ColumnMapping defaults_for(Task task);
};

ExampleSet load_examples(const std::filesystem::path& path, const ColumnMapping& schema, Task task);

/// Parses already-read file contents; `source` names the input in error messages.
ExampleSet parse_examples(std::string_view text, const ColumnMapping& schema, Task task,
                          std::string_view source = "<memory>");

/// Renders a set with the mapped columns only, in the order id, dialogue,
/// summary, header. parse_examples(render_examples(s, m), m, t) == s.
std::string render_examples(const ExampleSet& set, const ColumnMapping& schema);

/// Shuffles indices with a seeded std::mt19937_64 (Fisher-Yates, unbiased
/// rejection sampling for bounded draws, so the split is identical on every
/// platform), takes the first floor(train_fraction * n) as training, and
/// returns both halves in original file order.
std::pair<ExampleSet, ExampleSet> split_train_validation(const ExampleSet& set, double train_fraction,
                                                         std::uint64_t seed);

}  // namespace medsum
