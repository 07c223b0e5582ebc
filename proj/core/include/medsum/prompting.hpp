#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "medsum/corpus.hpp"

namespace medsum {

enum class PromptStrategy {
    PromptSelectionA,
    PromptSelectionB,
    ZeroShotB,
    SectionFewshotA,
    PerspectiveShiftStage1,
    PerspectiveShiftStage2,
    TwoStage1,
    TwoStage2,
    HeaderClassify,
};

std::string_view to_string(PromptStrategy strategy);

struct Prompt {
    std::string text;
    PromptStrategy strategy = PromptStrategy::ZeroShotB;
    std::size_t k = 0;
    std::vector<std::string> example_ids;

    /// SHA-256 of the text.
    std::string hash() const;
};

/// Named prompt templates with `{name}` placeholders. `{{` and `}}` render as
/// literal braces. A placeholder with no supplied value is an error.
class TemplateSet {
  public:
    TemplateSet() = default;
    explicit TemplateSet(std::map<std::string, std::string, std::less<>> templates);

    /// The templates compiled into the library.
    static const TemplateSet& builtin();

    /// Builtins overlaid with every `<name>.txt` in `dir`. One trailing newline
    /// per file is dropped so editors that append one do not change prompts.
    static TemplateSet load_directory(const std::filesystem::path& dir);

    bool contains(std::string_view name) const;
    /// Throws MissingTemplate.
    const std::string& get(std::string_view name) const;
    const std::map<std::string, std::string, std::less<>>& all() const noexcept { return templates_; }

  private:
    std::map<std::string, std::string, std::less<>> templates_;
};

using TemplateValues = std::map<std::string, std::string, std::less<>>;

/// Single pass substitution; substituted values are not rescanned.
/// Throws UnresolvedPlaceholder.
std::string render_template(std::string_view text, const TemplateValues& values);

/// Template name of the static few-shot prompt for a major section.
std::string section_template_name(MajorSection section);

/// Retrieved examples as Dialogue/Summary blocks in selection order, then the
/// query block preceded by "Section: <header>", ending with "Summary:".
Prompt render_prompt_selection_a(std::string_view query_dialogue, std::span<const Example> examples,
                                 SectionHeader header, const TemplateSet& templates = TemplateSet::builtin());

/// One full-note exemplar (its summary carries the section headings verbatim)
/// then the query. Throws WrongExampleCount unless exactly one example is
/// given, InvalidExample when its summary is empty.
Prompt render_prompt_selection_b(std::string_view query_dialogue, std::span<const Example> examples,
                                 const TemplateSet& templates = TemplateSet::builtin());

Prompt render_zero_shot_b(std::string_view dialogue, const TemplateSet& templates = TemplateSet::builtin());

/// Static few-shot prompt for `section` with the query appended.
Prompt render_section_fewshot_a(std::string_view dialogue, MajorSection section,
                                const TemplateSet& templates = TemplateSet::builtin());

/// Stage 1 converts a dialogue into a third-person narrative; stage 2
/// summarizes the narrative into the four note sections. Throws InvalidStage.
Prompt render_perspective_shift(std::string_view input, int stage,
                                const TemplateSet& templates = TemplateSet::builtin());

/// Stage 1 extracts a list of salient points; stage 2 turns that list into a paragraph.
Prompt render_two_stage(std::string_view input, int stage, const TemplateSet& templates = TemplateSet::builtin());

/// Zero-shot section-header classification over the 20 labels.
Prompt render_header_classify(std::string_view dialogue, const TemplateSet& templates = TemplateSet::builtin());

}  // namespace medsum
