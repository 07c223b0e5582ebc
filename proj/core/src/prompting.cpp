#include "medsum/prompting.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>

#include "builtin_templates.hpp"
#include "medsum/digest.hpp"
#include "medsum/error.hpp"

namespace medsum {

std::string_view to_string(PromptStrategy strategy) {
    switch (strategy) {
        case PromptStrategy::PromptSelectionA: return "PROMPT_SELECTION_A";
        case PromptStrategy::PromptSelectionB: return "PROMPT_SELECTION_B";
        case PromptStrategy::ZeroShotB: return "ZERO_SHOT_B";
        case PromptStrategy::SectionFewshotA: return "SECTION_FEWSHOT_A";
        case PromptStrategy::PerspectiveShiftStage1: return "PERSPECTIVE_SHIFT_STAGE1";
        case PromptStrategy::PerspectiveShiftStage2: return "PERSPECTIVE_SHIFT_STAGE2";
        case PromptStrategy::TwoStage1: return "TWO_STAGE_1";
        case PromptStrategy::TwoStage2: return "TWO_STAGE_2";
        case PromptStrategy::HeaderClassify: return "HEADER_CLASSIFY";
    }
    return "UNKNOWN";
}

std::string Prompt::hash() const { return sha256_hex(text); }

TemplateSet::TemplateSet(std::map<std::string, std::string, std::less<>> templates)
    : templates_(std::move(templates)) {}

const TemplateSet& TemplateSet::builtin() {
    static const TemplateSet set = [] {
        std::map<std::string, std::string, std::less<>> m;
        for (const auto& [name, text] : detail::builtin_templates()) m.emplace(std::string(name), std::string(text));
        return TemplateSet(std::move(m));
    }();
    return set;
}

TemplateSet TemplateSet::load_directory(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw Error(ErrorCode::Io, "template directory not found: " + dir.string());
    auto templates = builtin().templates_;
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
        std::string text = read_file(file);
        if (!text.empty() && text.back() == '\n') text.pop_back();
        templates[file.stem().string()] = std::move(text);
    }
    return TemplateSet(std::move(templates));
}

bool TemplateSet::contains(std::string_view name) const { return templates_.find(name) != templates_.end(); }

const std::string& TemplateSet::get(std::string_view name) const {
    auto it = templates_.find(name);
    if (it == templates_.end()) throw Error(ErrorCode::MissingTemplate, "no template named '" + std::string(name) + "'");
    return it->second;
}

namespace {

bool is_name_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-';
}

bool is_blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c); });
}

void require_text(std::string_view text, ErrorCode code, std::string_view what) {
    if (is_blank(text)) throw Error(code, std::string(what) + " is empty");
}

void require_stage(int stage) {
    if (stage != 1 && stage != 2) throw Error(ErrorCode::InvalidStage, "stage must be 1 or 2, got " + std::to_string(stage));
}

}  // namespace

std::string render_template(std::string_view text, const TemplateValues& values) {
    std::string out;
    out.reserve(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (c == '{' && i + 1 < text.size() && text[i + 1] == '{') {
            out.push_back('{');
            ++i;
        } else if (c == '}' && i + 1 < text.size() && text[i + 1] == '}') {
            out.push_back('}');
            ++i;
        } else if (c == '{') {
            std::size_t j = i + 1;
            while (j < text.size() && is_name_char(text[j])) ++j;
            if (j > i + 1 && j < text.size() && text[j] == '}') {
                const std::string_view name = text.substr(i + 1, j - i - 1);
                auto it = values.find(name);
                if (it == values.end()) {
                    throw Error(ErrorCode::UnresolvedPlaceholder, "no value for {" + std::string(name) + "}");
                }
                out += it->second;
                i = j;
            } else {
                out.push_back(c);
            }
        } else {
            out.push_back(c);
        }
    }
    return out;
}

std::string section_template_name(MajorSection section) { return "section_fewshot_" + std::string(slug(section)); }

namespace {

std::string render_example_blocks(std::span<const Example> examples, const TemplateSet& templates) {
    const std::string& block = templates.get("prompt_selection_example");
    std::string out;
    for (std::size_t i = 0; i < examples.size(); ++i) {
        if (i) out += "\n\n";
        out += render_template(block, {{"dialogue", examples[i].dialogue}, {"summary", examples[i].summary}});
    }
    return out;
}

std::vector<std::string> ids_of(std::span<const Example> examples) {
    std::vector<std::string> ids;
    ids.reserve(examples.size());
    for (const auto& ex : examples) ids.push_back(ex.id);
    return ids;
}

// Number of exemplar blocks in a static few-shot template: lines starting
// with "Dialogue", minus the query block.
std::size_t count_static_exemplars(std::string_view text) {
    std::size_t count = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        if (text.substr(pos, 8) == "Dialogue") ++count;
        const auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }
    return count > 0 ? count - 1 : 0;
}

}  // namespace

Prompt render_prompt_selection_a(std::string_view query_dialogue, std::span<const Example> examples,
                                 SectionHeader header, const TemplateSet& templates) {
    if (examples.empty()) throw Error(ErrorCode::NoExamples, "prompt selection needs at least one example");
    require_text(query_dialogue, ErrorCode::EmptyDialogue, "query dialogue");
    Prompt p;
    p.strategy = PromptStrategy::PromptSelectionA;
    p.k = examples.size();
    p.example_ids = ids_of(examples);
    p.text = render_template(templates.get("prompt_selection_a"),
                             {{"examples", render_example_blocks(examples, templates)},
                              {"section_header", std::string(to_string(header))},
                              {"dialogue", std::string(query_dialogue)}});
    return p;
}

Prompt render_prompt_selection_b(std::string_view query_dialogue, std::span<const Example> examples,
                                 const TemplateSet& templates) {
    if (examples.size() != 1) {
        throw Error(ErrorCode::WrongExampleCount,
                    "Task B prompt selection takes exactly one example, got " + std::to_string(examples.size()));
    }
    if (is_blank(examples.front().summary)) {
        throw Error(ErrorCode::InvalidExample, "example " + examples.front().id + " has an empty summary");
    }
    require_text(query_dialogue, ErrorCode::EmptyDialogue, "query dialogue");
    Prompt p;
    p.strategy = PromptStrategy::PromptSelectionB;
    p.k = 1;
    p.example_ids = ids_of(examples);
    p.text = render_template(templates.get("prompt_selection_b"),
                             {{"examples", render_example_blocks(examples, templates)},
                              {"dialogue", std::string(query_dialogue)}});
    return p;
}

Prompt render_zero_shot_b(std::string_view dialogue, const TemplateSet& templates) {
    require_text(dialogue, ErrorCode::EmptyDialogue, "dialogue");
    Prompt p;
    p.strategy = PromptStrategy::ZeroShotB;
    p.text = render_template(templates.get("zero_shot_b"), {{"dialogue", std::string(dialogue)}});
    return p;
}

Prompt render_section_fewshot_a(std::string_view dialogue, MajorSection section, const TemplateSet& templates) {
    require_text(dialogue, ErrorCode::EmptyDialogue, "dialogue");
    const std::string name = section_template_name(section);
    const std::string& tmpl = templates.get(name);
    Prompt p;
    p.strategy = PromptStrategy::SectionFewshotA;
    p.k = count_static_exemplars(tmpl);
    for (std::size_t i = 1; i <= p.k; ++i) p.example_ids.push_back(name + "#" + std::to_string(i));
    p.text = render_template(tmpl, {{"dialogue", std::string(dialogue)}});
    return p;
}

Prompt render_perspective_shift(std::string_view input, int stage, const TemplateSet& templates) {
    require_stage(stage);
    require_text(input, ErrorCode::EmptyInput, "perspective-shift input");
    Prompt p;
    if (stage == 1) {
        p.strategy = PromptStrategy::PerspectiveShiftStage1;
        p.text = render_template(templates.get("perspective_shift_stage1"), {{"dialogue", std::string(input)}});
    } else {
        p.strategy = PromptStrategy::PerspectiveShiftStage2;
        p.text = render_template(templates.get("perspective_shift_stage2"), {{"narrative", std::string(input)}});
    }
    return p;
}

Prompt render_two_stage(std::string_view input, int stage, const TemplateSet& templates) {
    require_stage(stage);
    require_text(input, ErrorCode::EmptyInput, "two-stage input");
    Prompt p;
    if (stage == 1) {
        p.strategy = PromptStrategy::TwoStage1;
        p.text = render_template(templates.get("two_stage_1"), {{"dialogue", std::string(input)}});
    } else {
        p.strategy = PromptStrategy::TwoStage2;
        p.text = render_template(templates.get("two_stage_2"), {{"points", std::string(input)}});
    }
    return p;
}

Prompt render_header_classify(std::string_view dialogue, const TemplateSet& templates) {
    require_text(dialogue, ErrorCode::EmptyDialogue, "dialogue");
    std::string labels;
    for (SectionHeader h : all_section_headers()) {
        if (!labels.empty()) labels += ", ";
        labels += to_string(h);
    }
    Prompt p;
    p.strategy = PromptStrategy::HeaderClassify;
    p.text = render_template(templates.get("header_classify"),
                             {{"labels", labels}, {"dialogue", std::string(dialogue)}});
    return p;
}

}  // namespace medsum
