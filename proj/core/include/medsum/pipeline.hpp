#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "medsum/classification.hpp"
#include "medsum/corpus.hpp"
#include "medsum/embedding.hpp"
#include "medsum/llm_client.hpp"
#include "medsum/metrics.hpp"
#include "medsum/prompting.hpp"
#include "medsum/selection.hpp"

namespace medsum {

enum class Strategy {
    /// Retrieved in-context examples (k=7 for Task A, k=1 for Task B).
    PromptSelection,
    /// Task B instruction naming the four note sections.
    ZeroShot,
    /// Task A static 5-shot prompt chosen by the example's major section.
    SectionFewshot,
    /// Third-person narrative, then sectioned summary.
    PerspectiveShift,
    /// Salient-point list, then paragraph.
    TwoStage,
    /// Experimental Task B mode: one section few-shot prompt per major
    /// section over the full dialogue, outputs concatenated under headings.
    SectionAssembly,
};

std::string_view to_string(Strategy strategy);
std::optional<Strategy> parse_strategy(std::string_view text);

struct EmbedderSpec {
    enum class Kind { Hash, Precomputed, Remote };
    Kind kind = Kind::Hash;
    std::size_t dimension = 256;
    std::uint64_t seed = 0;
    std::filesystem::path vectors_path;
    std::string endpoint;
    std::string model;
    /// Environment variable holding the API key for remote embedders.
    std::string api_key_env = "OPENAI_API_KEY";
};

struct ProviderSpec {
    enum class Kind { Mock, Http };
    Kind kind = Kind::Mock;
    std::string endpoint = "https://api.openai.com/v1/chat/completions";
    std::string api_key_env = "OPENAI_API_KEY";
    int timeout_seconds = 120;
};

struct PipelineConfig {
    Task task = Task::A;
    Strategy strategy = Strategy::PromptSelection;
    SelectionMethod method = SelectionMethod::TopKSimilarity;
    /// Unset means the task default (7 for Task A, 1 for Task B).
    std::optional<std::size_t> k;
    double lambda = kDefaultMmrLambda;
    GenerationConfig generation;

    std::filesystem::path train_path;
    /// When unset the training file is split train_fraction / rest with `seed`.
    std::optional<std::filesystem::path> eval_path;
    double train_fraction = 0.8;
    std::uint64_t seed = 0;
    /// Evaluate on the retrieval corpus itself instead of a held-out split.
    bool evaluate_on_train = false;
    /// Drop the query's own id from the candidate pool.
    bool exclude_self = true;
    ColumnMapping train_columns = ColumnMapping::defaults_for(Task::A);
    ColumnMapping eval_columns = ColumnMapping::defaults_for(Task::A);
    std::optional<std::filesystem::path> template_dir;

    EmbedderSpec embedder;
    /// Dialogues are cut to this many bytes before embedding; 0 keeps them whole.
    std::size_t embed_truncate_chars = 0;
    ProviderSpec provider;
    std::size_t max_in_flight = 4;
    /// Required to run Task B prompt selection with k > 1.
    bool allow_long_context = false;

    std::optional<std::filesystem::path> cache_dir;
    bool bypass_cache_reads = false;
    std::filesystem::path output_root = "runs";

    std::set<SectionHeader> override_labels = EnsembleRule{}.override_labels;
    std::optional<std::filesystem::path> finetuned_predictions;
    /// Pre-computed LLM header predictions; when unset the provider classifies.
    std::optional<std::filesystem::path> llm_predictions;

    std::size_t resolved_k() const;
    /// Throws InvalidConfig, ContextLengthRisk, UnsupportedTask.
    void validate() const;
    /// Canonical JSON snapshot (stable key order).
    std::string to_json() const;
    static PipelineConfig from_json(std::string_view json);
    /// SHA-256 of to_json().
    std::string digest() const;
};

/// Timestamps in ISO-8601 UTC. The default honours SOURCE_DATE_EPOCH.
using Clock = std::function<std::string()>;
std::string default_clock();

/// Providers used by a run. Owned by the caller.
struct PipelineContext {
    CompletionProvider& provider;
    EmbeddingProvider& embedder;
    Clock clock = default_clock;
    /// Retry sleeps; defaults to real sleeping.
    Sleeper sleep;
};

struct PromptRecord {
    std::string example_id;
    int stage = 1;
    std::string strategy;
    std::string section;
    std::string prompt_sha256;
    std::string completion_key;
};

struct RunManifest {
    std::string config_json;
    std::string config_digest;
    /// role -> (path, sha256)
    std::map<std::string, std::pair<std::string, std::string>> inputs;
    std::string embedder_tag;
    std::string provider_name;
    std::vector<SelectionResult> selections;
    std::vector<PromptRecord> prompts;
    /// example id -> SHA-256 of the final generation
    std::map<std::string, std::string> outputs;
    /// example id -> completion key of the prompt that produced the final text
    std::map<std::string, std::string> output_keys;
    std::map<std::string, std::string> errors;
    std::string started_at;
    std::string finished_at;

    std::string to_json() const;
};

struct RunResult {
    RunManifest manifest;
    std::map<std::string, std::string> generations;
    std::optional<MetricReport> report;
    std::filesystem::path run_dir;
};

/// Full pipeline over every evaluation example; writes manifest.json,
/// generations.csv and, when references exist, report.json / report.txt /
/// per_example.csv under output_root/<timestamp>-<config digest>.
RunResult cmd_run(const PipelineConfig& config, PipelineContext& context);

struct AblationRow {
    std::size_t k = 0;
    std::map<std::string, double> macro;
    std::filesystem::path run_dir;
};

struct AblationReport {
    std::vector<AblationRow> rows;
    std::string to_json() const;
    std::string to_text() const;
};

/// One run per k (Task A only), sharing the cache. Writes ablation.json/.txt
/// into output_root.
AblationReport cmd_ablate_k(const PipelineConfig& config, const std::vector<std::size_t>& k_values,
                            PipelineContext& context);

struct MetricSpread {
    double min = 0.0;
    double max = 0.0;
    double mean = 0.0;
    /// Sample standard deviation (n - 1 denominator).
    double stddev = 0.0;
};

struct StabilityReport {
    std::vector<std::map<std::string, double>> runs;
    std::map<std::string, MetricSpread> aggregate;
    std::string to_json() const;
    std::string to_text() const;
};

/// Repeats the run `n_runs` times. With cache_bypass the cache is not read,
/// so every run queries the provider.
StabilityReport cmd_stability(const PipelineConfig& config, std::size_t n_runs, bool cache_bypass,
                              PipelineContext& context);

enum class ClassifyMode { LlmOnly, FinetunedOnly, Ensemble };

std::optional<ClassifyMode> parse_classify_mode(std::string_view text);

struct ClassificationRun {
    std::optional<AccuracyReport> llm;
    std::optional<AccuracyReport> finetuned;
    std::optional<AccuracyReport> ensemble;
    /// Examples whose LLM completion named no valid label.
    std::vector<std::string> unparseable;
    std::vector<HeaderPrediction> final_predictions;

    std::string to_json() const;
    std::string to_text() const;
};

/// Header classification on the evaluation set. Reports LLM-only,
/// fine-tuned-only (when predictions are supplied) and ensemble accuracy.
/// Throws MissingPredictions when the mode needs a fine-tuned file that is absent.
ClassificationRun cmd_classify(const PipelineConfig& config, ClassifyMode mode, PipelineContext& context);

/// Builds providers from specs. The API key is read from the named
/// environment variable only.
std::unique_ptr<EmbeddingProvider> make_embedder(const EmbedderSpec& spec);
std::unique_ptr<CompletionProvider> make_provider(const ProviderSpec& spec);

/// Mock responder that answers with the first in-context example's summary,
/// or canned text when the prompt has none.
MockProvider::Responder echo_first_example_responder();

/// Reads a two-column (id, generation) CSV.
std::map<std::string, std::string> load_generations(const std::filesystem::path& path);
std::string render_generations(const std::map<std::string, std::string>& generations);

/// Reads a CSV with an id column followed by numeric metric columns.
std::map<std::string, std::map<std::string, double>> load_external_metrics(const std::filesystem::path& path);

}  // namespace medsum
