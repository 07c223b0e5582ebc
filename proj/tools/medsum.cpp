// medsum: command-line front end for the dialogue summarization harness.
//
// Every subcommand accepts --config <file> (TOML/INI); explicit flags win over
// the file, which wins over built-in defaults. API keys are taken from the
// environment variable named by --api-key-env, never from a flag.

#include <algorithm>
#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "medsum/corpus.hpp"
#include "medsum/digest.hpp"
#include "medsum/embedding.hpp"
#include "medsum/error.hpp"
#include "medsum/metrics.hpp"
#include "medsum/pipeline.hpp"

namespace {

using namespace medsum;

struct Options {
    std::string task = "a";
    std::string input;
    std::string eval;
    std::string id_col, dialogue_col, summary_col, header_col;
    std::string eval_id_col, eval_dialogue_col, eval_summary_col, eval_header_col;
    char delimiter = ',';
    double train_fraction = 0.8;
    std::uint64_t seed = 0;
    bool evaluate_on_train = false;
    bool keep_self = false;
    bool generate_only = false;

    std::string strategy = "prompt-selection";
    std::string method = "similarity";
    std::size_t k = 0;
    double lambda = kDefaultMmrLambda;
    bool allow_long_context = false;
    std::string template_dir;

    std::string model = "gpt-4";
    double temperature = 0.0;
    double top_p = 1.0;
    int max_tokens = 800;

    bool mock = false;
    std::string endpoint = "https://api.openai.com/v1/chat/completions";
    std::string api_key_env = "OPENAI_API_KEY";
    int timeout = 120;
    std::size_t max_in_flight = 4;
    std::string cache_dir;
    bool bypass_cache = false;
    std::string output_root = "runs";

    std::string embedder = "hash";
    std::size_t dimension = 256;
    std::uint64_t embed_seed = 0;
    std::string vectors;
    std::string embed_endpoint = "https://api.openai.com/v1/embeddings";
    std::string embed_model = "text-embedding-ada-002";
    std::size_t truncate_chars = 0;

    std::vector<std::size_t> ks{3, 5, 7};
    std::size_t runs = 3;
    std::string classify_mode = "ensemble";
    std::string finetuned_preds;
    std::string llm_preds;
    std::vector<std::string> override_labels;

    std::string generations;
    std::string external;
    std::string out;
    bool json = false;
};

void add_data_flags(CLI::App& cmd, Options& o) {
    cmd.add_option("--task", o.task, "Task: a (section summaries) or b (full notes)")
        ->check(CLI::IsMember({"a", "b", "A", "B"}))
        ->capture_default_str();
    cmd.add_option("-i,--input", o.input, "Training / retrieval corpus CSV")->required();
    cmd.add_option("--id-col", o.id_col, "Id column (default depends on task)");
    cmd.add_option("--dialogue-col", o.dialogue_col, "Dialogue column");
    cmd.add_option("--summary-col", o.summary_col, "Reference summary column");
    cmd.add_option("--header-col", o.header_col, "Section header column (Task A)");
    cmd.add_option("--delimiter", o.delimiter, "Field delimiter")->capture_default_str();
}

void add_eval_flags(CLI::App& cmd, Options& o) {
    cmd.add_option("--eval", o.eval, "Evaluation CSV; when absent the input is split");
    cmd.add_option("--eval-id-col", o.eval_id_col, "Id column of the evaluation file");
    cmd.add_option("--eval-dialogue-col", o.eval_dialogue_col, "Dialogue column of the evaluation file");
    cmd.add_option("--eval-summary-col", o.eval_summary_col, "Summary column of the evaluation file");
    cmd.add_option("--eval-header-col", o.eval_header_col, "Header column of the evaluation file");
    cmd.add_option("--train-fraction", o.train_fraction, "Split fraction when --eval is absent")->capture_default_str();
    cmd.add_option("--seed", o.seed, "Split seed")->capture_default_str();
    cmd.add_flag("--evaluate-on-train", o.evaluate_on_train, "Evaluate on the retrieval corpus itself");
    cmd.add_flag("--generate-only", o.generate_only, "The --eval file has no reference column; skip scoring");
}

void add_embed_flags(CLI::App& cmd, Options& o) {
    cmd.add_option("--embedder", o.embedder, "hash, precomputed or remote")
        ->check(CLI::IsMember({"hash", "precomputed", "remote"}))
        ->capture_default_str();
    cmd.add_option("--dimension", o.dimension, "Hash embedder dimension")->capture_default_str();
    cmd.add_option("--embed-seed", o.embed_seed, "Hash embedder seed")->capture_default_str();
    cmd.add_option("--vectors", o.vectors, "Precomputed vectors file (id v1 v2 ...)");
    cmd.add_option("--embed-endpoint", o.embed_endpoint, "Remote embeddings endpoint")->capture_default_str();
    cmd.add_option("--embed-model", o.embed_model, "Remote embeddings model")->capture_default_str();
    cmd.add_option("--truncate-chars", o.truncate_chars, "Truncate dialogues before embedding (0 = off)")
        ->capture_default_str();
    cmd.add_option("--api-key-env", o.api_key_env, "Environment variable holding the API key")->capture_default_str();
}

void add_generation_flags(CLI::App& cmd, Options& o) {
    cmd.add_option("--strategy", o.strategy,
                   "prompt-selection, zero-shot, section-fewshot, perspective-shift, two-stage, section-assembly")
        ->capture_default_str();
    cmd.add_option("--method", o.method, "Example selection: similarity or mmr")->capture_default_str();
    cmd.add_option("--k", o.k, "In-context examples (default 7 for Task A, 1 for Task B)");
    cmd.add_option("--lambda", o.lambda, "MMR relevance weight in [0, 1]")->capture_default_str();
    cmd.add_flag("--keep-self", o.keep_self, "Allow the query itself among retrieved examples");
    cmd.add_flag("--allow-long-context", o.allow_long_context, "Permit Task B prompt selection with k > 1");
    cmd.add_option("--templates", o.template_dir, "Directory overriding built-in prompt templates");
    cmd.add_option("--model", o.model, "Model name")->capture_default_str();
    cmd.add_option("--temperature", o.temperature, "Sampling temperature")->capture_default_str();
    cmd.add_option("--top-p", o.top_p, "Nucleus sampling mass")->capture_default_str();
    cmd.add_option("--max-tokens", o.max_tokens, "Completion token limit")->capture_default_str();
    cmd.add_flag("--mock", o.mock, "Use the offline mock provider (no network)");
    cmd.add_option("--endpoint", o.endpoint, "Chat completions endpoint")->capture_default_str();
    cmd.add_option("--timeout", o.timeout, "Request timeout in seconds")->capture_default_str();
    cmd.add_option("--max-in-flight", o.max_in_flight, "Concurrent provider requests")->capture_default_str();
    cmd.add_option("--cache-dir", o.cache_dir, "Response cache directory");
    cmd.add_flag("--bypass-cache", o.bypass_cache, "Do not read the cache (responses are still written)");
    cmd.add_option("-o,--output-root", o.output_root, "Directory for run outputs")->capture_default_str();
    cmd.add_flag("--json", o.json, "Print JSON instead of the text table");
}

Task task_of(const Options& o) { return *parse_task(o.task); }

ColumnMapping mapping(Task task, const std::string& id, const std::string& dialogue, const std::string& summary,
                      const std::string& header, char delimiter) {
    ColumnMapping m = ColumnMapping::defaults_for(task);
    if (!id.empty()) m.id = id;
    if (!dialogue.empty()) m.dialogue = dialogue;
    if (!summary.empty()) m.summary = summary;
    if (!header.empty()) m.header = header;
    m.delimiter = delimiter;
    return m;
}

EmbedderSpec embedder_spec(const Options& o) {
    EmbedderSpec e;
    if (o.embedder == "precomputed") e.kind = EmbedderSpec::Kind::Precomputed;
    if (o.embedder == "remote") e.kind = EmbedderSpec::Kind::Remote;
    e.dimension = o.dimension;
    e.seed = o.embed_seed;
    e.vectors_path = o.vectors;
    e.endpoint = o.embed_endpoint;
    e.model = o.embed_model;
    e.api_key_env = o.api_key_env;
    return e;
}

PipelineConfig build_config(const Options& o) {
    PipelineConfig c;
    c.task = task_of(o);
    auto strategy = parse_strategy(o.strategy);
    if (!strategy) throw Error(ErrorCode::InvalidConfig, "unknown strategy '" + o.strategy + "'");
    c.strategy = *strategy;
    auto method = parse_selection_method(o.method);
    if (!method) throw Error(ErrorCode::InvalidConfig, "unknown selection method '" + o.method + "'");
    c.method = *method;
    if (o.k > 0) c.k = o.k;
    c.lambda = o.lambda;
    c.generation.model = o.model;
    c.generation.temperature = o.temperature;
    c.generation.top_p = o.top_p;
    c.generation.max_tokens = o.max_tokens;
    c.train_path = o.input;
    if (!o.eval.empty()) c.eval_path = o.eval;
    c.train_fraction = o.train_fraction;
    c.seed = o.seed;
    c.evaluate_on_train = o.evaluate_on_train;
    c.exclude_self = !o.keep_self;
    c.train_columns = mapping(c.task, o.id_col, o.dialogue_col, o.summary_col, o.header_col, o.delimiter);
    c.eval_columns = mapping(c.task, o.eval_id_col.empty() ? o.id_col : o.eval_id_col,
                             o.eval_dialogue_col.empty() ? o.dialogue_col : o.eval_dialogue_col,
                             o.eval_summary_col.empty() ? o.summary_col : o.eval_summary_col,
                             o.eval_header_col.empty() ? o.header_col : o.eval_header_col, o.delimiter);
    if (o.generate_only) {
        if (o.eval.empty()) throw Error(ErrorCode::InvalidArgument, "--generate-only needs --eval");
        c.eval_columns.summary.clear();
    }
    if (!o.template_dir.empty()) c.template_dir = o.template_dir;
    c.embedder = embedder_spec(o);
    c.embed_truncate_chars = o.truncate_chars;
    c.provider.kind = o.mock ? ProviderSpec::Kind::Mock : ProviderSpec::Kind::Http;
    c.provider.endpoint = o.endpoint;
    c.provider.api_key_env = o.api_key_env;
    c.provider.timeout_seconds = o.timeout;
    c.max_in_flight = o.max_in_flight;
    c.allow_long_context = o.allow_long_context;
    if (!o.cache_dir.empty()) c.cache_dir = o.cache_dir;
    c.bypass_cache_reads = o.bypass_cache;
    c.output_root = o.output_root;
    if (!o.override_labels.empty()) {
        c.override_labels.clear();
        for (const auto& l : o.override_labels) {
            auto h = parse_section_header(l);
            if (!h) throw Error(ErrorCode::InvalidHeader, "override label '" + l + "'");
            c.override_labels.insert(*h);
        }
    }
    if (!o.finetuned_preds.empty()) c.finetuned_predictions = o.finetuned_preds;
    if (!o.llm_preds.empty()) c.llm_predictions = o.llm_preds;
    return c;
}

struct Providers {
    std::unique_ptr<CompletionProvider> completion;
    std::unique_ptr<EmbeddingProvider> embedder;
};

Providers providers_for(const PipelineConfig& c) {
    if (c.provider.kind == ProviderSpec::Kind::Http) {
        const char* key = std::getenv(c.provider.api_key_env.c_str());
        if (!key || !*key) {
            throw Error(ErrorCode::InvalidConfig, "environment variable " + c.provider.api_key_env +
                                                      " is not set; export it or pass --mock");
        }
    }
    return {make_provider(c.provider), make_embedder(c.embedder)};
}

void print(const std::string& text) { std::cout << text << (text.ends_with('\n') ? "" : "\n"); }

int cmd_ingest(const Options& o) {
    const Task task = task_of(o);
    const ColumnMapping m = mapping(task, o.id_col, o.dialogue_col, o.summary_col, o.header_col, o.delimiter);
    const ExampleSet set = load_examples(o.input, m, task);

    std::map<std::string, std::size_t> headers;
    std::vector<std::pair<std::size_t, std::size_t>> lengths;
    for (const Example& ex : set) {
        if (ex.header) ++headers[std::string(to_string(*ex.header))];
        if (!ex.summary.empty()) lengths.emplace_back(tokenize(ex.dialogue).size(), tokenize(ex.summary).size());
    }
    std::ostringstream out;
    out << "examples  " << set.size() << "\n";
    out << "task      " << to_string(task) << "\n";
    out << "sha256    " << sha256_file(o.input) << "\n";
    if (!headers.empty()) {
        out << "\nheader              count\n";
        for (const auto& [h, n] : headers) {
            std::string name = h;
            name.resize(std::max<std::size_t>(name.size(), 18), ' ');
            out << name << "  " << std::setw(5) << n << "\n";
        }
    }
    if (!lengths.empty()) {
        const LengthDiffStats s = length_diff_stats(lengths);
        out << "\ndialogue - summary tokens: mean " << s.mean << ", median " << s.median << ", min " << s.min
            << ", max " << s.max << "\n";
    }
    print(out.str());

    if (!o.out.empty()) {
        const auto [train, valid] = split_train_validation(set, o.train_fraction, o.seed);
        std::filesystem::create_directories(o.out);
        write_file_atomic(std::filesystem::path(o.out) / "train.csv", render_examples(train, m));
        write_file_atomic(std::filesystem::path(o.out) / "validation.csv", render_examples(valid, m));
        std::cout << "split " << train.size() << "/" << valid.size() << " written to " << o.out << "\n";
    }
    return 0;
}

int cmd_embed(const Options& o) {
    const Task task = task_of(o);
    const ExampleSet set =
        load_examples(o.input, mapping(task, o.id_col, o.dialogue_col, o.summary_col, o.header_col, o.delimiter), task);
    auto embedder = make_embedder(embedder_spec(o));
    EmbedOptions opts;
    opts.truncate_chars = o.truncate_chars;
    const EmbeddingIndex index = embed_corpus(*embedder, set, opts);
    if (o.out.empty()) {
        std::cout << index.to_text();
    } else {
        index.save(o.out);
        std::cout << index.size() << " vectors (" << index.dimension() << "d, " << index.provider_tag() << ") -> "
                  << o.out << "\n";
    }
    return 0;
}

int cmd_run_main(const Options& o) {
    const PipelineConfig config = build_config(o);
    auto p = providers_for(config);
    PipelineContext ctx{*p.completion, *p.embedder};
    const RunResult r = cmd_run(config, ctx);
    if (r.report) print(o.json ? r.report->to_json() : r.report->to_text());
    std::cout << "generations: " << r.generations.size();
    if (!r.manifest.errors.empty()) std::cout << ", errors: " << r.manifest.errors.size();
    std::cout << "\nrun directory: " << r.run_dir.generic_string() << "\n";
    return r.manifest.errors.empty() ? 0 : 3;
}

int cmd_ablate_main(const Options& o) {
    const PipelineConfig config = build_config(o);
    auto p = providers_for(config);
    PipelineContext ctx{*p.completion, *p.embedder};
    const AblationReport r = cmd_ablate_k(config, o.ks, ctx);
    print(o.json ? r.to_json() : r.to_text());
    return 0;
}

int cmd_stability_main(const Options& o) {
    const PipelineConfig config = build_config(o);
    auto p = providers_for(config);
    PipelineContext ctx{*p.completion, *p.embedder};
    const StabilityReport r = cmd_stability(config, o.runs, o.bypass_cache, ctx);
    print(o.json ? r.to_json() : r.to_text());
    return 0;
}

int cmd_classify_main(const Options& o) {
    PipelineConfig config = build_config(o);
    auto mode = parse_classify_mode(o.classify_mode);
    if (!mode) throw Error(ErrorCode::InvalidConfig, "unknown classify mode '" + o.classify_mode + "'");
    // A file of LLM labels needs no provider at all.
    if (config.llm_predictions || *mode == ClassifyMode::FinetunedOnly) config.provider.kind = ProviderSpec::Kind::Mock;
    auto p = providers_for(config);
    PipelineContext ctx{*p.completion, *p.embedder};
    const ClassificationRun r = cmd_classify(config, *mode, ctx);
    print(o.json ? r.to_json() : r.to_text());
    return 0;
}

int cmd_report_main(const Options& o) {
    const Task task = task_of(o);
    const ExampleSet set =
        load_examples(o.input, mapping(task, o.id_col, o.dialogue_col, o.summary_col, o.header_col, o.delimiter), task);
    MetricReport report = corpus_report(set, load_generations(o.generations));
    if (!o.external.empty()) merge_external_metrics(report, load_external_metrics(o.external));
    if (!o.out.empty()) {
        const std::filesystem::path dir(o.out);
        std::filesystem::create_directories(dir);
        write_file_atomic(dir / "report.json", report.to_json());
        write_file_atomic(dir / "report.txt", report.to_text());
        write_file_atomic(dir / "per_example.csv", report.to_csv());
    }
    print(o.json ? report.to_json() : report.to_text());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Few-shot clinical dialogue summarization harness"};
    app.set_config("--config", "", "TOML/INI file of option defaults; explicit flags take precedence");
    app.require_subcommand(1);
    Options o;

    auto* ingest = app.add_subcommand("ingest", "Validate a corpus, print statistics, optionally write a split");
    add_data_flags(*ingest, o);
    ingest->add_option("--split-out", o.out, "Directory for train.csv / validation.csv");
    ingest->add_option("--train-fraction", o.train_fraction, "Split fraction")->capture_default_str();
    ingest->add_option("--seed", o.seed, "Split seed")->capture_default_str();

    auto* embed = app.add_subcommand("embed", "Embed corpus dialogues and write a vectors file");
    add_data_flags(*embed, o);
    add_embed_flags(*embed, o);
    embed->add_option("-o,--out", o.out, "Output vectors file (stdout when absent)");

    auto* run = app.add_subcommand("run", "Generate summaries and score them");
    auto* ablate = app.add_subcommand("ablate-k", "Repeat a Task A run for several k");
    auto* stability = app.add_subcommand("stability", "Repeat a run and report metric spread");
    auto* classify = app.add_subcommand("classify", "Section header classification accuracy");
    for (auto* cmd : {run, ablate, stability, classify}) {
        add_data_flags(*cmd, o);
        add_eval_flags(*cmd, o);
        add_embed_flags(*cmd, o);
        add_generation_flags(*cmd, o);
    }
    ablate->add_option("--ks", o.ks, "k values")->delimiter(',')->capture_default_str();
    stability->add_option("--runs", o.runs, "Number of runs (>= 2)")->capture_default_str();
    classify->add_option("--mode", o.classify_mode, "llm, finetuned or ensemble")->capture_default_str();
    classify->add_option("--finetuned-preds", o.finetuned_preds, "CSV of fine-tuned classifier predictions (id,label)");
    classify->add_option("--llm-preds", o.llm_preds, "CSV of LLM predictions; skips querying the provider");
    classify->add_option("--override-labels", o.override_labels, "Labels for which the fine-tuned prediction wins")
        ->delimiter(',');

    auto* report = app.add_subcommand("report", "Score an existing generations CSV");
    add_data_flags(*report, o);
    report->add_option("-g,--generations", o.generations, "CSV of (id, generation)")->required();
    report->add_option("--external", o.external, "CSV of id plus extra metric columns (e.g. bertscore_f1)");
    report->add_option("-o,--out", o.out, "Directory for report.json / report.txt / per_example.csv");
    report->add_flag("--json", o.json, "Print JSON instead of the text table");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*ingest) return cmd_ingest(o);
        if (*embed) return cmd_embed(o);
        if (*run) return cmd_run_main(o);
        if (*ablate) return cmd_ablate_main(o);
        if (*stability) return cmd_stability_main(o);
        if (*classify) return cmd_classify_main(o);
        if (*report) return cmd_report_main(o);
    } catch (const medsum::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
