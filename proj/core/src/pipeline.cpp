#include "medsum/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "medsum/csv.hpp"
#include "medsum/digest.hpp"
#include "medsum/error.hpp"

namespace medsum {

using ojson = nlohmann::ordered_json;

namespace {

std::string lower_alnum(std::string_view text) {
    std::string key;
    for (unsigned char c : text) {
        if (std::isalnum(c)) key.push_back(static_cast<char>(std::tolower(c)));
    }
    return key;
}

}  // namespace

std::string_view to_string(Strategy strategy) {
    switch (strategy) {
        case Strategy::PromptSelection: return "prompt-selection";
        case Strategy::ZeroShot: return "zero-shot";
        case Strategy::SectionFewshot: return "section-fewshot";
        case Strategy::PerspectiveShift: return "perspective-shift";
        case Strategy::TwoStage: return "two-stage";
        case Strategy::SectionAssembly: return "section-assembly";
    }
    return "unknown";
}

std::optional<Strategy> parse_strategy(std::string_view text) {
    const std::string key = lower_alnum(text);
    for (Strategy s : {Strategy::PromptSelection, Strategy::ZeroShot, Strategy::SectionFewshot,
                       Strategy::PerspectiveShift, Strategy::TwoStage, Strategy::SectionAssembly}) {
        if (lower_alnum(to_string(s)) == key) return s;
    }
    return std::nullopt;
}

std::optional<ClassifyMode> parse_classify_mode(std::string_view text) {
    const std::string key = lower_alnum(text);
    if (key == "llm" || key == "llmonly") return ClassifyMode::LlmOnly;
    if (key == "finetuned" || key == "finetunedonly") return ClassifyMode::FinetunedOnly;
    if (key == "ensemble") return ClassifyMode::Ensemble;
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// PipelineConfig

std::size_t PipelineConfig::resolved_k() const { return k.value_or(task == Task::A ? 7 : 1); }

void PipelineConfig::validate() const {
    generation.validate();
    if (train_path.empty()) throw Error(ErrorCode::InvalidConfig, "a training file is required");
    if (resolved_k() == 0) throw Error(ErrorCode::InvalidK, "k must be positive");
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw Error(ErrorCode::InvalidLambda, "lambda must lie in [0, 1]");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw Error(ErrorCode::InvalidConfig, "train_fraction must lie in (0, 1)");
    }
    if (max_in_flight < 1) throw Error(ErrorCode::InvalidConfig, "max_in_flight must be >= 1");
    if (strategy == Strategy::PromptSelection && task == Task::B && resolved_k() > 1 && !allow_long_context) {
        throw Error(ErrorCode::ContextLengthRisk,
                    "Task B prompt selection with k=" + std::to_string(resolved_k()) +
                        " is likely to overflow the model context window (full-note examples are long); "
                        "pass --allow-long-context to run it anyway");
    }
    if ((strategy == Strategy::SectionFewshot) && task != Task::A) {
        throw Error(ErrorCode::UnsupportedTask, "section-fewshot needs Task A section headers");
    }
    if ((strategy == Strategy::ZeroShot || strategy == Strategy::SectionAssembly) && task != Task::B) {
        throw Error(ErrorCode::UnsupportedTask, std::string(to_string(strategy)) + " produces full notes (Task B)");
    }
    if (embedder.kind == EmbedderSpec::Kind::Precomputed && embedder.vectors_path.empty()) {
        throw Error(ErrorCode::InvalidConfig, "precomputed embedder needs a vectors file");
    }
}

namespace {

ojson columns_json(const ColumnMapping& m) {
    return ojson{{"id", m.id},
                 {"dialogue", m.dialogue},
                 {"summary", m.summary},
                 {"header", m.header},
                 {"delimiter", std::string(1, m.delimiter)}};
}

ColumnMapping columns_from(const ojson& j) {
    ColumnMapping m;
    m.id = j.at("id").get<std::string>();
    m.dialogue = j.at("dialogue").get<std::string>();
    m.summary = j.at("summary").get<std::string>();
    m.header = j.at("header").get<std::string>();
    const auto d = j.at("delimiter").get<std::string>();
    m.delimiter = d.empty() ? ',' : d.front();
    return m;
}

ojson opt_path(const std::optional<std::filesystem::path>& p) {
    return p ? ojson(p->generic_string()) : ojson(nullptr);
}

std::optional<std::filesystem::path> path_from(const ojson& j) {
    if (j.is_null()) return std::nullopt;
    return std::filesystem::path(j.get<std::string>());
}

std::string_view embedder_kind(EmbedderSpec::Kind k) {
    switch (k) {
        case EmbedderSpec::Kind::Hash: return "hash";
        case EmbedderSpec::Kind::Precomputed: return "precomputed";
        case EmbedderSpec::Kind::Remote: return "remote";
    }
    return "hash";
}

EmbedderSpec::Kind embedder_kind_from(std::string_view s) {
    if (s == "hash") return EmbedderSpec::Kind::Hash;
    if (s == "precomputed") return EmbedderSpec::Kind::Precomputed;
    if (s == "remote") return EmbedderSpec::Kind::Remote;
    throw Error(ErrorCode::InvalidConfig, "unknown embedder kind '" + std::string(s) + "'");
}

ojson generation_json(const GenerationConfig& g) {
    return ojson{{"model", g.model},
                 {"n", g.n},
                 {"temperature", g.temperature},
                 {"top_p", g.top_p},
                 {"max_tokens", g.max_tokens}};
}

}  // namespace

std::string PipelineConfig::to_json() const {
    ojson j;
    j["task"] = std::string(medsum::to_string(task));
    j["strategy"] = std::string(medsum::to_string(strategy));
    j["method"] = std::string(medsum::to_string(method));
    j["k"] = k ? ojson(*k) : ojson(nullptr);
    j["resolved_k"] = resolved_k();
    j["lambda"] = lambda;
    j["generation"] = generation_json(generation);
    j["train_path"] = train_path.generic_string();
    j["eval_path"] = opt_path(eval_path);
    j["train_fraction"] = train_fraction;
    j["seed"] = seed;
    j["evaluate_on_train"] = evaluate_on_train;
    j["exclude_self"] = exclude_self;
    j["train_columns"] = columns_json(train_columns);
    j["eval_columns"] = columns_json(eval_columns);
    j["template_dir"] = opt_path(template_dir);
    j["embedder"] = ojson{{"kind", std::string(embedder_kind(embedder.kind))},
                          {"dimension", embedder.dimension},
                          {"seed", embedder.seed},
                          {"vectors_path", embedder.vectors_path.generic_string()},
                          {"endpoint", embedder.endpoint},
                          {"model", embedder.model},
                          {"api_key_env", embedder.api_key_env}};
    j["embed_truncate_chars"] = embed_truncate_chars;
    j["provider"] = ojson{{"kind", provider.kind == ProviderSpec::Kind::Mock ? "mock" : "http"},
                          {"endpoint", provider.endpoint},
                          {"api_key_env", provider.api_key_env},
                          {"timeout_seconds", provider.timeout_seconds}};
    j["max_in_flight"] = max_in_flight;
    j["allow_long_context"] = allow_long_context;
    j["cache_dir"] = opt_path(cache_dir);
    j["bypass_cache_reads"] = bypass_cache_reads;
    j["output_root"] = output_root.generic_string();
    ojson labels = ojson::array();
    for (SectionHeader h : override_labels) labels.push_back(std::string(medsum::to_string(h)));
    j["override_labels"] = labels;
    j["finetuned_predictions"] = opt_path(finetuned_predictions);
    j["llm_predictions"] = opt_path(llm_predictions);
    return j.dump(2);
}

PipelineConfig PipelineConfig::from_json(std::string_view text) {
    PipelineConfig c;
    try {
        const ojson j = ojson::parse(text);
        const ojson& cfg = j.contains("config") ? j.at("config") : j;
        auto task = parse_task(cfg.at("task").get<std::string>());
        auto strategy = parse_strategy(cfg.at("strategy").get<std::string>());
        auto method = parse_selection_method(cfg.at("method").get<std::string>());
        if (!task || !strategy || !method) throw Error(ErrorCode::InvalidConfig, "bad task/strategy/method");
        c.task = *task;
        c.strategy = *strategy;
        c.method = *method;
        if (!cfg.at("k").is_null()) c.k = cfg.at("k").get<std::size_t>();
        c.lambda = cfg.at("lambda").get<double>();
        const auto& g = cfg.at("generation");
        c.generation.model = g.at("model").get<std::string>();
        c.generation.n = g.at("n").get<int>();
        c.generation.temperature = g.at("temperature").get<double>();
        c.generation.top_p = g.at("top_p").get<double>();
        c.generation.max_tokens = g.at("max_tokens").get<int>();
        c.train_path = cfg.at("train_path").get<std::string>();
        c.eval_path = path_from(cfg.at("eval_path"));
        c.train_fraction = cfg.at("train_fraction").get<double>();
        c.seed = cfg.at("seed").get<std::uint64_t>();
        c.evaluate_on_train = cfg.at("evaluate_on_train").get<bool>();
        c.exclude_self = cfg.at("exclude_self").get<bool>();
        c.train_columns = columns_from(cfg.at("train_columns"));
        c.eval_columns = columns_from(cfg.at("eval_columns"));
        c.template_dir = path_from(cfg.at("template_dir"));
        const auto& e = cfg.at("embedder");
        c.embedder.kind = embedder_kind_from(e.at("kind").get<std::string>());
        c.embedder.dimension = e.at("dimension").get<std::size_t>();
        c.embedder.seed = e.at("seed").get<std::uint64_t>();
        c.embedder.vectors_path = e.at("vectors_path").get<std::string>();
        c.embedder.endpoint = e.at("endpoint").get<std::string>();
        c.embedder.model = e.at("model").get<std::string>();
        c.embedder.api_key_env = e.at("api_key_env").get<std::string>();
        c.embed_truncate_chars = cfg.at("embed_truncate_chars").get<std::size_t>();
        const auto& p = cfg.at("provider");
        c.provider.kind = p.at("kind").get<std::string>() == "http" ? ProviderSpec::Kind::Http : ProviderSpec::Kind::Mock;
        c.provider.endpoint = p.at("endpoint").get<std::string>();
        c.provider.api_key_env = p.at("api_key_env").get<std::string>();
        c.provider.timeout_seconds = p.at("timeout_seconds").get<int>();
        c.max_in_flight = cfg.at("max_in_flight").get<std::size_t>();
        c.allow_long_context = cfg.at("allow_long_context").get<bool>();
        c.cache_dir = path_from(cfg.at("cache_dir"));
        c.bypass_cache_reads = cfg.at("bypass_cache_reads").get<bool>();
        c.output_root = cfg.at("output_root").get<std::string>();
        c.override_labels.clear();
        for (const auto& l : cfg.at("override_labels")) {
            auto h = parse_section_header(l.get<std::string>());
            if (!h) throw Error(ErrorCode::InvalidHeader, "override label " + l.get<std::string>());
            c.override_labels.insert(*h);
        }
        c.finetuned_predictions = path_from(cfg.at("finetuned_predictions"));
        c.llm_predictions = path_from(cfg.at("llm_predictions"));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::InvalidConfig, std::string("config JSON: ") + e.what());
    }
    return c;
}

std::string PipelineConfig::digest() const { return sha256_hex(to_json()); }

// ---------------------------------------------------------------------------
// Providers

std::string default_clock() {
    std::time_t t = std::time(nullptr);
    if (const char* epoch = std::getenv("SOURCE_DATE_EPOCH")) {
        long long v = 0;
        const std::string_view s(epoch);
        if (std::from_chars(s.data(), s.data() + s.size(), v).ec == std::errc{}) t = static_cast<std::time_t>(v);
    }
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

namespace {

std::string env_or_empty(const std::string& name) {
    if (name.empty()) return {};
    const char* v = std::getenv(name.c_str());
    return v ? std::string(v) : std::string();
}

}  // namespace

std::unique_ptr<EmbeddingProvider> make_embedder(const EmbedderSpec& spec) {
    switch (spec.kind) {
        case EmbedderSpec::Kind::Hash:
            return std::make_unique<HashEmbedder>(spec.dimension, spec.seed);
        case EmbedderSpec::Kind::Precomputed:
            return std::make_unique<PrecomputedEmbedder>(PrecomputedEmbedder::load(spec.vectors_path));
        case EmbedderSpec::Kind::Remote:
            return std::make_unique<RemoteEmbedder>(
                RemoteEmbedderConfig{spec.endpoint, spec.model, env_or_empty(spec.api_key_env), 60});
    }
    throw Error(ErrorCode::InvalidConfig, "unknown embedder");
}

std::unique_ptr<CompletionProvider> make_provider(const ProviderSpec& spec) {
    if (spec.kind == ProviderSpec::Kind::Mock) return std::make_unique<MockProvider>(echo_first_example_responder());
    return std::make_unique<HttpChatProvider>(
        HttpProviderConfig{spec.endpoint, env_or_empty(spec.api_key_env), spec.timeout_seconds});
}

MockProvider::Responder echo_first_example_responder() {
    return [](std::string_view prompt, const GenerationConfig& config) -> std::string {
        for (std::string_view marker : {std::string_view("Summary:\n"), std::string_view("Summary :\n")}) {
            const auto pos = prompt.find(marker);
            if (pos == std::string_view::npos) continue;
            const auto start = pos + marker.size();
            auto end = prompt.size();
            for (std::string_view stop : {std::string_view("\n\nDialogue"), std::string_view("\n\nSection: ")}) {
                end = std::min(end, prompt.find(stop, start));
            }
            const std::string_view summary = prompt.substr(start, end - start);
            if (summary.find_first_not_of(" \t\r\n") != std::string_view::npos) return std::string(summary);
        }
        return "mock completion " + completion_key(prompt, config).substr(0, 16);
    };
}

// ---------------------------------------------------------------------------
// Manifest

std::string RunManifest::to_json() const {
    ojson j;
    j["config"] = ojson::parse(config_json);
    j["config_digest"] = config_digest;
    ojson in = ojson::object();
    for (const auto& [role, ps] : inputs) in[role] = ojson{{"path", ps.first}, {"sha256", ps.second}};
    j["inputs"] = in;
    j["embedder_tag"] = embedder_tag;
    j["provider"] = provider_name;
    ojson sel = ojson::array();
    for (const auto& s : selections) {
        ojson chosen = ojson::array();
        for (const auto& c : s.chosen) chosen.push_back(ojson{{"id", c.id}, {"score", c.score}});
        sel.push_back(ojson{{"query_id", s.query_id ? ojson(*s.query_id) : ojson(nullptr)},
                            {"method", std::string(medsum::to_string(s.method))},
                            {"k", s.k},
                            {"lambda", s.lambda ? ojson(*s.lambda) : ojson(nullptr)},
                            {"chosen", chosen}});
    }
    j["selections"] = sel;
    ojson prompts_json = ojson::array();
    for (const auto& p : prompts) {
        prompts_json.push_back(ojson{{"example_id", p.example_id},
                                     {"stage", p.stage},
                                     {"strategy", p.strategy},
                                     {"section", p.section},
                                     {"prompt_sha256", p.prompt_sha256},
                                     {"completion_key", p.completion_key}});
    }
    j["prompts"] = prompts_json;
    ojson outs = ojson::object();
    for (const auto& [id, digest] : outputs) {
        outs[id] = ojson{{"sha256", digest}, {"completion_key", output_keys.count(id) ? output_keys.at(id) : ""}};
    }
    j["outputs"] = outs;
    ojson errs = ojson::object();
    for (const auto& [id, msg] : errors) errs[id] = msg;
    j["errors"] = errs;
    j["timestamps"] = ojson{{"started", started_at}, {"finished", finished_at}};
    return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// Run helpers

namespace {

struct Datasets {
    ExampleSet train;
    ExampleSet eval;
    bool eval_is_train = false;
};

Datasets load_datasets(const PipelineConfig& config) {
    Datasets d;
    ExampleSet full = load_examples(config.train_path, config.train_columns, config.task);
    if (config.evaluate_on_train) {
        d.train = full;
        d.eval = std::move(full);
        d.eval_is_train = true;
    } else if (config.eval_path) {
        d.train = std::move(full);
        d.eval = load_examples(*config.eval_path, config.eval_columns, config.task);
    } else {
        auto [train, val] = split_train_validation(full, config.train_fraction, config.seed);
        d.train = std::move(train);
        d.eval = std::move(val);
    }
    return d;
}

bool has_references(const ExampleSet& set) {
    return std::any_of(set.begin(), set.end(), [](const Example& ex) {
        return ex.summary.find_first_not_of(" \t\r\n") != std::string::npos;
    });
}

std::string compact_timestamp(std::string_view iso) {
    std::string out;
    for (char c : iso) {
        if (c != '-' && c != ':') out.push_back(c);
    }
    return out;
}

std::filesystem::path make_run_dir(const std::filesystem::path& root, std::string_view prefix,
                                   std::string_view timestamp, std::string_view digest) {
    const std::string base = std::string(prefix) + compact_timestamp(timestamp) + "-" + std::string(digest.substr(0, 8));
    std::filesystem::path dir = root / base;
    for (int i = 1; std::filesystem::exists(dir); ++i) dir = root / (base + "-" + std::to_string(i));
    std::filesystem::create_directories(dir);
    return dir;
}

struct Job {
    std::string example_id;
    std::string section;
    Prompt prompt;
};

class StageRunner {
  public:
    StageRunner(const PipelineConfig& config, PipelineContext& context, ResponseCache* cache, RunManifest& manifest)
        : config_(config), context_(context), cache_(cache), manifest_(manifest) {
        options_.sleep = context.sleep;
        options_.bypass_cache_reads = config.bypass_cache_reads;
    }

    std::vector<BatchItem> run(const std::vector<Job>& jobs, int stage) {
        std::vector<Prompt> prompts;
        prompts.reserve(jobs.size());
        for (const auto& j : jobs) prompts.push_back(j.prompt);
        auto items = run_batch(context_.provider, prompts, config_.generation, cache_, config_.max_in_flight, options_);
        for (std::size_t i = 0; i < jobs.size(); ++i) {
            manifest_.prompts.push_back({jobs[i].example_id, stage, std::string(to_string(jobs[i].prompt.strategy)),
                                         jobs[i].section, jobs[i].prompt.hash(),
                                         completion_key(jobs[i].prompt.text, config_.generation)});
            if (!items[i].ok()) manifest_.errors[jobs[i].example_id] = items[i].error->what();
        }
        return items;
    }

  private:
    const PipelineConfig& config_;
    PipelineContext& context_;
    ResponseCache* cache_;
    RunManifest& manifest_;
    ClientOptions options_;
};

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

void record_input(RunManifest& m, const std::string& role, const std::filesystem::path& path) {
    m.inputs[role] = {path.generic_string(), sha256_file(path)};
}

}  // namespace

RunResult cmd_run(const PipelineConfig& config, PipelineContext& context) {
    config.validate();
    RunResult result;
    RunManifest& manifest = result.manifest;
    manifest.started_at = context.clock();
    manifest.config_json = config.to_json();
    manifest.config_digest = config.digest();
    manifest.provider_name = context.provider.name();

    record_input(manifest, "train", config.train_path);
    if (config.eval_path && !config.evaluate_on_train) record_input(manifest, "eval", *config.eval_path);
    if (config.embedder.kind == EmbedderSpec::Kind::Precomputed) {
        record_input(manifest, "vectors", config.embedder.vectors_path);
    }

    const TemplateSet templates =
        config.template_dir ? TemplateSet::load_directory(*config.template_dir) : TemplateSet::builtin();
    if (config.template_dir) {
        std::string all;
        for (const auto& [name, text] : templates.all()) all += name + "\n" + text + "\n";
        manifest.inputs["templates"] = {config.template_dir->generic_string(), sha256_hex(all)};
    }

    const Datasets data = load_datasets(config);
    std::optional<ResponseCache> cache;
    if (config.cache_dir) cache.emplace(*config.cache_dir);
    StageRunner runner(config, context, cache ? &*cache : nullptr, manifest);

    std::vector<Job> jobs;
    switch (config.strategy) {
        case Strategy::PromptSelection: {
            EmbedOptions opts;
            opts.truncate_chars = config.embed_truncate_chars;
            opts.max_in_flight = 1;
            const EmbeddingIndex index = embed_corpus(context.embedder, data.train, opts);
            const EmbeddingIndex queries = data.eval_is_train ? index : embed_corpus(context.embedder, data.eval, opts);
            manifest.embedder_tag = index.provider_tag();
            const std::size_t k = config.resolved_k();
            for (const Example& ex : data.eval) {
                IdSet exclude;
                if (config.exclude_self) exclude.insert(ex.id);
                const EmbeddingVector& q = *queries.find(ex.id);
                SelectionResult sel = config.method == SelectionMethod::Mmr
                                          ? mmr_select(index, q, k, config.lambda, exclude)
                                          : top_k_similar(index, q, k, exclude);
                sel.query_id = ex.id;
                std::vector<Example> shots;
                for (const auto& c : sel.chosen) shots.push_back(*data.train.find(c.id));
                Prompt p = config.task == Task::A ? render_prompt_selection_a(ex.dialogue, shots, *ex.header, templates)
                                                  : render_prompt_selection_b(ex.dialogue, shots, templates);
                manifest.selections.push_back(std::move(sel));
                jobs.push_back({ex.id, "", std::move(p)});
            }
            break;
        }
        case Strategy::ZeroShot:
            for (const Example& ex : data.eval) jobs.push_back({ex.id, "", render_zero_shot_b(ex.dialogue, templates)});
            break;
        case Strategy::SectionFewshot:
            for (const Example& ex : data.eval) {
                // MEDICATIONS belongs to two sections; the first (history) is used.
                const MajorSection section = major_sections_of(*ex.header).front();
                jobs.push_back({ex.id, std::string(to_string(section)),
                                render_section_fewshot_a(ex.dialogue, section, templates)});
            }
            break;
        case Strategy::PerspectiveShift:
            for (const Example& ex : data.eval) {
                jobs.push_back({ex.id, "", render_perspective_shift(ex.dialogue, 1, templates)});
            }
            break;
        case Strategy::TwoStage:
            for (const Example& ex : data.eval) jobs.push_back({ex.id, "", render_two_stage(ex.dialogue, 1, templates)});
            break;
        case Strategy::SectionAssembly:
            for (const Example& ex : data.eval) {
                for (MajorSection s : all_major_sections()) {
                    jobs.push_back({ex.id, std::string(to_string(s)), render_section_fewshot_a(ex.dialogue, s, templates)});
                }
            }
            break;
    }

    std::vector<BatchItem> items = runner.run(jobs, 1);
    std::map<std::string, std::string> final_keys;

    if (config.strategy == Strategy::PerspectiveShift || config.strategy == Strategy::TwoStage) {
        std::vector<Job> second;
        for (std::size_t i = 0; i < jobs.size(); ++i) {
            if (!items[i].ok()) continue;
            const std::string& stage1 = items[i].completion->text;
            if (trim(stage1).empty()) {
                manifest.errors[jobs[i].example_id] = "stage 1 returned empty text";
                continue;
            }
            Prompt p = config.strategy == Strategy::PerspectiveShift ? render_perspective_shift(stage1, 2, templates)
                                                                     : render_two_stage(stage1, 2, templates);
            second.push_back({jobs[i].example_id, "", std::move(p)});
        }
        auto second_items = runner.run(second, 2);
        for (std::size_t i = 0; i < second.size(); ++i) {
            if (!second_items[i].ok()) continue;
            result.generations[second[i].example_id] = second_items[i].completion->text;
            final_keys[second[i].example_id] = second_items[i].completion->prompt_hash;
        }
    } else if (config.strategy == Strategy::SectionAssembly) {
        std::map<std::string, std::vector<std::size_t>> by_example;
        for (std::size_t i = 0; i < jobs.size(); ++i) by_example[jobs[i].example_id].push_back(i);
        for (const auto& [id, idx] : by_example) {
            std::string note;
            std::string keys;
            bool ok = true;
            for (std::size_t i : idx) {
                if (!items[i].ok()) {
                    ok = false;
                    break;
                }
                if (!note.empty()) note += "\n\n";
                note += jobs[i].section + "\n" + trim(items[i].completion->text);
                keys += items[i].completion->prompt_hash;
            }
            if (!ok) continue;
            result.generations[id] = note;
            final_keys[id] = sha256_hex(keys);
        }
    } else {
        for (std::size_t i = 0; i < jobs.size(); ++i) {
            if (!items[i].ok()) continue;
            result.generations[jobs[i].example_id] = items[i].completion->text;
            final_keys[jobs[i].example_id] = items[i].completion->prompt_hash;
        }
    }

    for (const auto& [id, text] : result.generations) manifest.outputs[id] = sha256_hex(text);
    manifest.output_keys = std::move(final_keys);

    if (has_references(data.eval)) result.report = corpus_report(data.eval, result.generations);

    manifest.finished_at = context.clock();
    result.run_dir = make_run_dir(config.output_root, "run-", manifest.started_at, manifest.config_digest);
    write_file_atomic(result.run_dir / "manifest.json", manifest.to_json());
    write_file_atomic(result.run_dir / "generations.csv", render_generations(result.generations));
    if (result.report) {
        write_file_atomic(result.run_dir / "report.json", result.report->to_json());
        write_file_atomic(result.run_dir / "report.txt", result.report->to_text());
        write_file_atomic(result.run_dir / "per_example.csv", result.report->to_csv());
    }
    return result;
}

// ---------------------------------------------------------------------------
// Ablation and stability

namespace {

std::string fixed(double v, int precision) {
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(precision) << v;
    return ss.str();
}

const std::vector<std::string>& table_metrics() {
    static const std::vector<std::string> m = {"rouge1_f1", "rouge2_f1", "rougeL_f1", "coverage", "density",
                                               "compression"};
    return m;
}

std::string value_or_blank(const std::map<std::string, double>& m, const std::string& key, double scale,
                           int precision) {
    auto it = m.find(key);
    return it == m.end() ? "-" : fixed(it->second * scale, precision);
}

double metric_scale(const std::string& key) { return key.rfind("rouge", 0) == 0 ? 100.0 : 1.0; }

std::string render_table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
    std::vector<std::size_t> widths(header.size());
    for (std::size_t c = 0; c < header.size(); ++c) widths[c] = header[c].size();
    for (const auto& r : rows) {
        for (std::size_t c = 0; c < r.size(); ++c) widths[c] = std::max(widths[c], r[c].size());
    }
    std::ostringstream out;
    auto line = [&](const std::vector<std::string>& cells) {
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (c) out << "  ";
            if (c == 0) {
                out << std::left << std::setw(static_cast<int>(widths[c])) << cells[c];
            } else {
                out << std::right << std::setw(static_cast<int>(widths[c])) << cells[c];
            }
        }
        out << '\n';
    };
    line(header);
    std::vector<std::string> rule;
    for (auto w : widths) rule.emplace_back(w, '-');
    line(rule);
    for (const auto& r : rows) line(r);
    return out.str();
}

}  // namespace

std::string AblationReport::to_json() const {
    ojson rows_json = ojson::array();
    for (const auto& r : rows) {
        ojson macro = ojson::object();
        for (const auto& [k, v] : r.macro) macro[k] = v;
        rows_json.push_back(ojson{{"k", r.k}, {"run_dir", r.run_dir.filename().generic_string()}, {"macro", macro}});
    }
    return ojson{{"rows", rows_json}}.dump(2) + "\n";
}

std::string AblationReport::to_text() const {
    std::vector<std::string> header{"k", "R1", "R2", "RL", "EFC", "EFD", "CR"};
    std::vector<std::vector<std::string>> out;
    for (const auto& r : rows) {
        std::vector<std::string> cells{std::to_string(r.k)};
        for (const auto& m : table_metrics()) cells.push_back(value_or_blank(r.macro, m, metric_scale(m), 2));
        out.push_back(std::move(cells));
    }
    return render_table(header, out);
}

AblationReport cmd_ablate_k(const PipelineConfig& config, const std::vector<std::size_t>& k_values,
                            PipelineContext& context) {
    if (config.task != Task::A) {
        throw Error(ErrorCode::UnsupportedTask, "k ablation is Task A only; full-note examples exceed the context window");
    }
    if (k_values.empty()) throw Error(ErrorCode::InvalidArgument, "no k values given");
    AblationReport report;
    for (std::size_t k : k_values) {
        PipelineConfig cfg = config;
        cfg.k = k;
        RunResult run = cmd_run(cfg, context);
        if (!run.report) throw Error(ErrorCode::MissingGeneration, "ablation needs reference summaries");
        report.rows.push_back({k, run.report->macro, run.run_dir});
    }
    std::filesystem::create_directories(config.output_root);
    write_file_atomic(config.output_root / "ablation.json", report.to_json());
    write_file_atomic(config.output_root / "ablation.txt", report.to_text());
    return report;
}

std::string StabilityReport::to_json() const {
    ojson runs_json = ojson::array();
    for (std::size_t i = 0; i < runs.size(); ++i) {
        ojson macro = ojson::object();
        for (const auto& [k, v] : runs[i]) macro[k] = v;
        runs_json.push_back(ojson{{"run", i + 1}, {"macro", macro}});
    }
    ojson agg = ojson::object();
    for (const auto& [k, s] : aggregate) {
        agg[k] = ojson{{"min", s.min}, {"max", s.max}, {"mean", s.mean}, {"stddev", s.stddev}};
    }
    return ojson{{"runs", runs_json}, {"aggregate", agg}}.dump(2) + "\n";
}

std::string StabilityReport::to_text() const {
    std::vector<std::string> header{"run", "R1", "R2", "RL", "EFC", "EFD", "CR"};
    std::vector<std::vector<std::string>> out;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        std::vector<std::string> cells{"Run " + std::to_string(i + 1)};
        for (const auto& m : table_metrics()) cells.push_back(value_or_blank(runs[i], m, metric_scale(m), 2));
        out.push_back(std::move(cells));
    }
    std::vector<std::string> agg{"mean+-sd"};
    for (const auto& m : table_metrics()) {
        auto it = aggregate.find(m);
        const double s = metric_scale(m);
        agg.push_back(it == aggregate.end() ? "-" : fixed(it->second.mean * s, 2) + "+-" + fixed(it->second.stddev * s, 2));
    }
    out.push_back(std::move(agg));
    return render_table(header, out);
}

StabilityReport cmd_stability(const PipelineConfig& config, std::size_t n_runs, bool cache_bypass,
                              PipelineContext& context) {
    if (n_runs < 2) throw Error(ErrorCode::InvalidArgument, "stability needs at least 2 runs");
    StabilityReport report;
    for (std::size_t i = 0; i < n_runs; ++i) {
        PipelineConfig cfg = config;
        cfg.bypass_cache_reads = cache_bypass;
        RunResult run = cmd_run(cfg, context);
        if (!run.report) throw Error(ErrorCode::MissingGeneration, "stability needs reference summaries");
        report.runs.push_back(run.report->macro);
    }
    for (const auto& [key, first] : report.runs.front()) {
        std::vector<double> values;
        for (const auto& r : report.runs) {
            auto it = r.find(key);
            if (it != r.end()) values.push_back(it->second);
        }
        if (values.size() != report.runs.size()) continue;
        MetricSpread s;
        s.min = *std::min_element(values.begin(), values.end());
        s.max = *std::max_element(values.begin(), values.end());
        // Shifted by the first value so identical runs give exactly zero spread.
        const double shift = values.front();
        double sum = 0.0;
        for (double v : values) sum += v - shift;
        const double offset = sum / static_cast<double>(values.size());
        s.mean = shift + offset;
        double ss = 0.0;
        for (double v : values) ss += (v - shift - offset) * (v - shift - offset);
        s.stddev = std::sqrt(ss / static_cast<double>(values.size() - 1));
        report.aggregate[key] = s;
    }
    std::filesystem::create_directories(config.output_root);
    write_file_atomic(config.output_root / "stability.json", report.to_json());
    write_file_atomic(config.output_root / "stability.txt", report.to_text());
    return report;
}

// ---------------------------------------------------------------------------
// Classification

namespace {

void fold_abstentions(AccuracyReport& r, std::size_t abstained) {
    r.abstained = abstained;
    const std::size_t denom = r.total + abstained;
    r.accuracy = denom ? static_cast<double>(r.correct) / static_cast<double>(denom) : 0.0;
}

std::vector<HeaderPrediction> restrict_to(const std::vector<HeaderPrediction>& preds, const ExampleSet& set) {
    std::vector<HeaderPrediction> out;
    for (const auto& p : preds) {
        if (set.find(p.example_id)) out.push_back(p);
    }
    return out;
}

}  // namespace

std::string ClassificationRun::to_json() const {
    ojson j;
    auto add = [&](const char* name, const std::optional<AccuracyReport>& r) {
        j[name] = r ? ojson::parse(r->to_json()) : ojson(nullptr);
    };
    add("llm", llm);
    add("finetuned", finetuned);
    add("ensemble", ensemble);
    j["unparseable"] = unparseable;
    ojson preds = ojson::array();
    for (const auto& p : final_predictions) {
        preds.push_back(ojson{{"id", p.example_id},
                              {"label", std::string(medsum::to_string(p.label))},
                              {"source", std::string(medsum::to_string(p.source))}});
    }
    j["predictions"] = preds;
    return j.dump(2) + "\n";
}

std::string ClassificationRun::to_text() const {
    std::vector<std::vector<std::string>> rows;
    auto add = [&](const char* name, const std::optional<AccuracyReport>& r) {
        if (!r) return;
        rows.push_back({name, fixed(r->accuracy * 100.0, 3), std::to_string(r->correct),
                        std::to_string(r->total + r->abstained)});
    };
    add("LLM", llm);
    add("Fine-tuned", finetuned);
    add("Ensemble", ensemble);
    return render_table({"model", "accuracy", "correct", "total"}, rows);
}

ClassificationRun cmd_classify(const PipelineConfig& config, ClassifyMode mode, PipelineContext& context) {
    if (config.task != Task::A) throw Error(ErrorCode::UnsupportedTask, "header classification is a Task A problem");
    const bool need_finetuned = mode != ClassifyMode::LlmOnly;
    if (need_finetuned && !config.finetuned_predictions) {
        throw Error(ErrorCode::MissingPredictions, "fine-tuned prediction file required for this mode");
    }
    config.generation.validate();
    const Datasets data = load_datasets(config);
    const ExampleSet& gold = data.eval;
    ClassificationRun out;

    std::map<std::string, SectionHeader> llm_labels;
    if (mode != ClassifyMode::FinetunedOnly) {
        std::vector<HeaderPrediction> llm_preds;
        if (config.llm_predictions) {
            llm_preds = restrict_to(
                parse_predictions(read_file(*config.llm_predictions), PredictionSource::Llm,
                                  config.llm_predictions->string()),
                gold);
        } else {
            const TemplateSet templates =
                config.template_dir ? TemplateSet::load_directory(*config.template_dir) : TemplateSet::builtin();
            std::vector<Prompt> prompts;
            for (const Example& ex : gold) prompts.push_back(render_header_classify(ex.dialogue, templates));
            std::optional<ResponseCache> cache;
            if (config.cache_dir) cache.emplace(*config.cache_dir);
            ClientOptions opts;
            opts.sleep = context.sleep;
            opts.bypass_cache_reads = config.bypass_cache_reads;
            auto items = run_batch(context.provider, prompts, config.generation, cache ? &*cache : nullptr,
                                   config.max_in_flight, opts);
            for (std::size_t i = 0; i < gold.size(); ++i) {
                if (!items[i].ok()) {
                    out.unparseable.push_back(gold[i].id);
                    continue;
                }
                try {
                    llm_preds.push_back({gold[i].id, parse_llm_label(items[i].completion->text), PredictionSource::Llm});
                } catch (const Error&) {
                    out.unparseable.push_back(gold[i].id);
                }
            }
        }
        for (const auto& p : llm_preds) llm_labels[p.example_id] = p.label;
        out.llm = accuracy(llm_preds, gold);
        fold_abstentions(*out.llm, gold.size() - llm_preds.size());
    }

    std::map<std::string, SectionHeader> ft_labels;
    if (config.finetuned_predictions) {
        auto ft = restrict_to(load_finetuned_predictions(*config.finetuned_predictions), gold);
        for (const auto& p : ft) ft_labels[p.example_id] = p.label;
        out.finetuned = accuracy(ft, gold);
        fold_abstentions(*out.finetuned, gold.size() - ft.size());
    }

    if (mode == ClassifyMode::Ensemble) {
        EnsembleRule rule{config.override_labels};
        std::vector<HeaderPrediction> ens;
        for (const Example& ex : gold) {
            auto l = llm_labels.find(ex.id);
            auto f = ft_labels.find(ex.id);
            if (l != llm_labels.end() && f != ft_labels.end()) {
                ens.push_back({ex.id,
                               ensemble_predict({ex.id, l->second, PredictionSource::Llm},
                                                {ex.id, f->second, PredictionSource::Finetuned}, rule),
                               PredictionSource::Ensemble});
            } else if (f != ft_labels.end() && rule.override_labels.contains(f->second)) {
                ens.push_back({ex.id, f->second, PredictionSource::Ensemble});
            } else if (l != llm_labels.end()) {
                ens.push_back({ex.id, l->second, PredictionSource::Ensemble});
            }
        }
        out.ensemble = accuracy(ens, gold);
        fold_abstentions(*out.ensemble, gold.size() - ens.size());
        out.final_predictions = std::move(ens);
    } else if (mode == ClassifyMode::LlmOnly) {
        for (const auto& [id, label] : llm_labels) out.final_predictions.push_back({id, label, PredictionSource::Llm});
    } else {
        for (const auto& [id, label] : ft_labels) {
            out.final_predictions.push_back({id, label, PredictionSource::Finetuned});
        }
    }

    const auto dir = make_run_dir(config.output_root, "classify-", context.clock(), config.digest());
    write_file_atomic(dir / "classification.json", out.to_json());
    write_file_atomic(dir / "classification.txt", out.to_text());
    return out;
}

// ---------------------------------------------------------------------------
// Files

std::map<std::string, std::string> load_generations(const std::filesystem::path& path) {
    const csv::Table table = csv::parse(read_file(path));
    if (table.header.size() < 2) throw Error(ErrorCode::MalformedFile, path.string() + ": need id and generation columns");
    std::size_t id_col = 0;
    std::size_t gen_col = 1;
    for (std::size_t c = 0; c < table.header.size(); ++c) {
        if (table.header[c] == "id") id_col = c;
        if (table.header[c] == "generation") gen_col = c;
    }
    std::map<std::string, std::string> out;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        if (!out.emplace(table.rows[r][id_col], table.rows[r][gen_col]).second) {
            throw Error(ErrorCode::DuplicateId, path.string() + " line " + std::to_string(table.row_lines[r]) + ": " +
                                                    table.rows[r][id_col]);
        }
    }
    return out;
}

std::string render_generations(const std::map<std::string, std::string>& generations) {
    std::vector<csv::Row> rows;
    rows.reserve(generations.size());
    for (const auto& [id, text] : generations) rows.push_back({id, text});
    return csv::render({"id", "generation"}, rows);
}

std::map<std::string, std::map<std::string, double>> load_external_metrics(const std::filesystem::path& path) {
    const csv::Table table = csv::parse(read_file(path));
    std::map<std::string, std::map<std::string, double>> out;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        auto& slot = out[table.rows[r][0]];
        for (std::size_t c = 1; c < table.header.size(); ++c) {
            const std::string& cell = table.rows[r][c];
            if (cell.empty()) continue;
            double v = 0.0;
            const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size()) {
                throw Error(ErrorCode::MalformedFile, path.string() + " line " + std::to_string(table.row_lines[r]) +
                                                          ": not a number '" + cell + "'");
            }
            slot[table.header[c]] = v;
        }
    }
    return out;
}

}  // namespace medsum
