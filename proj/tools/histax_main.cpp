// Command-line entry point: induce / expand / enrich / pipeline / evaluate /
// stats over checkpointed run directories.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <set>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "histax/config.hpp"
#include "histax/domains.hpp"
#include "histax/enricher.hpp"
#include "histax/expander.hpp"
#include "histax/gateway.hpp"
#include "histax/inducer.hpp"
#include "histax/ingest.hpp"
#include "histax/jsonio.hpp"
#include "histax/metrics.hpp"
#include "histax/taxonomy.hpp"

namespace fs = std::filesystem;
using histax::Error;
using histax::ErrorCode;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string run_dir;
    std::string templates_override;
    std::string fixtures_path;
    bool mock = false;
    bool live = false;
    uint64_t seed = 0;
    double threshold_override = -1.0;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool needs_provider) {
    cmd->add_option("--config", args.config_path, "run config JSON");
    cmd->add_option("--run-dir", args.run_dir, "output directory (default: runs/<auto>)");
    cmd->add_option("--templates", args.templates_override, "prompt template directory");
    cmd->add_option("--threshold", args.threshold_override,
                    "similarity threshold h shared by every stage");
    if (needs_provider) {
        cmd->add_flag("--mock", args.mock, "use the deterministic mock provider");
        cmd->add_flag("--live", args.live, "use the live HTTP providers");
        cmd->add_option("--fixtures", args.fixtures_path, "mock fixture file or directory");
        cmd->add_option("--seed", args.seed, "mock embedding seed");
    }
}

nlohmann::json load_fixtures(const std::string& path) {
    if (path.empty()) return nlohmann::json::object();
    if (fs::is_directory(path)) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(path)) {
            if (entry.path().extension() == ".json") files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());
        nlohmann::json merged = {{"chat", nlohmann::json::object()},
                                 {"embeddings", nlohmann::json::object()}};
        for (const auto& f : files) {
            nlohmann::json doc = histax::load_json_file(f.string());
            if (doc.contains("chat")) {
                for (auto it = doc["chat"].begin(); it != doc["chat"].end(); ++it) {
                    auto& rules = merged["chat"][it.key()];
                    if (!rules.is_array()) rules = nlohmann::json::array();
                    for (const auto& rule : it.value()) rules.push_back(rule);
                }
            }
            if (doc.contains("embeddings")) {
                for (auto it = doc["embeddings"].begin(); it != doc["embeddings"].end(); ++it) {
                    if (it.key() == "vectors" || it.key() == "sparse") {
                        for (auto vit = it.value().begin(); vit != it.value().end(); ++vit) {
                            merged["embeddings"][it.key()][vit.key()] = vit.value();
                        }
                    } else {
                        merged["embeddings"][it.key()] = it.value();
                    }
                }
            }
        }
        return merged;
    }
    return histax::load_json_file(path);
}

std::string fixtures_hash(const std::string& path) {
    if (path.empty()) return "";
    if (fs::is_directory(path)) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(path)) {
            if (entry.path().extension() == ".json") files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());
        std::string all;
        for (const auto& f : files) all += histax::read_file(f.string());
        return histax::fnv1a_hex(all);
    }
    return histax::fnv1a_hex(histax::read_file(path));
}

struct RunContext {
    histax::RunConfig config;
    std::shared_ptr<histax::ProviderGateway> gateway;
    std::shared_ptr<histax::TranscriptWriter> transcript;
    std::string run_dir;
    nlohmann::json manifest;
    std::vector<std::string> warnings;
};

std::string default_run_dir(const std::string& stage, const histax::RunConfig& cfg) {
    auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char stamp[32];
    std::tm tm_utc;
    gmtime_r(&now, &tm_utc);
    std::strftime(stamp, sizeof(stamp), "%Y%m%d-%H%M%S", &tm_utc);
    std::string cfg_hash = histax::fnv1a_hex(cfg.to_json().dump()).substr(0, 8);
    return "runs/" + stage + "-" + cfg_hash + "-" + stamp;
}

RunContext make_context(const std::string& stage, const CommonArgs& args, bool needs_provider) {
    RunContext ctx;
    ctx.config = args.config_path.empty() ? histax::RunConfig::defaults()
                                          : histax::RunConfig::load(args.config_path);
    if (args.threshold_override > 0.0) {
        if (args.threshold_override >= 1.0) {
            throw Error(ErrorCode::ConfigInvalid, "--threshold must lie in (0,1)");
        }
        ctx.config.threshold = args.threshold_override;
    }
    if (!args.templates_override.empty()) ctx.config.template_dir = args.templates_override;

    ctx.run_dir = args.run_dir.empty() ? default_run_dir(stage, ctx.config) : args.run_dir;
    fs::create_directories(ctx.run_dir);

    ctx.manifest = {
        {"subcommand", stage},
        {"config", ctx.config.to_json()},
        {"seed", args.seed},
        {"mock", args.mock},
        {"inputs", nlohmann::json::object()},
    };

    if (needs_provider) {
        if (args.mock == args.live) {
            throw Error(ErrorCode::ConfigInvalid,
                        "choose exactly one of --mock or --live (runs against paid providers "
                        "must be explicit)");
        }
        ctx.transcript =
            std::make_shared<histax::TranscriptWriter>(ctx.run_dir + "/transcript.jsonl");
        std::shared_ptr<histax::ChatProvider> chat;
        std::shared_ptr<histax::EmbedProvider> embed;
        if (args.mock) {
            nlohmann::json fixtures = load_fixtures(args.fixtures_path);
            chat = std::make_shared<histax::MockChatProvider>(fixtures, args.seed);
            embed = std::make_shared<histax::MockEmbedProvider>(fixtures, args.seed,
                                                                ctx.config.embedding_dimension);
            ctx.manifest["fixtures_hash"] = fixtures_hash(args.fixtures_path);
        } else {
            chat = std::make_shared<histax::HttpChatProvider>(ctx.config.http,
                                                              ctx.config.providers);
            auto embed_settings = ctx.config.providers.count(ctx.config.embedding_model)
                                      ? ctx.config.providers.at(ctx.config.embedding_model)
                                      : ctx.config.http;
            embed = std::make_shared<histax::HttpEmbedProvider>(
                embed_settings, ctx.config.embedding_model, 0);
        }
        histax::GatewayOptions options;
        options.retry_max = ctx.config.retry_max;
        options.retry_backoff_ms = ctx.config.retry_backoff_ms;
        options.rate_limit_per_minute = ctx.config.rate_limit_per_minute;
        options.parallel_limit = ctx.config.parallelism;
        options.template_dir = ctx.config.template_dir;
        ctx.gateway = std::make_shared<histax::ProviderGateway>(chat, embed, options,
                                                                ctx.transcript);
    }
    return ctx;
}

void note_input(RunContext& ctx, const std::string& key, const std::string& path) {
    if (path.empty()) return;
    ctx.manifest["inputs"][key] = {{"path", path},
                                   {"fnv1a", histax::fnv1a_hex(histax::read_file(path))}};
}

void finish_run(RunContext& ctx, nlohmann::json summary) {
    summary["warnings"] = ctx.warnings;
    histax::write_file_atomic(ctx.run_dir + "/manifest.json", ctx.manifest.dump(2) + "\n");
    histax::write_file_atomic(ctx.run_dir + "/summary.json", summary.dump(2) + "\n");
    for (const auto& w : ctx.warnings) std::cerr << "warning: " << w << "\n";
}

void write_jsonl(const std::string& path, const std::vector<nlohmann::json>& entries) {
    std::string body;
    for (const auto& e : entries) body += e.dump() + "\n";
    histax::write_file_atomic(path, body);
}

std::vector<std::string> leaf_check_failures(const std::set<std::string>& expected,
                                             const histax::Taxonomy& tax) {
    std::set<std::string> present;
    for (const auto& id : tax.node_ids()) {
        const auto& node = tax.node(id);
        present.insert(node.label);
        for (const auto& alias : node.aliases) present.insert(alias);
    }
    std::vector<std::string> missing;
    for (const auto& label : expected) {
        if (!present.count(label)) missing.push_back(label);
    }
    return missing;
}

void require_invariants(const histax::Taxonomy& tax, const std::string& stage) {
    auto bad = tax.validate(true);
    if (!bad.empty()) {
        throw Error(ErrorCode::SchemaViolation, stage + " output: " + bad.front());
    }
}

// ---------------------------------------------------------------------------

std::vector<histax::EventRecord> extract_from_chapters(const std::string& chapters_dir,
                                                       RunContext& ctx) {
    // <book>/<chapter>.txt, walked in sorted order
    std::vector<std::pair<std::string, fs::path>> chapters;
    for (const auto& entry : fs::recursive_directory_iterator(chapters_dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".txt") {
            chapters.emplace_back(entry.path().parent_path().filename().string(), entry.path());
        }
    }
    std::sort(chapters.begin(), chapters.end(),
              [](const auto& a, const auto& b) { return a.second < b.second; });
    if (chapters.empty()) {
        throw Error(ErrorCode::FileMissing, "no <book>/<chapter>.txt files under " + chapters_dir);
    }
    std::vector<histax::EventRecord> events;
    const auto& extractors = ctx.config.role_list(histax::RoleName::Extractor);
    for (const auto& [book, path] : chapters) {
        std::string chapter = path.stem().string();
        auto result = histax::extract_events(book, chapter, histax::read_file(path.string()),
                                             extractors, *ctx.gateway);
        for (auto& w : result.warnings) ctx.warnings.push_back(w);
        for (auto& r : result.records) events.push_back(std::move(r));
    }
    return events;
}

nlohmann::json run_induce_stage(RunContext& ctx, const std::vector<histax::EventRecord>& events) {
    auto output = histax::run_induction(events, ctx.config, *ctx.gateway);
    for (const auto& w : output.warnings) ctx.warnings.push_back(w);

    require_invariants(output.taxonomy, "induce");
    nlohmann::json per_domain = nlohmann::json::object();
    for (const auto& [domain, info] : output.per_domain) {
        if (info.top_width >= histax::kInductionStopWidth) {
            throw Error(ErrorCode::NonConvergence,
                        "domain '" + domain + "' finished at width " +
                            std::to_string(info.top_width));
        }
        per_domain[domain] = {{"rounds", info.rounds}, {"top_width", info.top_width}};
    }
    std::set<std::string> types;
    for (const auto& e : events) types.insert(histax::normalize_ws(e.event_type));
    auto missing = leaf_check_failures(types, output.taxonomy);
    if (!missing.empty()) {
        throw Error(ErrorCode::SchemaViolation,
                    "induce dropped event type '" + missing.front() + "'");
    }

    output.taxonomy.save(ctx.run_dir + "/induced.json");
    histax::save_events(ctx.run_dir + "/events_classified.jsonl", output.classified_events);
    return {{"stage", "induce"},
            {"nodes", output.taxonomy.node_count()},
            {"events", output.classified_events.size()},
            {"per_domain", per_domain}};
}

nlohmann::json run_expand_stage(RunContext& ctx, const histax::Taxonomy& input,
                                histax::Taxonomy& out_tax) {
    auto output = histax::run_expansion(input, ctx.config, *ctx.gateway);
    for (const auto& w : output.warnings) ctx.warnings.push_back(w);

    require_invariants(output.taxonomy, "expand");
    auto dupes = histax::find_surviving_duplicates(output.taxonomy, ctx.config.threshold,
                                                   *ctx.gateway);
    if (!dupes.empty()) {
        throw Error(ErrorCode::SchemaViolation,
                    "expand left a duplicate pair above threshold: " + dupes.front().a + "/" +
                        dupes.front().b);
    }
    std::set<std::string> input_leaves;
    for (const auto& id : input.node_ids()) {
        if (input.children(id).empty()) input_leaves.insert(input.node(id).label);
    }
    auto missing = leaf_check_failures(input_leaves, output.taxonomy);
    if (!missing.empty()) {
        throw Error(ErrorCode::SchemaViolation,
                    "expand dropped leaf '" + missing.front() + "'");
    }

    output.taxonomy.save(ctx.run_dir + "/expanded.json");
    write_jsonl(ctx.run_dir + "/edits.jsonl", output.edit_log);
    out_tax = std::move(output.taxonomy);
    return {{"stage", "expand"},
            {"nodes", out_tax.node_count()},
            {"edits", output.edit_log.size()},
            {"merges",
             {{"within", output.within_domain_merges},
              {"cross", output.cross_domain_merges},
              {"global_within", output.global_within_merges},
              {"global_cross", output.global_cross_merges}}}};
}

nlohmann::json run_enrich_stage(RunContext& ctx, const histax::Taxonomy& input,
                                const std::vector<histax::EventRecord>& events,
                                const std::vector<histax::TopicEntry>& topics,
                                const std::vector<histax::RelationEntry>& relations,
                                histax::Taxonomy& out_tax) {
    auto output =
        histax::run_enrichment(input, events, topics, relations, ctx.config, *ctx.gateway);
    for (const auto& w : output.warnings) ctx.warnings.push_back(w);

    require_invariants(output.taxonomy, "enrich");
    if (output.taxonomy.node_count() < input.node_count()) {
        throw Error(ErrorCode::SchemaViolation, "enrichment shrank the taxonomy");
    }
    for (const auto& id : input.node_ids()) {
        const auto& before = input.node(id);
        const auto& after = output.taxonomy.node(id);
        if (before.parent != after.parent) {
            throw Error(ErrorCode::SchemaViolation, "enrichment moved existing node " + id);
        }
    }

    output.taxonomy.save(ctx.run_dir + "/enriched.json");
    write_jsonl(ctx.run_dir + "/decisions.jsonl", output.decision_log);
    out_tax = std::move(output.taxonomy);
    return {{"stage", "enrich"},
            {"nodes", out_tax.node_count()},
            {"inserted", output.inserted},
            {"duplicates", output.duplicates}};
}

// ---------------------------------------------------------------------------

int dispatch(const std::string& stage, const CommonArgs& common,
             const std::map<std::string, std::string>& paths, const std::string& mode,
             const std::string& report_path) {
    RunContext ctx = make_context(stage, common, stage != "stats");
    try {
        nlohmann::json summary = nlohmann::json::array();
        auto path_of = [&paths](const std::string& key) {
            auto it = paths.find(key);
            return it == paths.end() ? std::string() : it->second;
        };

        if (stage == "induce" || stage == "pipeline") {
            std::vector<histax::EventRecord> events;
            if (!path_of("events").empty()) {
                note_input(ctx, "events", path_of("events"));
                events = histax::load_events(path_of("events"));
            } else if (!path_of("chapters").empty()) {
                events = extract_from_chapters(path_of("chapters"), ctx);
                histax::save_events(ctx.run_dir + "/events_extracted.jsonl", events);
            } else {
                throw Error(ErrorCode::ConfigInvalid, "induce needs --events or --chapters");
            }
            summary.push_back(run_induce_stage(ctx, events));

            if (stage == "pipeline") {
                histax::Taxonomy induced = histax::Taxonomy::load(ctx.run_dir + "/induced.json");
                histax::Taxonomy expanded;
                summary.push_back(run_expand_stage(ctx, induced, expanded));
                auto classified = histax::load_events(ctx.run_dir + "/events_classified.jsonl");
                std::vector<histax::TopicEntry> topics;
                std::vector<histax::RelationEntry> relations;
                if (!path_of("topics").empty()) {
                    note_input(ctx, "topics", path_of("topics"));
                    topics = histax::load_topics(path_of("topics"));
                }
                if (!path_of("relations").empty()) {
                    note_input(ctx, "relations", path_of("relations"));
                    relations = histax::load_relations(path_of("relations"));
                }
                histax::Taxonomy enriched;
                summary.push_back(run_enrich_stage(ctx, expanded, classified, topics, relations,
                                                   enriched));
            }
        } else if (stage == "expand") {
            note_input(ctx, "taxonomy", path_of("taxonomy"));
            histax::Taxonomy input = histax::Taxonomy::load(path_of("taxonomy"));
            histax::Taxonomy expanded;
            summary.push_back(run_expand_stage(ctx, input, expanded));
        } else if (stage == "enrich") {
            note_input(ctx, "taxonomy", path_of("taxonomy"));
            note_input(ctx, "events", path_of("events"));
            histax::Taxonomy input = histax::Taxonomy::load(path_of("taxonomy"));
            auto events = histax::load_events(path_of("events"));
            std::vector<histax::TopicEntry> topics;
            std::vector<histax::RelationEntry> relations;
            if (!path_of("topics").empty()) {
                note_input(ctx, "topics", path_of("topics"));
                topics = histax::load_topics(path_of("topics"));
            }
            if (!path_of("relations").empty()) {
                note_input(ctx, "relations", path_of("relations"));
                relations = histax::load_relations(path_of("relations"));
            }
            histax::Taxonomy enriched;
            summary.push_back(run_enrich_stage(ctx, input, events, topics, relations, enriched));
        } else if (stage == "evaluate") {
            note_input(ctx, "taxonomy", path_of("taxonomy"));
            histax::Taxonomy taxonomy = histax::Taxonomy::load(path_of("taxonomy"));
            std::optional<histax::Taxonomy> reference;
            if (!path_of("reference").empty()) {
                note_input(ctx, "reference", path_of("reference"));
                reference = histax::Taxonomy::load(path_of("reference"));
            }
            std::vector<std::string> heldout;
            if (!path_of("events").empty()) {
                note_input(ctx, "events", path_of("events"));
                for (const auto& e : histax::load_events(path_of("events"))) {
                    heldout.push_back(e.event_type);
                }
            }
            histax::EvaluateInputs inputs;
            inputs.taxonomy = &taxonomy;
            if (reference) inputs.reference = &*reference;
            if (!heldout.empty()) inputs.heldout = &heldout;
            inputs.mode =
                mode == "global" ? histax::RootMode::Global : histax::RootMode::PerDomain;
            inputs.threshold = ctx.config.threshold;
            const auto& judge = ctx.config.role(histax::RoleName::GranularityJudge);
            inputs.granularity_judge = &judge;

            histax::MetricReport report = histax::evaluate(inputs, *ctx.gateway);
            std::string name = fs::path(path_of("taxonomy")).stem().string();
            histax::write_file_atomic(ctx.run_dir + "/report.json",
                                      report.to_json().dump(2) + "\n");
            histax::write_file_atomic(ctx.run_dir + "/report.md", report.to_markdown(name));
            if (!report_path.empty()) {
                if (report_path.size() > 3 &&
                    report_path.substr(report_path.size() - 3) == ".md") {
                    histax::write_file_atomic(report_path, report.to_markdown(name));
                } else {
                    histax::write_file_atomic(report_path, report.to_json().dump(2) + "\n");
                }
            }
            std::cout << report.to_markdown(name);
            summary.push_back({{"stage", "evaluate"}, {"report", ctx.run_dir + "/report.json"}});
        } else if (stage == "stats") {
            histax::Taxonomy taxonomy = histax::Taxonomy::load(path_of("taxonomy"));
            auto stats = taxonomy.structural_stats(
                mode == "global" ? histax::RootMode::Global : histax::RootMode::PerDomain);
            nlohmann::json out = {{"max_depth", stats.max_depth},
                                  {"avg_depth", stats.avg_depth},
                                  {"branch_factor", stats.branch_factor}};
            std::cout << out.dump(2) << "\n";
            summary.push_back({{"stage", "stats"}});
        }

        finish_run(ctx, {{"stages", std::move(summary)}});
        return 0;
    } catch (const Error& e) {
        nlohmann::json err = {{"error", histax::error_code_name(e.code())},
                              {"message", e.what()}};
        histax::write_file_atomic(ctx.run_dir + "/error.json", err.dump(2) + "\n");
        std::cerr << err.dump() << "\n";
        return 1;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"historical event taxonomy construction and evaluation"};
    app.require_subcommand(1);

    struct SubArgs {
        CommonArgs common;
        std::map<std::string, std::string> paths;
        std::string mode = "per-domain";
        std::string report_path;
    };
    std::map<std::string, SubArgs> sub_args;

    auto add_path = [](CLI::App* cmd, SubArgs& args, const std::string& key,
                       const std::string& help, bool required = false) {
        auto* opt = cmd->add_option("--" + key, args.paths[key], help);
        if (required) opt->required();
    };

    auto* induce = app.add_subcommand("induce", "extract/classify events, induce the hierarchy");
    add_common(induce, sub_args["induce"].common, true);
    add_path(induce, sub_args["induce"], "events", "pre-extracted events JSONL");
    add_path(induce, sub_args["induce"], "chapters", "corpus directory <book>/<chapter>.txt");

    auto* expand = app.add_subcommand("expand", "dedup + layer-wise expansion + global dedup");
    add_common(expand, sub_args["expand"].common, true);
    add_path(expand, sub_args["expand"], "taxonomy", "input checkpoint", true);

    auto* enrich = app.add_subcommand("enrich", "insert frequency/topic/relation candidates");
    add_common(enrich, sub_args["enrich"].common, true);
    add_path(enrich, sub_args["enrich"], "taxonomy", "input checkpoint", true);
    add_path(enrich, sub_args["enrich"], "events", "events JSONL", true);
    add_path(enrich, sub_args["enrich"], "topics", "topics JSON");
    add_path(enrich, sub_args["enrich"], "relations", "relations JSON");

    auto* pipeline = app.add_subcommand("pipeline", "induce, expand, enrich in sequence");
    add_common(pipeline, sub_args["pipeline"].common, true);
    add_path(pipeline, sub_args["pipeline"], "events", "pre-extracted events JSONL");
    add_path(pipeline, sub_args["pipeline"], "chapters", "corpus directory");
    add_path(pipeline, sub_args["pipeline"], "topics", "topics JSON");
    add_path(pipeline, sub_args["pipeline"], "relations", "relations JSON");

    auto* evaluate = app.add_subcommand("evaluate", "compute the metric suite");
    add_common(evaluate, sub_args["evaluate"].common, true);
    add_path(evaluate, sub_args["evaluate"], "taxonomy", "taxonomy under evaluation", true);
    add_path(evaluate, sub_args["evaluate"], "reference", "reference taxonomy");
    add_path(evaluate, sub_args["evaluate"], "events", "held-out events JSONL");
    evaluate->add_option("--mode", sub_args["evaluate"].mode, "per-domain|global")
        ->check(CLI::IsMember({"per-domain", "global"}));
    evaluate->add_option("--report", sub_args["evaluate"].report_path, "out.json or out.md");

    auto* stats = app.add_subcommand("stats", "structural statistics of a taxonomy");
    add_common(stats, sub_args["stats"].common, false);
    add_path(stats, sub_args["stats"], "taxonomy", "taxonomy JSON", true);
    bool global_root = false;
    stats->add_flag("--global-root", global_root, "insert the virtual root above the domains");

    CLI11_PARSE(app, argc, argv);

    std::string stage;
    for (const auto& name : {"induce", "expand", "enrich", "pipeline", "evaluate", "stats"}) {
        if (app.got_subcommand(name)) stage = name;
    }
    SubArgs& args = sub_args[stage];
    if (stage == "stats" && global_root) args.mode = "global";

    try {
        return dispatch(stage, args.common, args.paths, args.mode, args.report_path);
    } catch (const Error& e) {
        nlohmann::json err = {{"error", histax::error_code_name(e.code())},
                              {"message", e.what()}};
        std::cerr << err.dump() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << nlohmann::json({{"error", "Unhandled"}, {"message", e.what()}}).dump()
                  << "\n";
        return 1;
    }
}
