#include "s2s/cli.hpp"

#include <cstdlib>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "s2s/config.hpp"
#include "s2s/errors.hpp"
#include "s2s/evaluation.hpp"
#include "s2s/llm_client.hpp"
#include "s2s/pipeline.hpp"
#include "s2s/prompting.hpp"
#include "s2s/schema_model.hpp"
#include "s2s/sql_parse.hpp"
#include "s2s/util.hpp"

namespace s2s {

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct GlobalArgs {
    std::string config_path;
    std::string data_root;
    bool verbose = false;
};

AppConfig resolve_config(const GlobalArgs& g, std::ostream& err) {
    AppConfig cfg = g.config_path.empty() ? AppConfig{} : load_config(g.config_path);
    apply_env_overrides(cfg);
    if (!g.data_root.empty()) cfg.data_root = g.data_root;
    if (g.verbose) {
        for (const auto& k : cfg.unknown_keys) {
            err << "warning: unknown config key " << k << "\n";
        }
    }
    return cfg;
}

PromptTemplates resolve_templates(const AppConfig& cfg) {
    if (cfg.paths.templates.empty()) return PromptTemplates::builtin();
    return PromptTemplates::load_dir(cfg.paths.templates);
}

CompletionRequest base_request_from(const AppConfig& cfg) {
    CompletionRequest req;
    req.model = cfg.backend.model;
    req.temperature = cfg.backend.temperature;
    req.max_tokens = cfg.backend.max_tokens;
    return req;
}

LlmClient make_client(const AppConfig& cfg, std::ostream& err, bool* failed) {
    *failed = false;
    if (cfg.backend.mode == "replay") {
        return LlmClient::replay(cfg.paths.cache);
    }
    const char* key = std::getenv(cfg.backend.api_key_env.c_str());
    if (!key || !*key) {
        err << "live mode needs an API key in $" << cfg.backend.api_key_env << "\n";
        *failed = true;
        return LlmClient::replay_in_memory({});
    }
    LiveBackendConfig live;
    live.base_url = cfg.backend.base_url;
    live.api_key = key;
    live.retries = cfg.backend.retries;
    live.backoff_ms = cfg.backend.backoff_ms;
    live.timeout_ms = cfg.backend.timeout_ms;
    return LlmClient::live(live, cfg.paths.cache);
}

std::vector<QuestionRecord> select_questions(std::vector<QuestionRecord> all,
                                             const std::string& id_list, int limit) {
    if (!id_list.empty()) {
        std::set<int> wanted;
        std::stringstream ss(id_list);
        std::string part;
        while (std::getline(ss, part, ',')) {
            std::string p = trim(part);
            if (p.empty()) continue;
            try {
                wanted.insert(std::stoi(p));
            } catch (const std::exception&) {
                throw ParseError("bad question id in --questions: " + p);
            }
        }
        std::vector<QuestionRecord> filtered;
        for (auto& q : all) {
            if (wanted.count(q.question_id)) filtered.push_back(std::move(q));
        }
        all = std::move(filtered);
    }
    if (limit >= 0 && static_cast<size_t>(limit) < all.size()) {
        all.resize(static_cast<size_t>(limit));
    }
    return all;
}

int cmd_link(const GlobalArgs& g, const std::string& db_id, const std::string& tables_path,
             std::optional<std::string> sql, std::ostream& out, std::ostream& err) {
    AppConfig cfg = resolve_config(g, err);
    std::filesystem::path tables =
        tables_path.empty() ? std::filesystem::path(cfg.data_root) / "tables.json"
                            : std::filesystem::path(tables_path);
    SchemaIndex index(load_spider_tables(tables));

    const DatabaseSchema* schema = index.find(db_id);
    if (!schema) {
        err << "unknown db_id: " << db_id << "\n";
        return kExitUsage;
    }

    std::string sql_text;
    if (sql.has_value()) {
        sql_text = *sql;
    } else {
        std::ostringstream buf;
        buf << std::cin.rdbuf();
        sql_text = buf.str();
    }

    bool fallback = false;
    LinkingSchema linking = extract_linking_schema(sql_text, *schema, &fallback);
    if (fallback && g.verbose) {
        err << "note: table extraction used the token fallback\n";
    }
    out << linking_to_json(linking).dump(2) << "\n";
    return kExitOk;
}

int cmd_run(const GlobalArgs& g, int limit, const std::string& id_list, bool resume,
            std::ostream& out, std::ostream& err) {
    AppConfig cfg = resolve_config(g, err);

    bool client_failed = false;
    LlmClient client = make_client(cfg, err, &client_failed);
    if (client_failed) return kExitFailure;

    std::filesystem::path root(cfg.data_root);
    SchemaIndex index(load_spider_tables(root / "tables.json"));
    std::vector<QuestionRecord> questions =
        select_questions(load_questions(root / "dev.json"), id_list, limit);

    PromptTemplates templates = resolve_templates(cfg);
    CompletionRequest base = base_request_from(cfg);

    PipelineOptions opts;
    opts.rounds = cfg.rounds;
    opts.scv_candidates = cfg.scv_candidates;
    opts.exec_timeout_ms = cfg.exec_timeout_ms;
    opts.worker_count = cfg.worker_count;
    opts.data_root = cfg.data_root;

    int total = static_cast<int>(questions.size());
    int step = g.verbose ? 1 : std::max(1, total / 20);
    ProgressFn progress = [&](int done, int n) {
        if (done % step == 0 || done == n) {
            err << "progress: " << done << "/" << n << "\n";
        }
    };

    DatasetRunResult result = run_dataset(questions, index, client, templates, base, opts,
                                          cfg.paths.checkpoint, resume, progress);
    out << "completed " << result.traces.size() << " questions (" << result.resumed
        << " resumed, " << result.executed << " executed) -> " << cfg.paths.checkpoint << "\n";
    return kExitOk;
}

int cmd_eval(const GlobalArgs& g, const std::string& metric, const std::string& verdicts_csv,
             std::ostream& out, std::ostream& err) {
    AppConfig cfg = resolve_config(g, err);

    std::filesystem::path root(cfg.data_root);
    SchemaIndex index(load_spider_tables(root / "tables.json"));
    std::vector<QuestionRecord> all_questions = load_questions(root / "dev.json");

    if (!std::filesystem::exists(cfg.paths.checkpoint)) {
        err << "no trace checkpoint at " << cfg.paths.checkpoint << "; run the pipeline first\n";
        return kExitFailure;
    }
    std::vector<QuestionTrace> traces = load_checkpoint(cfg.paths.checkpoint);

    std::vector<QuestionRecord> questions;
    questions.reserve(traces.size());
    for (const auto& t : traces) {
        if (t.question_id < 0 || static_cast<size_t>(t.question_id) >= all_questions.size()) {
            throw IntegrityError("trace names question " + std::to_string(t.question_id) +
                                 " outside the dataset");
        }
        questions.push_back(all_questions[static_cast<size_t>(t.question_id)]);
    }

    ReportOptions opts;
    opts.rounds = cfg.rounds;
    opts.scv_candidates = cfg.scv_candidates;
    opts.exec_timeout_ms = cfg.exec_timeout_ms;
    opts.data_root = cfg.data_root;

    nlohmann::ordered_json report = build_report(questions, traces, index, opts);
    write_text_file(cfg.paths.report_out, report.dump(2) + "\n");

    if (!verdicts_csv.empty()) {
        write_text_file(verdicts_csv, verdicts_to_csv(report));
    }

    auto ratio_str = [](const nlohmann::json& v) -> std::string {
        if (v.is_null()) return "n/a";
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.4f", v.get<double>());
        return buf;
    };

    if (metric == "all") {
        out << format_report_table(report);
    } else if (metric == "ea") {
        for (const auto& [name, row] : report.at("strategies").items()) {
            out << name << " " << ratio_str(row.at("execution_accuracy")) << "\n";
        }
    } else { // recall
        for (const auto& [name, row] : report.at("table_recall_at_4").items()) {
            out << name << " " << ratio_str(row.at("ratio")) << "\n";
        }
    }
    out << "report written to " << cfg.paths.report_out << "\n";
    return kExitOk;
}

int cmd_gold_labels(const GlobalArgs& g, const std::string& out_path, std::ostream& out,
                    std::ostream& err) {
    AppConfig cfg = resolve_config(g, err);

    std::filesystem::path root(cfg.data_root);
    SchemaIndex index(load_spider_tables(root / "tables.json"));
    std::vector<QuestionRecord> questions = load_questions(root / "dev.json");

    std::string body;
    for (const auto& q : questions) {
        LinkingSchema gold = gold_labels(q, index.require(q.db_id));
        nlohmann::ordered_json fields = linking_to_json(gold);
        nlohmann::ordered_json line;
        line["question_id"] = q.question_id;
        for (auto& [k, v] : fields.items()) {
            line[k] = v;
        }
        body += line.dump();
        body += "\n";
    }
    write_text_file(out_path, body);
    out << "wrote " << questions.size() << " gold label lines to " << out_path << "\n";
    return kExitOk;
}

} // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"SQL-to-schema linking pipeline for Text-to-SQL"};
    app.require_subcommand(1);
    app.fallthrough(); // accept global flags after the subcommand too

    GlobalArgs g;
    app.add_option("--config", g.config_path, "TOML config file");
    app.add_option("--data-root", g.data_root, "dataset root (tables.json, dev.json, database/)");
    app.add_flag("--verbose", g.verbose, "chatty progress and warnings");

    auto* link = app.add_subcommand("link", "extract the linking schema of one SQL string");
    std::string link_db, link_tables;
    std::optional<std::string> link_sql;
    link->add_option("--db", link_db, "db_id to resolve the schema")->required();
    link->add_option("--tables", link_tables, "explicit tables.json path");
    link->add_option("--sql", link_sql, "SQL text (reads stdin when omitted)");

    auto* run = app.add_subcommand("run", "run the generation pipeline over the dataset");
    int run_limit = -1;
    std::string run_questions;
    bool run_resume = false;
    run->add_option("--limit", run_limit, "only the first N selected questions");
    run->add_option("--questions", run_questions, "comma-separated question ids");
    run->add_flag("--resume", run_resume, "reuse traces already in the checkpoint");

    auto* eval = app.add_subcommand("eval", "score a finished run and write the report");
    std::string eval_metric = "all";
    std::string eval_csv;
    eval->add_option("--metric", eval_metric, "all, ea, or recall")
        ->check(CLI::IsMember({"all", "ea", "recall"}));
    eval->add_option("--verdicts-csv", eval_csv, "also write the per-question verdict matrix");

    auto* gold = app.add_subcommand("gold-labels", "parse gold SQL into gold linking schemas");
    std::string gold_out = "out/gold_labels.jsonl";
    gold->add_option("--out", gold_out, "output JSONL path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        std::ostringstream sink;
        int code = app.exit(e, out, sink);
        if (code == 0) return kExitOk;
        err << sink.str();
        return kExitUsage;
    }

    try {
        if (link->parsed()) return cmd_link(g, link_db, link_tables, link_sql, out, err);
        if (run->parsed()) return cmd_run(g, run_limit, run_questions, run_resume, out, err);
        if (eval->parsed()) return cmd_eval(g, eval_metric, eval_csv, out, err);
        if (gold->parsed()) return cmd_gold_labels(g, gold_out, out, err);
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    err << "no subcommand given\n";
    return kExitUsage;
}

} // namespace s2s
