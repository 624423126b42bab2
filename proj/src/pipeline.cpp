#include "s2s/pipeline.hpp"

#include <algorithm>
#include <condition_variable>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <unordered_map>

#include "s2s/errors.hpp"
#include "s2s/evaluation.hpp"
#include "s2s/sql_parse.hpp"
#include "s2s/util.hpp"

namespace s2s {

namespace {

using nlohmann::ordered_json;

std::string round_note(int round, std::string_view text) {
    return "round " + std::to_string(round) + ": " + std::string(text);
}

// One LLM call plus SQL extraction and linking-schema derivation. Every
// model-side failure lands in the record, never in an exception.
RoundTrace run_round(const Prompt& prompt, int round, const DatabaseSchema& schema,
                     LlmClient& client, const CompletionRequest& base_request,
                     std::vector<std::string>& notes) {
    RoundTrace rt;
    rt.round = round;

    CompletionRequest req = base_request;
    req.system_text = prompt.system_text;
    req.user_text = prompt.user_text;
    rt.prompt_key = req.request_key();

    try {
        CompletionResult res = client.complete(req);
        rt.source = std::string(completion_source_name(res.source));
        rt.raw_text = res.raw_text;
        rt.latency_ms = res.latency_ms;
        rt.prompt_tokens = res.prompt_tokens;
        rt.completion_tokens = res.completion_tokens;

        std::string sql = extract_sql(res.raw_text);
        if (sql.empty()) {
            rt.error = "completion contained no SQL";
            return rt;
        }
        rt.has_sql = true;
        rt.sql = std::move(sql);

        bool fallback = false;
        LinkingSchema linking = extract_linking_schema(rt.sql, schema, &fallback);
        linking.source = LinkingSource::round_k(round + 1);
        if (fallback) notes.push_back(round_note(round, "table extraction used token fallback"));
        if (linking.entries.empty()) {
            notes.push_back(round_note(round, "no schema tables recognized in generated SQL"));
        }
        rt.next_linking = std::move(linking);
    } catch (const CompletionError& e) {
        rt.error = e.what();
    }
    return rt;
}

} // namespace

std::optional<std::string> QuestionTrace::sql_for_round(int round) const {
    if (round < 0 || static_cast<size_t>(round) >= rounds.size()) return std::nullopt;
    const RoundTrace& rt = rounds[static_cast<size_t>(round)];
    if (rt.round != round || !rt.has_sql) return std::nullopt;
    return rt.sql;
}

QuestionTrace run_question(const QuestionRecord& record, const DatabaseSchema& schema,
                           LlmClient& client, const PromptTemplates& templates,
                           const CompletionRequest& base_request, const PipelineOptions& opts) {
    QuestionTrace trace;
    trace.question_id = record.question_id;
    trace.db_id = record.db_id;

    Prompt initial = templates.build_initial_prompt(schema, record.question);
    RoundTrace r0 = run_round(initial, 0, schema, client, base_request, trace.notes);
    bool ok = r0.has_sql;
    std::string r0_error = r0.error;
    trace.rounds.push_back(std::move(r0));
    if (!ok) {
        trace.error = "initial generation failed: " + r0_error;
        return trace;
    }

    // The linking schema fed to the next refinement round; stays at the
    // last successful round's parse when a round fails.
    LinkingSchema current = *trace.rounds[0].next_linking;

    for (int k = 1; k <= opts.rounds; ++k) {
        Prompt prompt = templates.build_refine_prompt(schema, current, record.question, k);
        RoundTrace rk = run_round(prompt, k, schema, client, base_request, trace.notes);
        if (rk.has_sql) {
            current = *rk.next_linking;
        } else {
            trace.notes.push_back(round_note(k, "kept previous linking schema"));
        }
        trace.rounds.push_back(std::move(rk));
    }

    std::vector<ScvCandidate> candidates;
    for (int r : opts.scv_candidates) {
        if (auto sql = trace.sql_for_round(r)) {
            candidates.push_back({r, *sql});
        }
    }
    if (candidates.empty()) {
        trace.notes.push_back("voting skipped: no executable candidates");
        return trace;
    }

    std::string db = spider_db_path(opts.data_root, record.db_id).string();
    ScvOutcome vote = self_consistency_vote(candidates, db, opts.exec_timeout_ms);
    trace.scv_sql = vote.sql;
    if (vote.all_failed) {
        trace.notes.push_back("voting: every candidate failed to execute; kept the latest round");
    }
    return trace;
}

nlohmann::ordered_json trace_to_json(const QuestionTrace& trace) {
    ordered_json j;
    j["question_id"] = trace.question_id;
    j["db_id"] = trace.db_id;
    ordered_json rounds = ordered_json::array();
    for (const auto& rt : trace.rounds) {
        ordered_json r;
        r["round"] = rt.round;
        r["prompt_key"] = rt.prompt_key;
        r["source"] = rt.source;
        r["raw_text"] = rt.raw_text;
        if (rt.has_sql) r["sql"] = rt.sql;
        if (rt.next_linking) r["linking"] = linking_to_json(*rt.next_linking);
        r["latency_ms"] = rt.latency_ms;
        if (rt.prompt_tokens > 0) r["prompt_tokens"] = rt.prompt_tokens;
        if (rt.completion_tokens > 0) r["completion_tokens"] = rt.completion_tokens;
        if (!rt.error.empty()) r["error"] = rt.error;
        rounds.push_back(std::move(r));
    }
    j["rounds"] = std::move(rounds);
    if (trace.scv_sql) j["scv_sql"] = *trace.scv_sql;
    if (!trace.error.empty()) j["error"] = trace.error;
    if (!trace.notes.empty()) j["notes"] = trace.notes;
    return j;
}

QuestionTrace trace_from_json(const nlohmann::ordered_json& j) {
    try {
        QuestionTrace t;
        t.question_id = j.at("question_id").get<int>();
        t.db_id = j.at("db_id").get<std::string>();
        for (const auto& r : j.at("rounds")) {
            RoundTrace rt;
            rt.round = r.at("round").get<int>();
            rt.prompt_key = r.at("prompt_key").get<std::string>();
            rt.source = r.value("source", std::string());
            rt.raw_text = r.value("raw_text", std::string());
            if (r.contains("sql")) {
                rt.has_sql = true;
                rt.sql = r.at("sql").get<std::string>();
            }
            if (r.contains("linking")) rt.next_linking = linking_from_json(r.at("linking"));
            rt.latency_ms = r.value("latency_ms", 0L);
            rt.prompt_tokens = r.value("prompt_tokens", 0L);
            rt.completion_tokens = r.value("completion_tokens", 0L);
            rt.error = r.value("error", std::string());
            t.rounds.push_back(std::move(rt));
        }
        if (j.contains("scv_sql")) t.scv_sql = j.at("scv_sql").get<std::string>();
        t.error = j.value("error", std::string());
        if (j.contains("notes")) t.notes = j.at("notes").get<std::vector<std::string>>();
        return t;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("bad trace json: ") + e.what());
    }
}

DatasetRunResult run_dataset(const std::vector<QuestionRecord>& questions,
                             const SchemaIndex& schemas, LlmClient& client,
                             const PromptTemplates& templates,
                             const CompletionRequest& base_request,
                             const PipelineOptions& opts,
                             const std::filesystem::path& checkpoint_path,
                             bool resume, const ProgressFn& progress) {
    if (opts.rounds < 1) {
        throw IntegrityError("pipeline needs at least one refinement round");
    }
    for (int r : opts.scv_candidates) {
        if (r < 0 || r > opts.rounds) {
            throw IntegrityError("voting candidate round " + std::to_string(r) +
                                 " outside 0.." + std::to_string(opts.rounds));
        }
    }
    for (const auto& q : questions) {
        schemas.require(q.db_id);
        auto db = spider_db_path(opts.data_root, q.db_id);
        if (!std::filesystem::exists(db)) {
            throw InfrastructureError("missing database file: " + db.string());
        }
    }

    const size_t n = questions.size();
    std::vector<std::optional<QuestionTrace>> results(n);

    DatasetRunResult out;
    if (resume) {
        std::unordered_map<int, QuestionTrace> by_id;
        for (auto& t : load_checkpoint(checkpoint_path)) {
            by_id.emplace(t.question_id, std::move(t));
        }
        for (size_t i = 0; i < n; ++i) {
            auto it = by_id.find(questions[i].question_id);
            if (it != by_id.end()) {
                results[i] = std::move(it->second);
                ++out.resumed;
            }
        }
    }

    if (checkpoint_path.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(checkpoint_path.parent_path(), ec);
    }
    std::ofstream checkpoint(checkpoint_path, std::ios::binary | std::ios::trunc);
    if (!checkpoint) {
        throw InfrastructureError("cannot open checkpoint file: " + checkpoint_path.string());
    }

    // Completed traces are flushed strictly in question order, so the file
    // bytes never depend on worker scheduling.
    std::mutex mu;
    size_t next_flush = 0;
    size_t done = 0;
    auto flush_ready = [&]() {
        while (next_flush < n && results[next_flush].has_value()) {
            checkpoint << trace_to_json(*results[next_flush]).dump() << "\n";
            ++next_flush;
        }
        checkpoint.flush();
    };

    {
        std::lock_guard<std::mutex> lock(mu);
        for (const auto& r : results) {
            if (r.has_value()) ++done;
        }
        flush_ready();
        if (progress && done > 0) progress(static_cast<int>(done), static_cast<int>(n));
    }

    std::vector<size_t> pending;
    for (size_t i = 0; i < n; ++i) {
        if (!results[i].has_value()) pending.push_back(i);
    }
    out.executed = static_cast<int>(pending.size());

    parallel_for(pending.size(), std::max(1, opts.worker_count), [&](size_t p) {
        size_t idx = pending[p];
        QuestionTrace trace = run_question(questions[idx], schemas.require(questions[idx].db_id),
                                           client, templates, base_request, opts);
        std::lock_guard<std::mutex> lock(mu);
        results[idx] = std::move(trace);
        ++done;
        flush_ready();
        if (progress) progress(static_cast<int>(done), static_cast<int>(n));
    });

    out.traces.reserve(n);
    for (auto& r : results) out.traces.push_back(std::move(*r));
    return out;
}

std::vector<QuestionTrace> load_checkpoint(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) return {}; // no checkpoint yet: nothing to resume
    std::string text = read_text_file(path);
    std::vector<QuestionTrace> out;
    size_t start = 0;
    size_t line_no = 0;
    while (start < text.size()) {
        size_t nl = text.find('\n', start);
        std::string_view line(text.data() + start, (nl == std::string::npos ? text.size() : nl) - start);
        start = nl == std::string::npos ? text.size() : nl + 1;
        ++line_no;
        bool is_last = start >= text.size();
        if (trim_view(line).empty()) continue;
        try {
            out.push_back(trace_from_json(ordered_json::parse(line)));
        } catch (const std::exception& e) {
            if (is_last) break; // torn final line from an interrupted run
            throw ParseError("checkpoint " + path.string() + " line " + std::to_string(line_no) +
                             ": " + e.what());
        }
    }
    return out;
}

void check_trace_chain(const QuestionTrace& trace, const DatabaseSchema& schema) {
    std::string where = "trace for question " + std::to_string(trace.question_id);
    for (size_t i = 0; i < trace.rounds.size(); ++i) {
        const RoundTrace& rt = trace.rounds[i];
        if (rt.round != static_cast<int>(i)) {
            throw IntegrityError(where + ": round records out of order at position " +
                                 std::to_string(i));
        }
        if (rt.prompt_key.empty()) {
            throw IntegrityError(where + ": round " + std::to_string(rt.round) +
                                 " is missing its prompt key");
        }
        if (rt.has_sql && rt.sql.empty()) {
            throw IntegrityError(where + ": round " + std::to_string(rt.round) +
                                 " claims SQL but stores none");
        }
        if (rt.has_sql) {
            if (!rt.next_linking) {
                throw IntegrityError(where + ": round " + std::to_string(rt.round) +
                                     " has SQL but no derived linking schema");
            }
            LinkingSchema derived = extract_linking_schema(rt.sql, schema);
            if (!entries_equal(derived, *rt.next_linking)) {
                throw IntegrityError(where + ": round " + std::to_string(rt.round) +
                                     " stored linking does not re-derive from its SQL");
            }
        }
    }
    if (trace.scv_sql) {
        bool member = false;
        for (const auto& rt : trace.rounds) {
            if (rt.has_sql && rt.sql == *trace.scv_sql) {
                member = true;
                break;
            }
        }
        if (!member) {
            throw IntegrityError(where + ": voted SQL is not one of the round candidates");
        }
    }
}

nlohmann::ordered_json build_report(const std::vector<QuestionRecord>& questions,
                                    const std::vector<QuestionTrace>& traces,
                                    const SchemaIndex& schemas, const ReportOptions& opts) {
    if (questions.size() != traces.size()) {
        throw IntegrityError("report: " + std::to_string(questions.size()) + " questions vs " +
                             std::to_string(traces.size()) + " traces");
    }
    for (size_t i = 0; i < questions.size(); ++i) {
        if (questions[i].question_id != traces[i].question_id) {
            throw IntegrityError("report: trace order mismatch at position " + std::to_string(i));
        }
    }

    ordered_json report;
    report["questions"] = questions.size();
    report["rounds"] = opts.rounds;
    ordered_json ids = ordered_json::array();
    for (const auto& q : questions) ids.push_back(q.question_id);
    report["question_ids"] = std::move(ids);

    std::vector<std::string> strategy_names;
    for (int r = 0; r <= opts.rounds; ++r) strategy_names.push_back("SQL" + std::to_string(r));
    strategy_names.push_back("SCVSQL");

    std::vector<AccuracyResult> per_strategy;
    ordered_json strategies = ordered_json::object();
    for (size_t s = 0; s < strategy_names.size(); ++s) {
        std::vector<std::optional<std::string>> predictions;
        predictions.reserve(traces.size());
        bool is_scv = s + 1 == strategy_names.size();
        for (const auto& t : traces) {
            predictions.push_back(is_scv ? t.scv_sql : t.sql_for_round(static_cast<int>(s)));
        }
        AccuracyResult acc =
            execution_accuracy(questions, predictions, opts.data_root, opts.exec_timeout_ms);

        ordered_json row;
        row["correct"] = acc.correct;
        row["incorrect"] = acc.incorrect;
        row["error"] = acc.error;
        row["excluded"] = acc.excluded;
        if (acc.ratio) {
            row["execution_accuracy"] = *acc.ratio;
        } else {
            row["execution_accuracy"] = nullptr;
        }
        std::string verdicts;
        for (Verdict v : acc.verdicts) verdicts += verdict_code(v);
        row["verdicts"] = verdicts;
        strategies[strategy_names[s]] = std::move(row);
        per_strategy.push_back(std::move(acc));
    }
    report["strategies"] = std::move(strategies);

    // Linking schema k is the parse of round k-1's SQL; a failed round
    // contributes an empty linking schema, which can only hurt recall.
    std::vector<LinkingSchema> gold;
    gold.reserve(questions.size());
    for (const auto& q : questions) {
        gold.push_back(gold_labels(q, schemas.require(q.db_id)));
    }
    ordered_json recall = ordered_json::object();
    for (int k = 1; k <= opts.rounds + 1; ++k) {
        std::vector<LinkingSchema> predicted;
        predicted.reserve(traces.size());
        for (const auto& t : traces) {
            int round = k - 1;
            if (round < static_cast<int>(t.rounds.size()) && t.rounds[static_cast<size_t>(round)].next_linking) {
                predicted.push_back(*t.rounds[static_cast<size_t>(round)].next_linking);
            } else {
                LinkingSchema empty;
                empty.db_id = t.db_id;
                empty.source = LinkingSource::round_k(k);
                predicted.push_back(std::move(empty));
            }
        }
        RecallResult rr = table_recall_at_4(predicted, gold);
        ordered_json row;
        row["hits"] = rr.hit_count;
        row["total"] = predicted.size();
        if (rr.ratio) {
            row["ratio"] = *rr.ratio;
        } else {
            row["ratio"] = nullptr;
        }
        recall["Schema" + std::to_string(k)] = std::move(row);
    }
    report["table_recall_at_4"] = std::move(recall);

    UpperLimitResult ul = upper_limit(per_strategy);
    ordered_json ulj;
    ulj["correct_any"] = ul.correct_any;
    ulj["excluded"] = ul.excluded;
    if (ul.ratio) {
        ulj["ratio"] = *ul.ratio;
    } else {
        ulj["ratio"] = nullptr;
    }
    report["upper_limit"] = std::move(ulj);

    long latency = 0, prompt_tokens = 0, completion_tokens = 0;
    for (const auto& t : traces) {
        for (const auto& rt : t.rounds) {
            latency += rt.latency_ms;
            prompt_tokens += rt.prompt_tokens;
            completion_tokens += rt.completion_tokens;
        }
    }
    ordered_json totals;
    totals["latency_ms"] = latency;
    totals["prompt_tokens"] = prompt_tokens;
    totals["completion_tokens"] = completion_tokens;
    report["totals"] = std::move(totals);

    // Published Spider-dev results for this method, carried in every report
    // for side-by-side reading. Informational only; nothing asserts them.
    ordered_json targets;
    targets["note"] =
        "Reported Spider dev results for this method with the listed backends; "
        "shown for comparison, never asserted by tests.";
    targets["table_recall_at_4"] =
        ordered_json{{"Schema1", 0.95}, {"Schema2", 0.978}, {"Schema3", 0.981}};
    targets["execution_accuracy"] = ordered_json{
        {"codellama-34b",
         ordered_json{{"SQL0", 0.722}, {"SQL1", 0.748}, {"SQL2", 0.750}, {"SQL3", 0.753}}},
        {"gpt-4",
         ordered_json{{"SQL0", 0.763}, {"SQL1", 0.792}, {"SQL2", 0.811}, {"SCVSQL", 0.821}}},
        {"gpt-4-turbo",
         ordered_json{{"SQL0", 0.768}, {"SQL1", 0.797}, {"SQL2", 0.812}, {"SCVSQL", 0.824}}},
    };
    targets["upper_limit"] = ordered_json{
        {"codellama-34b", 0.8288}, {"gpt-4", 0.8559}, {"gpt-4-turbo", 0.8665}};
    report["reference_targets"] = std::move(targets);

    return report;
}

std::string format_report_table(const nlohmann::ordered_json& report) {
    std::ostringstream out;
    out << "questions: " << report.at("questions").get<size_t>()
        << "   rounds: " << report.at("rounds").get<int>() << "\n\n";

    auto ratio_str = [](const nlohmann::json& v) -> std::string {
        if (v.is_null()) return "n/a";
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.4f", v.get<double>());
        return buf;
    };

    out << std::left << std::setw(10) << "strategy" << std::right << std::setw(9) << "correct"
        << std::setw(11) << "incorrect" << std::setw(7) << "error" << std::setw(10) << "excluded"
        << std::setw(10) << "accuracy" << "\n";
    for (const auto& [name, row] : report.at("strategies").items()) {
        out << std::left << std::setw(10) << name << std::right << std::setw(9)
            << row.at("correct").get<int>() << std::setw(11) << row.at("incorrect").get<int>()
            << std::setw(7) << row.at("error").get<int>() << std::setw(10)
            << row.at("excluded").get<int>() << std::setw(10)
            << ratio_str(row.at("execution_accuracy")) << "\n";
    }

    out << "\n" << std::left << std::setw(10) << "linking" << std::right << std::setw(9) << "hits"
        << std::setw(9) << "total" << std::setw(10) << "recall" << "\n";
    for (const auto& [name, row] : report.at("table_recall_at_4").items()) {
        out << std::left << std::setw(10) << name << std::right << std::setw(9)
            << row.at("hits").get<int>() << std::setw(9) << row.at("total").get<int>()
            << std::setw(10) << ratio_str(row.at("ratio")) << "\n";
    }

    const auto& ul = report.at("upper_limit");
    out << "\nupper limit: " << ul.at("correct_any").get<int>() << " correct under some strategy, "
        << ul.at("excluded").get<int>() << " excluded, ratio " << ratio_str(ul.at("ratio")) << "\n";

    const auto& totals = report.at("totals");
    out << "totals: latency " << totals.at("latency_ms").get<long>() << " ms, prompt tokens "
        << totals.at("prompt_tokens").get<long>() << ", completion tokens "
        << totals.at("completion_tokens").get<long>() << "\n";

    const auto& targets = report.at("reference_targets");
    out << "\nreference targets (reported Spider dev runs; informational):\n";
    out << "  table-recall@4:";
    for (const auto& [name, v] : targets.at("table_recall_at_4").items()) {
        out << " " << name << " " << ratio_str(v);
    }
    out << "\n";
    for (const auto& [backend, rows] : targets.at("execution_accuracy").items()) {
        out << "  execution accuracy, " << backend << ":";
        for (const auto& [name, v] : rows.items()) {
            out << " " << name << " " << ratio_str(v);
        }
        out << "\n";
    }
    out << "  upper limit:";
    for (const auto& [backend, v] : targets.at("upper_limit").items()) {
        out << " " << backend << " " << ratio_str(v);
    }
    out << "\n";
    return out.str();
}

std::string verdicts_to_csv(const nlohmann::json& report) {
    std::vector<std::string> names;
    std::vector<std::string> columns;
    for (const auto& [name, row] : report.at("strategies").items()) {
        names.push_back(name);
        columns.push_back(row.at("verdicts").get<std::string>());
    }

    std::ostringstream out;
    out << "question_id";
    for (const auto& n : names) out << "," << n;
    out << "\n";

    const auto& ids = report.at("question_ids");
    for (size_t q = 0; q < ids.size(); ++q) {
        out << ids[q].get<int>();
        for (const auto& col : columns) {
            Verdict v;
            switch (q < col.size() ? col[q] : '?') {
                case 'c': v = Verdict::correct; break;
                case 'i': v = Verdict::incorrect; break;
                case 'e': v = Verdict::error; break;
                default: v = Verdict::excluded; break;
            }
            out << "," << verdict_name(v);
        }
        out << "\n";
    }
    return out.str();
}

} // namespace s2s
