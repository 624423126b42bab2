// Standalone acceptance harness: one pass/fail line per criterion, exit 0
// only when every criterion holds. Meant to stay fast enough for CI.

#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <iterator>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "s2s/errors.hpp"
#include "s2s/evaluation.hpp"
#include "s2s/pipeline.hpp"
#include "s2s/prompting.hpp"
#include "s2s/schema_model.hpp"
#include "s2s/sql_parse.hpp"
#include "s2s/util.hpp"
#include "test_support.hpp"

using namespace s2s;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string format_seconds(double s) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f s", s);
    return buf;
}

// ---- criterion 1: hand-labeled linking oracle -------------------------------

struct OracleCase {
    char db;                  // 'c' = concert_singer, 'o' = orders_db
    const char* sql;
    const char* expected;     // "table:col,col;table2:col" in schema order, "" = none
    bool fallback;
};

// 46 hand-labeled cases: joins, aliases, subqueries, set operations, both
// asterisk branches, keyword-named columns, quoting and unparseable input.
const OracleCase kOracle[] = {
    {'c', "SELECT name FROM singer", "singer:name", false},
    {'c', "SELECT name FROM singer WHERE age > 20", "singer:name,age", false},
    {'c', "SELECT count(*) FROM singer", "singer:singer_id,name,age,country", false},
    {'c', "SELECT * FROM singer WHERE age > 20", "singer:age", false},
    {'c', "SELECT T1.name FROM singer AS T1 JOIN concert AS T2 ON T1.singer_id = T2.concert_id",
     "singer:singer_id,name;concert:concert_id", false},
    {'c',
     "SELECT theme FROM concert JOIN singer_in_concert ON concert.concert_id = "
     "singer_in_concert.concert_id",
     "concert:concert_id,theme;singer_in_concert:concert_id", false},
    {'c', "SELECT T1.name FROM singer T1", "singer:name", false},
    {'c', "SELECT name FROM singer AS concert", "singer:name", false},
    {'c', "SELECT * FROM (SELECT age FROM singer)", "singer:age", false},
    {'c', "SELECT name FROM singer WHERE singer_id IN (SELECT singer_id FROM singer_in_concert)",
     "singer:singer_id,name;singer_in_concert:singer_id", false},
    {'c', "SELECT name FROM singer UNION SELECT theme FROM concert",
     "singer:name;concert:theme", false},
    {'c', "SELECT year FROM concert INTERSECT SELECT year FROM stadium",
     "concert:year;stadium:year", false},
    {'c', "SELECT year FROM stadium EXCEPT SELECT year FROM concert",
     "concert:year;stadium:year", false},
    {'c', "WITH s AS (SELECT name, age FROM singer) SELECT name FROM s WHERE age < 30",
     "singer:name,age", false},
    {'c', "SELECT singer.name, concert.theme FROM singer, concert",
     "singer:name;concert:theme", false},
    {'o', "SELECT count FROM orders", "orders:count", false},
    {'o', "SELECT count(*) FROM customers", "customers:customer_id,name,year", false},
    {'o', "SELECT count(*) FROM orders", "orders:count", false},
    {'o', "SELECT o.year FROM orders o JOIN customers c ON o.order_id = c.customer_id",
     "orders:order_id,year;customers:customer_id,year", false},
    {'c', "select NAME from SINGER where AGE > 20", "singer:name,age", false},
    {'c', "SELECT \"name\" FROM \"singer\"", "singer:name", false},
    {'c', "SELECT `name` FROM `singer`", "singer:name", false},
    {'c', "SELECT [name] FROM [singer]", "singer:", false},
    {'c', "SELECT singer_id FROM singer WHERE name = 'Tribal King'",
     "singer:singer_id,name", false},
    {'o', "SELECT order_id FROM orders WHERE status = 'year end'",
     "orders:order_id,year,status", false},
    {'c', "SELECT name FROM singer WHERE name = 'broken", "singer:name", true},
    {'c', "I cannot answer this question", "", false},
    {'c', "The singer table has names", "", false},
    {'c', "SELECT x FROM unknown_table JOIN singer ON 1=1", "singer:", false},
    {'c', "SELECT * FROM unknown_table", "", false},
    {'c',
     "SELECT name FROM singer WHERE age > (SELECT avg(age) FROM singer WHERE country = 'France')",
     "singer:name,age,country", false},
    {'c',
     "SELECT concert_id FROM (SELECT concert_id FROM concert UNION SELECT concert_id FROM "
     "singer_in_concert)",
     "concert:concert_id;singer_in_concert:concert_id", false},
    {'c',
     "SELECT name FROM (singer JOIN singer_in_concert ON singer.singer_id = "
     "singer_in_concert.singer_id)",
     "singer:singer_id,name;singer_in_concert:singer_id", false},
    {'c', "SELECT name FROM singer ORDER BY age DESC LIMIT 5", "singer:name,age", false},
    {'c', "SELECT country, count(*) FROM singer GROUP BY country HAVING count(*) > 1",
     "singer:country", false},
    {'c',
     "SELECT stadium.location FROM concert JOIN stadium ON concert.concert_id = "
     "stadium.stadium_id JOIN singer_in_concert ON concert.concert_id = "
     "singer_in_concert.concert_id",
     "concert:concert_id;singer_in_concert:concert_id;stadium:stadium_id,location", false},
    {'c', "SELECT a.name FROM singer a JOIN singer b ON a.age = b.age", "singer:name,age", false},
    {'c', "", "", false},
    {'c', "SELECT name, count(*) FROM singer JOIN singer_in_concert ON 1 = 1",
     "singer:name;singer_in_concert:concert_id,singer_id", false},
    {'c', "SELECT theme, year FROM concert", "concert:theme,year", false},
    {'c', "SELECT name FROM singer -- WHERE age > 20", "singer:name,age", false},
    {'o', "SELECT year FROM orders WHERE status = 'open' UNION SELECT year FROM customers",
     "orders:year,status;customers:year", false},
    {'c', "SELECT name FROM singer WHERE singer_id IN (SELECT singer_id FROM singer)",
     "singer:singer_id,name", false},
    {'c', "SELECT name FROM singer WHERE age>20 AND country='US'",
     "singer:name,age,country", false},
    {'c', "SELECT name FROM singer JOIN \"broken", "singer:name", true},
    {'c', "SELECT * FROM singer, concert",
     "singer:singer_id,name,age,country;concert:concert_id,theme,year", false},
};

std::string render_entries(const LinkingSchema& l) {
    std::string out;
    for (size_t i = 0; i < l.entries.size(); ++i) {
        if (i) out += ';';
        out += l.entries[i].table;
        out += ':';
        out += join(l.entries[i].columns, ",");
    }
    return out;
}

std::string check_linking_oracle() {
    DatabaseSchema concert = test::concert_singer_schema();
    DatabaseSchema orders = test::orders_db_schema();

    int failures = 0;
    std::string detail;
    Clock::time_point start = Clock::now();
    for (size_t i = 0; i < std::size(kOracle); ++i) {
        const OracleCase& c = kOracle[i];
        const DatabaseSchema& schema = c.db == 'c' ? concert : orders;
        bool fell_back = false;
        LinkingSchema got = extract_linking_schema(c.sql, schema, &fell_back);
        std::string rendered = render_entries(got);
        if (rendered != c.expected || fell_back != c.fallback) {
            ++failures;
            if (detail.size() < 600) {
                detail += "\n    case " + std::to_string(i + 1) + " [" + c.sql + "] expected {" +
                          c.expected + "} fallback=" + (c.fallback ? "yes" : "no") + ", got {" +
                          rendered + "} fallback=" + (fell_back ? "yes" : "no");
            }
        }
    }
    double elapsed = seconds_since(start);

    std::ostringstream line;
    line << std::size(kOracle) - failures << "/" << std::size(kOracle) << " exact in "
         << format_seconds(elapsed) << " (limit 1 s)";
    if (failures > 0) return "FAIL " + line.str() + detail;
    if (elapsed >= 1.0) return "FAIL " + line.str() + " - too slow";
    return "PASS " + line.str();
}

// ---- criterion 2: gold self-recall ------------------------------------------

std::string check_gold_self_recall() {
    test::DatasetSpec spec = test::make_dataset_spec(24);
    SchemaIndex index(spec.schemas);

    std::vector<LinkingSchema> gold;
    for (const auto& q : spec.questions) {
        gold.push_back(gold_labels(q, index.require(q.db_id)));
    }
    RecallResult r = table_recall_at_4(gold, gold);
    if (!r.ratio.has_value() || *r.ratio != 1.0) {
        return "FAIL ratio " + std::to_string(r.ratio.value_or(-1.0)) + " over " +
               std::to_string(gold.size()) + " questions, expected exactly 1.0";
    }
    return "PASS ratio 1.0 over " + std::to_string(gold.size()) + " questions";
}

// ---- criterion 3: execution-accuracy self-match -----------------------------

std::string check_ea_self_match(const std::filesystem::path& root,
                                const test::DatasetSpec& spec) {
    Clock::time_point start = Clock::now();
    std::vector<QuestionRecord> questions(spec.questions.begin(), spec.questions.begin() + 24);
    std::vector<std::optional<std::string>> preds;
    for (const auto& q : questions) preds.push_back(q.gold_sql);

    AccuracyResult r = execution_accuracy(questions, preds, root.string());
    double elapsed = seconds_since(start);

    if (!r.ratio.has_value() || *r.ratio != 1.0 || r.excluded != 0) {
        return "FAIL ratio " + std::to_string(r.ratio.value_or(-1.0)) + " with " +
               std::to_string(r.excluded) + " excluded over " + std::to_string(questions.size()) +
               " questions";
    }
    if (elapsed >= 10.0) {
        return "FAIL correct but took " + format_seconds(elapsed) + " (limit 10 s)";
    }
    return "PASS ratio 1.0 over " + std::to_string(questions.size()) + " questions in " +
           format_seconds(elapsed) + " (limit 10 s)";
}

// ---- criterion 4: result-comparison properties ------------------------------

std::string check_results_match_properties() {
    std::mt19937 rng(424242);
    auto random_cell = [&rng]() {
        switch (rng() % 5) {
            case 0: return CellValue::null_value();
            case 1: return CellValue::integer(static_cast<std::int64_t>(rng() % 100) - 50);
            case 2: return CellValue::real((static_cast<double>(rng() % 2000) - 1000.0) / 16.0);
            case 3: return CellValue::text(std::string(1, static_cast<char>('a' + rng() % 6)));
            default: return CellValue::blob(std::string(1, static_cast<char>(rng() % 4)));
        }
    };
    auto random_table = [&](size_t rows, size_t cols) {
        ResultTable t;
        for (size_t c = 0; c < cols; ++c) t.column_names.push_back("c" + std::to_string(c));
        for (size_t r = 0; r < rows; ++r) {
            ResultRow row;
            for (size_t c = 0; c < cols; ++c) row.push_back(random_cell());
            t.rows.push_back(row);
        }
        return t;
    };
    auto one = [](double v) {
        ResultTable t;
        t.column_names = {"c"};
        t.rows = {{CellValue::real(v)}};
        return t;
    };

    int cases = 0;
    for (int trial = 0; trial < 1200; ++trial) {
        size_t rows = rng() % 6;
        size_t cols = 1 + rng() % 3;
        ResultTable a = random_table(rows, cols);
        ResultTable b = random_table(rows, cols);
        ++cases;

        if (!results_match(a, a, true) || !results_match(a, a, false)) {
            return "FAIL reflexivity broken at trial " + std::to_string(trial);
        }
        if (results_match(a, b, false) != results_match(b, a, false) ||
            results_match(a, b, true) != results_match(b, a, true)) {
            return "FAIL symmetry broken at trial " + std::to_string(trial);
        }
        if (results_match(a, b, true) && !results_match(a, b, false)) {
            return "FAIL ordered match without unordered match at trial " + std::to_string(trial);
        }
        ResultTable shuffled = a;
        std::shuffle(shuffled.rows.begin(), shuffled.rows.end(), rng);
        if (!results_match(a, shuffled, false)) {
            return "FAIL shuffled copy rejected at trial " + std::to_string(trial);
        }
    }

    // tolerance boundary: difference of exactly 1e-6 * scale passes, ten
    // times that fails; scales chosen as powers of two at and above one
    const double scales[] = {1.0, 2.0, 16.0, 1024.0, 1048576.0};
    for (double s : scales) {
        double at_tol = s + 1e-6 * s;
        double past_tol = s + 1e-5 * s;
        ++cases;
        if (!results_match(one(s), one(at_tol), false)) {
            return "FAIL boundary pass case rejected at scale " + std::to_string(s);
        }
        if (results_match(one(s), one(past_tol), false)) {
            return "FAIL 10x boundary case accepted at scale " + std::to_string(s);
        }
    }
    ++cases;
    if (!results_match(one(0.0), one(1e-6), false) || results_match(one(0.0), one(1e-5), false)) {
        return "FAIL boundary behavior wrong around zero";
    }

    return "PASS " + std::to_string(cases) + " randomized and boundary cases";
}

// ---- criterion 5: replay determinism across worker counts -------------------

struct DeterminismArtifacts {
    std::vector<QuestionTrace> traces;
    std::vector<QuestionRecord> questions;
    SchemaIndex* schemas = nullptr;
};

std::string check_replay_determinism(const std::filesystem::path& scratch,
                                     DeterminismArtifacts& out) {
    test::DatasetSpec spec = test::make_dataset_spec(25);
    std::filesystem::path root = scratch / "det";
    test::write_dataset(root, spec);

    static SchemaIndex index(spec.schemas);
    CompletionRequest base;
    base.model = "fixture";
    base.temperature = 0.0;
    auto responses = test::gold_echo_responses(spec.questions, index, 2, base);
    PromptTemplates templates = PromptTemplates::builtin();

    PipelineOptions opts;
    opts.rounds = 2;
    opts.scv_candidates = {0, 1, 2};
    opts.data_root = root.string();

    ReportOptions ropts;
    ropts.rounds = 2;
    ropts.scv_candidates = {0, 1, 2};
    ropts.data_root = root.string();

    std::string dumps[2];
    std::string checkpoints[2];
    std::vector<QuestionTrace> kept;
    const int workers[2] = {1, 8};
    for (int i = 0; i < 2; ++i) {
        LlmClient client = LlmClient::replay_in_memory(responses);
        opts.worker_count = workers[i];
        std::filesystem::path ckpt = scratch / ("det_ckpt_" + std::to_string(workers[i]) + ".jsonl");
        DatasetRunResult run = run_dataset(spec.questions, index, client, templates, base, opts,
                                           ckpt, false);
        checkpoints[i] = read_text_file(ckpt);
        dumps[i] = build_report(spec.questions, run.traces, index, ropts).dump(2);
        kept = std::move(run.traces);
    }

    if (checkpoints[0] != checkpoints[1]) {
        return "FAIL checkpoint files differ between worker counts 1 and 8";
    }
    if (dumps[0] != dumps[1]) {
        return "FAIL report JSON differs between worker counts 1 and 8";
    }
    if (checkpoints[0].empty() || kept.size() != 25) {
        return "FAIL run produced no checkpoint content";
    }

    out.traces = std::move(kept);
    out.questions = spec.questions;
    out.schemas = &index;
    return "PASS 25-question run: checkpoints and report JSON byte-identical for workers 1 and 8";
}

// ---- criterion 6: self-consistency voting -----------------------------------

std::string check_scv(const std::filesystem::path& scratch) {
    std::filesystem::path db_path = scratch / "scv" / "concert_singer.sqlite";
    test::create_sqlite_db(db_path, test::concert_singer_schema(), test::concert_singer_rows());
    std::string db = db_path.string();

    // (a) majority by execution result
    ScvOutcome majority = self_consistency_vote(
        {{0, "SELECT count(*) FROM concert"},
         {1, "SELECT count(*) FROM singer"},
         {2, "SELECT count(*) FROM singer WHERE 1 = 1"}},
        db);
    if (majority.round != 2 || majority.sql != "SELECT count(*) FROM singer WHERE 1 = 1") {
        return "FAIL majority vote picked round " + std::to_string(majority.round);
    }

    // (b) tie broken toward the later round
    ScvOutcome tie = self_consistency_vote(
        {{0, "SELECT count(*) FROM concert"}, {1, "SELECT count(*) FROM singer"}}, db);
    if (tie.round != 1) {
        return "FAIL tie-break picked round " + std::to_string(tie.round);
    }

    // (c) every candidate failing falls back to the highest round
    ScvOutcome failed = self_consistency_vote(
        {{0, "SELEC a"}, {2, "SELECT * FROM missing_table"}, {1, "SELEC b"}}, db);
    if (!failed.all_failed || failed.round != 2 ||
        failed.sql != "SELECT * FROM missing_table") {
        return "FAIL all-error fallback returned round " + std::to_string(failed.round);
    }

    // (d) membership property over randomized candidate sets
    std::mt19937 rng(777);
    const std::string pool[] = {
        "SELECT count(*) FROM singer",
        "SELECT count(*) FROM concert",
        "SELECT name FROM singer",
        "SELECT name FROM singer ORDER BY name DESC",
        "SELECT theme FROM concert WHERE year > 2014",
        "SELEC broken",
        "SELECT * FROM missing_table",
        "SELECT avg(age) FROM singer",
    };
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<ScvCandidate> cands;
        int n = 1 + static_cast<int>(rng() % 5);
        for (int i = 0; i < n; ++i) {
            cands.push_back({i, pool[rng() % std::size(pool)]});
        }
        ScvOutcome o = self_consistency_vote(cands, db);
        bool member = false;
        for (const auto& c : cands) member = member || c.sql == o.sql;
        if (!member) {
            return "FAIL winner not in candidate set at trial " + std::to_string(trial);
        }
    }
    return "PASS majority, tie-break, all-error fallback, and 300-case membership property";
}

// ---- criterion 7: upper limit vs per-strategy accuracy ----------------------

std::string check_upper_limit() {
    const int n = 8;
    // correct sets: A {0,1,2}, B {2,3,4}, C {4,5}; none contains another.
    // q7 is excluded everywhere, q6 only under C.
    auto build = [n](std::set<int> correct, std::set<int> excluded) {
        AccuracyResult r;
        for (int q = 0; q < n; ++q) {
            Verdict v = Verdict::incorrect;
            if (excluded.count(q)) v = Verdict::excluded;
            else if (correct.count(q)) v = Verdict::correct;
            r.verdicts.push_back(v);
            switch (v) {
                case Verdict::correct: ++r.correct; break;
                case Verdict::incorrect: ++r.incorrect; break;
                case Verdict::error: ++r.error; break;
                case Verdict::excluded: ++r.excluded; break;
            }
        }
        int denom = n - r.excluded;
        if (denom > 0) r.ratio = static_cast<double>(r.correct) / denom;
        return r;
    };
    std::vector<AccuracyResult> strategies = {
        build({0, 1, 2}, {7}),
        build({2, 3, 4}, {7}),
        build({4, 5}, {6, 7}),
    };

    UpperLimitResult u = upper_limit(strategies);
    if (!u.ratio.has_value()) return "FAIL no ratio computed";

    // brute force union over the same matrix
    int union_correct = 0;
    int excluded_everywhere = 0;
    for (int q = 0; q < n; ++q) {
        bool any_correct = false;
        bool all_excluded = true;
        for (const auto& s : strategies) {
            any_correct = any_correct || s.verdicts[q] == Verdict::correct;
            all_excluded = all_excluded && s.verdicts[q] == Verdict::excluded;
        }
        union_correct += any_correct;
        excluded_everywhere += all_excluded;
    }
    double brute = static_cast<double>(union_correct) / (n - excluded_everywhere);

    if (u.correct_any != union_correct || u.excluded != excluded_everywhere ||
        *u.ratio != brute) {
        return "FAIL upper limit " + std::to_string(*u.ratio) + " != brute force " +
               std::to_string(brute);
    }
    for (const auto& s : strategies) {
        if (*u.ratio <= *s.ratio) {
            return "FAIL upper limit " + std::to_string(*u.ratio) +
                   " does not strictly exceed a strategy at " + std::to_string(*s.ratio);
        }
    }
    std::ostringstream msg;
    msg << "PASS union " << union_correct << "/" << (n - excluded_everywhere)
        << " strictly above per-strategy accuracies and equal to brute force";
    return msg.str();
}

// ---- criterion 8: trace chain integrity -------------------------------------

std::string check_trace_chains(const DeterminismArtifacts& det) {
    if (det.traces.empty() || det.schemas == nullptr) {
        return "FAIL no traces were collected by the determinism run";
    }
    int rounds_checked = 0;
    for (const auto& trace : det.traces) {
        const DatabaseSchema& schema = det.schemas->require(trace.db_id);
        try {
            check_trace_chain(trace, schema);
        } catch (const std::exception& e) {
            return "FAIL question " + std::to_string(trace.question_id) + ": " + e.what();
        }
        // independent re-derivation of each stored linking from its SQL
        for (const auto& round : trace.rounds) {
            if (!round.has_sql || !round.next_linking.has_value()) continue;
            LinkingSchema rederived = extract_linking_schema(round.sql, schema);
            if (!entries_equal(rederived, *round.next_linking)) {
                return "FAIL question " + std::to_string(trace.question_id) + " round " +
                       std::to_string(round.round) + ": stored linking does not re-derive";
            }
            ++rounds_checked;
        }
    }
    return "PASS " + std::to_string(det.traces.size()) + " traces, " +
           std::to_string(rounds_checked) + " linkings re-derived exactly";
}

// ---- criterion 9: end-to-end throughput -------------------------------------

std::string check_throughput(const std::filesystem::path& scratch) {
    Clock::time_point start = Clock::now();

    test::DatasetSpec spec = test::make_dataset_spec(1034);
    std::filesystem::path root = scratch / "full";
    test::write_dataset(root, spec);
    SchemaIndex index(spec.schemas);

    CompletionRequest base;
    base.model = "fixture";
    base.temperature = 0.0;
    auto responses = test::gold_echo_responses(spec.questions, index, 2, base);
    LlmClient client = LlmClient::replay_in_memory(responses);

    PipelineOptions opts;
    opts.rounds = 2;
    opts.scv_candidates = {0, 1, 2};
    opts.worker_count = 4;
    opts.data_root = root.string();

    DatasetRunResult run =
        run_dataset(spec.questions, index, client, PromptTemplates::builtin(), base, opts,
                    scratch / "full_ckpt.jsonl", false);
    if (run.traces.size() != 1034) {
        return "FAIL expected 1034 traces, got " + std::to_string(run.traces.size());
    }

    ReportOptions ropts;
    ropts.rounds = 2;
    ropts.scv_candidates = {0, 1, 2};
    ropts.data_root = root.string();
    nlohmann::ordered_json report = build_report(spec.questions, run.traces, index, ropts);

    double elapsed = seconds_since(start);

    // chain integrity must hold at this scale too
    for (const auto& trace : run.traces) {
        try {
            check_trace_chain(trace, index.require(trace.db_id));
        } catch (const std::exception& e) {
            return "FAIL question " + std::to_string(trace.question_id) + ": " + e.what();
        }
    }

    const auto& scv = report.at("strategies").at("SCVSQL");
    if (scv.at("correct").get<int>() != 1034) {
        return "FAIL gold-echo run should be fully correct, got " +
               scv.at("correct").dump() + "/1034";
    }
    if (elapsed >= 60.0) {
        return "FAIL completed but took " + format_seconds(elapsed) + " (limit 60 s)";
    }
    return "PASS 1034 questions run and evaluated in " + format_seconds(elapsed) +
           " (limit 60 s)";
}

} // namespace

int main() {
    test::TempDir scratch;
    DeterminismArtifacts det;

    struct Criterion {
        const char* label;
        std::function<std::string()> run;
    };
    const Criterion criteria[] = {
        {"1. linking oracle suite", [] { return check_linking_oracle(); }},
        {"2. gold self-recall", [] { return check_gold_self_recall(); }},
        {"3. execution-accuracy self-match",
         [&] {
             test::DatasetSpec spec = test::make_dataset_spec(24);
             std::filesystem::path root = scratch.path() / "ea";
             test::write_dataset(root, spec);
             return check_ea_self_match(root, spec);
         }},
        {"4. result-comparison properties", [] { return check_results_match_properties(); }},
        {"5. replay determinism", [&] { return check_replay_determinism(scratch.path(), det); }},
        {"6. self-consistency voting", [&] { return check_scv(scratch.path()); }},
        {"7. upper-limit metric", [] { return check_upper_limit(); }},
        {"8. trace chain integrity", [&] { return check_trace_chains(det); }},
        {"9. throughput", [&] { return check_throughput(scratch.path()); }},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        std::string result;
        Clock::time_point start = Clock::now();
        try {
            result = c.run();
        } catch (const std::exception& e) {
            result = std::string("FAIL unexpected exception: ") + e.what();
        }
        double elapsed = seconds_since(start);
        bool ok = result.rfind("PASS", 0) == 0;
        if (!ok) ++failures;
        std::cout << (ok ? "[PASS] " : "[FAIL] ") << c.label << ": "
                  << result.substr(result.find(' ') + 1) << " [" << format_seconds(elapsed)
                  << "]\n";
    }

    if (failures == 0) {
        std::cout << "all 9 acceptance criteria hold\n";
        return 0;
    }
    std::cout << failures << " of 9 acceptance criteria failing\n";
    return 1;
}
