#include "s2s/evaluation.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <functional>

#include <sqlite3.h>

#include "s2s/errors.hpp"
#include "s2s/util.hpp"

namespace s2s {

namespace {

struct Deadline {
    std::chrono::steady_clock::time_point at;
    bool fired = false;
};

extern "C" int progress_check(void* ctx) {
    auto* d = static_cast<Deadline*>(ctx);
    if (std::chrono::steady_clock::now() >= d->at) {
        d->fired = true;
        return 1; // interrupt the statement
    }
    return 0;
}

bool message_looks_syntactic(std::string_view msg) {
    std::string m = to_lower(msg);
    return m.find("syntax error") != std::string::npos ||
           m.find("unrecognized token") != std::string::npos ||
           m.find("incomplete input") != std::string::npos;
}

bool cell_is_numeric(const CellValue& c) {
    return c.kind == CellValue::Kind::integer || c.kind == CellValue::Kind::real;
}

double cell_as_double(const CellValue& c) {
    return c.kind == CellValue::Kind::integer ? static_cast<double>(c.int_value) : c.real_value;
}

// Exact equality for null/text/blob and int-vs-int; numeric tolerance
// whenever a real is involved, so 6 equals 6.0.
bool cells_equal(const CellValue& a, const CellValue& b) {
    if (cell_is_numeric(a) && cell_is_numeric(b)) {
        if (a.kind == CellValue::Kind::integer && b.kind == CellValue::Kind::integer) {
            return a.int_value == b.int_value;
        }
        double av = cell_as_double(a);
        double bv = cell_as_double(b);
        double tol = 1e-6 * std::max({1.0, std::fabs(av), std::fabs(bv)});
        return std::fabs(av - bv) <= tol;
    }
    if (a.kind != b.kind) return false;
    switch (a.kind) {
        case CellValue::Kind::null: return true;
        case CellValue::Kind::text:
        case CellValue::Kind::blob: return a.text_value == b.text_value;
        default: return false; // unreachable: numeric kinds handled above
    }
}

bool rows_equal(const ResultRow& a, const ResultRow& b) {
    if (a.size() != b.size()) return false;
    for (size_t i = 0; i < a.size(); ++i) {
        if (!cells_equal(a[i], b[i])) return false;
    }
    return true;
}

bool table_has_real(const ResultTable& t) {
    for (const auto& row : t.rows) {
        for (const auto& c : row) {
            if (c.kind == CellValue::Kind::real) return true;
        }
    }
    return false;
}

std::string encode_row_exact(const ResultRow& row) {
    std::string out;
    for (const auto& c : row) {
        switch (c.kind) {
            case CellValue::Kind::null: out += "n;"; break;
            case CellValue::Kind::integer:
                out += "i" + std::to_string(c.int_value) + ";";
                break;
            case CellValue::Kind::real: out += "r?;"; break; // callers exclude reals
            case CellValue::Kind::text:
                out += "t" + std::to_string(c.text_value.size()) + ":" + c.text_value + ";";
                break;
            case CellValue::Kind::blob:
                out += "b" + std::to_string(c.text_value.size()) + ":" + c.text_value + ";";
                break;
        }
    }
    return out;
}

// Kuhn's augmenting-path maximum matching. A perfect matching exists
// between the two row lists independently of argument order, so the
// unordered comparison stays symmetric even when the float tolerance is
// not transitive across rows.
bool match_rows_as_multiset(const ResultTable& a, const ResultTable& b) {
    size_t n = a.rows.size();
    std::vector<std::vector<int>> adj(n);
    for (size_t i = 0; i < n; ++i) {
        for (size_t j = 0; j < n; ++j) {
            if (rows_equal(a.rows[i], b.rows[j])) adj[i].push_back(static_cast<int>(j));
        }
        if (adj[i].empty()) return false;
    }

    std::vector<int> match_b(n, -1);
    std::vector<char> visited;
    std::function<bool(int)> try_assign = [&](int i) -> bool {
        for (int j : adj[static_cast<size_t>(i)]) {
            if (visited[static_cast<size_t>(j)]) continue;
            visited[static_cast<size_t>(j)] = 1;
            if (match_b[static_cast<size_t>(j)] < 0 || try_assign(match_b[static_cast<size_t>(j)])) {
                match_b[static_cast<size_t>(j)] = i;
                return true;
            }
        }
        return false;
    };

    for (size_t i = 0; i < n; ++i) {
        visited.assign(n, 0);
        if (!try_assign(static_cast<int>(i))) return false;
    }
    return true;
}

} // namespace

CellValue CellValue::null_value() { return {}; }

CellValue CellValue::integer(std::int64_t v) {
    CellValue c;
    c.kind = Kind::integer;
    c.int_value = v;
    return c;
}

CellValue CellValue::real(double v) {
    CellValue c;
    c.kind = Kind::real;
    c.real_value = v;
    return c;
}

CellValue CellValue::text(std::string v) {
    CellValue c;
    c.kind = Kind::text;
    c.text_value = std::move(v);
    return c;
}

CellValue CellValue::blob(std::string bytes) {
    CellValue c;
    c.kind = Kind::blob;
    c.text_value = std::move(bytes);
    return c;
}

std::string_view exec_error_category_name(ExecError::Category c) {
    switch (c) {
        case ExecError::Category::syntax: return "syntax";
        case ExecError::Category::runtime: return "runtime";
        case ExecError::Category::timeout: return "timeout";
    }
    return "unknown";
}

ExecOutcome execute_sql(const std::string& db_path, const std::string& sql, int timeout_ms) {
    sqlite3* db = nullptr;
    if (sqlite3_open_v2(db_path.c_str(), &db, SQLITE_OPEN_READONLY, nullptr) != SQLITE_OK) {
        std::string msg = db ? sqlite3_errmsg(db) : "out of memory";
        if (db) sqlite3_close(db);
        return ExecError{ExecError::Category::runtime, "cannot open database: " + msg};
    }

    Deadline deadline;
    if (timeout_ms > 0) {
        deadline.at = std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms);
        sqlite3_progress_handler(db, 500, progress_check, &deadline);
    }

    sqlite3_stmt* stmt = nullptr;
    int rc = sqlite3_prepare_v2(db, sql.c_str(), -1, &stmt, nullptr);
    if (rc != SQLITE_OK) {
        std::string msg = sqlite3_errmsg(db);
        sqlite3_close(db);
        if (deadline.fired) {
            return ExecError{ExecError::Category::timeout, "query timed out"};
        }
        auto cat = message_looks_syntactic(msg) ? ExecError::Category::syntax
                                                : ExecError::Category::runtime;
        return ExecError{cat, msg};
    }
    if (!stmt) {
        sqlite3_close(db);
        return ExecError{ExecError::Category::runtime, "input contains no SQL statement"};
    }

    ResultTable table;
    int cols = sqlite3_column_count(stmt);
    for (int i = 0; i < cols; ++i) {
        const char* name = sqlite3_column_name(stmt, i);
        table.column_names.push_back(name ? name : "");
    }

    while (true) {
        rc = sqlite3_step(stmt);
        if (rc == SQLITE_ROW) {
            ResultRow row;
            row.reserve(static_cast<size_t>(cols));
            for (int i = 0; i < cols; ++i) {
                switch (sqlite3_column_type(stmt, i)) {
                    case SQLITE_INTEGER:
                        row.push_back(CellValue::integer(sqlite3_column_int64(stmt, i)));
                        break;
                    case SQLITE_FLOAT:
                        row.push_back(CellValue::real(sqlite3_column_double(stmt, i)));
                        break;
                    case SQLITE_TEXT: {
                        const unsigned char* p = sqlite3_column_text(stmt, i);
                        int len = sqlite3_column_bytes(stmt, i);
                        row.push_back(CellValue::text(
                            std::string(reinterpret_cast<const char*>(p), static_cast<size_t>(len))));
                        break;
                    }
                    case SQLITE_BLOB: {
                        const void* p = sqlite3_column_blob(stmt, i);
                        int len = sqlite3_column_bytes(stmt, i);
                        row.push_back(CellValue::blob(
                            std::string(static_cast<const char*>(p ? p : ""), static_cast<size_t>(len))));
                        break;
                    }
                    default:
                        row.push_back(CellValue::null_value());
                        break;
                }
            }
            table.rows.push_back(std::move(row));
            continue;
        }
        if (rc == SQLITE_DONE) break;

        std::string msg = sqlite3_errmsg(db);
        sqlite3_finalize(stmt);
        sqlite3_close(db);
        if (deadline.fired || rc == SQLITE_INTERRUPT) {
            return ExecError{ExecError::Category::timeout, "query timed out"};
        }
        return ExecError{ExecError::Category::runtime, msg};
    }

    sqlite3_finalize(stmt);
    sqlite3_close(db);
    return table;
}

bool results_match(const ResultTable& a, const ResultTable& b, bool ordered) {
    if (a.rows.size() != b.rows.size()) return false;
    if (ordered) {
        for (size_t i = 0; i < a.rows.size(); ++i) {
            if (!rows_equal(a.rows[i], b.rows[i])) return false;
        }
        return true;
    }

    if (!table_has_real(a) && !table_has_real(b)) {
        std::vector<std::string> ea, eb;
        ea.reserve(a.rows.size());
        eb.reserve(b.rows.size());
        for (const auto& r : a.rows) ea.push_back(encode_row_exact(r));
        for (const auto& r : b.rows) eb.push_back(encode_row_exact(r));
        std::sort(ea.begin(), ea.end());
        std::sort(eb.begin(), eb.end());
        return ea == eb;
    }
    return match_rows_as_multiset(a, b);
}

bool gold_orders_rows(std::string_view sql) {
    int depth = 0;
    char quote = 0;
    auto word_at = [&](size_t i, std::string_view word) {
        if (i + word.size() > sql.size()) return false;
        for (size_t k = 0; k < word.size(); ++k) {
            if (lower_ascii(sql[i + k]) != word[k]) return false;
        }
        bool left_ok = i == 0 || !(std::isalnum(static_cast<unsigned char>(sql[i - 1])) || sql[i - 1] == '_');
        size_t end = i + word.size();
        bool right_ok = end == sql.size() || !(std::isalnum(static_cast<unsigned char>(sql[end])) || sql[end] == '_');
        return left_ok && right_ok;
    };

    for (size_t i = 0; i < sql.size(); ++i) {
        char c = sql[i];
        if (quote != 0) {
            if (c == quote) {
                if (i + 1 < sql.size() && sql[i + 1] == quote) {
                    ++i;
                } else {
                    quote = 0;
                }
            }
            continue;
        }
        if (c == '\'' || c == '"') {
            quote = c;
            continue;
        }
        if (c == '(') {
            ++depth;
            continue;
        }
        if (c == ')') {
            if (depth > 0) --depth;
            continue;
        }
        if (depth == 0 && word_at(i, "order")) {
            size_t j = i + 5;
            while (j < sql.size() && is_space_char(sql[j])) ++j;
            if (word_at(j, "by")) return true;
        }
    }
    return false;
}

char verdict_code(Verdict v) {
    switch (v) {
        case Verdict::correct: return 'c';
        case Verdict::incorrect: return 'i';
        case Verdict::error: return 'e';
        case Verdict::excluded: return 'x';
    }
    return '?';
}

std::string_view verdict_name(Verdict v) {
    switch (v) {
        case Verdict::correct: return "correct";
        case Verdict::incorrect: return "incorrect";
        case Verdict::error: return "error";
        case Verdict::excluded: return "excluded";
    }
    return "unknown";
}

AccuracyResult execution_accuracy(const std::vector<QuestionRecord>& questions,
                                  const std::vector<std::optional<std::string>>& predictions,
                                  const std::string& data_root,
                                  int exec_timeout_ms) {
    if (questions.size() != predictions.size()) {
        throw IntegrityError("execution_accuracy: " + std::to_string(questions.size()) +
                             " questions vs " + std::to_string(predictions.size()) + " predictions");
    }

    AccuracyResult out;
    out.verdicts.reserve(questions.size());
    for (size_t i = 0; i < questions.size(); ++i) {
        const QuestionRecord& q = questions[i];
        std::string db = spider_db_path(data_root, q.db_id).string();

        // A missing database file is scored, not fatal: the question gets an
        // error verdict and stays in the denominator. Exclusion is reserved
        // for gold SQL that fails against a database that exists.
        if (!std::filesystem::exists(db)) {
            out.verdicts.push_back(Verdict::error);
            ++out.error;
            continue;
        }

        ExecOutcome gold = execute_sql(db, q.gold_sql, exec_timeout_ms);
        if (std::holds_alternative<ExecError>(gold)) {
            out.verdicts.push_back(Verdict::excluded);
            ++out.excluded;
            continue;
        }
        if (!predictions[i].has_value()) {
            out.verdicts.push_back(Verdict::error);
            ++out.error;
            continue;
        }
        ExecOutcome pred = execute_sql(db, *predictions[i], exec_timeout_ms);
        if (std::holds_alternative<ExecError>(pred)) {
            out.verdicts.push_back(Verdict::error);
            ++out.error;
            continue;
        }
        bool ordered = gold_orders_rows(q.gold_sql);
        bool ok = results_match(std::get<ResultTable>(pred), std::get<ResultTable>(gold), ordered);
        out.verdicts.push_back(ok ? Verdict::correct : Verdict::incorrect);
        ++(ok ? out.correct : out.incorrect);
    }

    int denom = static_cast<int>(questions.size()) - out.excluded;
    if (denom > 0) out.ratio = static_cast<double>(out.correct) / denom;
    return out;
}

RecallResult table_recall_at_4(const std::vector<LinkingSchema>& predicted,
                               const std::vector<LinkingSchema>& gold) {
    if (predicted.size() != gold.size()) {
        throw IntegrityError("table_recall_at_4: " + std::to_string(predicted.size()) +
                             " predicted vs " + std::to_string(gold.size()) + " gold");
    }

    RecallResult out;
    out.hits.reserve(predicted.size());
    for (size_t i = 0; i < predicted.size(); ++i) {
        bool hit = true;
        for (const auto& g : gold[i].entries) {
            if (!predicted[i].has_table(g.table)) {
                hit = false;
                break;
            }
        }
        out.hits.push_back(hit);
        if (hit) ++out.hit_count;
    }
    if (!predicted.empty()) {
        out.ratio = static_cast<double>(out.hit_count) / static_cast<double>(predicted.size());
    }
    return out;
}

ScvOutcome self_consistency_vote(const std::vector<ScvCandidate>& candidates,
                                 const std::string& db_path,
                                 int exec_timeout_ms) {
    ScvOutcome out;
    if (candidates.empty()) {
        out.all_failed = true;
        return out;
    }
    if (!std::filesystem::exists(db_path)) {
        throw InfrastructureError("database file missing for voting: " + db_path);
    }

    struct Executed {
        size_t index;
        ResultTable table;
    };
    std::vector<Executed> executed;
    for (size_t i = 0; i < candidates.size(); ++i) {
        ExecOutcome o = execute_sql(db_path, candidates[i].sql, exec_timeout_ms);
        if (auto* t = std::get_if<ResultTable>(&o)) {
            executed.push_back({i, std::move(*t)});
        }
    }

    if (executed.empty()) {
        // Nothing ran; fall back to the latest-round candidate.
        size_t best = 0;
        for (size_t i = 1; i < candidates.size(); ++i) {
            if (candidates[i].round > candidates[best].round) best = i;
        }
        out.sql = candidates[best].sql;
        out.round = candidates[best].round;
        out.all_failed = true;
        return out;
    }

    // Group by execution-result agreement; each group is represented by its
    // first member's result table.
    struct Group {
        std::vector<size_t> members; // indices into executed
        int max_round = 0;
    };
    std::vector<Group> groups;
    for (size_t e = 0; e < executed.size(); ++e) {
        bool placed = false;
        for (auto& g : groups) {
            if (results_match(executed[e].table, executed[g.members[0]].table, false)) {
                g.members.push_back(e);
                g.max_round = std::max(g.max_round, candidates[executed[e].index].round);
                placed = true;
                break;
            }
        }
        if (!placed) {
            groups.push_back({{e}, candidates[executed[e].index].round});
        }
    }

    const Group* best = &groups[0];
    for (const auto& g : groups) {
        if (g.members.size() > best->members.size() ||
            (g.members.size() == best->members.size() && g.max_round > best->max_round)) {
            best = &g;
        }
    }

    size_t winner = best->members[0];
    for (size_t e : best->members) {
        if (candidates[executed[e].index].round > candidates[executed[winner].index].round) {
            winner = e;
        }
    }
    out.sql = candidates[executed[winner].index].sql;
    out.round = candidates[executed[winner].index].round;
    return out;
}

UpperLimitResult upper_limit(const std::vector<AccuracyResult>& per_strategy) {
    UpperLimitResult out;
    if (per_strategy.empty()) return out;

    size_t n = per_strategy[0].verdicts.size();
    for (const auto& s : per_strategy) {
        if (s.verdicts.size() != n) {
            throw IntegrityError("upper_limit: strategies cover different question counts");
        }
    }
    if (n == 0) return out;

    for (size_t q = 0; q < n; ++q) {
        bool any_correct = false;
        bool all_excluded = true;
        for (const auto& s : per_strategy) {
            if (s.verdicts[q] == Verdict::correct) any_correct = true;
            if (s.verdicts[q] != Verdict::excluded) all_excluded = false;
        }
        if (all_excluded) {
            ++out.excluded;
        } else if (any_correct) {
            ++out.correct_any;
        }
    }
    int denom = static_cast<int>(n) - out.excluded;
    if (denom > 0) out.ratio = static_cast<double>(out.correct_any) / denom;
    return out;
}

} // namespace s2s
