#pragma once

// SQL execution against SQLite and everything built on it: result
// comparison, execution accuracy, table recall, self-consistency voting
// and the combined upper limit metric.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "s2s/schema_model.hpp"

namespace s2s {

// One cell of a query result. SQLite's dynamic types, nothing more.
struct CellValue {
    enum class Kind { null, integer, real, text, blob };
    Kind kind = Kind::null;
    std::int64_t int_value = 0;
    double real_value = 0.0;
    std::string text_value; // also holds blob bytes

    static CellValue null_value();
    static CellValue integer(std::int64_t v);
    static CellValue real(double v);
    static CellValue text(std::string v);
    static CellValue blob(std::string bytes);

    bool operator==(const CellValue&) const = default;
};

using ResultRow = std::vector<CellValue>;

struct ResultTable {
    std::vector<std::string> column_names;
    std::vector<ResultRow> rows;
};

// Failed execution is a value, not an abort: a bad model query must score
// as wrong, never kill a run.
struct ExecError {
    enum class Category { syntax, runtime, timeout };
    Category category = Category::runtime;
    std::string message;
};

std::string_view exec_error_category_name(ExecError::Category c);

using ExecOutcome = std::variant<ResultTable, ExecError>;

// Runs the first statement of `sql` read-only against the database file.
// timeout_ms <= 0 disables the deadline.
ExecOutcome execute_sql(const std::string& db_path, const std::string& sql, int timeout_ms = 30000);

// Row-set equality with float tolerance: cells compare equal when exact,
// or for numerics when |a-b| <= 1e-6 * max(1, |a|, |b|). ordered=false
// compares rows as a multiset.
bool results_match(const ResultTable& a, const ResultTable& b, bool ordered);

// True when the query's top-level (not subquery, not inside parens or
// quotes) clause list contains ORDER BY.
bool gold_orders_rows(std::string_view sql);

// Per-question outcome of comparing one predicted SQL against gold.
enum class Verdict {
    correct,
    incorrect,
    error,    // predicted SQL missing or failed to execute, or database file absent
    excluded, // gold SQL itself failed; question leaves the denominator
};

char verdict_code(Verdict v); // 'c' / 'i' / 'e' / 'x'
std::string_view verdict_name(Verdict v);

struct AccuracyResult {
    std::vector<Verdict> verdicts;       // one per question, input order
    int correct = 0;
    int incorrect = 0;
    int error = 0;
    int excluded = 0;
    std::optional<double> ratio;         // correct / (total - excluded); nullopt when denominator is 0
};

// predictions[i] is the candidate SQL for questions[i]; nullopt means the
// pipeline produced nothing for that question.
AccuracyResult execution_accuracy(const std::vector<QuestionRecord>& questions,
                                  const std::vector<std::optional<std::string>>& predictions,
                                  const std::string& data_root,
                                  int exec_timeout_ms = 30000);

// Fraction of questions whose gold tables are all present in the predicted
// linking schema (case-insensitive). Column hits are not required.
struct RecallResult {
    std::vector<bool> hits;
    int hit_count = 0;
    std::optional<double> ratio; // nullopt when the lists are empty
};

// Lists are aligned per question; mismatched lengths throw IntegrityError.
RecallResult table_recall_at_4(const std::vector<LinkingSchema>& predicted,
                               const std::vector<LinkingSchema>& gold);

// Self-consistency voting: groups candidates by execution-result equality,
// takes the largest group (ties broken toward the group containing the
// latest round) and returns that group's latest-round member.
struct ScvCandidate {
    int round = 0;
    std::string sql;
};

struct ScvOutcome {
    std::string sql;    // winning SQL, empty when no candidate executed
    int round = -1;     // winning candidate's round, -1 when none executed
    bool all_failed = false;
};

// Throws InfrastructureError when the database file is missing.
ScvOutcome self_consistency_vote(const std::vector<ScvCandidate>& candidates,
                                 const std::string& db_path,
                                 int exec_timeout_ms = 30000);

// Questions correct under at least one strategy; excluded only when every
// strategy excluded them.
struct UpperLimitResult {
    int correct_any = 0;
    int excluded = 0;
    std::optional<double> ratio;
};

UpperLimitResult upper_limit(const std::vector<AccuracyResult>& per_strategy);

} // namespace s2s
