#pragma once

// The generate / parse / regenerate loop for one question, and the
// checkpointed parallel driver that runs it over a dataset.

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "s2s/llm_client.hpp"
#include "s2s/prompting.hpp"
#include "s2s/schema_model.hpp"

#include "json.hpp"

namespace s2s {

// One generation round: round 0 is the initial attempt from the full
// schema, later rounds fold the previous round's linking schema back in.
struct RoundTrace {
    int round = 0;
    std::string prompt_key;   // request key of the prompt that produced this round
    std::string source;       // "live" / "cache" / "replay"
    std::string raw_text;     // model output before SQL extraction
    bool has_sql = false;
    std::string sql;
    std::optional<LinkingSchema> next_linking; // parse of this round's SQL
    long latency_ms = 0;
    long prompt_tokens = 0;
    long completion_tokens = 0;
    std::string error;        // non-empty when the round failed
};

struct QuestionTrace {
    int question_id = 0;
    std::string db_id;
    std::vector<RoundTrace> rounds;
    std::optional<std::string> scv_sql;
    std::string error; // question-level failure (setup, voting)
    std::vector<std::string> notes;

    // Candidate SQL for a given strategy; nullopt when the round failed.
    std::optional<std::string> sql_for_round(int round) const;
};

nlohmann::ordered_json trace_to_json(const QuestionTrace& trace);
QuestionTrace trace_from_json(const nlohmann::ordered_json& j);

struct PipelineOptions {
    int rounds = 2;                        // regeneration rounds after the initial attempt
    std::vector<int> scv_candidates = {0, 1, 2};
    int exec_timeout_ms = 30000;
    int worker_count = 4;
    std::string data_root;                 // Spider layout root, for database files
};

// Runs the full chain for one question. Model failures are recorded in
// the trace, never thrown; only broken infrastructure (missing database
// file during voting) propagates.
QuestionTrace run_question(const QuestionRecord& record, const DatabaseSchema& schema,
                           LlmClient& client, const PromptTemplates& templates,
                           const CompletionRequest& base_request, const PipelineOptions& opts);

struct DatasetRunResult {
    std::vector<QuestionTrace> traces; // question order, resumed entries included
    int executed = 0;                  // questions actually run this call
    int resumed = 0;                   // questions loaded from the checkpoint
};

using ProgressFn = std::function<void(int done, int total)>;

// Runs every question, writing each finished trace to `checkpoint_path` as
// one JSON line. Lines are flushed in question order so the file is
// byte-identical regardless of worker count. When the checkpoint already
// holds a question's trace it is reused and the question is skipped.
DatasetRunResult run_dataset(const std::vector<QuestionRecord>& questions,
                             const SchemaIndex& schemas, LlmClient& client,
                             const PromptTemplates& templates,
                             const CompletionRequest& base_request,
                             const PipelineOptions& opts,
                             const std::filesystem::path& checkpoint_path,
                             bool resume, const ProgressFn& progress = {});

std::vector<QuestionTrace> load_checkpoint(const std::filesystem::path& path);

// Verifies a trace is internally consistent: rounds numbered 0..n without
// gaps, every round carries a prompt key, every successful round carries
// SQL, and each stored linking re-derives exactly from that round's SQL.
// Throws IntegrityError.
void check_trace_chain(const QuestionTrace& trace, const DatabaseSchema& schema);

// Report assembly over a finished run.
struct ReportOptions {
    int rounds = 2;
    std::vector<int> scv_candidates = {0, 1, 2};
    int exec_timeout_ms = 30000;
    std::string data_root;
};

nlohmann::ordered_json build_report(const std::vector<QuestionRecord>& questions,
                                    const std::vector<QuestionTrace>& traces,
                                    const SchemaIndex& schemas, const ReportOptions& opts);

std::string format_report_table(const nlohmann::ordered_json& report);
std::string verdicts_to_csv(const nlohmann::json& report);

} // namespace s2s
