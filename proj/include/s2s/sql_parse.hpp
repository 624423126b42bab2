#pragma once

// SQL-to-schema extraction: pull the referenced tables out of a SQL string,
// then match columns of those tables against the punctuation-split token
// list, expanding `*` for tables that matched no column directly.

#include <string>
#include <string_view>
#include <vector>

#include "s2s/schema_model.hpp"

namespace s2s {

// Punctuation-split, lowercased fragments of a SQL string.
struct SqlTokenList {
    std::vector<std::string> tokens;
    bool has_asterisk = false; // a literal '*' occurred anywhere in the input
};

// Splits on whitespace and { , . ( ) = < > ! ; ' " ` + - * / % }; lowercases
// each fragment; drops empties. Total: accepts any string.
SqlTokenList tokenize_sql(std::string_view sql);

struct TableReference {
    std::string real_name; // schema casing
    std::string alias;     // empty when none
};

struct TableExtraction {
    std::vector<TableReference> tables; // deduplicated by real name, first-seen order
    bool fallback_used = false;         // token-level fallback path was taken
};

// Schema tables referenced in FROM/JOIN clauses, including inside subqueries
// and set operations, with AS and bare aliases resolved to real table names.
// Names that are not schema tables are dropped. When the input cannot be
// lexed (unterminated quote), falls back to matching schema table names that
// directly follow a `from`/`join` token and sets fallback_used.
TableExtraction extract_tables(std::string_view sql, const DatabaseSchema& schema);

// The full extraction: tables from extract_tables, columns by token match,
// per-table asterisk expansion when a table matched no column. The result
// has one entry per referenced table, possibly with an empty column set.
// When fallback_used is non-null it receives the extract_tables flag.
LinkingSchema extract_linking_schema(std::string_view sql, const DatabaseSchema& schema,
                                     bool* fallback_used = nullptr);

// extract_linking_schema over the record's gold SQL, tagged as gold.
LinkingSchema gold_labels(const QuestionRecord& record, const DatabaseSchema& schema);

} // namespace s2s
