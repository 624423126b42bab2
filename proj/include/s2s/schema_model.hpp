#pragma once

// Database schemas and question records: ingestion from Spider-format JSON
// files and SQLite databases, plus the prompt-text renderings of full schemas
// and linking schemas.

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"

namespace s2s {

struct ColumnDef {
    std::string name;
    std::string decl_type; // free-text SQL type ("text", "number", ...)
};

struct TableDef {
    std::string name; // original casing preserved
    std::vector<ColumnDef> columns;

    const ColumnDef* find_column(std::string_view column_name) const; // case-insensitive
};

struct ForeignKey {
    std::string child_table;
    std::string child_column;
    std::string parent_table;
    std::string parent_column;
};

struct KeyColumn {
    std::string table;
    std::string column;
};

struct DatabaseSchema {
    std::string db_id;
    std::vector<TableDef> tables;
    std::vector<ForeignKey> foreign_keys;
    std::vector<KeyColumn> primary_keys;

    const TableDef* find_table(std::string_view table_name) const; // case-insensitive

    // Enforces: unique table names (case-insensitive), unique column names per
    // table, every table non-empty, every PK/FK endpoint resolvable.
    // Throws IntegrityError.
    void validate() const;
};

struct LinkingSource {
    enum class Kind { gold, round };
    Kind kind = Kind::round;
    int round = 0; // meaningful only for Kind::round

    static LinkingSource gold_label() { return {Kind::gold, 0}; }
    static LinkingSource round_k(int k) { return {Kind::round, k}; }
};

struct LinkingEntry {
    std::string table;                // schema casing
    std::vector<std::string> columns; // schema casing, table-definition order
};

// Per-question subset of a schema: which tables, and which of their columns,
// a SQL query touches. Entries are kept in schema table order.
struct LinkingSchema {
    std::string db_id;
    std::vector<LinkingEntry> entries;
    LinkingSource source;

    bool has_table(std::string_view table_name) const; // case-insensitive
    // Throws IntegrityError when an entry names an unknown table or column.
    void validate_against(const DatabaseSchema& schema) const;
};

// Compares db_id and entries; the source tag is provenance metadata.
bool entries_equal(const LinkingSchema& a, const LinkingSchema& b);

nlohmann::ordered_json linking_to_json(const LinkingSchema& linking);
LinkingSchema linking_from_json(const nlohmann::ordered_json& j);

struct QuestionRecord {
    int question_id = 0; // zero-based position in the dataset file
    std::string question;
    std::string db_id;
    std::string gold_sql;
};

// Loaded schema set with db_id lookup.
class SchemaIndex {
public:
    SchemaIndex() = default;
    explicit SchemaIndex(std::vector<DatabaseSchema> schemas);

    const DatabaseSchema* find(std::string_view db_id) const;
    const DatabaseSchema& require(std::string_view db_id) const; // throws IntegrityError
    const std::vector<DatabaseSchema>& all() const { return schemas_; }

private:
    std::vector<DatabaseSchema> schemas_;
    std::unordered_map<std::string, std::size_t> by_id_;
};

// Spider `tables.json`: entries with db_id, table_names_original,
// column_names_original ([table-index, name] pairs led by a [-1, "*"]
// sentinel, which is dropped), column_types, primary_keys (column indices),
// foreign_keys (column index pairs). Index-based keys are resolved to
// (table, column) name pairs against the same entry.
std::vector<DatabaseSchema> load_spider_tables(const std::filesystem::path& path);

// Spider `dev.json`: array of {question, db_id, query}.
std::vector<QuestionRecord> load_questions(const std::filesystem::path& path);

// Reads tables/columns/PK/FK from a SQLite database catalog; db_id is the
// file stem. Foreign keys whose endpoints cannot be resolved in the catalog
// are dropped.
DatabaseSchema schema_from_sqlite(const std::filesystem::path& db_path);

// Deterministic CREATE TABLE style rendering with PK/FK comment annotations.
std::string render_schema_text(const DatabaseSchema& schema);

// Compact "table(col, col)" listing, tables in schema order, columns in
// table order; "(none)" for an empty linking schema.
std::string render_linking_text(const LinkingSchema& linking, const DatabaseSchema& schema);

// Spider dataset layout: <data_root>/database/<db_id>/<db_id>.sqlite
std::filesystem::path spider_db_path(const std::filesystem::path& data_root, std::string_view db_id);

} // namespace s2s
