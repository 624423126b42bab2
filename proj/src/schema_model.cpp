#include "s2s/schema_model.hpp"

#include <algorithm>
#include <set>
#include <sstream>
#include <utility>

#include <sqlite3.h>

#include "s2s/errors.hpp"
#include "s2s/util.hpp"

namespace s2s {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

// RAII wrappers for the two sqlite handles used during introspection.
struct DbHandle {
    sqlite3* db = nullptr;
    ~DbHandle() {
        if (db) sqlite3_close(db);
    }
};

struct StmtHandle {
    sqlite3_stmt* stmt = nullptr;
    ~StmtHandle() {
        if (stmt) sqlite3_finalize(stmt);
    }
};

std::string column_text(sqlite3_stmt* stmt, int idx) {
    const unsigned char* p = sqlite3_column_text(stmt, idx);
    return p ? reinterpret_cast<const char*>(p) : "";
}

} // namespace

const ColumnDef* TableDef::find_column(std::string_view column_name) const {
    for (const auto& c : columns) {
        if (iequals(c.name, column_name)) return &c;
    }
    return nullptr;
}

const TableDef* DatabaseSchema::find_table(std::string_view table_name) const {
    for (const auto& t : tables) {
        if (iequals(t.name, table_name)) return &t;
    }
    return nullptr;
}

void DatabaseSchema::validate() const {
    std::set<std::string> seen_tables;
    for (const auto& t : tables) {
        if (t.name.empty()) {
            throw IntegrityError("schema " + db_id + ": empty table name");
        }
        if (!seen_tables.insert(to_lower(t.name)).second) {
            throw IntegrityError("schema " + db_id + ": duplicate table name " + t.name);
        }
        if (t.columns.empty()) {
            throw IntegrityError("schema " + db_id + ": table " + t.name + " has no columns");
        }
        std::set<std::string> seen_cols;
        for (const auto& c : t.columns) {
            if (c.name.empty()) {
                throw IntegrityError("schema " + db_id + ": table " + t.name + " has an empty column name");
            }
            if (!seen_cols.insert(to_lower(c.name)).second) {
                throw IntegrityError("schema " + db_id + ": table " + t.name + " duplicates column " + c.name);
            }
        }
    }
    auto check_endpoint = [&](const std::string& table, const std::string& column, const char* what) {
        const TableDef* t = find_table(table);
        if (!t) {
            throw IntegrityError("schema " + db_id + ": " + what + " names unknown table " + table);
        }
        if (!t->find_column(column)) {
            throw IntegrityError("schema " + db_id + ": " + what + " names unknown column " + table + "." + column);
        }
    };
    for (const auto& pk : primary_keys) check_endpoint(pk.table, pk.column, "primary key");
    for (const auto& fk : foreign_keys) {
        check_endpoint(fk.child_table, fk.child_column, "foreign key");
        check_endpoint(fk.parent_table, fk.parent_column, "foreign key");
    }
}

bool LinkingSchema::has_table(std::string_view table_name) const {
    for (const auto& e : entries) {
        if (iequals(e.table, table_name)) return true;
    }
    return false;
}

void LinkingSchema::validate_against(const DatabaseSchema& schema) const {
    for (const auto& e : entries) {
        const TableDef* t = schema.find_table(e.table);
        if (!t) {
            throw IntegrityError("linking schema for " + db_id + ": unknown table " + e.table);
        }
        for (const auto& c : e.columns) {
            if (!t->find_column(c)) {
                throw IntegrityError("linking schema for " + db_id + ": unknown column " + e.table + "." + c);
            }
        }
    }
}

bool entries_equal(const LinkingSchema& a, const LinkingSchema& b) {
    if (a.db_id != b.db_id || a.entries.size() != b.entries.size()) return false;
    for (size_t i = 0; i < a.entries.size(); ++i) {
        if (a.entries[i].table != b.entries[i].table) return false;
        if (a.entries[i].columns != b.entries[i].columns) return false;
    }
    return true;
}

nlohmann::ordered_json linking_to_json(const LinkingSchema& linking) {
    ordered_json j;
    j["db_id"] = linking.db_id;
    j["source"] = linking.source.kind == LinkingSource::Kind::gold ? "gold" : "round";
    if (linking.source.kind == LinkingSource::Kind::round) {
        j["round"] = linking.source.round;
    }
    ordered_json tables = ordered_json::object();
    for (const auto& e : linking.entries) {
        tables[e.table] = e.columns;
    }
    j["tables"] = std::move(tables);
    return j;
}

LinkingSchema linking_from_json(const nlohmann::ordered_json& j) {
    try {
        LinkingSchema out;
        out.db_id = j.at("db_id").get<std::string>();
        std::string source = j.value("source", std::string("round"));
        if (source == "gold") {
            out.source = LinkingSource::gold_label();
        } else {
            out.source = LinkingSource::round_k(j.value("round", 0));
        }
        for (const auto& [table, cols] : j.at("tables").items()) {
            LinkingEntry e;
            e.table = table;
            e.columns = cols.get<std::vector<std::string>>();
            out.entries.push_back(std::move(e));
        }
        return out;
    } catch (const json::exception& e) {
        throw ParseError(std::string("bad linking schema json: ") + e.what());
    }
}

SchemaIndex::SchemaIndex(std::vector<DatabaseSchema> schemas) : schemas_(std::move(schemas)) {
    for (size_t i = 0; i < schemas_.size(); ++i) {
        auto [it, inserted] = by_id_.emplace(to_lower(schemas_[i].db_id), i);
        if (!inserted) {
            throw IntegrityError("duplicate db_id: " + schemas_[i].db_id);
        }
    }
}

const DatabaseSchema* SchemaIndex::find(std::string_view db_id) const {
    auto it = by_id_.find(to_lower(db_id));
    return it == by_id_.end() ? nullptr : &schemas_[it->second];
}

const DatabaseSchema& SchemaIndex::require(std::string_view db_id) const {
    const DatabaseSchema* s = find(db_id);
    if (!s) {
        throw IntegrityError("unknown db_id: " + std::string(db_id));
    }
    return *s;
}

std::vector<DatabaseSchema> load_spider_tables(const std::filesystem::path& path) {
    json doc;
    try {
        doc = json::parse(read_text_file(path));
    } catch (const json::exception& e) {
        throw ParseError("tables file " + path.string() + ": " + e.what());
    }
    if (!doc.is_array()) {
        throw ParseError("tables file " + path.string() + ": expected a JSON array");
    }

    std::vector<DatabaseSchema> out;
    out.reserve(doc.size());
    for (size_t entry_idx = 0; entry_idx < doc.size(); ++entry_idx) {
        const json& entry = doc[entry_idx];
        DatabaseSchema schema;
        std::string where = "tables entry " + std::to_string(entry_idx);
        try {
            schema.db_id = entry.at("db_id").get<std::string>();
            where = "tables entry " + schema.db_id;

            for (const auto& name : entry.at("table_names_original")) {
                TableDef t;
                t.name = name.get<std::string>();
                schema.tables.push_back(std::move(t));
            }

            const json& columns = entry.at("column_names_original");
            const json* types = entry.contains("column_types") ? &entry.at("column_types") : nullptr;

            // column index -> (table index, column name), sentinel [-1, "*"] kept
            // in the index space but not materialized as a column.
            std::vector<std::pair<int, std::string>> by_index;
            for (size_t ci = 0; ci < columns.size(); ++ci) {
                int table_idx = columns[ci].at(0).get<int>();
                std::string col_name = columns[ci].at(1).get<std::string>();
                by_index.emplace_back(table_idx, col_name);
                if (table_idx < 0) continue; // the "*" sentinel
                if (table_idx >= static_cast<int>(schema.tables.size())) {
                    throw IntegrityError(where + ": column " + col_name + " names table index " +
                                         std::to_string(table_idx) + " out of range");
                }
                ColumnDef c;
                c.name = col_name;
                if (types && ci < types->size()) c.decl_type = (*types)[ci].get<std::string>();
                schema.tables[static_cast<size_t>(table_idx)].columns.push_back(std::move(c));
            }

            auto resolve = [&](int col_idx, const char* what) -> KeyColumn {
                if (col_idx < 0 || col_idx >= static_cast<int>(by_index.size()) ||
                    by_index[static_cast<size_t>(col_idx)].first < 0) {
                    throw IntegrityError(where + ": " + what + " column index " +
                                         std::to_string(col_idx) + " is dangling");
                }
                const auto& [table_idx, col_name] = by_index[static_cast<size_t>(col_idx)];
                return {schema.tables[static_cast<size_t>(table_idx)].name, col_name};
            };

            if (entry.contains("primary_keys")) {
                for (const auto& pk : entry.at("primary_keys")) {
                    schema.primary_keys.push_back(resolve(pk.get<int>(), "primary key"));
                }
            }
            if (entry.contains("foreign_keys")) {
                for (const auto& fk : entry.at("foreign_keys")) {
                    KeyColumn child = resolve(fk.at(0).get<int>(), "foreign key");
                    KeyColumn parent = resolve(fk.at(1).get<int>(), "foreign key");
                    schema.foreign_keys.push_back({child.table, child.column, parent.table, parent.column});
                }
            }
        } catch (const json::exception& e) {
            throw ParseError(where + ": " + e.what());
        }
        schema.validate();
        out.push_back(std::move(schema));
    }
    return out;
}

std::vector<QuestionRecord> load_questions(const std::filesystem::path& path) {
    json doc;
    try {
        doc = json::parse(read_text_file(path));
    } catch (const json::exception& e) {
        throw ParseError("questions file " + path.string() + ": " + e.what());
    }
    if (!doc.is_array()) {
        throw ParseError("questions file " + path.string() + ": expected a JSON array");
    }

    std::vector<QuestionRecord> out;
    out.reserve(doc.size());
    for (size_t i = 0; i < doc.size(); ++i) {
        QuestionRecord r;
        r.question_id = static_cast<int>(i);
        try {
            r.question = doc[i].at("question").get<std::string>();
            r.db_id = doc[i].at("db_id").get<std::string>();
            r.gold_sql = doc[i].at("query").get<std::string>();
        } catch (const json::exception& e) {
            throw ParseError("questions file record " + std::to_string(i) + ": " + e.what());
        }
        out.push_back(std::move(r));
    }
    return out;
}

DatabaseSchema schema_from_sqlite(const std::filesystem::path& db_path) {
    DbHandle h;
    int rc = sqlite3_open_v2(db_path.string().c_str(), &h.db, SQLITE_OPEN_READONLY, nullptr);
    if (rc != SQLITE_OK) {
        throw InfrastructureError("cannot open database " + db_path.string() + ": " +
                                  (h.db ? sqlite3_errmsg(h.db) : "out of memory"));
    }

    auto prepare = [&](const std::string& sql) {
        StmtHandle s;
        if (sqlite3_prepare_v2(h.db, sql.c_str(), -1, &s.stmt, nullptr) != SQLITE_OK) {
            throw InfrastructureError("cannot read catalog of " + db_path.string() + ": " +
                                      sqlite3_errmsg(h.db));
        }
        return s;
    };

    DatabaseSchema schema;
    schema.db_id = db_path.stem().string();

    {
        StmtHandle s = prepare(
            "SELECT name FROM sqlite_master WHERE type='table' AND name NOT LIKE 'sqlite_%' ORDER BY rowid");
        while (true) {
            rc = sqlite3_step(s.stmt);
            if (rc == SQLITE_ROW) {
                TableDef t;
                t.name = column_text(s.stmt, 0);
                schema.tables.push_back(std::move(t));
            } else if (rc == SQLITE_DONE) {
                break;
            } else {
                throw InfrastructureError("cannot read catalog of " + db_path.string() + ": " +
                                          sqlite3_errmsg(h.db));
            }
        }
    }

    auto quote_ident = [](const std::string& name) {
        std::string out = "\"";
        for (char c : name) {
            out += c;
            if (c == '"') out += '"';
        }
        out += "\"";
        return out;
    };

    for (auto& t : schema.tables) {
        // pk ordinal -> column name, so composite keys keep declaration order
        std::vector<std::pair<int, std::string>> pk_cols;
        StmtHandle s = prepare("PRAGMA table_info(" + quote_ident(t.name) + ")");
        while (sqlite3_step(s.stmt) == SQLITE_ROW) {
            ColumnDef c;
            c.name = column_text(s.stmt, 1);
            c.decl_type = column_text(s.stmt, 2);
            int pk = sqlite3_column_int(s.stmt, 5);
            if (pk > 0) pk_cols.emplace_back(pk, c.name);
            t.columns.push_back(std::move(c));
        }
        std::sort(pk_cols.begin(), pk_cols.end());
        for (auto& [ord, name] : pk_cols) {
            schema.primary_keys.push_back({t.name, name});
        }
    }

    for (const auto& t : schema.tables) {
        StmtHandle s = prepare("PRAGMA foreign_key_list(" + quote_ident(t.name) + ")");
        while (sqlite3_step(s.stmt) == SQLITE_ROW) {
            ForeignKey fk;
            fk.child_table = t.name;
            fk.parent_table = column_text(s.stmt, 2);
            fk.child_column = column_text(s.stmt, 3);
            fk.parent_column = column_text(s.stmt, 4);
            schema.foreign_keys.push_back(std::move(fk));
        }
    }

    // Resolve FK endpoints against what the catalog actually holds; an
    // unnamed parent column means "the parent's primary key".
    std::vector<ForeignKey> resolved;
    for (auto fk : schema.foreign_keys) {
        const TableDef* child = schema.find_table(fk.child_table);
        const TableDef* parent = schema.find_table(fk.parent_table);
        if (!child || !parent || !child->find_column(fk.child_column)) continue;
        if (fk.parent_column.empty()) {
            for (const auto& pk : schema.primary_keys) {
                if (iequals(pk.table, fk.parent_table)) {
                    fk.parent_column = pk.column;
                    break;
                }
            }
        }
        if (fk.parent_column.empty() || !parent->find_column(fk.parent_column)) continue;
        resolved.push_back(std::move(fk));
    }
    schema.foreign_keys = std::move(resolved);

    return schema;
}

std::string render_schema_text(const DatabaseSchema& schema) {
    std::ostringstream out;
    bool first = true;
    for (const auto& t : schema.tables) {
        if (!first) out << "\n\n";
        first = false;
        out << "CREATE TABLE " << t.name << " (";
        for (size_t i = 0; i < t.columns.size(); ++i) {
            out << (i == 0 ? "\n" : ",\n") << "  " << t.columns[i].name;
            if (!t.columns[i].decl_type.empty()) out << " " << t.columns[i].decl_type;
        }
        out << "\n);";
        for (const auto& pk : schema.primary_keys) {
            if (iequals(pk.table, t.name)) {
                out << "\n-- primary key: " << pk.table << "(" << pk.column << ")";
            }
        }
        for (const auto& fk : schema.foreign_keys) {
            if (iequals(fk.child_table, t.name)) {
                out << "\n-- foreign key: " << fk.child_table << "(" << fk.child_column
                    << ") references " << fk.parent_table << "(" << fk.parent_column << ")";
            }
        }
    }
    return out.str();
}

std::string render_linking_text(const LinkingSchema& linking, const DatabaseSchema& schema) {
    linking.validate_against(schema);
    if (linking.entries.empty()) return "(none)";

    std::vector<std::string> lines;
    for (const auto& t : schema.tables) {
        const LinkingEntry* entry = nullptr;
        for (const auto& e : linking.entries) {
            if (iequals(e.table, t.name)) {
                entry = &e;
                break;
            }
        }
        if (!entry) continue;
        std::vector<std::string> cols;
        for (const auto& c : t.columns) {
            for (const auto& name : entry->columns) {
                if (iequals(name, c.name)) {
                    cols.push_back(c.name);
                    break;
                }
            }
        }
        lines.push_back(t.name + "(" + join(cols, ", ") + ")");
    }
    return join(lines, "\n");
}

std::filesystem::path spider_db_path(const std::filesystem::path& data_root, std::string_view db_id) {
    std::string id(db_id);
    return data_root / "database" / id / (id + ".sqlite");
}

} // namespace s2s
