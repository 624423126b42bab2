#include "test_support.hpp"

#include <cstdlib>
#include <random>
#include <stdexcept>

#include <sqlite3.h>

#include "json.hpp"

#include "s2s/sql_parse.hpp"
#include "s2s/util.hpp"

namespace s2s::test {

namespace {

using nlohmann::ordered_json;

std::string quote_ident(const std::string& name) {
    std::string out = "\"";
    for (char c : name) {
        out += c;
        if (c == '"') out += '"';
    }
    out += "\"";
    return out;
}

} // namespace

TempDir::TempDir() {
    std::random_device rd;
    std::mt19937_64 gen(rd());
    for (int attempt = 0; attempt < 16; ++attempt) {
        auto candidate = std::filesystem::temp_directory_path() /
                         ("s2s_test_" + std::to_string(gen()));
        std::error_code ec;
        if (std::filesystem::create_directory(candidate, ec)) {
            path_ = candidate;
            return;
        }
    }
    throw std::runtime_error("cannot create a unique temp directory");
}

TempDir::~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
}

EnvGuard::EnvGuard(std::string name, const std::string& value) : name_(std::move(name)) {
    if (const char* old = std::getenv(name_.c_str())) {
        had_old_ = true;
        old_value_ = old;
    }
    if (value.empty()) {
        ::unsetenv(name_.c_str());
    } else {
        ::setenv(name_.c_str(), value.c_str(), 1);
    }
}

EnvGuard::~EnvGuard() {
    if (had_old_) {
        ::setenv(name_.c_str(), old_value_.c_str(), 1);
    } else {
        ::unsetenv(name_.c_str());
    }
}

DatabaseSchema concert_singer_schema() {
    DatabaseSchema s;
    s.db_id = "concert_singer";
    s.tables = {
        {"singer",
         {{"singer_id", "number"}, {"name", "text"}, {"age", "number"}, {"country", "text"}}},
        {"concert", {{"concert_id", "number"}, {"theme", "text"}, {"year", "number"}}},
        {"singer_in_concert", {{"concert_id", "number"}, {"singer_id", "number"}}},
        {"stadium",
         {{"stadium_id", "number"}, {"location", "text"}, {"capacity", "number"}, {"year", "number"}}},
    };
    s.primary_keys = {{"singer", "singer_id"}, {"concert", "concert_id"}, {"stadium", "stadium_id"}};
    s.foreign_keys = {
        {"singer_in_concert", "singer_id", "singer", "singer_id"},
        {"singer_in_concert", "concert_id", "concert", "concert_id"},
    };
    return s;
}

DatabaseSchema orders_db_schema() {
    DatabaseSchema s;
    s.db_id = "orders_db";
    s.tables = {
        {"orders",
         {{"order_id", "number"}, {"year", "number"}, {"count", "number"}, {"status", "text"}}},
        {"customers", {{"customer_id", "number"}, {"name", "text"}, {"year", "number"}}},
        {"products", {{"product_id", "number"}, {"name", "text"}, {"price", "number"}}},
    };
    s.primary_keys = {{"orders", "order_id"}, {"customers", "customer_id"}, {"products", "product_id"}};
    s.foreign_keys = {};
    return s;
}

void write_spider_tables_json(const std::filesystem::path& path,
                              const std::vector<DatabaseSchema>& schemas) {
    ordered_json doc = ordered_json::array();
    for (const auto& schema : schemas) {
        ordered_json entry;
        entry["db_id"] = schema.db_id;

        ordered_json table_names = ordered_json::array();
        for (const auto& t : schema.tables) table_names.push_back(t.name);
        entry["table_names_original"] = std::move(table_names);

        ordered_json columns = ordered_json::array();
        ordered_json types = ordered_json::array();
        columns.push_back(ordered_json::array({-1, "*"}));
        types.push_back("text");
        std::map<std::string, int> index_of; // "table\ncolumn" -> global column index
        int next = 1;
        for (size_t ti = 0; ti < schema.tables.size(); ++ti) {
            for (const auto& c : schema.tables[ti].columns) {
                columns.push_back(ordered_json::array({static_cast<int>(ti), c.name}));
                types.push_back(c.decl_type.empty() ? "text" : c.decl_type);
                index_of[to_lower(schema.tables[ti].name) + "\n" + to_lower(c.name)] = next++;
            }
        }
        entry["column_names_original"] = std::move(columns);
        entry["column_types"] = std::move(types);

        auto resolve = [&](const std::string& table, const std::string& column) {
            auto it = index_of.find(to_lower(table) + "\n" + to_lower(column));
            if (it == index_of.end()) {
                throw std::runtime_error("fixture key endpoint not found: " + table + "." + column);
            }
            return it->second;
        };

        ordered_json pks = ordered_json::array();
        for (const auto& pk : schema.primary_keys) pks.push_back(resolve(pk.table, pk.column));
        entry["primary_keys"] = std::move(pks);

        ordered_json fks = ordered_json::array();
        for (const auto& fk : schema.foreign_keys) {
            fks.push_back(ordered_json::array({resolve(fk.child_table, fk.child_column),
                                               resolve(fk.parent_table, fk.parent_column)}));
        }
        entry["foreign_keys"] = std::move(fks);

        doc.push_back(std::move(entry));
    }
    write_text_file(path, doc.dump(1) + "\n");
}

void write_dev_json(const std::filesystem::path& path,
                    const std::vector<QuestionRecord>& questions) {
    ordered_json doc = ordered_json::array();
    for (const auto& q : questions) {
        ordered_json rec;
        rec["question"] = q.question;
        rec["db_id"] = q.db_id;
        rec["query"] = q.gold_sql;
        doc.push_back(std::move(rec));
    }
    write_text_file(path, doc.dump(1) + "\n");
}

void create_sqlite_db(const std::filesystem::path& db_path, const DatabaseSchema& schema,
                      const std::vector<std::string>& statements) {
    if (db_path.has_parent_path()) {
        std::filesystem::create_directories(db_path.parent_path());
    }

    sqlite3* db = nullptr;
    if (sqlite3_open(db_path.string().c_str(), &db) != SQLITE_OK) {
        std::string msg = db ? sqlite3_errmsg(db) : "out of memory";
        if (db) sqlite3_close(db);
        throw std::runtime_error("cannot create fixture db " + db_path.string() + ": " + msg);
    }

    auto exec = [&](const std::string& sql) {
        char* err = nullptr;
        if (sqlite3_exec(db, sql.c_str(), nullptr, nullptr, &err) != SQLITE_OK) {
            std::string msg = err ? err : "unknown error";
            sqlite3_free(err);
            sqlite3_close(db);
            throw std::runtime_error("fixture statement failed (" + sql + "): " + msg);
        }
    };

    for (const auto& t : schema.tables) {
        std::string ddl = "CREATE TABLE " + quote_ident(t.name) + " (";
        for (size_t i = 0; i < t.columns.size(); ++i) {
            if (i) ddl += ", ";
            ddl += quote_ident(t.columns[i].name);
            if (!t.columns[i].decl_type.empty()) ddl += " " + t.columns[i].decl_type;
        }
        ddl += ")";
        exec(ddl);
    }
    for (const auto& stmt : statements) exec(stmt);
    sqlite3_close(db);
}

std::vector<std::string> concert_singer_rows() {
    return {
        "INSERT INTO singer VALUES (1, 'Joe Sharp', 52, 'Netherlands')",
        "INSERT INTO singer VALUES (2, 'Timbaland', 32, 'United States')",
        "INSERT INTO singer VALUES (3, 'Justin Brown', 29, 'France')",
        "INSERT INTO singer VALUES (4, 'Rose White', 41, 'France')",
        "INSERT INTO singer VALUES (5, 'John Nizinik', 43, 'Georgia')",
        "INSERT INTO singer VALUES (6, 'Tribal King', 25, 'France')",
        "INSERT INTO concert VALUES (1, 'Auditions', 2014)",
        "INSERT INTO concert VALUES (2, 'Super bootcamp', 2015)",
        "INSERT INTO concert VALUES (3, 'Home Visits', 2015)",
        "INSERT INTO concert VALUES (4, 'Week 1', 2019)",
        "INSERT INTO singer_in_concert VALUES (1, 2)",
        "INSERT INTO singer_in_concert VALUES (1, 3)",
        "INSERT INTO singer_in_concert VALUES (2, 3)",
        "INSERT INTO singer_in_concert VALUES (3, 6)",
        "INSERT INTO singer_in_concert VALUES (4, 1)",
        "INSERT INTO stadium VALUES (1, 'Raith Rovers', 10104, 2004)",
        "INSERT INTO stadium VALUES (2, 'Ayr United', 11998, 2007)",
        "INSERT INTO stadium VALUES (3, 'East Fife', 2000, 2011)",
    };
}

std::vector<std::string> orders_db_rows() {
    return {
        "INSERT INTO orders VALUES (1, 2014, 3, 'open')",
        "INSERT INTO orders VALUES (2, 2015, 1, 'shipped')",
        "INSERT INTO orders VALUES (3, 2017, 7, 'open')",
        "INSERT INTO orders VALUES (4, 2019, 2, 'returned')",
        "INSERT INTO orders VALUES (5, 2021, 9, 'shipped')",
        "INSERT INTO orders VALUES (6, 2022, 4, 'open')",
        "INSERT INTO customers VALUES (1, 'Acme Corp', 1996)",
        "INSERT INTO customers VALUES (2, 'Globex', 2001)",
        "INSERT INTO customers VALUES (3, 'Initech', 2008)",
        "INSERT INTO customers VALUES (4, 'Umbrella', 2013)",
        "INSERT INTO customers VALUES (5, 'Hooli', 2016)",
        "INSERT INTO products VALUES (1, 'widget', 2.5)",
        "INSERT INTO products VALUES (2, 'gadget', 14.0)",
        "INSERT INTO products VALUES (3, 'sprocket', 7.25)",
        "INSERT INTO products VALUES (4, 'doohickey', 99.99)",
    };
}

void write_dataset(const std::filesystem::path& root, const DatasetSpec& spec) {
    std::filesystem::create_directories(root);
    write_spider_tables_json(root / "tables.json", spec.schemas);
    write_dev_json(root / "dev.json", spec.questions);
    for (const auto& schema : spec.schemas) {
        auto it = spec.statements_by_db.find(schema.db_id);
        create_sqlite_db(spider_db_path(root, schema.db_id), schema,
                         it == spec.statements_by_db.end() ? std::vector<std::string>{}
                                                           : it->second);
    }
}

DatasetSpec make_dataset_spec(int count) {
    DatasetSpec spec;
    spec.schemas = {concert_singer_schema(), orders_db_schema()};
    spec.statements_by_db["concert_singer"] = concert_singer_rows();
    spec.statements_by_db["orders_db"] = orders_db_rows();

    for (int i = 0; i < count; ++i) {
        QuestionRecord q;
        q.question_id = i;
        std::string gold;
        if (i % 2 == 0) {
            q.db_id = "concert_singer";
            switch ((i / 2) % 6) {
                case 0: gold = "SELECT name FROM singer WHERE age > " + std::to_string(20 + i % 35); break;
                case 1: gold = "SELECT count(*) FROM singer"; break;
                case 2: gold = "SELECT name FROM singer ORDER BY age DESC LIMIT " + std::to_string(1 + i % 4); break;
                case 3: gold = "SELECT theme FROM concert WHERE year > " + std::to_string(1990 + i % 28); break;
                case 4: gold = "SELECT T1.name FROM singer AS T1 JOIN singer_in_concert AS T2 ON T1.singer_id = T2.singer_id"; break;
                default: gold = "SELECT avg(age) FROM singer WHERE country = 'France'"; break;
            }
        } else {
            q.db_id = "orders_db";
            switch ((i / 2) % 4) {
                case 0: gold = "SELECT name FROM customers WHERE year > " + std::to_string(1995 + i % 20); break;
                case 1: gold = "SELECT count FROM orders WHERE order_id = " + std::to_string(1 + i % 6); break;
                case 2: gold = "SELECT name, price FROM products ORDER BY price LIMIT " + std::to_string(1 + i % 3); break;
                default: gold = "SELECT status FROM orders WHERE year = " + std::to_string(2014 + i % 9); break;
            }
        }
        q.gold_sql = gold;
        q.question = "fixture question " + std::to_string(i) + " answered by: " + gold;
        spec.questions.push_back(std::move(q));
    }
    return spec;
}

std::unordered_map<std::string, std::string> synthesize_replay_responses(
    const std::vector<QuestionRecord>& questions, const SchemaIndex& schemas,
    const PromptTemplates& templates, const CompletionRequest& base_request, int rounds,
    const RespondFn& respond) {
    std::unordered_map<std::string, std::string> out;

    // First writer wins, matching last-writer-wins file semantics only when
    // each key is written once; the chain below always reuses the stored
    // text, so what the client will serve is also what the chain assumed.
    auto serve = [&out](const std::string& key, std::string text) -> const std::string& {
        auto [it, inserted] = out.emplace(key, std::move(text));
        return it->second;
    };

    auto key_for = [&base_request](const Prompt& p) {
        CompletionRequest req = base_request;
        req.system_text = p.system_text;
        req.user_text = p.user_text;
        return req.request_key();
    };

    for (const auto& q : questions) {
        const DatabaseSchema& schema = schemas.require(q.db_id);

        Prompt initial = templates.build_initial_prompt(schema, q.question);
        const std::string& raw0 = serve(key_for(initial), respond(q, 0));
        std::string sql = extract_sql(raw0);
        if (sql.empty()) continue; // initial generation fails; no later rounds happen

        LinkingSchema current = extract_linking_schema(sql, schema);
        for (int k = 1; k <= rounds; ++k) {
            Prompt p = templates.build_refine_prompt(schema, current, q.question, k);
            const std::string& raw = serve(key_for(p), respond(q, k));
            std::string sql_k = extract_sql(raw);
            if (!sql_k.empty()) current = extract_linking_schema(sql_k, schema);
        }
    }
    return out;
}

void write_replay_file(const std::filesystem::path& path,
                       const std::unordered_map<std::string, std::string>& by_key) {
    std::map<std::string, std::string> sorted(by_key.begin(), by_key.end());
    std::string body;
    for (const auto& [key, text] : sorted) {
        ordered_json rec;
        rec["request_key"] = key;
        rec["model"] = "fixture";
        rec["raw_text"] = text;
        rec["timestamp"] = "1970-01-01T00:00:00Z";
        body += rec.dump();
        body += "\n";
    }
    write_text_file(path, body);
}

std::unordered_map<std::string, std::string> gold_echo_responses(
    const std::vector<QuestionRecord>& questions, const SchemaIndex& schemas, int rounds,
    const CompletionRequest& base_request) {
    return synthesize_replay_responses(
        questions, schemas, PromptTemplates::builtin(), base_request, rounds,
        [](const QuestionRecord& q, int) { return q.gold_sql; });
}

} // namespace s2s::test
