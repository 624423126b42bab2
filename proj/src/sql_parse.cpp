#include "s2s/sql_parse.hpp"

#include <array>
#include <unordered_set>

#include "s2s/errors.hpp"
#include "s2s/util.hpp"

namespace s2s {

namespace {

constexpr std::string_view kSplitPunct = ",.()=<>!;'\"`+-*/%";

bool is_split_char(char c) {
    return is_space_char(c) || kSplitPunct.find(c) != std::string_view::npos;
}

// Lexer used by table extraction. tokenize_sql deliberately does NOT use
// it: the punctuation-splitting rule there is part of the column-matching
// contract and must stay dumb.
enum class Tk { ident, number, literal, punct };

struct Lexed {
    Tk kind;
    std::string text; // idents: unquoted form, original casing
    bool quoted = false;
};

bool is_ident_start(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}

bool is_ident_char(char c) {
    return is_ident_start(c) || (c >= '0' && c <= '9') || c == '$';
}

std::vector<Lexed> lex_sql(std::string_view sql) {
    std::vector<Lexed> out;
    size_t i = 0;
    const size_t n = sql.size();
    while (i < n) {
        char c = sql[i];
        if (is_space_char(c)) {
            ++i;
            continue;
        }
        if (c == '-' && i + 1 < n && sql[i + 1] == '-') {
            while (i < n && sql[i] != '\n') ++i;
            continue;
        }
        if (c == '/' && i + 1 < n && sql[i + 1] == '*') {
            i += 2;
            while (i + 1 < n && !(sql[i] == '*' && sql[i + 1] == '/')) ++i;
            i = (i + 1 < n) ? i + 2 : n; // unterminated comment swallows the rest
            continue;
        }
        if (c == '\'') {
            std::string text;
            ++i;
            while (true) {
                if (i >= n) throw ParseError("unterminated string literal");
                if (sql[i] == '\'') {
                    if (i + 1 < n && sql[i + 1] == '\'') {
                        text += '\'';
                        i += 2;
                        continue;
                    }
                    ++i;
                    break;
                }
                text += sql[i++];
            }
            out.push_back({Tk::literal, std::move(text), false});
            continue;
        }
        if (c == '"' || c == '`' || c == '[') {
            char close = c == '[' ? ']' : c;
            std::string text;
            ++i;
            while (true) {
                if (i >= n) throw ParseError("unterminated quoted identifier");
                if (sql[i] == close) {
                    if (close != ']' && i + 1 < n && sql[i + 1] == close) {
                        text += close;
                        i += 2;
                        continue;
                    }
                    ++i;
                    break;
                }
                text += sql[i++];
            }
            out.push_back({Tk::ident, std::move(text), true});
            continue;
        }
        if (c >= '0' && c <= '9') {
            size_t start = i;
            while (i < n && ((sql[i] >= '0' && sql[i] <= '9') || sql[i] == '.')) ++i;
            out.push_back({Tk::number, std::string(sql.substr(start, i - start)), false});
            continue;
        }
        if (is_ident_start(c)) {
            size_t start = i;
            while (i < n && is_ident_char(sql[i])) ++i;
            out.push_back({Tk::ident, std::string(sql.substr(start, i - start)), false});
            continue;
        }
        out.push_back({Tk::punct, std::string(1, c), false});
        ++i;
    }
    return out;
}

bool is_keyword(const Lexed& t, std::string_view kw) {
    return t.kind == Tk::ident && !t.quoted && iequals(t.text, kw);
}

bool is_punct(const Lexed& t, char c) {
    return t.kind == Tk::punct && t.text.size() == 1 && t.text[0] == c;
}

// Words that terminate a table source, so they are never read as a bare
// alias ("FROM singer WHERE ..." must not alias singer to "where").
bool is_clause_word(const std::string& word) {
    static const std::unordered_set<std::string> kStop = {
        "on",    "where",  "group",     "order",  "having", "limit",  "offset", "join",
        "inner", "left",   "right",     "full",   "cross",  "outer",  "natural", "union",
        "intersect", "except", "select", "from",  "as",     "using",  "when",   "then",
        "else",  "end",    "and",       "or",     "not",    "in",     "is",     "like",
        "between", "exists", "set",     "values", "window", "asc",    "desc",   "by"};
    return kStop.count(to_lower(word)) > 0;
}

struct TableCollector {
    const DatabaseSchema& schema;
    std::vector<TableReference> refs;
    std::unordered_set<std::string> seen; // lowercase real names

    void record(const std::string& name, const std::string& alias) {
        const TableDef* t = schema.find_table(name);
        if (!t) return;
        std::string key = to_lower(t->name);
        if (!seen.insert(key).second) return;
        refs.push_back({t->name, alias});
    }
};

// Parses one table source starting at i; returns the index just past it.
// A "(" opening a subquery is stepped INTO (the caller's linear scan will
// meet the inner FROM); a "(" opening a parenthesized join recurses so the
// first real table inside is still captured.
size_t parse_one_source(const std::vector<Lexed>& toks, size_t i, TableCollector& out) {
    if (i >= toks.size()) return i;
    if (is_punct(toks[i], '(')) {
        if (i + 1 < toks.size() &&
            (is_keyword(toks[i + 1], "select") || is_keyword(toks[i + 1], "with"))) {
            return i + 1;
        }
        return parse_one_source(toks, i + 1, out);
    }
    if (toks[i].kind != Tk::ident) return i + 1;

    std::string name = toks[i].text;
    ++i;
    while (i + 1 < toks.size() && is_punct(toks[i], '.') && toks[i + 1].kind == Tk::ident) {
        name = toks[i + 1].text; // qualified name: keep the last part
        i += 2;
    }

    std::string alias;
    if (i + 1 < toks.size() && is_keyword(toks[i], "as") && toks[i + 1].kind == Tk::ident) {
        alias = toks[i + 1].text;
        i += 2;
    } else if (i < toks.size() && toks[i].kind == Tk::ident && !toks[i].quoted &&
               !is_clause_word(toks[i].text)) {
        alias = toks[i].text;
        ++i;
    }

    out.record(name, alias);
    return i;
}

// Comma-separated source lists only occur after FROM; JOIN introduces
// exactly one source.
size_t parse_source_list(const std::vector<Lexed>& toks, size_t i, bool allow_commas,
                         TableCollector& out) {
    while (true) {
        i = parse_one_source(toks, i, out);
        if (allow_commas && i < toks.size() && is_punct(toks[i], ',')) {
            ++i;
            continue;
        }
        return i;
    }
}

TableExtraction extract_tables_fallback(std::string_view sql, const DatabaseSchema& schema) {
    TableExtraction out;
    out.fallback_used = true;
    SqlTokenList toks = tokenize_sql(sql);
    std::unordered_set<std::string> seen;
    for (size_t i = 0; i + 1 < toks.tokens.size(); ++i) {
        if (toks.tokens[i] != "from" && toks.tokens[i] != "join") continue;
        const TableDef* t = schema.find_table(toks.tokens[i + 1]);
        if (!t) continue;
        if (!seen.insert(to_lower(t->name)).second) continue;
        out.tables.push_back({t->name, ""});
    }
    return out;
}

} // namespace

SqlTokenList tokenize_sql(std::string_view sql) {
    SqlTokenList out;
    std::string current;
    auto flush = [&]() {
        if (!current.empty()) {
            out.tokens.push_back(to_lower(current));
            current.clear();
        }
    };
    for (char c : sql) {
        if (c == '*') out.has_asterisk = true;
        if (is_split_char(c)) {
            flush();
        } else {
            current += c;
        }
    }
    flush();
    return out;
}

TableExtraction extract_tables(std::string_view sql, const DatabaseSchema& schema) {
    std::vector<Lexed> toks;
    try {
        toks = lex_sql(sql);
    } catch (const ParseError&) {
        return extract_tables_fallback(sql, schema);
    }

    TableCollector collector{schema, {}, {}};
    size_t i = 0;
    while (i < toks.size()) {
        if (is_keyword(toks[i], "from") || is_keyword(toks[i], "join")) {
            bool allow_commas = is_keyword(toks[i], "from");
            i = parse_source_list(toks, i + 1, allow_commas, collector);
        } else {
            ++i;
        }
    }

    TableExtraction out;
    out.tables = std::move(collector.refs);
    return out;
}

LinkingSchema extract_linking_schema(std::string_view sql, const DatabaseSchema& schema,
                                     bool* fallback_used) {
    TableExtraction ext = extract_tables(sql, schema);
    if (fallback_used) *fallback_used = ext.fallback_used;

    SqlTokenList toks = tokenize_sql(sql);
    std::unordered_set<std::string> targets(toks.tokens.begin(), toks.tokens.end());

    std::unordered_set<std::string> linked; // lowercase names of extracted tables
    for (const auto& ref : ext.tables) linked.insert(to_lower(ref.real_name));

    LinkingSchema out;
    out.db_id = schema.db_id;
    for (const auto& t : schema.tables) {
        if (!linked.count(to_lower(t.name))) continue;
        LinkingEntry entry;
        entry.table = t.name;
        for (const auto& c : t.columns) {
            if (targets.count(to_lower(c.name))) entry.columns.push_back(c.name);
        }
        if (toks.has_asterisk && entry.columns.empty()) {
            for (const auto& c : t.columns) entry.columns.push_back(c.name);
        }
        out.entries.push_back(std::move(entry));
    }
    return out;
}

LinkingSchema gold_labels(const QuestionRecord& record, const DatabaseSchema& schema) {
    LinkingSchema out = extract_linking_schema(record.gold_sql, schema);
    out.source = LinkingSource::gold_label();
    return out;
}

} // namespace s2s
