#include "s2s/prompting.hpp"

#include <array>
#include <utility>

#include "s2s/errors.hpp"
#include "s2s/util.hpp"

namespace s2s {

namespace {

// Compiled-in copies of templates/isg.txt and templates/sg.txt. Keep these
// byte-identical to the shipped files; a test compares them.
constexpr const char* kIsgSystem =
    "You are an expert SQLite engineer. Given a database schema and a question, you write one "
    "correct SQLite query that answers the question. Reply with the SQL only: no explanation, "
    "no markdown fences, no trailing commentary.";

constexpr const char* kIsgUserBody =
    "Database schema:\n"
    "\n"
    "{schema}\n"
    "\n"
    "Question: {question}\n"
    "\n"
    "Write one SQLite query that answers the question. Reply with the SQL only: no explanation, "
    "no markdown fences, no trailing commentary.\n";

constexpr const char* kSgSystem =
    "You are a careful SQLite reviewer. You are given a shortlist of tables and columns that a "
    "draft of the query touched, plus the full database schema. The shortlist is a hint and may "
    "be incomplete: always verify against the full schema before answering. Reply with the SQL "
    "only: no explanation, no markdown fences, no trailing commentary.";

constexpr const char* kSgUserBody =
    "Database schema:\n"
    "\n"
    "{schema}\n"
    "\n"
    "Likely relevant tables and columns (a reference, not a restriction; the schema above is "
    "authoritative):\n"
    "\n"
    "{linking}\n"
    "\n"
    "Question: {question}\n"
    "\n"
    "Write one SQLite query that answers the question. Reply with the SQL only: no explanation, "
    "no markdown fences, no trailing commentary.\n";

constexpr std::array<std::string_view, 3> kPlaceholders = {"{schema}", "{linking}", "{question}"};

size_t count_occurrences(std::string_view text, std::string_view needle) {
    size_t count = 0;
    size_t pos = 0;
    while ((pos = text.find(needle, pos)) != std::string_view::npos) {
        ++count;
        pos += needle.size();
    }
    return count;
}

void check_counts(const PromptTemplate& tpl, const char* name, size_t schema_n, size_t linking_n,
                  size_t question_n) {
    for (auto ph : kPlaceholders) {
        if (count_occurrences(tpl.system_text, ph) != 0) {
            throw ParseError(std::string(name) + " template: system text must not contain " +
                             std::string(ph));
        }
    }
    auto expect = [&](std::string_view ph, size_t want) {
        size_t got = count_occurrences(tpl.user_body, ph);
        if (got != want) {
            throw ParseError(std::string(name) + " template: expected " + std::to_string(want) +
                             " occurrence(s) of " + std::string(ph) + ", found " +
                             std::to_string(got));
        }
    };
    expect("{schema}", schema_n);
    expect("{linking}", linking_n);
    expect("{question}", question_n);
}

struct Substitution {
    std::string_view placeholder;
    const std::string& value;
};

// Left-to-right single pass; substituted values are never rescanned, so a
// question containing "{schema}" stays verbatim.
std::string substitute(std::string_view body, const std::vector<Substitution>& subs) {
    std::string out;
    out.reserve(body.size());
    size_t i = 0;
    while (i < body.size()) {
        bool matched = false;
        if (body[i] == '{') {
            for (const auto& s : subs) {
                if (body.substr(i, s.placeholder.size()) == s.placeholder) {
                    out += s.value;
                    i += s.placeholder.size();
                    matched = true;
                    break;
                }
            }
        }
        if (!matched) {
            out += body[i];
            ++i;
        }
    }
    return out;
}

PromptTemplate parse_template_file(const std::filesystem::path& path) {
    std::string text = read_text_file(path);

    // Split into lines, keeping a trailing empty fragment so the final
    // newline survives the round trip.
    std::vector<std::string> lines;
    size_t start = 0;
    while (true) {
        size_t nl = text.find('\n', start);
        if (nl == std::string::npos) {
            lines.push_back(text.substr(start));
            break;
        }
        lines.push_back(text.substr(start, nl - start));
        start = nl + 1;
    }

    size_t sep = lines.size();
    for (size_t i = 0; i < lines.size(); ++i) {
        if (lines[i] == "---") {
            sep = i;
            break;
        }
    }
    if (sep == lines.size()) {
        throw ParseError("template file " + path.string() + ": missing \"---\" separator line");
    }

    PromptTemplate tpl;
    tpl.system_text = join(std::vector<std::string>(lines.begin(), lines.begin() + static_cast<long>(sep)), "\n");
    tpl.user_body = join(std::vector<std::string>(lines.begin() + static_cast<long>(sep) + 1, lines.end()), "\n");
    return tpl;
}

} // namespace

PromptTemplates::PromptTemplates(PromptTemplate isg_tpl, PromptTemplate sg_tpl)
    : isg_(std::move(isg_tpl)), sg_(std::move(sg_tpl)) {
    check_counts(isg_, "initial-generation", 1, 0, 1);
    check_counts(sg_, "refinement", 1, 1, 1);
}

PromptTemplates PromptTemplates::builtin() {
    return PromptTemplates({kIsgSystem, kIsgUserBody}, {kSgSystem, kSgUserBody});
}

PromptTemplates PromptTemplates::load_dir(const std::filesystem::path& dir) {
    return PromptTemplates(parse_template_file(dir / "isg.txt"), parse_template_file(dir / "sg.txt"));
}

Prompt PromptTemplates::build_initial_prompt(const DatabaseSchema& schema,
                                             std::string_view question) const {
    std::string schema_text = render_schema_text(schema);
    std::string question_text(question);
    Prompt p;
    p.template_id = PromptTemplateId::isg;
    p.round = 0;
    p.system_text = isg_.system_text;
    p.user_text = substitute(isg_.user_body, {{"{schema}", schema_text}, {"{question}", question_text}});
    return p;
}

Prompt PromptTemplates::build_refine_prompt(const DatabaseSchema& schema,
                                            const LinkingSchema& linking,
                                            std::string_view question, int round) const {
    if (round < 1) {
        throw IntegrityError("refinement prompts start at round 1, got round " +
                             std::to_string(round));
    }
    std::string schema_text = render_schema_text(schema);
    std::string linking_text = render_linking_text(linking, schema); // validates linking
    std::string question_text(question);
    Prompt p;
    p.template_id = PromptTemplateId::sg;
    p.round = round;
    p.system_text = sg_.system_text;
    p.user_text = substitute(sg_.user_body, {{"{schema}", schema_text},
                                             {"{linking}", linking_text},
                                             {"{question}", question_text}});
    return p;
}

} // namespace s2s
