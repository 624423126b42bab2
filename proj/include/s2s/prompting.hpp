#pragma once

// The two prompt families: initial generation (full schema + question) and
// refinement (linking schema as a reference hint + full schema + question).
// Wordings live in template files with {schema}, {linking}, {question}
// placeholders; compiled-in defaults match the shipped templates/ files.

#include <filesystem>
#include <string>
#include <string_view>

#include "s2s/schema_model.hpp"

namespace s2s {

enum class PromptTemplateId { isg, sg };

struct Prompt {
    std::string system_text;
    std::string user_text;
    PromptTemplateId template_id = PromptTemplateId::isg;
    int round = 0;
};

struct PromptTemplate {
    std::string system_text;
    std::string user_body; // contains the placeholders
};

class PromptTemplates {
public:
    // Compiled-in defaults, identical to the shipped templates/ files.
    static PromptTemplates builtin();

    // Reads isg.txt and sg.txt from dir. Each file is the system text, a
    // line containing only "---", then the user body. Throws ParseError on
    // malformed files or missing/duplicated placeholders.
    static PromptTemplates load_dir(const std::filesystem::path& dir);

    // Full schema + question; template_id=isg, round=0.
    Prompt build_initial_prompt(const DatabaseSchema& schema, std::string_view question) const;

    // Full schema + linking reference + question; template_id=sg, round>=1.
    // Throws IntegrityError when the linking schema is invalid for schema.
    Prompt build_refine_prompt(const DatabaseSchema& schema, const LinkingSchema& linking,
                               std::string_view question, int round) const;

    const PromptTemplate& isg() const { return isg_; }
    const PromptTemplate& sg() const { return sg_; }

private:
    PromptTemplates(PromptTemplate isg_tpl, PromptTemplate sg_tpl);

    PromptTemplate isg_;
    PromptTemplate sg_;
};

} // namespace s2s
