#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "rav/types.hpp"

namespace rav {

using PromptBinding = std::map<std::string, std::string>;

// A prompt asset: instruction body with {name} placeholders plus optional
// few-shot example blocks. `{{` and `}}` escape literal braces. The reserved
// placeholder {examples} is filled from the template's own example blocks,
// never from a binding.
//
// Asset file format:
//
//   name: qg_iterative
//   placeholders: claim, history, question_types
//   fewshot: 8
//   ---
//   <body>
//   ===
//   <example 1>
//   ===
//   <example 2>
//
class PromptTemplate {
public:
    PromptTemplate() = default;
    PromptTemplate(std::string name, std::string body,
                   std::set<std::string> required_placeholders,
                   std::vector<std::string> fewshot_examples = {});

    static PromptTemplate parse(const std::string& text, const std::string& origin = "");
    static PromptTemplate load(const std::string& path);

    const std::string& name() const { return name_; }
    const std::string& body() const { return body_; }
    const std::set<std::string>& required_placeholders() const { return required_; }
    const std::vector<std::string>& fewshot_examples() const { return fewshot_; }

    // Pure substitution; identical inputs produce identical bytes. In strict
    // mode a binding key that names no body placeholder is an error.
    std::string render(const PromptBinding& binding, bool strict = true) const;

    // Placeholder names in first-occurrence order, deduplicated.
    static std::vector<std::string> extract_placeholders(const std::string& body);

private:
    std::string name_;
    std::string body_;
    std::set<std::string> required_;
    std::vector<std::string> fewshot_;
};

// "Q1: ...\nA1: ..." blocks in insertion order; empty history renders as
// the literal token NONE.
std::string render_history(const History& h);

class PromptLibrary {
public:
    static PromptLibrary load_dir(const std::string& dir);

    void add(PromptTemplate t);
    bool has(const std::string& name) const;
    const PromptTemplate& get(const std::string& name) const;
    std::vector<std::string> names() const;  // sorted

private:
    std::map<std::string, PromptTemplate> templates_;
};

}  // namespace rav
