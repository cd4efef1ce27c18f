#include "rav/prompt.hpp"

#include <cctype>
#include <filesystem>

#include "rav/errors.hpp"
#include "rav/util.hpp"

namespace rav {

namespace {

// Reserved: filled from the template's own few-shot blocks.
constexpr const char* kExamplesPlaceholder = "examples";

bool ident_start(char c) {
    return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
}
bool ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

// Returns placeholder name if s[pos] begins "{name}", else nullopt.
std::optional<std::string> placeholder_at(const std::string& s, std::size_t pos) {
    if (pos + 1 >= s.size() || s[pos] != '{') return std::nullopt;
    std::size_t i = pos + 1;
    if (!ident_start(s[i])) return std::nullopt;
    while (i < s.size() && ident_char(s[i])) ++i;
    if (i >= s.size() || s[i] != '}') return std::nullopt;
    return s.substr(pos + 1, i - pos - 1);
}

}  // namespace

PromptTemplate::PromptTemplate(std::string name, std::string body,
                               std::set<std::string> required_placeholders,
                               std::vector<std::string> fewshot_examples)
    : name_(std::move(name)),
      body_(std::move(body)),
      required_(std::move(required_placeholders)),
      fewshot_(std::move(fewshot_examples)) {
    auto found = extract_placeholders(body_);
    std::set<std::string> found_set(found.begin(), found.end());
    for (const auto& req : required_) {
        if (!found_set.count(req)) {
            raise(Errc::BadTemplate, "template '" + name_ + "': required placeholder {" + req +
                                         "} never occurs in body");
        }
    }
    if (!fewshot_.empty() && !found_set.count(kExamplesPlaceholder)) {
        raise(Errc::BadTemplate, "template '" + name_ +
                                     "' ships few-shot examples but body has no {examples} slot");
    }
}

std::vector<std::string> PromptTemplate::extract_placeholders(const std::string& body) {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (std::size_t i = 0; i < body.size();) {
        if (body[i] == '{' && i + 1 < body.size() && body[i + 1] == '{') {
            i += 2;
            continue;
        }
        if (body[i] == '}' && i + 1 < body.size() && body[i + 1] == '}') {
            i += 2;
            continue;
        }
        if (auto name = placeholder_at(body, i)) {
            if (seen.insert(*name).second) out.push_back(*name);
            i += name->size() + 2;
            continue;
        }
        ++i;
    }
    return out;
}

std::string PromptTemplate::render(const PromptBinding& binding, bool strict) const {
    if (strict) {
        auto found = extract_placeholders(body_);
        std::set<std::string> found_set(found.begin(), found.end());
        for (const auto& [key, value] : binding) {
            (void)value;
            if (!found_set.count(key) || key == kExamplesPlaceholder) {
                raise(Errc::UnknownPlaceholder,
                      "binding key '" + key + "' names no placeholder in template '" + name_ + "'");
            }
        }
    }

    std::string out;
    out.reserve(body_.size() + 256);
    for (std::size_t i = 0; i < body_.size();) {
        char c = body_[i];
        if (c == '{' && i + 1 < body_.size() && body_[i + 1] == '{') {
            out.push_back('{');
            i += 2;
            continue;
        }
        if (c == '}' && i + 1 < body_.size() && body_[i + 1] == '}') {
            out.push_back('}');
            i += 2;
            continue;
        }
        if (auto name = placeholder_at(body_, i)) {
            if (*name == kExamplesPlaceholder) {
                out += util::join(fewshot_, "\n\n");
            } else {
                auto it = binding.find(*name);
                if (it == binding.end()) {
                    raise(Errc::MissingPlaceholder,
                          "no binding for {" + *name + "} in template '" + name_ + "'");
                }
                out += it->second;
            }
            i += name->size() + 2;
            continue;
        }
        out.push_back(c);
        ++i;
    }
    return out;
}

PromptTemplate PromptTemplate::parse(const std::string& text, const std::string& origin) {
    auto lines = util::split(text, '\n');
    std::string name;
    std::set<std::string> required;
    long long declared_fewshot = 0;
    bool saw_separator = false;
    std::size_t body_start = 0;

    for (std::size_t i = 0; i < lines.size(); ++i) {
        std::string line = lines[i];
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (util::trim(line) == "---") {
            saw_separator = true;
            body_start = i + 1;
            break;
        }
        std::string t = util::trim(line);
        if (t.empty() || t[0] == '#') continue;
        auto colon = t.find(':');
        if (colon == std::string::npos) {
            raise(Errc::BadTemplate, origin + ": header line '" + t + "' is not 'key: value'");
        }
        std::string key = util::trim(t.substr(0, colon));
        std::string value = util::trim(t.substr(colon + 1));
        if (key == "name") {
            name = value;
        } else if (key == "placeholders") {
            for (const auto& p : util::split_any(value, ", ")) required.insert(p);
        } else if (key == "fewshot") {
            try {
                declared_fewshot = std::stoll(value);
            } catch (const std::exception&) {
                raise(Errc::BadTemplate, origin + ": fewshot count '" + value + "' is not a number");
            }
        } else {
            raise(Errc::BadTemplate, origin + ": unknown header key '" + key + "'");
        }
    }
    if (!saw_separator) raise(Errc::BadTemplate, origin + ": missing '---' header separator");
    if (name.empty()) raise(Errc::BadTemplate, origin + ": missing 'name:' header");

    // Body runs to the first === line; each further === starts an example.
    std::vector<std::vector<std::string>> sections(1);
    for (std::size_t i = body_start; i < lines.size(); ++i) {
        std::string line = lines[i];
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (util::trim(line) == "===") {
            sections.emplace_back();
            continue;
        }
        sections.back().push_back(std::move(line));
    }

    std::string body = util::join(sections.front(), "\n");
    // Trim trailing blank lines on the body; examples are trimmed on both sides.
    while (!body.empty() && (body.back() == '\n' || body.back() == ' ')) body.pop_back();
    std::vector<std::string> fewshot;
    for (std::size_t i = 1; i < sections.size(); ++i) {
        std::string block = util::trim(util::join(sections[i], "\n"));
        if (!block.empty()) fewshot.push_back(block);
    }

    if (declared_fewshot != static_cast<long long>(fewshot.size())) {
        raise(Errc::BadTemplate, origin + ": header declares fewshot: " +
                                     std::to_string(declared_fewshot) + " but file has " +
                                     std::to_string(fewshot.size()) + " example blocks");
    }

    return PromptTemplate(std::move(name), std::move(body), std::move(required),
                          std::move(fewshot));
}

PromptTemplate PromptTemplate::load(const std::string& path) {
    return parse(util::read_file(path), path);
}

std::string render_history(const History& h) {
    if (h.empty()) return "NONE";
    std::string out;
    for (std::size_t i = 0; i < h.size(); ++i) {
        if (i > 0) out += '\n';
        std::string n = std::to_string(i + 1);
        out += "Q" + n + ": " + h[i].question.text;
        out += "\nA" + n + ": " + h[i].answer.text;
    }
    return out;
}

PromptLibrary PromptLibrary::load_dir(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) raise(Errc::IoError, "prompt directory not found: " + dir);
    PromptLibrary lib;
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".prompt") {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) lib.add(PromptTemplate::load(f.string()));
    return lib;
}

void PromptLibrary::add(PromptTemplate t) {
    std::string name = t.name();
    if (templates_.count(name)) raise(Errc::BadTemplate, "duplicate template name '" + name + "'");
    templates_.emplace(std::move(name), std::move(t));
}

bool PromptLibrary::has(const std::string& name) const { return templates_.count(name) > 0; }

const PromptTemplate& PromptLibrary::get(const std::string& name) const {
    auto it = templates_.find(name);
    if (it == templates_.end()) raise(Errc::ConfigError, "no prompt template named '" + name + "'");
    return it->second;
}

std::vector<std::string> PromptLibrary::names() const {
    std::vector<std::string> out;
    out.reserve(templates_.size());
    for (const auto& [name, tpl] : templates_) out.push_back(name);
    return out;
}

}  // namespace rav
