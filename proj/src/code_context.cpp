#include "vulnmgr/code_context.hpp"

#include <algorithm>
#include <fstream>
#include <regex>
#include <sstream>

#include "vulnmgr/textnorm.hpp"

namespace vulnmgr::code {
namespace {

using text::Lexeme;

std::vector<std::string> split_plain_lines(std::string_view content) {
    std::vector<std::string> lines;
    size_t pos = 0;
    while (pos <= content.size()) {
        size_t nl = content.find('\n', pos);
        if (nl == std::string_view::npos) {
            lines.emplace_back(content.substr(pos));
            break;
        }
        lines.emplace_back(content.substr(pos, nl - pos));
        pos = nl + 1;
    }
    return lines;
}

std::string slice_lines(const std::vector<std::string>& lines, int start, int end) {
    std::string out;
    for (int l = start; l <= end && l <= static_cast<int>(lines.size()); ++l) {
        if (l > start) out.push_back('\n');
        out += lines[static_cast<size_t>(l - 1)];
    }
    return out;
}

bool is_word(const Lexeme& lx, std::string_view w) {
    return lx.kind == Lexeme::Kind::Identifier && lx.text == w;
}

bool is_punct(const Lexeme& lx, std::string_view p) {
    return lx.kind == Lexeme::Kind::Punct && lx.text == p;
}

std::string join_texts(const std::vector<Lexeme>& lex, size_t first, size_t last_excl) {
    std::string out;
    for (size_t k = first; k < last_excl; ++k) {
        if (lex[k].kind == Lexeme::Kind::Preproc) continue;
        if (!out.empty()) out.push_back(' ');
        out += lex[k].text;
    }
    return out;
}

// Index of the matching closer for the opener at `open`, or npos.
size_t match_group(const std::vector<Lexeme>& lex, size_t open, std::string_view o,
                   std::string_view c) {
    int depth = 0;
    for (size_t k = open; k < lex.size(); ++k) {
        if (is_punct(lex[k], o)) ++depth;
        else if (is_punct(lex[k], c) && --depth == 0) return k;
    }
    return std::string_view::npos;
}

std::vector<Param> parse_parameters(const std::vector<Lexeme>& lex, size_t open,
                                    size_t close) {
    std::vector<Param> params;
    std::vector<std::pair<size_t, size_t>> groups;  // [first, last_excl)
    size_t first = open + 1;
    int paren = 0, bracket = 0;
    for (size_t k = open + 1; k < close; ++k) {
        if (is_punct(lex[k], "(")) ++paren;
        else if (is_punct(lex[k], ")")) --paren;
        else if (is_punct(lex[k], "[")) ++bracket;
        else if (is_punct(lex[k], "]")) --bracket;
        else if (is_punct(lex[k], ",") && paren == 0 && bracket == 0) {
            groups.emplace_back(first, k);
            first = k + 1;
        }
    }
    if (first < close) groups.emplace_back(first, close);

    if (groups.size() == 1) {
        auto [f, l] = groups[0];
        if (l - f == 1 && is_word(lex[f], "void")) return params;  // (void)
    }
    for (auto [f, l] : groups) {
        Param p;
        if (l - f == 1 && is_punct(lex[f], "...")) {
            p.type_text = "...";
            params.push_back(std::move(p));
            continue;
        }
        size_t name_idx = std::string_view::npos;
        for (size_t k = l; k-- > f;) {
            if (lex[k].kind != Lexeme::Kind::Identifier) continue;
            if (text::is_c_keyword(lex[k].text)) continue;
            if (k > f && lex[k - 1].kind == Lexeme::Kind::Identifier &&
                (lex[k - 1].text == "struct" || lex[k - 1].text == "union" ||
                 lex[k - 1].text == "enum"))
                continue;  // tag name, not a parameter name
            name_idx = k;
            break;
        }
        std::string type;
        for (size_t k = f; k < l; ++k) {
            if (k == name_idx) continue;
            if (!type.empty()) type.push_back(' ');
            type += lex[k].text;
        }
        p.type_text = std::move(type);
        if (name_idx != std::string_view::npos) p.name = lex[name_idx].text;
        params.push_back(std::move(p));
    }
    return params;
}

struct Walker {
    const std::vector<Lexeme>& lex;
    const std::vector<std::string>& lines;
    const std::string& file_path;
    FileSymbols& out;

    void run() {
        size_t i = 0;
        while (i < lex.size()) {
            if (lex[i].kind == Lexeme::Kind::Preproc || is_punct(lex[i], ";")) {
                ++i;
                continue;
            }
            i = parse_item(i);
        }
    }

    // Parses one top-level declaration/definition starting at `i`; returns the
    // index just past it.
    size_t parse_item(size_t start) {
        bool saw_typedef = is_word(lex[start], "typedef");
        size_t last_paren_open = std::string_view::npos;
        size_t last_paren_close = std::string_view::npos;
        // pending aggregate body, e.g. "struct foo { ... }" inside this item
        std::string pending_tag;
        bool pending_is_struct = false;
        size_t pending_close = std::string_view::npos;

        size_t j = start;
        while (j < lex.size()) {
            const Lexeme& t = lex[j];
            if (t.kind == Lexeme::Kind::Preproc) {
                ++j;
                continue;
            }
            if (is_punct(t, "(")) {
                size_t close = match_group(lex, j, "(", ")");
                if (close == std::string_view::npos) {
                    warn(t.line, "unbalanced parenthesis");
                    return lex.size();
                }
                last_paren_open = j;
                last_paren_close = close;
                j = close + 1;
                continue;
            }
            if (is_punct(t, "{")) {
                size_t close = match_group(lex, j, "{", "}");
                if (close == std::string_view::npos) {
                    warn(t.line, "unbalanced brace");
                    return lex.size();
                }
                bool body_follows_params =
                    last_paren_close != std::string_view::npos && prev_index(j) == last_paren_close;
                if (body_follows_params) {
                    emit_function(start, last_paren_open, last_paren_close, close);
                    flush_struct(pending_tag, pending_is_struct, start, lex[close].line);
                    return close + 1;
                }
                // aggregate body: struct/union/enum { ... }
                std::string tag;
                bool is_struct_like = false;
                size_t p1 = prev_index(j);
                if (p1 != std::string_view::npos) {
                    if (is_word(lex[p1], "struct") || is_word(lex[p1], "union")) {
                        is_struct_like = true;  // anonymous
                    } else if (lex[p1].kind == Lexeme::Kind::Identifier &&
                               !text::is_c_keyword(lex[p1].text)) {
                        size_t p2 = prev_index(p1);
                        if (p2 != std::string_view::npos &&
                            (is_word(lex[p2], "struct") || is_word(lex[p2], "union"))) {
                            is_struct_like = true;
                            tag = lex[p1].text;
                        }
                    }
                }
                if (is_struct_like && !tag.empty()) {
                    pending_tag = tag;
                    pending_is_struct = true;
                }
                if (is_struct_like) pending_close = close;
                j = close + 1;
                continue;
            }
            if (is_punct(t, "=")) {
                // initializer: consume to the terminating ';', balancing braces
                int brace = 0;
                for (++j; j < lex.size(); ++j) {
                    if (is_punct(lex[j], "{")) ++brace;
                    else if (is_punct(lex[j], "}")) --brace;
                    else if (is_punct(lex[j], ";") && brace == 0) break;
                }
                if (j >= lex.size()) {
                    warn(lex[start].line, "unterminated initializer");
                    return lex.size();
                }
                continue;  // lands on ';'
            }
            if (is_punct(t, ";")) {
                flush_struct(pending_tag, pending_is_struct, start, t.line);
                if (saw_typedef && pending_close != std::string_view::npos) {
                    // typedef struct [tag] { ... } alias1, *alias2;
                    for (size_t k = pending_close + 1; k < j; ++k) {
                        if (lex[k].kind == Lexeme::Kind::Identifier &&
                            !text::is_c_keyword(lex[k].text)) {
                            emit_struct(lex[k].text, start, t.line);
                        }
                    }
                }
                return j + 1;
            }
            ++j;
        }
        warn(lex[start].line, "unterminated declaration");
        return lex.size();
    }

    size_t prev_index(size_t j) const {
        while (j-- > 0)
            if (lex[j].kind != Lexeme::Kind::Preproc) return j;
        return std::string_view::npos;
    }

    void emit_function(size_t start, size_t popen, size_t pclose, size_t body_close) {
        size_t name_idx = prev_index(popen);
        if (name_idx == std::string_view::npos ||
            lex[name_idx].kind != Lexeme::Kind::Identifier ||
            text::is_c_keyword(lex[name_idx].text))
            return;
        FunctionDef fn;
        fn.name = lex[name_idx].text;
        fn.return_type = join_texts(lex, start, name_idx);
        fn.parameters = parse_parameters(lex, popen, pclose);
        fn.file_path = file_path;
        fn.line_span = {lex[start].line, lex[body_close].line};
        fn.body_source = slice_lines(lines, fn.line_span.start, fn.line_span.end);
        out.functions.push_back(std::move(fn));
    }

    void emit_struct(const std::string& name, size_t start, int end_line) {
        StructDef sd;
        sd.name = name;
        sd.file_path = file_path;
        sd.line_span = {lex[start].line, end_line};
        sd.fields_source = slice_lines(lines, sd.line_span.start, sd.line_span.end);
        out.structs.push_back(std::move(sd));
    }

    void flush_struct(std::string& tag, bool& is_struct, size_t start, int end_line) {
        if (is_struct && !tag.empty()) emit_struct(tag, start, end_line);
        tag.clear();
        is_struct = false;
    }

    void warn(int line, const std::string& what) {
        out.warnings.push_back(file_path + ":" + std::to_string(line) + ": " + what);
    }
};

bool indexable_extension(const std::filesystem::path& p) {
    auto ext = p.extension().string();
    return ext == ".c" || ext == ".h";
}

}  // namespace

const char* to_string(RepoLabel label) {
    return label == RepoLabel::Source ? "source" : "target";
}

const char* to_string(CompareVerdict v) {
    switch (v) {
        case CompareVerdict::Identical: return "Identical";
        case CompareVerdict::SignatureDiff: return "SignatureDiff";
        case CompareVerdict::BodyDiff: return "BodyDiff";
        case CompareVerdict::MissingInTarget: return "MissingInTarget";
        case CompareVerdict::MissingInSource: return "MissingInSource";
    }
    return "?";
}

std::string FunctionDef::signature() const {
    std::string s = return_type;
    if (!s.empty()) s.push_back(' ');
    s += name;
    s.push_back('(');
    for (size_t i = 0; i < parameters.size(); ++i) {
        if (i) s += ", ";
        s += parameters[i].type_text;
        if (!parameters[i].name.empty()) {
            s.push_back(' ');
            s += parameters[i].name;
        }
    }
    s.push_back(')');
    return s;
}

FileSymbols extract_symbols(std::string_view content, const std::string& file_path) {
    FileSymbols out;
    auto lex = text::lex_c(content);
    auto lines = split_plain_lines(content);
    Walker{lex, lines, file_path, out}.run();
    return out;
}

const FunctionDef* enclosing(const std::vector<FunctionDef>& functions, int line_no) {
    const FunctionDef* best = nullptr;
    for (const auto& fn : functions) {
        if (fn.line_span.start <= line_no && line_no <= fn.line_span.end) {
            if (!best || fn.line_span.start > best->line_span.start) best = &fn;
        }
    }
    return best;
}

RepoIndex RepoIndex::build(const std::filesystem::path& repo_root, RepoLabel label) {
    RepoIndex idx;
    idx.label_ = label;
    idx.root_ = repo_root.string();
    std::map<std::string, std::string> files;
    if (std::filesystem::exists(repo_root)) {
        for (auto& entry : std::filesystem::recursive_directory_iterator(repo_root)) {
            if (!entry.is_regular_file() || !indexable_extension(entry.path())) continue;
            std::ifstream in(entry.path(), std::ios::binary);
            std::ostringstream buf;
            buf << in.rdbuf();
            files.emplace(std::filesystem::relative(entry.path(), repo_root).generic_string(),
                          buf.str());
        }
    }
    idx.contents_ = std::move(files);
    idx.index_contents();
    return idx;
}

RepoIndex RepoIndex::from_memory(RepoLabel label, std::map<std::string, std::string> files,
                                 std::string root_name) {
    RepoIndex idx;
    idx.label_ = label;
    idx.root_ = std::move(root_name);
    idx.contents_ = std::move(files);
    idx.index_contents();
    return idx;
}

void RepoIndex::index_contents() {
    for (auto& [path, content] : contents_) files_.push_back(path);
    for (const auto& path : files_) {
        FileSymbols syms;
        try {
            syms = extract_symbols(contents_[path], path);
        } catch (const std::exception& e) {
            warnings_.push_back(path + ": " + e.what());
            continue;
        }
        for (auto& w : syms.warnings) warnings_.push_back(std::move(w));
        for (auto& fn : syms.functions) {
            functions_by_name_[fn.name].push_back(functions_.size());
            functions_.push_back(std::move(fn));
        }
        for (auto& sd : syms.structs) {
            structs_by_name_[sd.name].push_back(structs_.size());
            structs_.push_back(std::move(sd));
        }
    }
}

const std::string* RepoIndex::file_content(const std::string& repo_relative) const {
    auto it = contents_.find(repo_relative);
    return it == contents_.end() ? nullptr : &it->second;
}

std::vector<FunctionDef> RepoIndex::find_function(const std::string& name) const {
    std::vector<FunctionDef> out;
    auto it = functions_by_name_.find(name);
    if (it == functions_by_name_.end()) return out;
    for (size_t k : it->second) out.push_back(functions_[k]);
    return out;
}

std::vector<StructDef> RepoIndex::find_struct(const std::string& name) const {
    std::vector<StructDef> out;
    auto it = structs_by_name_.find(name);
    if (it == structs_by_name_.end()) return out;
    for (size_t k : it->second) out.push_back(structs_[k]);
    return out;
}

std::optional<FunctionDef> RepoIndex::enclosing_function(const std::string& file_path,
                                                         int line_no) const {
    const FunctionDef* best = nullptr;
    for (const auto& fn : functions_) {
        if (fn.file_path != file_path) continue;
        if (fn.line_span.start <= line_no && line_no <= fn.line_span.end) {
            if (!best || fn.line_span.start > best->line_span.start) best = &fn;
        }
    }
    if (!best) return std::nullopt;
    return *best;
}

std::vector<TextMatch> RepoIndex::text_search(const std::string& pattern) const {
    std::regex re(pattern);  // std::regex_error propagates on a bad pattern
    std::vector<TextMatch> out;
    for (const auto& path : files_) {
        auto lines = split_plain_lines(contents_.at(path));
        // a trailing newline yields a phantom empty final line; skip it
        if (!lines.empty() && lines.back().empty()) lines.pop_back();
        for (size_t i = 0; i < lines.size(); ++i) {
            if (std::regex_search(lines[i], re))
                out.push_back({path, static_cast<int>(i) + 1, lines[i]});
        }
    }
    return out;
}

FunctionComparison compare_function(const std::string& name, const RepoIndex& source,
                                    const RepoIndex& target) {
    auto in_source = source.find_function(name);
    auto in_target = target.find_function(name);
    if (in_target.empty())
        return {CompareVerdict::MissingInTarget,
                name + " is not defined in the target repository"};
    if (in_source.empty())
        return {CompareVerdict::MissingInSource,
                name + " is not defined in the source repository"};

    // Prefer the pair at a shared file path; otherwise fall back to the first
    // definition on each side and say so.
    const FunctionDef* a = nullptr;
    const FunctionDef* b = nullptr;
    for (const auto& fa : in_source) {
        for (const auto& fb : in_target) {
            if (fa.file_path == fb.file_path) {
                a = &fa;
                b = &fb;
                break;
            }
        }
        if (a) break;
    }
    std::string ambiguity;
    if (!a) {
        a = &in_source.front();
        b = &in_target.front();
        if (in_source.size() > 1 || in_target.size() > 1)
            ambiguity = " (multiple definitions; compared " + a->file_path + " with " +
                        b->file_path + ")";
    }

    if (text::normalize_compact(a->body_source) == text::normalize_compact(b->body_source))
        return {CompareVerdict::Identical, "definitions match" + ambiguity};

    if (text::normalize_compact(a->return_type) != text::normalize_compact(b->return_type))
        return {CompareVerdict::SignatureDiff,
                "return type differs: '" + a->return_type + "' vs '" + b->return_type + "'" +
                    ambiguity};
    if (a->parameters.size() != b->parameters.size())
        return {CompareVerdict::SignatureDiff,
                "parameter count differs: " + std::to_string(a->parameters.size()) + " vs " +
                    std::to_string(b->parameters.size()) + ambiguity};
    for (size_t i = 0; i < a->parameters.size(); ++i) {
        if (text::normalize_compact(a->parameters[i].type_text) !=
            text::normalize_compact(b->parameters[i].type_text))
            return {CompareVerdict::SignatureDiff,
                    "parameter " + std::to_string(i + 1) + " type differs: '" +
                        a->parameters[i].type_text + "' vs '" + b->parameters[i].type_text +
                        "'" + ambiguity};
    }
    return {CompareVerdict::BodyDiff, "function bodies differ" + ambiguity};
}

}  // namespace vulnmgr::code
