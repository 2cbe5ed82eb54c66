#include "vulnmgr/textnorm.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <unordered_set>

namespace vulnmgr::text {

namespace {

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }
bool digit(char c) { return std::isdigit(static_cast<unsigned char>(c)); }

// Longest-match C operators, 3 chars down to 2.
constexpr std::array<std::string_view, 3> kOps3 = {"<<=", ">>=", "..."};
constexpr std::array<std::string_view, 19> kOps2 = {
    "==", "!=", "<=", ">=", "&&", "||", "<<", ">>", "+=", "-=",
    "*=", "/=", "%=", "&=", "|=", "^=", "->", "++", "--"};

}  // namespace

bool is_c_keyword(std::string_view word) {
    static const std::unordered_set<std::string_view> kw = {
        "auto", "break", "case", "char", "const", "continue", "default", "do",
        "double", "else", "enum", "extern", "float", "for", "goto", "if",
        "inline", "int", "long", "register", "restrict", "return", "short",
        "signed", "sizeof", "static", "struct", "switch", "typedef", "union",
        "unsigned", "void", "volatile", "while", "_Bool", "_Static_assert",
        "_Alignas", "_Alignof", "_Atomic", "_Noreturn", "_Thread_local"};
    return kw.count(word) > 0;
}

std::string strip_comments(std::string_view src) {
    std::string out;
    out.reserve(src.size());
    enum class St { Code, Str, Chr, Line, Block };
    St st = St::Code;
    for (std::size_t i = 0; i < src.size(); ++i) {
        char c = src[i];
        char next = i + 1 < src.size() ? src[i + 1] : '\0';
        switch (st) {
            case St::Code:
                if (c == '/' && next == '/') {
                    st = St::Line;
                    ++i;
                } else if (c == '/' && next == '*') {
                    st = St::Block;
                    out.push_back(' ');
                    ++i;
                } else {
                    if (c == '"') st = St::Str;
                    if (c == '\'') st = St::Chr;
                    out.push_back(c);
                }
                break;
            case St::Str:
                out.push_back(c);
                if (c == '\\' && i + 1 < src.size()) {
                    out.push_back(src[++i]);
                } else if (c == '"') {
                    st = St::Code;
                }
                break;
            case St::Chr:
                out.push_back(c);
                if (c == '\\' && i + 1 < src.size()) {
                    out.push_back(src[++i]);
                } else if (c == '\'') {
                    st = St::Code;
                }
                break;
            case St::Line:
                if (c == '\n') {
                    out.push_back('\n');
                    st = St::Code;
                }
                break;
            case St::Block:
                if (c == '*' && next == '/') {
                    st = St::Code;
                    ++i;
                } else if (c == '\n') {
                    out.push_back('\n');
                }
                break;
        }
    }
    return out;
}

std::vector<NormLine> normalize_lines_mapped(std::string_view src) {
    const std::string clean = strip_comments(src);
    std::vector<NormLine> out;
    int line_no = 1;
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) out.push_back({cur, line_no});
        cur.clear();
    };
    for (char c : clean) {
        if (c == '\n') {
            flush();
            ++line_no;
        } else if (!std::isspace(static_cast<unsigned char>(c))) {
            cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
        }
    }
    flush();
    return out;
}

std::vector<std::string> normalize_lines(std::string_view src) {
    std::vector<std::string> out;
    for (auto& nl : normalize_lines_mapped(src)) out.push_back(std::move(nl.text));
    return out;
}

std::vector<Lexeme> lex_c(std::string_view src) {
    std::vector<Lexeme> out;
    int line = 1;
    bool line_has_code = false;
    std::size_t i = 0;
    const std::size_t n = src.size();

    auto collapse_ws = [](std::string_view s) {
        std::string r;
        bool in_ws = false;
        for (char c : s) {
            if (std::isspace(static_cast<unsigned char>(c))) {
                in_ws = true;
            } else {
                if (in_ws && !r.empty()) r.push_back(' ');
                in_ws = false;
                r.push_back(c);
            }
        }
        return r;
    };

    while (i < n) {
        char c = src[i];
        char next = i + 1 < n ? src[i + 1] : '\0';
        if (c == '\n') {
            ++line;
            line_has_code = false;
            ++i;
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        if (c == '/' && next == '/') {
            while (i < n && src[i] != '\n') ++i;
            continue;
        }
        if (c == '/' && next == '*') {
            i += 2;
            while (i + 1 < n && !(src[i] == '*' && src[i + 1] == '/')) {
                if (src[i] == '\n') ++line;
                ++i;
            }
            i = i + 1 < n ? i + 2 : n;
            continue;
        }
        if (c == '#' && !line_has_code) {
            // Preprocessor directive; fold continuation lines.
            std::size_t start = i;
            int start_line = line;
            std::string raw;
            while (i < n) {
                if (src[i] == '\\' && i + 1 < n && src[i + 1] == '\n') {
                    raw.push_back(' ');
                    ++line;
                    i += 2;
                    continue;
                }
                if (src[i] == '\n') break;
                raw.push_back(src[i]);
                ++i;
            }
            out.push_back({Lexeme::Kind::Preproc, collapse_ws(raw), start_line, start});
            continue;
        }
        line_has_code = true;
        std::size_t start = i;
        if (ident_start(c)) {
            while (i < n && ident_char(src[i])) ++i;
            out.push_back({Lexeme::Kind::Identifier, std::string(src.substr(start, i - start)), line, start});
            continue;
        }
        if (digit(c) || (c == '.' && digit(next))) {
            ++i;
            while (i < n) {
                char d = src[i];
                if (ident_char(d) || d == '.') {
                    ++i;
                } else if ((d == '+' || d == '-') && i > start &&
                           (src[i - 1] == 'e' || src[i - 1] == 'E' || src[i - 1] == 'p' || src[i - 1] == 'P')) {
                    ++i;
                } else {
                    break;
                }
            }
            out.push_back({Lexeme::Kind::Number, std::string(src.substr(start, i - start)), line, start});
            continue;
        }
        if (c == '"' || c == '\'') {
            char quote = c;
            ++i;
            while (i < n && src[i] != quote) {
                if (src[i] == '\\' && i + 1 < n) ++i;
                if (src[i] == '\n') ++line;
                ++i;
            }
            if (i < n) ++i;
            out.push_back({quote == '"' ? Lexeme::Kind::String : Lexeme::Kind::CharLit,
                           std::string(src.substr(start, i - start)), line, start});
            continue;
        }
        std::string_view rest = src.substr(i);
        std::string_view op;
        for (auto o : kOps3)
            if (rest.substr(0, 3) == o) { op = o; break; }
        if (op.empty())
            for (auto o : kOps2)
                if (rest.substr(0, 2) == o) { op = o; break; }
        if (op.empty()) op = rest.substr(0, 1);
        out.push_back({Lexeme::Kind::Punct, std::string(op), line, start});
        i += op.size();
    }
    return out;
}

std::vector<std::string> lex_token_texts(std::string_view src) {
    std::vector<std::string> out;
    for (auto& lx : lex_c(src))
        if (lx.kind != Lexeme::Kind::Preproc) out.push_back(std::move(lx.text));
    return out;
}

std::string normalize_compact(std::string_view src) {
    // Preprocessor directives keep their own line so the result re-lexes the
    // same way (the normal form is idempotent).
    std::string out;
    for (auto& lx : lex_c(src)) {
        if (lx.kind == Lexeme::Kind::Preproc) {
            if (!out.empty() && out.back() != '\n') out.push_back('\n');
            out += lx.text;
            out.push_back('\n');
        } else {
            if (!out.empty() && out.back() != '\n') out.push_back(' ');
            out += lx.text;
        }
    }
    while (!out.empty() && (out.back() == '\n' || out.back() == ' ')) out.pop_back();
    return out;
}

std::string normalize_ws(std::string_view src) {
    std::string stripped = strip_comments(src);
    std::string out;
    std::string cur;
    auto flush = [&] {
        while (!cur.empty() && cur.back() == ' ') cur.pop_back();
        if (!cur.empty()) {
            out += cur;
            out.push_back('\n');
        }
        cur.clear();
    };
    for (char c : stripped) {
        if (c == '\n') {
            flush();
        } else if (c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f') {
            if (!cur.empty() && cur.back() != ' ') cur.push_back(' ');
        } else {
            cur.push_back(c);
        }
    }
    flush();
    if (!out.empty()) out.pop_back();  // no trailing newline
    return out;
}

}  // namespace vulnmgr::text
