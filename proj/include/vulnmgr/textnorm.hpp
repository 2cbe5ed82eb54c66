#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace vulnmgr::text {

// One normalized line together with the 1-based source line it came from.
struct NormLine {
    std::string text;
    int source_line = 0;
};

// Removes // and /* */ comments. String/char literals and the original line
// structure are preserved (block comment interiors keep their newlines).
std::string strip_comments(std::string_view source);

// Detection normal form: comments removed, blank lines dropped, every
// remaining line lowercased with all whitespace removed.
std::vector<NormLine> normalize_lines_mapped(std::string_view source);
std::vector<std::string> normalize_lines(std::string_view source);

struct Lexeme {
    enum class Kind { Identifier, Number, String, CharLit, Punct, Preproc };
    Kind kind = Kind::Punct;
    std::string text;
    int line = 1;  // 1-based
    std::size_t offset = 0;
};

// C lexer. Comments are skipped; preprocessor directives come back as single
// Preproc lexemes with backslash continuations folded.
std::vector<Lexeme> lex_c(std::string_view source);

// Token texts only, preprocessor directives excluded.
std::vector<std::string> lex_token_texts(std::string_view source);

// Comparison normal form: lexemes joined with single spaces, so formatting,
// comments and line breaks never distinguish two sources but literals do.
std::string normalize_compact(std::string_view source);

// Function-identity normal form: comments removed, runs of whitespace inside
// each line collapsed to one space, lines trimmed, empty lines dropped.
std::string normalize_ws(std::string_view source);

bool is_c_keyword(std::string_view word);

}  // namespace vulnmgr::text
