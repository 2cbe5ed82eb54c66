#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace vulnmgr::diff {

struct Hunk {
    int old_start = 0;
    int old_count = 0;
    int new_start = 0;
    int new_count = 0;
    std::vector<std::string> lines;  // each starts with ' ', '-' or '+'
};

struct FilePatch {
    std::string old_path;
    std::string new_path;
    std::vector<Hunk> hunks;
    bool old_ends_without_newline = false;
    bool new_ends_without_newline = false;
};

struct Lines {
    std::vector<std::string> lines;
    bool final_newline = true;
};

Lines split_lines(std::string_view text);
std::string join_lines(const Lines& lines);

// Parses one or more file patches out of unified diff text. "diff --git" and
// "index" decoration lines are ignored; a/ b/ prefixes are kept verbatim.
std::vector<FilePatch> parse_unified(std::string_view diff_text);

// Strips a leading "a/" or "b/" from a diff path.
std::string strip_diff_prefix(std::string_view path);

// Re-renders one parsed file patch as unified diff text.
std::string render_file_patch(const FilePatch& patch);

std::string render_unified(std::string_view original, std::string_view patched,
                           std::string_view old_label, std::string_view new_label,
                           int context_lines = 3);

// Applies the patch to original; throws std::runtime_error if context or
// deleted lines do not match.
std::string apply_patch(std::string_view original, const FilePatch& patch);

}  // namespace vulnmgr::diff
