#include "vulnmgr/diff.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>
#include <stdexcept>

namespace vulnmgr::diff {
namespace {

bool starts_with(std::string_view s, std::string_view prefix) {
    return s.substr(0, prefix.size()) == prefix;
}

// Parses "@@ -l,c +l,c @@" headers. Counts default to 1 when omitted.
bool parse_hunk_header(std::string_view line, Hunk& h) {
    if (!starts_with(line, "@@ -")) return false;
    auto read_int = [](std::string_view& s, int& out) {
        const char* first = s.data();
        const char* last = s.data() + s.size();
        auto [ptr, ec] = std::from_chars(first, last, out);
        if (ec != std::errc{} || ptr == first) return false;
        s.remove_prefix(static_cast<size_t>(ptr - first));
        return true;
    };
    std::string_view rest = line.substr(4);
    if (!read_int(rest, h.old_start)) return false;
    h.old_count = 1;
    if (!rest.empty() && rest.front() == ',') {
        rest.remove_prefix(1);
        if (!read_int(rest, h.old_count)) return false;
    }
    if (!starts_with(rest, " +")) return false;
    rest.remove_prefix(2);
    if (!read_int(rest, h.new_start)) return false;
    h.new_count = 1;
    if (!rest.empty() && rest.front() == ',') {
        rest.remove_prefix(1);
        if (!read_int(rest, h.new_count)) return false;
    }
    return starts_with(rest, " @@");
}

std::string take_path(std::string_view line) {
    // "--- a/foo.c\t2009-01-01 ..." -> "a/foo.c"
    size_t tab = line.find('\t');
    std::string p(line.substr(0, tab));
    return p;
}

// Longest-common-subsequence table over line vectors; fine for the file sizes
// this tool handles.
std::vector<std::pair<int, int>> lcs_pairs(const std::vector<std::string>& a,
                                           const std::vector<std::string>& b) {
    const size_t n = a.size(), m = b.size();
    std::vector<std::vector<int>> dp(n + 1, std::vector<int>(m + 1, 0));
    for (size_t i = n; i-- > 0;) {
        for (size_t j = m; j-- > 0;) {
            dp[i][j] = (a[i] == b[j]) ? dp[i + 1][j + 1] + 1
                                      : std::max(dp[i + 1][j], dp[i][j + 1]);
        }
    }
    std::vector<std::pair<int, int>> pairs;
    size_t i = 0, j = 0;
    while (i < n && j < m) {
        if (a[i] == b[j]) {
            pairs.emplace_back(static_cast<int>(i), static_cast<int>(j));
            ++i, ++j;
        } else if (dp[i + 1][j] >= dp[i][j + 1]) {
            ++i;
        } else {
            ++j;
        }
    }
    return pairs;
}

}  // namespace

Lines split_lines(std::string_view text) {
    Lines out;
    if (text.empty()) return out;
    size_t pos = 0;
    while (pos < text.size()) {
        size_t nl = text.find('\n', pos);
        if (nl == std::string_view::npos) {
            out.lines.emplace_back(text.substr(pos));
            out.final_newline = false;
            break;
        }
        out.lines.emplace_back(text.substr(pos, nl - pos));
        pos = nl + 1;
    }
    return out;
}

std::string join_lines(const Lines& lines) {
    std::string out;
    for (size_t i = 0; i < lines.lines.size(); ++i) {
        out += lines.lines[i];
        if (i + 1 < lines.lines.size() || lines.final_newline) out.push_back('\n');
    }
    return out;
}

std::string strip_diff_prefix(std::string_view path) {
    if (starts_with(path, "a/") || starts_with(path, "b/")) path.remove_prefix(2);
    return std::string(path);
}

std::vector<FilePatch> parse_unified(std::string_view diff_text) {
    std::vector<FilePatch> patches;
    Lines raw = split_lines(diff_text);
    FilePatch* cur = nullptr;
    Hunk* hunk = nullptr;

    for (size_t i = 0; i < raw.lines.size(); ++i) {
        const std::string& line = raw.lines[i];
        if (starts_with(line, "--- ")) {
            patches.emplace_back();
            cur = &patches.back();
            hunk = nullptr;
            cur->old_path = take_path(std::string_view(line).substr(4));
            continue;
        }
        if (starts_with(line, "+++ ")) {
            if (!cur) throw std::runtime_error("diff: '+++' before '---'");
            cur->new_path = take_path(std::string_view(line).substr(4));
            continue;
        }
        if (starts_with(line, "@@ ")) {
            if (!cur) throw std::runtime_error("diff: hunk header outside file patch");
            Hunk h;
            if (!parse_hunk_header(line, h))
                throw std::runtime_error("diff: bad hunk header: " + line);
            cur->hunks.push_back(h);
            hunk = &cur->hunks.back();
            continue;
        }
        if (!hunk) continue;  // git decoration / headers between files
        if (line == "\\ No newline at end of file") {
            // Applies to whichever side the previous body line belonged to.
            if (!hunk->lines.empty()) {
                char tag = hunk->lines.back()[0];
                if (tag == '-') cur->old_ends_without_newline = true;
                else if (tag == '+') cur->new_ends_without_newline = true;
                else cur->old_ends_without_newline = cur->new_ends_without_newline = true;
            }
            continue;
        }
        if (line.empty()) {
            // Tolerate stripped trailing whitespace on context lines.
            int remaining = 0;
            for (const auto& l : hunk->lines) {
                char t = l[0];
                if (t == ' ' || t == '-') ++remaining;
            }
            if (remaining < hunk->old_count) hunk->lines.push_back(" ");
            continue;
        }
        char tag = line[0];
        if (tag == ' ' || tag == '-' || tag == '+') {
            hunk->lines.push_back(line);
        }
        // anything else between hunks (e.g. "diff --git") is skipped above
    }
    return patches;
}

std::string render_file_patch(const FilePatch& patch) {
    std::string out;
    out += "--- " + patch.old_path + "\n";
    out += "+++ " + patch.new_path + "\n";
    for (size_t h = 0; h < patch.hunks.size(); ++h) {
        const Hunk& hk = patch.hunks[h];
        std::ostringstream hh;
        hh << "@@ -" << hk.old_start;
        if (hk.old_count != 1) hh << ',' << hk.old_count;
        hh << " +" << hk.new_start;
        if (hk.new_count != 1) hh << ',' << hk.new_count;
        hh << " @@\n";
        out += hh.str();
        bool last_hunk = h + 1 == patch.hunks.size();
        for (size_t i = 0; i < hk.lines.size(); ++i) {
            out += hk.lines[i];
            out.push_back('\n');
            if (!last_hunk || i + 1 != hk.lines.size()) continue;
            // no-newline markers only make sense on the final hunk line
            char tag = hk.lines[i][0];
            if ((tag != '+' && patch.old_ends_without_newline) ||
                (tag != '-' && patch.new_ends_without_newline))
                out += "\\ No newline at end of file\n";
        }
    }
    return out;
}

std::string render_unified(std::string_view original, std::string_view patched,
                           std::string_view old_label, std::string_view new_label,
                           int context_lines) {
    Lines a = split_lines(original);
    Lines b = split_lines(patched);
    auto pairs = lcs_pairs(a.lines, b.lines);

    // Build an edit script as (tag, a_index, b_index) runs.
    struct Edit { char tag; int ai; int bi; };
    std::vector<Edit> edits;
    size_t ai = 0, bi = 0;
    for (auto [pa, pb] : pairs) {
        while (static_cast<int>(ai) < pa) edits.push_back({'-', static_cast<int>(ai++), -1});
        while (static_cast<int>(bi) < pb) edits.push_back({'+', -1, static_cast<int>(bi++)});
        edits.push_back({' ', static_cast<int>(ai++), static_cast<int>(bi++)});
    }
    while (ai < a.lines.size()) edits.push_back({'-', static_cast<int>(ai++), -1});
    while (bi < b.lines.size()) edits.push_back({'+', -1, static_cast<int>(bi++)});

    // A line missing its final newline can only be the very last line of its
    // file, so a context pairing whose sides disagree about the newline cannot
    // be expressed; surface it as a change instead.
    std::vector<Edit> split;
    split.reserve(edits.size());
    for (const Edit& e : edits) {
        if (e.tag == ' ') {
            bool old_nl = a.final_newline || e.ai != static_cast<int>(a.lines.size()) - 1;
            bool new_nl = b.final_newline || e.bi != static_cast<int>(b.lines.size()) - 1;
            if (old_nl != new_nl) {
                split.push_back({'-', e.ai, -1});
                split.push_back({'+', -1, e.bi});
                continue;
            }
        }
        split.push_back(e);
    }
    edits = std::move(split);

    std::string out;
    out += "--- ";
    out += old_label;
    out += "\n+++ ";
    out += new_label;
    out += "\n";

    size_t idx = 0;
    bool any_hunk = false;
    while (idx < edits.size()) {
        // find next change
        while (idx < edits.size() && edits[idx].tag == ' ') ++idx;
        if (idx >= edits.size()) break;
        size_t start = idx >= static_cast<size_t>(context_lines) ? idx - context_lines : 0;
        // extend through changes separated by <= 2*context lines of equality
        size_t end = idx;
        size_t last_change = idx;
        while (end < edits.size()) {
            if (edits[end].tag != ' ') {
                last_change = end;
                ++end;
                continue;
            }
            size_t run = 0;
            while (end + run < edits.size() && edits[end + run].tag == ' ') ++run;
            if (end + run >= edits.size() || run > static_cast<size_t>(2 * context_lines)) break;
            end += run;
        }
        size_t stop = std::min(edits.size(), last_change + 1 + static_cast<size_t>(context_lines));

        Hunk h;
        h.old_start = 0;
        h.new_start = 0;
        for (size_t k = start; k < stop; ++k) {
            const Edit& e = edits[k];
            std::string body = e.tag == '+' ? b.lines[static_cast<size_t>(e.bi)]
                                            : a.lines[static_cast<size_t>(e.ai)];
            if (e.tag != '+') {
                ++h.old_count;
                if (h.old_start == 0) h.old_start = e.ai + 1;
            }
            if (e.tag != '-') {
                ++h.new_count;
                if (h.new_start == 0) h.new_start = e.bi + 1;
            }
            std::string l(1, e.tag);
            l += body;
            h.lines.push_back(std::move(l));
        }
        if (h.old_start == 0) {
            // pure insertion: anchor to the line after which it applies
            int before = 0;
            for (size_t k = 0; k < start; ++k)
                if (edits[k].tag != '+') ++before;
            h.old_start = before;
        }
        if (h.new_start == 0) {
            int before = 0;
            for (size_t k = 0; k < start; ++k)
                if (edits[k].tag != '-') ++before;
            h.new_start = before;
        }

        std::ostringstream hh;
        hh << "@@ -" << h.old_start;
        if (h.old_count != 1) hh << ',' << h.old_count;
        hh << " +" << h.new_start;
        if (h.new_count != 1) hh << ',' << h.new_count;
        hh << " @@\n";
        out += hh.str();
        for (size_t k = 0; k < h.lines.size(); ++k) {
            const std::string& l = h.lines[k];
            out += l;
            out.push_back('\n');
            char tag = l[0];
            bool is_last_old = tag != '+' && !a.final_newline &&
                               edits[start + k].ai == static_cast<int>(a.lines.size()) - 1;
            bool is_last_new = tag != '-' && !b.final_newline &&
                               edits[start + k].bi == static_cast<int>(b.lines.size()) - 1;
            if (is_last_old || is_last_new) out += "\\ No newline at end of file\n";
        }
        idx = stop;
        any_hunk = true;
    }
    if (!any_hunk) return "";
    return out;
}

std::string apply_patch(std::string_view original, const FilePatch& patch) {
    Lines src = split_lines(original);
    std::vector<std::string> out;
    size_t src_idx = 0;  // 0-based into src.lines

    for (const Hunk& h : patch.hunks) {
        size_t hunk_at = h.old_start > 0 ? static_cast<size_t>(h.old_start - 1) : 0;
        if (h.old_count == 0 && h.old_start >= 0) hunk_at = static_cast<size_t>(h.old_start);
        if (hunk_at > src.lines.size())
            throw std::runtime_error("diff: hunk start past end of file");
        while (src_idx < hunk_at) {
            if (src_idx >= src.lines.size())
                throw std::runtime_error("diff: ran out of input copying to hunk");
            out.push_back(src.lines[src_idx++]);
        }
        for (const std::string& l : h.lines) {
            char tag = l[0];
            std::string_view body = std::string_view(l).substr(1);
            if (tag == ' ' || tag == '-') {
                if (src_idx >= src.lines.size())
                    throw std::runtime_error("diff: context past end of file");
                if (src.lines[src_idx] != body)
                    throw std::runtime_error("diff: mismatch at line " +
                                             std::to_string(src_idx + 1) + ": expected '" +
                                             std::string(body) + "' got '" +
                                             src.lines[src_idx] + "'");
                if (tag == ' ') out.push_back(src.lines[src_idx]);
                ++src_idx;
            } else {  // '+'
                out.emplace_back(body);
            }
        }
    }
    while (src_idx < src.lines.size()) out.push_back(src.lines[src_idx++]);

    Lines result;
    result.lines = std::move(out);
    result.final_newline = src.final_newline;
    if (patch.new_ends_without_newline) result.final_newline = false;
    else if (patch.old_ends_without_newline) result.final_newline = true;
    return join_lines(result);
}

}  // namespace vulnmgr::diff
