#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vulnmgr::code {

enum class RepoLabel { Source, Target };

const char* to_string(RepoLabel label);

struct LineSpan {
    int start = 0;  // 1-based, inclusive
    int end = 0;
};

struct Param {
    std::string type_text;
    std::string name;  // empty for unnamed / "..." parameters
};

struct FunctionDef {
    std::string name;
    std::string return_type;
    std::vector<Param> parameters;
    std::string body_source;  // full definition text, whole lines of line_span
    std::string file_path;    // repo-relative
    LineSpan line_span;

    std::string signature() const;
};

struct StructDef {
    std::string name;
    std::string fields_source;  // full definition text, whole lines of line_span
    std::string file_path;
    LineSpan line_span;
};

struct TextMatch {
    std::string file_path;
    int line_no = 0;  // 1-based
    std::string line_text;
};

enum class CompareVerdict { Identical, SignatureDiff, BodyDiff, MissingInTarget, MissingInSource };

const char* to_string(CompareVerdict v);

struct FunctionComparison {
    CompareVerdict verdict = CompareVerdict::Identical;
    std::string detail;
};

struct FileSymbols {
    std::vector<FunctionDef> functions;
    std::vector<StructDef> structs;
    std::vector<std::string> warnings;
};

// Walks one C translation unit. Never throws: on malformed input it returns
// whatever definitions were complete plus a warning.
FileSymbols extract_symbols(std::string_view content, const std::string& file_path);

const FunctionDef* enclosing(const std::vector<FunctionDef>& functions, int line_no);

class RepoIndex {
public:
    static RepoIndex build(const std::filesystem::path& repo_root, RepoLabel label);
    static RepoIndex from_memory(RepoLabel label, std::map<std::string, std::string> files,
                                 std::string root_name = "<memory>");

    RepoLabel label() const { return label_; }
    const std::string& root() const { return root_; }
    const std::vector<std::string>& files() const { return files_; }
    const std::string* file_content(const std::string& repo_relative) const;

    std::vector<FunctionDef> find_function(const std::string& name) const;
    std::vector<StructDef> find_struct(const std::string& name) const;
    const std::vector<FunctionDef>& all_functions() const { return functions_; }
    const std::vector<StructDef>& all_structs() const { return structs_; }

    // Innermost indexed function whose span covers (file_path, line_no).
    std::optional<FunctionDef> enclosing_function(const std::string& file_path,
                                                  int line_no) const;

    // Regex search over all indexed files, ordered by path then line.
    std::vector<TextMatch> text_search(const std::string& pattern) const;

    const std::vector<std::string>& warnings() const { return warnings_; }

private:
    RepoIndex() = default;
    void index_contents();

    RepoLabel label_ = RepoLabel::Target;
    std::string root_;
    std::vector<std::string> files_;
    std::map<std::string, std::string> contents_;
    std::vector<FunctionDef> functions_;
    std::vector<StructDef> structs_;
    std::map<std::string, std::vector<std::size_t>> functions_by_name_;
    std::map<std::string, std::vector<std::size_t>> structs_by_name_;
    std::vector<std::string> warnings_;
};

// Verdict rules: Identical iff token-normalized sources match (formatting and
// comments never distinguish two definitions);
// MissingInTarget/MissingInSource per symbol table membership; signature
// mismatches (return type, parameter types) beat BodyDiff.
FunctionComparison compare_function(const std::string& name, const RepoIndex& source,
                                    const RepoIndex& target);

}  // namespace vulnmgr::code
