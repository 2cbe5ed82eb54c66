#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "vulnmgr/code_context.hpp"
#include "vulnmgr/detector.hpp"
#include "vulnmgr/vkb.hpp"

namespace vulnmgr::patch {

// Copy-on-touch sandbox: the origin tree is never written; only files actually
// patched are copied under sandbox_root.
class SandboxWorkspace {
public:
    SandboxWorkspace(std::filesystem::path origin_root, std::filesystem::path sandbox_root);

    struct Applied {
        std::string file_path;
        std::string function_name;
        code::LineSpan original_span;
        int replacement_lines = 0;
    };

    // Current content: sandbox copy if touched, otherwise the origin file.
    std::string read(const std::string& repo_relative) const;
    bool touched(const std::string& repo_relative) const;

    // Splices new_source over the function's line span. The span must still
    // match the current content (span drift is an error) and new_source must
    // parse as exactly one C function.
    void apply_function_replacement(const std::string& file_path, const code::FunctionDef& fn,
                                    const std::string& new_source);

    const std::vector<Applied>& applied() const { return applied_; }
    const std::filesystem::path& origin_root() const { return origin_root_; }
    const std::filesystem::path& sandbox_root() const { return sandbox_root_; }

private:
    std::filesystem::path origin_root_;
    std::filesystem::path sandbox_root_;
    std::vector<Applied> applied_;
};

// Splices new_source over fn's line span in content. Throws when the span no
// longer holds the extracted source (span drift) or when new_source does not
// parse as exactly one C function.
std::string splice_function_source(const std::string& content, const code::FunctionDef& fn,
                                   const std::string& new_source);

// Unified diff between two file bodies; empty string when they are identical.
std::string render_unified_diff(const std::string& original, const std::string& patched,
                                const std::string& old_label, const std::string& new_label,
                                int context_lines = 3);

struct RescanResult {
    bool flagged = false;
    std::string details;
};

// Re-runs both detectors, restricted to the finding's CVE, against the current
// (patched) content of the finding's file.
RescanResult rescan_patched(const SandboxWorkspace& ws, const detect::Finding& finding,
                            const detect::DetectorConfig& config,
                            const vkb::VulnRecord& record);

}  // namespace vulnmgr::patch
