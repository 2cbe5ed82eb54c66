#include "vulnmgr/patch_engine.hpp"

#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "vulnmgr/diff.hpp"

namespace vulnmgr::patch {
namespace {

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

SandboxWorkspace::SandboxWorkspace(std::filesystem::path origin_root,
                                   std::filesystem::path sandbox_root)
    : origin_root_(std::move(origin_root)), sandbox_root_(std::move(sandbox_root)) {
    if (!std::filesystem::is_directory(origin_root_))
        throw std::runtime_error("origin tree missing: " + origin_root_.string());
    std::filesystem::create_directories(sandbox_root_);
}

bool SandboxWorkspace::touched(const std::string& repo_relative) const {
    return std::filesystem::exists(sandbox_root_ / repo_relative);
}

std::string SandboxWorkspace::read(const std::string& repo_relative) const {
    auto sandboxed = sandbox_root_ / repo_relative;
    if (std::filesystem::exists(sandboxed)) return read_file(sandboxed);
    return read_file(origin_root_ / repo_relative);
}

std::string splice_function_source(const std::string& content, const code::FunctionDef& fn,
                                   const std::string& new_source) {
    auto replacement_syms = code::extract_symbols(new_source, fn.file_path);
    if (replacement_syms.functions.size() != 1)
        throw std::runtime_error("replacement does not parse as exactly one C function");

    auto lines = diff::split_lines(content);
    const int start = fn.line_span.start;
    const int end = fn.line_span.end;
    if (start < 1 || end < start || end > static_cast<int>(lines.lines.size()))
        throw std::runtime_error("span drift: " + fn.file_path + " no longer contains lines " +
                                 std::to_string(start) + ".." + std::to_string(end));

    // span drift check: the span must still hold the extracted source
    std::string current;
    for (int l = start; l <= end; ++l) {
        if (l > start) current.push_back('\n');
        current += lines.lines[static_cast<size_t>(l - 1)];
    }
    if (current != fn.body_source)
        throw std::runtime_error("span drift: content at " + fn.file_path + ":" +
                                 std::to_string(start) + " changed since extraction");

    std::string body = new_source;
    while (!body.empty() && (body.back() == '\n' || body.back() == '\r')) body.pop_back();
    auto new_lines = diff::split_lines(body);

    diff::Lines patched;
    patched.final_newline = lines.final_newline;
    patched.lines.reserve(lines.lines.size() - static_cast<size_t>(end - start + 1) +
                          new_lines.lines.size());
    for (int l = 1; l < start; ++l) patched.lines.push_back(lines.lines[static_cast<size_t>(l - 1)]);
    for (auto& nl : new_lines.lines) patched.lines.push_back(nl);
    for (int l = end + 1; l <= static_cast<int>(lines.lines.size()); ++l)
        patched.lines.push_back(lines.lines[static_cast<size_t>(l - 1)]);
    return diff::join_lines(patched);
}

void SandboxWorkspace::apply_function_replacement(const std::string& file_path,
                                                  const code::FunctionDef& fn,
                                                  const std::string& new_source) {
    std::string patched = splice_function_source(read(file_path), fn, new_source);

    auto out_path = sandbox_root_ / file_path;
    std::filesystem::create_directories(out_path.parent_path());
    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    out << patched;
    if (!out) throw std::runtime_error("cannot write " + out_path.string());

    int replacement_lines = static_cast<int>(diff::split_lines(new_source).lines.size());
    applied_.push_back({file_path, fn.name, fn.line_span, replacement_lines});
}

std::string render_unified_diff(const std::string& original, const std::string& patched,
                                const std::string& old_label, const std::string& new_label,
                                int context_lines) {
    return diff::render_unified(original, patched, old_label, new_label, context_lines);
}

RescanResult rescan_patched(const SandboxWorkspace& ws, const detect::Finding& finding,
                            const detect::DetectorConfig& config,
                            const vkb::VulnRecord& record) {
    RescanResult result;
    if (record.basic.cve_id != finding.cve_id)
        throw std::invalid_argument("record/finding CVE mismatch");

    std::string patched = ws.read(finding.target_file);
    auto index = code::RepoIndex::from_memory(
        code::RepoLabel::Target, {{finding.target_file, patched}}, "rescan");

    auto signatures = detect::build_clone_signatures(record, config.window_w);
    bool clone_hit = false;
    for (const auto& f : detect::scan_clone(index, signatures)) {
        if (finding.target_function.empty() || f.target_function == finding.target_function) {
            clone_hit = true;
            break;
        }
    }

    bool hash_hit = false;
    double best_sim = 0.0;
    if (!finding.target_function.empty()) {
        auto fingerprints = detect::build_fingerprints(record, config.shingle_n);
        for (const auto& fn : index.all_functions()) {
            if (fn.name != finding.target_function) continue;
            auto fp = detect::build_function_fingerprint(fn.body_source, config.shingle_n);
            if (fp.shingle_set.empty()) continue;
            for (const auto& vfp : fingerprints) {
                if (vfp.shingle_set.empty()) continue;
                double sim = detect::jaccard(fp.shingle_set, vfp.shingle_set);
                best_sim = std::max(best_sim, sim);
                if (sim >= config.theta) hash_hit = true;
            }
        }
    }

    result.flagged = clone_hit || hash_hit;
    std::ostringstream details;
    details << "clone=" << (clone_hit ? "hit" : "clean") << " func_hash="
            << (hash_hit ? "hit" : "clean");
    if (best_sim > 0.0) details << " (max similarity " << best_sim << ")";
    result.details = details.str();
    return result;
}

}  // namespace vulnmgr::patch
