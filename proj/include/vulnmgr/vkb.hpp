#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "vulnmgr/gateway.hpp"

namespace vulnmgr::vkb {

struct PatchedFile {
    std::string file_path;    // repo-relative
    std::string patch_hunks;  // unified diff text for this file
};

struct VulnerableFunction {
    std::string file_path;
    std::string function_name;
    std::string pre_patch_source;
    std::string post_patch_source;
};

struct VulnBasicInfo {
    std::string cve_id;
    std::optional<std::string> cwe_id;
    std::string description;
    std::string repo_name;  // owner/name
    std::string commit_url;
    std::string commit_message;
    std::vector<PatchedFile> patched_files;
    std::vector<VulnerableFunction> vulnerable_functions;
    std::string notes;  // e.g. secondary CWE ids
};

struct AnalysisReport {
    std::string vulnerability_description;
    std::string cwe_category;
    std::string root_cause;
    std::string trigger_chain;
    std::string patch_analysis;
};

struct AnalysisPoint {
    int point_id = 0;
    std::string directive;
    std::vector<std::string> symbols_of_interest;
};

struct VulnRecord {
    VulnBasicInfo basic;
    AnalysisReport report;
    std::vector<AnalysisPoint> points;
    std::string created_at;  // ISO-8601, supplied by the caller
};

void to_json(nlohmann::json& j, const PatchedFile& v);
void from_json(const nlohmann::json& j, PatchedFile& v);
void to_json(nlohmann::json& j, const VulnerableFunction& v);
void from_json(const nlohmann::json& j, VulnerableFunction& v);
void to_json(nlohmann::json& j, const VulnBasicInfo& v);
void from_json(const nlohmann::json& j, VulnBasicInfo& v);
void to_json(nlohmann::json& j, const AnalysisReport& v);
void from_json(const nlohmann::json& j, AnalysisReport& v);
void to_json(nlohmann::json& j, const AnalysisPoint& v);
void from_json(const nlohmann::json& j, AnalysisPoint& v);
void to_json(nlohmann::json& j, const VulnRecord& v);
void from_json(const nlohmann::json& j, VulnRecord& v);

// Reads a CVE record out of an NVD JSON document (API-2.0 envelope or a flat
// {id, description, cwe} object). Throws if cve_id is not in the document.
struct NvdInfo {
    std::string description;
    std::optional<std::string> cwe_id;
    std::vector<std::string> extra_cwes;
};
NvdInfo parse_nvd(const nlohmann::json& doc, const std::string& cve_id);

// "https://github.com/owner/name/commit/abc" -> "owner/name"; empty if the URL
// has no recognizable owner/name segment.
std::string repo_name_from_url(const std::string& commit_url);

// Offline commit bundle: nvd.json, commit.json {message[, repo_name]},
// commit.diff, pre/<files...>, post/<files...>.
VulnBasicInfo ingest_basic(const std::string& cve_id, const std::string& commit_url,
                           const std::filesystem::path& bundle_dir,
                           std::vector<std::string>* warnings = nullptr);

struct Gateway {
    llm::Provider& provider;
    const llm::ProviderConfig& config;
};

// Asks the model for the five-section report; one reprompt on a missing
// section, then "template violation". reprompt_count reports retries used.
AnalysisReport generate_report(const VulnBasicInfo& basic, Gateway gw,
                               int* reprompt_count = nullptr);

// Heading-split parser for model output; returns nullopt and the missing
// heading list when a section is absent or empty.
std::optional<AnalysisReport> parse_report_sections(const std::string& text,
                                                    std::vector<std::string>* missing = nullptr);

std::vector<AnalysisPoint> distill_points(const AnalysisReport& report,
                                          const std::string& cve_id, Gateway gw);

// "1. check `x` ..." lines -> AnalysisPoints with ids 1..n and backticked
// identifiers as symbols_of_interest.
std::vector<AnalysisPoint> parse_points(const std::string& text);

std::string render_report(const AnalysisReport& report);
std::string render_points(const std::vector<AnalysisPoint>& points);

// One JSON document per CVE under dir/, plus index.json.
class Store {
public:
    explicit Store(std::filesystem::path dir);

    void store(const VulnRecord& record);          // upsert
    VulnRecord load(const std::string& cve_id) const;
    std::vector<std::string> list_records() const;  // sorted cve ids
    std::vector<VulnRecord> load_all() const;

    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path record_path(const std::string& cve_id) const;
    void rewrite_index() const;
    std::filesystem::path dir_;
};

// Full construction flow: ingest + report + points. created_at is injected so
// runs can be reproducible.
VulnRecord build_record(const std::string& cve_id, const std::string& commit_url,
                        const std::filesystem::path& bundle_dir, Gateway gw,
                        const std::string& created_at,
                        std::vector<std::string>* warnings = nullptr);

}  // namespace vulnmgr::vkb
