#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "vulnmgr/agents.hpp"
#include "vulnmgr/detector.hpp"
#include "vulnmgr/gateway.hpp"
#include "vulnmgr/vkb.hpp"

namespace vulnmgr::pipeline {

// Where a finding ends up. Underlying detect::Status tracks how far it got;
// the effective status adds the two outcomes the detector enum cannot express.
enum class EffectiveStatus { Inconclusive, Rejected, Confirmed, Patched, Validated, Quarantined };
const char* to_string(EffectiveStatus s);

struct TranscriptDump {
    std::string name;  // file name under transcripts/
    std::string text;
};

struct FindingReport {
    detect::Finding finding;  // status mutated as the finding advances
    EffectiveStatus effective = EffectiveStatus::Inconclusive;
    std::string verdict_summary;
    std::string consistency_summary;
    std::string patch_diff;                   // unified diff when a fix was produced
    std::string patched_function_source;      // last proposal, for equivalence judging
    std::string validation_outcome;
    std::string quarantine_reason;            // non-empty iff Quarantined
    std::vector<std::string> transcript_paths;  // artifact-relative
    std::vector<TranscriptDump> transcripts;    // written by write_artifacts
};

struct ManagementReport {
    std::string target_repo;
    std::string version_label;
    std::vector<FindingReport> findings;
    bool any_vulnerable = false;
    std::map<std::string, int> status_counts;  // keyed by effective status name
    std::vector<std::string> warnings;
};

nlohmann::json report_to_json(const ManagementReport& report);  // deterministic, no timestamps

struct PipelineConfig {
    std::filesystem::path vkb_dir;
    std::filesystem::path out_dir;      // empty: nothing written to disk
    std::filesystem::path source_root;  // empty: synthesized from record pre-patch sources
    std::filesystem::path scratch_dir;  // sandboxes etc.; defaults under out_dir or temp
    bool use_vkb = true;        // false: porting agent works from the patch alone
    bool confirmation = true;   // false: detections go straight to repair
    detect::DetectorConfig detector;
    llm::ProviderConfig provider;
    std::string version_label;
};

// Core entry point: runs detection, confirmation, repair and validation for
// every finding against the given records. Per-finding errors quarantine that
// finding and the run continues.
ManagementReport manage(const std::filesystem::path& target_repo_dir,
                        const std::vector<vkb::VulnRecord>& records, llm::Provider& provider,
                        const PipelineConfig& cfg);

// report.json, findings.json, patches/, transcripts/, rejects.json
void write_artifacts(const ManagementReport& report, const std::filesystem::path& out_dir);

std::string render_transcript(const llm::Transcript& transcript);

// ---- evaluation harness ----

struct PortingCase {
    std::string cve_id;
    std::string commit_s, commit_t;
    std::string repo_s, repo_t;
    std::string f_opre, f_opost;  // source-repo function, pre/post patch
    std::string f_tpre, f_tpost;  // target-repo function, pre/post patch
    struct Meta {
        std::string file_path_s = "src/origin.c";
        std::string file_path_t = "src/target.c";
        int changed_file_count_s = -1;  // -1: not recorded
        int changed_file_count_t = -1;
        bool orphan = false;
        std::string snapshot;  // optional target tree, relative to the dataset dir
        std::string description;
        std::string cwe_id;
    } meta;
    std::string case_file;  // provenance
};

struct Reject {
    std::string case_file;
    std::string reason;
};

std::vector<PortingCase> load_cases(const std::filesystem::path& dataset_dir,
                                    std::vector<Reject>* rejects = nullptr);

// In order: identical normalized source/target diffs (and, for retained cases,
// unequal changed-file counts) drop; "test"/"version" in a file path drops;
// orphan-flagged commits drop.
std::vector<PortingCase> filter_cases(const std::vector<PortingCase>& cases,
                                      std::vector<Reject>* dropped = nullptr);

enum class EquivalenceMode { Strict, Judge };
EquivalenceMode equivalence_from_string(const std::string& s);
const char* to_string(EquivalenceMode m);

// Strict: normalized token sequences of the two function sources are equal.
// Judge: one scripted/live adjudication call ("<cve>|judge" session).
bool judge_equivalence(const agents::PatchProposal& proposal, const std::string& ground_truth,
                       EquivalenceMode mode, llm::Provider* provider,
                       const llm::ProviderConfig* provider_cfg, const std::string& cve_id,
                       const std::string& description);

struct Metrics {
    int tp = 0, fp = 0, fn = 0, tpc = 0;
    std::optional<double> precision, recall, f1;
    std::optional<double> tpc_over_tp;      // TPC / TP
    std::optional<double> repair_accuracy;  // TPC / (TP + FP)
};

Metrics compute_metrics(int tp, int fp, int fn, int tpc);

struct CaseVerdict {
    std::string cve_id;
    std::string case_file;
    int tp = 0, fp = 0, fn = 0, tpc = 0;
    bool equivalent = false;          // judged patch equivalence (when tp > 0)
    std::string equivalence_mode;
    bool file_level_ambiguity = false;  // confirmed file-level finding was scored FP
    std::string note;
};

struct EvalOutcome {
    Metrics metrics;
    std::vector<CaseVerdict> per_case;
    std::vector<Reject> rejects;  // malformed or filtered case files
};

// Builds one synthetic record per case, runs manage against the case's target
// snapshot, and folds the per-case verdicts into aggregate counts.
EvalOutcome evaluate(const std::vector<PortingCase>& cases,
                     const std::filesystem::path& dataset_dir, llm::Provider& provider,
                     const PipelineConfig& cfg, EquivalenceMode mode);

// The deterministic record evaluate() builds for a case (exposed for tests).
vkb::VulnRecord record_from_case(const PortingCase& c);

nlohmann::json outcome_to_json(const EvalOutcome& outcome);

}  // namespace vulnmgr::pipeline
