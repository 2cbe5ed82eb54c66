#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "vulnmgr/code_context.hpp"
#include "vulnmgr/detector.hpp"
#include "vulnmgr/gateway.hpp"
#include "vulnmgr/patch_engine.hpp"
#include "vulnmgr/vkb.hpp"

namespace vulnmgr::agents {

// Everything an agent run needs besides its own inputs.
struct AgentContext {
    llm::Provider& provider;
    const llm::ProviderConfig& config;
    const code::RepoIndex& source_index;
    const code::RepoIndex& target_index;
};

// The five context tools the agents may call.
llm::Toolbox make_context_toolbox(const code::RepoIndex& source_index,
                                  const code::RepoIndex& target_index);

extern const char* const kContextToolNames[5];

struct PortedPointSet {
    std::string finding_ref;
    std::vector<vkb::AnalysisPoint> points;
    std::string porting_notes;
    llm::Transcript transcript;
};

enum class PointOutcome { Holds, Refuted, Inconclusive };
const char* to_string(PointOutcome o);

struct PointResult {
    int point_id = 0;
    PointOutcome outcome = PointOutcome::Inconclusive;
    std::string evidence;
};

struct AnalysisVerdict {
    bool is_vulnerable = false;
    bool inconclusive = false;  // truncated or unresolved points; not a rejection
    std::vector<PointResult> per_point_results;
    llm::Transcript transcript;
    bool shortcut_used = false;  // identical-function strategy resolved points
};

struct ConsistencyEntry {
    std::string function_name;
    code::FunctionComparison comparison;
    bool needed_by_patch = false;  // called from the patch's added lines
};

struct ConsistencyReport {
    std::vector<ConsistencyEntry> entries;
    std::string summary;
};

struct Substitution {
    std::string missing_symbol;
    std::string substitute_symbol;
};

struct PatchProposal {
    std::string finding_ref;
    std::string patched_function_source;
    std::string unified_diff;  // pre-patch file -> patched file
    std::string rationale;
    std::vector<Substitution> substitutions;
    llm::Transcript transcript;
};

struct ValidationResult {
    bool fixed = false;
    bool detector_flagged = false;
    std::optional<AnalysisVerdict> agent_verdict;
    std::string feedback;  // empty iff fixed
};

std::string finding_ref(const detect::Finding& finding);
std::string session_label(const detect::Finding& finding, const std::string& role);

// Adapts the record's analysis points to the finding's function. With
// use_vkb_points=false (knowledge-base ablation) the agent derives points from
// the historical patch alone.
PortedPointSet port_points(const vkb::VulnRecord& record, const detect::Finding& finding,
                           const code::FunctionDef& source_fn,
                           const code::FunctionDef& target_fn, AgentContext& ctx,
                           bool use_vkb_points = true);

// Verifies each ported point. Points whose function symbols are all Identical
// across the two repositories are auto-resolved (they cannot affect the
// outcome differently than in the source scene) before any model call.
AnalysisVerdict analyze(const detect::Finding& finding, const PortedPointSet& ported,
                        const code::FunctionDef& target_fn, const llm::Toolbox& toolbox,
                        AgentContext& ctx);

// Deterministic: the patched functions plus every function called from the
// patch's added lines, each compared across repositories. Identifiers defined
// in neither repository are treated as shared externals and skipped.
ConsistencyReport check_consistency(const vkb::VulnRecord& record,
                                    const code::RepoIndex& target_index,
                                    const code::RepoIndex& source_index);

std::string render_consistency(const ConsistencyReport& report);

// Syntactic call scan over patch added-lines text (identifier followed by '(',
// keywords and common macro wrappers excluded). Exposed for testing.
std::vector<std::string> called_identifiers(const std::string& code_text);

PatchProposal generate_fix(const detect::Finding& finding, const AnalysisVerdict& verdict,
                           const vkb::VulnRecord& record,
                           const ConsistencyReport& consistency,
                           const code::FunctionDef& target_fn, const llm::Toolbox& toolbox,
                           AgentContext& ctx,
                           const std::optional<std::string>& feedback = std::nullopt,
                           int round = 1);

// Step 1: detector rescan (short-circuits to fixed). Step 2: validation agent
// over the patched source; fixed only on a definitive all-points-refuted
// verdict. round selects the session (1 = first validation, 2 = post-refix).
ValidationResult validate(const PatchProposal& proposal, const detect::Finding& finding,
                          const vkb::VulnRecord& record, const PortedPointSet& ported,
                          const std::function<patch::RescanResult()>& rescan,
                          const llm::Toolbox& toolbox, AgentContext& ctx, int round = 1);

}  // namespace vulnmgr::agents
