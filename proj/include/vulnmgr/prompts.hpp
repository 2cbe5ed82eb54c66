#pragma once

#include <map>
#include <string>
#include <string_view>

// Prompt templates for every model-facing step. Tests pin agent behavior via
// scripted transcripts, not prompt bytes, so wording here may evolve freely;
// bump kPromptVersion when it does.
namespace vulnmgr::prompts {

inline constexpr std::string_view kPromptVersion = "1";

// {key} placeholders; unknown keys are left as-is.
std::string fill(std::string_view tmpl, const std::map<std::string, std::string>& vars);

inline constexpr std::string_view kReportHeadings[5] = {
    "Vulnerability Description", "CWE Category", "Root Cause Analysis",
    "Vulnerability Trigger Chain Analysis", "Patch Analysis"};

inline constexpr std::string_view kReportSystem =
    "You are a security analyst writing structured vulnerability analysis reports "
    "for a knowledge base of disclosed C vulnerabilities.";

inline constexpr std::string_view kReportUser =
    "Write an analysis report for the vulnerability below. Use exactly these five "
    "markdown section headings, in this order, echoed verbatim:\n"
    "## Vulnerability Description\n"
    "## CWE Category\n"
    "## Root Cause Analysis\n"
    "## Vulnerability Trigger Chain Analysis\n"
    "## Patch Analysis\n"
    "\n"
    "CVE: {cve_id}\n"
    "CWE: {cwe_id}\n"
    "Repository: {repo_name}\n"
    "Description: {description}\n"
    "Commit: {commit_url}\n"
    "Commit message: {commit_message}\n"
    "\n"
    "Vulnerable function (pre-patch):\n```c\n{pre_patch}\n```\n"
    "\n"
    "Patched function (post-patch):\n```c\n{post_patch}\n```\n"
    "\n"
    "Patch:\n```diff\n{patch}\n```\n";

inline constexpr std::string_view kReportReprompt =
    "The report is missing these required sections: {missing}. Reply with the "
    "complete report again, including all five headings verbatim.";

inline constexpr std::string_view kPointsSystem =
    "You distill vulnerability analysis reports into concise, checkable analysis "
    "points for code auditors.";

inline constexpr std::string_view kPointsUser =
    "Distill the analysis report below into analysis points. Each point is one "
    "concrete, checkable condition about the code (for example an initialization, "
    "bounds, or validation requirement). Reply with a numbered list only, one "
    "point per line (\"1. ...\"). Wrap every function or structure identifier in "
    "backticks.\n"
    "\n"
    "{report}\n";

inline constexpr std::string_view kPortingSystem =
    "You port vulnerability analysis points from a historical vulnerability to a "
    "candidate recurrence in another repository. You may call tools to inspect "
    "both repositories. Keep only the points that apply to the new context, "
    "re-targeted to the functions and structures that the candidate actually "
    "uses; drop inapplicable points and say why.";

inline constexpr std::string_view kPortingUser =
    "Historical vulnerability {cve_id} ({description}).\n"
    "Original vulnerable function `{source_function}`:\n```c\n{source_source}\n```\n"
    "\n"
    "Original analysis points:\n{points}\n"
    "\n"
    "Candidate recurrence: function `{target_function}` in {target_file}:\n"
    "```c\n{target_source}\n```\n"
    "\n"
    "Reply with the ported analysis points as a numbered list (\"1. ...\"), one "
    "per line, identifiers in backticks. After the list you may add notes about "
    "dropped points.";

inline constexpr std::string_view kPortingUserNoVkb =
    "Historical vulnerability {cve_id} ({description}).\n"
    "Original vulnerable function `{source_function}`:\n```c\n{source_source}\n```\n"
    "\n"
    "Fixing patch:\n```diff\n{patch}\n```\n"
    "\n"
    "Candidate recurrence: function `{target_function}` in {target_file}:\n"
    "```c\n{target_source}\n```\n"
    "\n"
    "Derive checkable analysis points for the candidate directly from the patch. "
    "Reply with a numbered list (\"1. ...\"), one point per line, identifiers in "
    "backticks.";

inline constexpr std::string_view kAnalyzeSystem =
    "You are a vulnerability analyst. Verify each analysis point against the "
    "target repository, in order, using the tools when you need definitions or "
    "cross-references. Conclude with one line per point, exactly:\n"
    "POINT <n>: HOLDS - <evidence>\n"
    "POINT <n>: REFUTED - <evidence>\n"
    "POINT <n>: INCONCLUSIVE - <reason>\n"
    "HOLDS means the vulnerable condition is present; REFUTED means the code "
    "rules it out.";

inline constexpr std::string_view kAnalyzeUser =
    "Vulnerability {cve_id}. Candidate function `{target_function}` in "
    "{target_file}:\n```c\n{target_source}\n```\n"
    "\n"
    "Analysis points to verify:\n{points}\n";

inline constexpr std::string_view kFixSystem =
    "You write minimal security patches for C functions. Use the tools to check "
    "any symbol you are unsure about. When a function used by the historical "
    "patch is missing from the target repository, search the target for a "
    "semantically similar substitute and use it; record every such replacement.\n"
    "Reply in this exact format:\n"
    "SUBSTITUTION: <missing_symbol> -> <substitute_symbol>   (one line per "
    "substitution, omit if none)\n"
    "RATIONALE: <one-line reason>\n"
    "```c\n<the complete replacement for the target function>\n```";

inline constexpr std::string_view kFixUser =
    "Vulnerability {cve_id}: {description}\n"
    "\n"
    "Confirmed analysis results for `{target_function}` in {target_file}:\n"
    "{verdict_trace}\n"
    "\n"
    "Historical fix, pre-patch:\n```c\n{source_pre}\n```\n"
    "Historical fix, post-patch:\n```c\n{source_post}\n```\n"
    "\n"
    "Cross-repository consistency report:\n{consistency}\n"
    "\n"
    "Current target function:\n```c\n{target_source}\n```\n"
    "{feedback_block}"
    "Produce the patched version of `{target_function}`.";

inline constexpr std::string_view kFixFeedbackBlock =
    "\nThe previous patch failed validation. Feedback:\n{feedback}\n\n";

inline constexpr std::string_view kFixReprompt =
    "That reply was not usable: {error}. Reply again in the required format with "
    "exactly one complete C function named {target_function} inside a ```c code "
    "block.";

inline constexpr std::string_view kValidateSystem =
    "You are a patch validator. The detector still flags the patched function; "
    "decide whether the vulnerability is actually gone or the patch is "
    "insufficient. Verify each analysis point against the patched code, using "
    "tools if needed. Conclude with one line per point, exactly:\n"
    "POINT <n>: HOLDS - <evidence>     (the vulnerable condition is still "
    "present)\n"
    "POINT <n>: REFUTED - <evidence>   (the patch rules it out)\n"
    "POINT <n>: INCONCLUSIVE - <reason>";

inline constexpr std::string_view kValidateUser =
    "Vulnerability {cve_id}. Patched candidate function `{target_function}` in "
    "{target_file}:\n```c\n{patched_source}\n```\n"
    "\n"
    "Analysis points:\n{points}\n";

inline constexpr std::string_view kJudgeSystem =
    "You compare two patches for the same vulnerability and decide whether they "
    "are semantically equivalent fixes. Reply with exactly one word: EQUIVALENT "
    "or DIFFERENT.";

inline constexpr std::string_view kJudgeUser =
    "Vulnerability: {description}\n"
    "\n"
    "Generated patch:\n```c\n{candidate}\n```\n"
    "\n"
    "Developer patch:\n```c\n{ground_truth}\n```\n";

}  // namespace vulnmgr::prompts
