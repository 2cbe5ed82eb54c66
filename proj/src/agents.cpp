#include "vulnmgr/agents.hpp"

#include <algorithm>
#include <map>
#include <regex>
#include <set>
#include <sstream>
#include <stdexcept>

#include "vulnmgr/diff.hpp"
#include "vulnmgr/prompts.hpp"
#include "vulnmgr/textnorm.hpp"

namespace vulnmgr::agents {
namespace {

std::string render_function_defs(const std::vector<code::FunctionDef>& defs,
                                 const std::string& name, const char* repo_label) {
    if (defs.empty())
        return "MISSING: no function named '" + name + "' in the " + repo_label +
               " repository";
    std::string out;
    for (const auto& d : defs) {
        out += "// " + d.file_path + ":" + std::to_string(d.line_span.start) + "-" +
               std::to_string(d.line_span.end) + "\n";
        out += d.body_source;
        out += "\n";
    }
    if (!out.empty() && out.back() == '\n') out.pop_back();
    return out;
}

std::string render_struct_defs(const std::vector<code::StructDef>& defs,
                               const std::string& name, const char* repo_label) {
    if (defs.empty())
        return "MISSING: no structure named '" + name + "' in the " + repo_label +
               " repository";
    std::string out;
    for (const auto& d : defs) {
        out += "// " + d.file_path + ":" + std::to_string(d.line_span.start) + "-" +
               std::to_string(d.line_span.end) + "\n";
        out += d.fields_source;
        out += "\n";
    }
    if (!out.empty() && out.back() == '\n') out.pop_back();
    return out;
}

constexpr std::size_t kSearchResultCap = 50;

std::string run_text_search(const code::RepoIndex& index, const std::string& pattern) {
    auto matches = index.text_search(pattern);
    if (matches.empty()) return "no matches";
    std::string out;
    std::size_t shown = std::min(matches.size(), kSearchResultCap);
    for (std::size_t i = 0; i < shown; ++i) {
        out += matches[i].file_path + ":" + std::to_string(matches[i].line_no) + ": " +
               matches[i].line_text + "\n";
    }
    if (matches.size() > shown)
        out += "... (" + std::to_string(matches.size() - shown) + " more matches)\n";
    out.pop_back();
    return out;
}

std::string require_arg(const std::map<std::string, std::string>& args, const char* key) {
    auto it = args.find(key);
    if (it == args.end() || it->second.empty())
        throw std::runtime_error(std::string("missing required argument '") + key + "'");
    return it->second;
}

const std::regex kPointLine(
    R"(^\s*POINT\s+(\d+)\s*[:.\-]\s*(HOLDS|REFUTED|INCONCLUSIVE)\b\s*[-:,]?\s*(.*)$)",
    std::regex::icase);

// "POINT <n>: HOLDS|REFUTED|INCONCLUSIVE - evidence" lines, last wins per id.
std::map<int, PointResult> parse_point_lines(const std::string& text) {
    std::map<int, PointResult> out;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::smatch m;
        if (!std::regex_match(line, m, kPointLine)) continue;
        PointResult r;
        r.point_id = std::stoi(m[1].str());
        std::string kw = m[2].str();
        for (char& c : kw) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
        r.outcome = kw == "HOLDS"     ? PointOutcome::Holds
                    : kw == "REFUTED" ? PointOutcome::Refuted
                                      : PointOutcome::Inconclusive;
        r.evidence = m[3].str();
        out[r.point_id] = std::move(r);
    }
    return out;
}

std::string render_point_results(const std::vector<PointResult>& results) {
    std::string out;
    for (const auto& r : results) {
        out += "POINT " + std::to_string(r.point_id) + ": ";
        out += to_string(r.outcome);
        if (!r.evidence.empty()) out += " - " + r.evidence;
        out.push_back('\n');
    }
    return out;
}

const vkb::VulnerableFunction& pick_historical_pair(const vkb::VulnRecord& record,
                                                    const std::string& target_function) {
    if (record.basic.vulnerable_functions.empty())
        throw std::runtime_error("record " + record.basic.cve_id +
                                 " carries no vulnerable function sources");
    for (const auto& vf : record.basic.vulnerable_functions)
        if (vf.function_name == target_function) return vf;
    return record.basic.vulnerable_functions.front();
}

std::string joined_patch_text(const vkb::VulnBasicInfo& basic) {
    std::string all;
    for (const auto& pf : basic.patched_files) all += pf.patch_hunks;
    return all;
}

// First fenced code block (``` or ```c).
std::optional<std::string> extract_code_block(const std::string& text) {
    size_t open = text.find("```");
    if (open == std::string::npos) return std::nullopt;
    size_t body_start = text.find('\n', open);
    if (body_start == std::string::npos) return std::nullopt;
    ++body_start;
    size_t close = text.find("```", body_start);
    if (close == std::string::npos) return std::nullopt;
    std::string block = text.substr(body_start, close - body_start);
    while (!block.empty() && (block.back() == '\n' || block.back() == '\r')) block.pop_back();
    return block;
}

struct ParsedFix {
    std::string function_source;
    std::string rationale;
    std::vector<Substitution> substitutions;
};

// Throws with a reason suitable for the reprompt on malformed output.
ParsedFix parse_fix_reply(const std::string& text, const std::string& expected_name) {
    ParsedFix fix;
    static const std::regex subst(
        R"(^\s*SUBSTITUTION\s*:\s*([A-Za-z_][A-Za-z0-9_]*)\s*->\s*([A-Za-z_][A-Za-z0-9_]*)\s*$)",
        std::regex::icase);
    static const std::regex rationale(R"(^\s*RATIONALE\s*:\s*(.*\S)\s*$)", std::regex::icase);
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::smatch m;
        if (std::regex_match(line, m, subst))
            fix.substitutions.push_back({m[1].str(), m[2].str()});
        else if (fix.rationale.empty() && std::regex_match(line, m, rationale))
            fix.rationale = m[1].str();
    }
    auto block = extract_code_block(text);
    if (!block) throw std::runtime_error("no fenced code block found");
    auto syms = code::extract_symbols(*block, "reply");
    if (syms.functions.size() != 1)
        throw std::runtime_error("the code block does not contain exactly one C function");
    if (syms.functions[0].name != expected_name)
        throw std::runtime_error("the function is named '" + syms.functions[0].name +
                                 "', expected '" + expected_name + "'");
    fix.function_source = *block;
    return fix;
}

void require_context_tools(const llm::Toolbox& toolbox) {
    for (const char* name : kContextToolNames) {
        if (!toolbox.has(name))
            throw std::invalid_argument(std::string("toolbox lacks required tool ") + name);
    }
}

}  // namespace

const char* const kContextToolNames[5] = {
    "find_function_in_source", "find_function_in_target", "find_struct_in_source",
    "find_struct_in_target", "text_search"};

const char* to_string(PointOutcome o) {
    switch (o) {
        case PointOutcome::Holds: return "Holds";
        case PointOutcome::Refuted: return "Refuted";
        case PointOutcome::Inconclusive: return "Inconclusive";
    }
    return "?";
}

llm::Toolbox make_context_toolbox(const code::RepoIndex& source_index,
                                  const code::RepoIndex& target_index) {
    llm::Toolbox tb;
    tb.add({"find_function_in_source",
            "Returns the definition(s) of a function in the source (historical) repository.",
            {{"name", "function name"}}},
           [&source_index](const std::map<std::string, std::string>& args) {
               auto name = require_arg(args, "name");
               return render_function_defs(source_index.find_function(name), name, "source");
           });
    tb.add({"find_function_in_target",
            "Returns the definition(s) of a function in the target repository.",
            {{"name", "function name"}}},
           [&target_index](const std::map<std::string, std::string>& args) {
               auto name = require_arg(args, "name");
               return render_function_defs(target_index.find_function(name), name, "target");
           });
    tb.add({"find_struct_in_source",
            "Returns the definition(s) of a structure in the source (historical) repository.",
            {{"name", "structure name"}}},
           [&source_index](const std::map<std::string, std::string>& args) {
               auto name = require_arg(args, "name");
               return render_struct_defs(source_index.find_struct(name), name, "source");
           });
    tb.add({"find_struct_in_target",
            "Returns the definition(s) of a structure in the target repository.",
            {{"name", "structure name"}}},
           [&target_index](const std::map<std::string, std::string>& args) {
               auto name = require_arg(args, "name");
               return render_struct_defs(target_index.find_struct(name), name, "target");
           });
    tb.add({"text_search",
            "Regex search over one repository; returns path:line: text matches.",
            {{"pattern", "regular expression"}, {"repo", "source or target"}}},
           [&source_index, &target_index](const std::map<std::string, std::string>& args) {
               auto pattern = require_arg(args, "pattern");
               auto repo = require_arg(args, "repo");
               if (repo == "source") return run_text_search(source_index, pattern);
               if (repo == "target") return run_text_search(target_index, pattern);
               throw std::runtime_error("repo must be 'source' or 'target', got '" + repo +
                                        "'");
           });
    return tb;
}

std::string finding_ref(const detect::Finding& finding) {
    return finding.cve_id + "|" + finding.target_file + "|" + finding.target_function;
}

std::string session_label(const detect::Finding& finding, const std::string& role) {
    return finding_ref(finding) + "|" + role;
}

PortedPointSet port_points(const vkb::VulnRecord& record, const detect::Finding& finding,
                           const code::FunctionDef& source_fn,
                           const code::FunctionDef& target_fn, AgentContext& ctx,
                           bool use_vkb_points) {
    if (use_vkb_points && record.points.empty())
        throw std::invalid_argument("record " + record.basic.cve_id +
                                    " has zero analysis points");

    std::map<std::string, std::string> vars = {
        {"cve_id", record.basic.cve_id},
        {"description", record.basic.description},
        {"source_function", source_fn.name},
        {"source_source", source_fn.body_source},
        {"points", vkb::render_points(record.points)},
        {"patch", joined_patch_text(record.basic)},
        {"target_function", target_fn.name},
        {"target_file", finding.target_file},
        {"target_source", target_fn.body_source},
    };
    std::vector<llm::ChatMessage> seed = {
        llm::ChatMessage::system(std::string(prompts::kPortingSystem)),
        llm::ChatMessage::user(prompts::fill(
            use_vkb_points ? prompts::kPortingUser : prompts::kPortingUserNoVkb, vars))};

    auto toolbox = make_context_toolbox(ctx.source_index, ctx.target_index);
    llm::Transcript transcript = llm::run_tool_loop(ctx.provider, ctx.config, std::move(seed),
                                                    toolbox,
                                                    session_label(finding, "porting"));

    PortedPointSet ported;
    ported.finding_ref = finding_ref(finding);
    ported.points = vkb::parse_points(transcript.terminal_text);
    ported.porting_notes = transcript.terminal_text;
    ported.transcript = std::move(transcript);
    if (ported.points.empty())
        throw std::runtime_error("no applicable points after porting for " +
                                 ported.finding_ref);
    return ported;
}

AnalysisVerdict analyze(const detect::Finding& finding, const PortedPointSet& ported,
                        const code::FunctionDef& target_fn, const llm::Toolbox& toolbox,
                        AgentContext& ctx) {
    require_context_tools(toolbox);

    AnalysisVerdict verdict;
    std::map<int, PointResult> resolved;
    std::vector<const vkb::AnalysisPoint*> remaining;

    // Identical-function strategy: a point whose function symbols all compare
    // Identical across repositories cannot behave differently here than in the
    // historical scene, so its source-scene outcome (Holds) carries over.
    for (const auto& p : ported.points) {
        std::vector<std::string> fn_symbols;
        for (const auto& sym : p.symbols_of_interest) {
            if (!ctx.source_index.find_function(sym).empty() ||
                !ctx.target_index.find_function(sym).empty())
                fn_symbols.push_back(sym);
        }
        bool all_identical = !fn_symbols.empty();
        for (const auto& sym : fn_symbols) {
            auto cmp = code::compare_function(sym, ctx.source_index, ctx.target_index);
            if (cmp.verdict != code::CompareVerdict::Identical) {
                all_identical = false;
                break;
            }
        }
        if (all_identical) {
            std::string joined;
            for (const auto& s : fn_symbols) {
                if (!joined.empty()) joined += ", ";
                joined += s;
            }
            resolved[p.point_id] = {p.point_id, PointOutcome::Holds,
                                    "auto-resolved: " + joined +
                                        " identical in both repositories"};
            verdict.shortcut_used = true;
        } else {
            remaining.push_back(&p);
        }
    }

    if (!remaining.empty()) {
        std::string points_text;
        for (const auto* p : remaining)
            points_text += std::to_string(p->point_id) + ". " + p->directive + "\n";
        std::map<std::string, std::string> vars = {
            {"cve_id", finding.cve_id},
            {"target_function", target_fn.name},
            {"target_file", finding.target_file},
            {"target_source", target_fn.body_source},
            {"points", points_text},
        };
        std::vector<llm::ChatMessage> seed = {
            llm::ChatMessage::system(std::string(prompts::kAnalyzeSystem)),
            llm::ChatMessage::user(prompts::fill(prompts::kAnalyzeUser, vars))};
        verdict.transcript = llm::run_tool_loop(ctx.provider, ctx.config, std::move(seed),
                                                toolbox, session_label(finding, "analyzing"));
        auto parsed = parse_point_lines(verdict.transcript.terminal_text);
        for (auto& [id, r] : parsed) resolved[id] = std::move(r);
    }

    bool any_refuted = false;
    bool all_covered_hold = true;
    for (const auto& p : ported.points) {
        auto it = resolved.find(p.point_id);
        if (it == resolved.end()) {
            std::string why = verdict.transcript.truncated
                                  ? "transcript truncated at the tool-round cap"
                                  : "no explicit result in the agent reply";
            resolved[p.point_id] = {p.point_id, PointOutcome::Inconclusive, why};
            all_covered_hold = false;
            continue;
        }
        if (it->second.outcome == PointOutcome::Refuted) any_refuted = true;
        if (it->second.outcome != PointOutcome::Holds) all_covered_hold = false;
    }
    for (const auto& p : ported.points) verdict.per_point_results.push_back(resolved[p.point_id]);

    if (verdict.transcript.truncated) {
        verdict.is_vulnerable = false;
        verdict.inconclusive = true;
    } else if (any_refuted) {
        verdict.is_vulnerable = false;
    } else if (all_covered_hold) {
        verdict.is_vulnerable = true;
    } else {
        verdict.is_vulnerable = false;
        verdict.inconclusive = true;
    }
    return verdict;
}

std::vector<std::string> called_identifiers(const std::string& code_text) {
    static const std::set<std::string> kMacroAllowlist = {
        "sizeof",   "likely",       "unlikely",  "typeof",    "__typeof__",
        "offsetof", "container_of", "ARRAY_SIZE", "BUILD_BUG_ON", "WARN_ON",
        "BUG_ON",   "defined"};
    auto lexemes = text::lex_c(code_text);
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (std::size_t i = 0; i + 1 < lexemes.size(); ++i) {
        const auto& lx = lexemes[i];
        const auto& next = lexemes[i + 1];
        if (lx.kind != text::Lexeme::Kind::Identifier) continue;
        if (next.kind != text::Lexeme::Kind::Punct || next.text != "(") continue;
        if (text::is_c_keyword(lx.text) || kMacroAllowlist.count(lx.text)) continue;
        if (seen.insert(lx.text).second) out.push_back(lx.text);
    }
    return out;
}

ConsistencyReport check_consistency(const vkb::VulnRecord& record,
                                    const code::RepoIndex& target_index,
                                    const code::RepoIndex& source_index) {
    ConsistencyReport report;
    std::set<std::string> listed;

    for (const auto& vf : record.basic.vulnerable_functions) {
        if (!listed.insert(vf.function_name).second) continue;
        report.entries.push_back(
            {vf.function_name,
             code::compare_function(vf.function_name, source_index, target_index), false});
    }

    std::string added_text;
    for (const auto& pf : record.basic.patched_files) {
        for (const auto& fp : diff::parse_unified(pf.patch_hunks)) {
            for (const auto& hunk : fp.hunks) {
                for (const auto& l : hunk.lines) {
                    if (l[0] != '+') continue;
                    added_text.append(l, 1, std::string::npos);
                    added_text.push_back('\n');
                }
            }
        }
    }

    std::vector<std::string> callees = called_identifiers(added_text);
    std::sort(callees.begin(), callees.end());
    for (const auto& name : callees) {
        if (listed.count(name)) continue;
        bool in_source = !source_index.find_function(name).empty();
        bool in_target = !target_index.find_function(name).empty();
        if (!in_source && !in_target) continue;  // shared external / macro
        listed.insert(name);
        report.entries.push_back(
            {name, code::compare_function(name, source_index, target_index), true});
    }

    std::map<code::CompareVerdict, int> counts;
    for (const auto& e : report.entries) ++counts[e.comparison.verdict];
    std::ostringstream summary;
    summary << report.entries.size() << " function(s) checked:";
    bool first = true;
    for (auto [verdict, n] : counts) {
        summary << (first ? " " : ", ") << n << " " << code::to_string(verdict);
        first = false;
    }
    report.summary = summary.str();
    return report;
}

std::string render_consistency(const ConsistencyReport& report) {
    std::string out = report.summary + "\n";
    for (const auto& e : report.entries) {
        out += "- " + e.function_name + ": " + code::to_string(e.comparison.verdict);
        if (!e.comparison.detail.empty()) out += " (" + e.comparison.detail + ")";
        if (e.needed_by_patch) out += " [called by the patch]";
        out.push_back('\n');
    }
    return out;
}

PatchProposal generate_fix(const detect::Finding& finding, const AnalysisVerdict& verdict,
                           const vkb::VulnRecord& record,
                           const ConsistencyReport& consistency,
                           const code::FunctionDef& target_fn, const llm::Toolbox& toolbox,
                           AgentContext& ctx, const std::optional<std::string>& feedback,
                           int round) {
    if (!verdict.is_vulnerable)
        throw std::invalid_argument("generate_fix requires a vulnerable verdict");
    require_context_tools(toolbox);

    const auto& historical = pick_historical_pair(record, finding.target_function);
    std::string feedback_block;
    if (feedback && !feedback->empty())
        feedback_block = prompts::fill(prompts::kFixFeedbackBlock, {{"feedback", *feedback}});

    std::map<std::string, std::string> vars = {
        {"cve_id", record.basic.cve_id},
        {"description", record.basic.description},
        {"target_function", target_fn.name},
        {"target_file", finding.target_file},
        {"verdict_trace", render_point_results(verdict.per_point_results)},
        {"source_pre", historical.pre_patch_source},
        {"source_post", historical.post_patch_source},
        {"consistency", render_consistency(consistency)},
        {"target_source", target_fn.body_source},
        {"feedback_block", feedback_block},
    };
    std::vector<llm::ChatMessage> seed = {
        llm::ChatMessage::system(std::string(prompts::kFixSystem)),
        llm::ChatMessage::user(prompts::fill(prompts::kFixUser, vars))};

    std::string session = session_label(finding, "fixing|" + std::to_string(round));
    llm::Transcript transcript =
        llm::run_tool_loop(ctx.provider, ctx.config, std::move(seed), toolbox, session);

    ParsedFix fix;
    try {
        fix = parse_fix_reply(transcript.terminal_text, target_fn.name);
    } catch (const std::exception& first_error) {
        // one reprompt in the same session, then give up
        auto retry_seed = transcript.messages;
        retry_seed.push_back(llm::ChatMessage::user(prompts::fill(
            prompts::kFixReprompt,
            {{"error", first_error.what()}, {"target_function", target_fn.name}})));
        transcript = llm::run_tool_loop(ctx.provider, ctx.config, std::move(retry_seed),
                                        toolbox, session);
        try {
            fix = parse_fix_reply(transcript.terminal_text, target_fn.name);
        } catch (const std::exception& second_error) {
            throw std::runtime_error(std::string("malformed patch: ") + second_error.what());
        }
    }

    const std::string* original = ctx.target_index.file_content(finding.target_file);
    if (!original)
        throw std::runtime_error("target file missing from index: " + finding.target_file);
    std::string patched_file =
        patch::splice_function_source(*original, target_fn, fix.function_source);

    PatchProposal proposal;
    proposal.finding_ref = finding_ref(finding);
    proposal.patched_function_source = fix.function_source;
    proposal.unified_diff =
        patch::render_unified_diff(*original, patched_file, "a/" + finding.target_file,
                                   "b/" + finding.target_file);
    proposal.rationale = fix.rationale;
    proposal.substitutions = std::move(fix.substitutions);
    proposal.transcript = std::move(transcript);
    return proposal;
}

ValidationResult validate(const PatchProposal& proposal, const detect::Finding& finding,
                          const vkb::VulnRecord& record, const PortedPointSet& ported,
                          const std::function<patch::RescanResult()>& rescan,
                          const llm::Toolbox& toolbox, AgentContext& ctx, int round) {
    ValidationResult result;
    patch::RescanResult scan = rescan();
    result.detector_flagged = scan.flagged;
    if (!scan.flagged) {
        result.fixed = true;  // detector clean: no agent call needed
        return result;
    }

    require_context_tools(toolbox);
    std::map<std::string, std::string> vars = {
        {"cve_id", record.basic.cve_id},
        {"target_function", finding.target_function},
        {"target_file", finding.target_file},
        {"patched_source", proposal.patched_function_source},
        {"points", vkb::render_points(ported.points)},
    };
    std::vector<llm::ChatMessage> seed = {
        llm::ChatMessage::system(std::string(prompts::kValidateSystem)),
        llm::ChatMessage::user(prompts::fill(prompts::kValidateUser, vars))};
    std::string session = session_label(finding, "validation|" + std::to_string(round));
    llm::Transcript transcript =
        llm::run_tool_loop(ctx.provider, ctx.config, std::move(seed), toolbox, session);

    AnalysisVerdict verdict;
    auto parsed = parse_point_lines(transcript.terminal_text);
    bool any_holds = false;
    bool all_refuted = true;
    std::vector<std::string> complaints;
    for (const auto& p : ported.points) {
        PointResult r;
        auto it = parsed.find(p.point_id);
        if (it != parsed.end()) {
            r = it->second;
        } else {
            r = {p.point_id, PointOutcome::Inconclusive,
                 transcript.truncated ? "transcript truncated at the tool-round cap"
                                      : "no explicit result in the agent reply"};
        }
        if (r.outcome == PointOutcome::Holds) {
            any_holds = true;
            complaints.push_back("POINT " + std::to_string(p.point_id) +
                                 " still holds: " + r.evidence);
        }
        if (r.outcome != PointOutcome::Refuted) all_refuted = false;
        if (r.outcome == PointOutcome::Inconclusive)
            complaints.push_back("POINT " + std::to_string(p.point_id) +
                                 " unresolved: " + r.evidence);
        verdict.per_point_results.push_back(std::move(r));
    }
    // Vulnerable-unless-refuted: the patch counts as a fix only when every
    // point is definitively ruled out on the patched code.
    verdict.is_vulnerable = !all_refuted || transcript.truncated;
    verdict.inconclusive = !any_holds && !all_refuted;
    verdict.transcript = std::move(transcript);

    result.agent_verdict = std::move(verdict);
    result.fixed = !result.agent_verdict->is_vulnerable;
    if (!result.fixed) {
        std::string fb;
        for (const auto& c : complaints) {
            if (!fb.empty()) fb += "\n";
            fb += c;
        }
        if (fb.empty()) fb = "validation did not rule the vulnerability out";
        result.feedback = fb;
    }
    return result;
}

}  // namespace vulnmgr::agents
