#include "vulnmgr/pipeline.hpp"

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "vulnmgr/patch_engine.hpp"
#include "vulnmgr/prompts.hpp"
#include "vulnmgr/textnorm.hpp"

namespace fs = std::filesystem;

namespace vulnmgr::pipeline {
namespace {

std::string sanitize(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    for (char c : s) {
        bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-' ||
                  c == '_';
        out.push_back(ok ? c : '_');
    }
    return out;
}

std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

bool status_is_vulnerable(detect::Status s) {
    return s == detect::Status::Confirmed || s == detect::Status::Patched ||
           s == detect::Status::Validated;
}

fs::path fresh_scratch_dir(const PipelineConfig& cfg) {
    if (!cfg.scratch_dir.empty()) return cfg.scratch_dir;
    if (!cfg.out_dir.empty()) return cfg.out_dir / "scratch";
    static std::atomic<int> counter{0};
    return fs::temp_directory_path() /
           ("vulnmgr-" + std::to_string(::getpid()) + "-" + std::to_string(++counter));
}

std::string summarize_verdict(const agents::AnalysisVerdict& v) {
    std::string head = v.inconclusive       ? "inconclusive"
                       : v.is_vulnerable    ? "vulnerable"
                                            : "not vulnerable";
    if (v.shortcut_used) head += " (identical-function shortcut)";
    std::string points;
    for (const auto& r : v.per_point_results) {
        if (!points.empty()) points += "; ";
        points += "POINT " + std::to_string(r.point_id) + " " +
                  agents::to_string(r.outcome);
    }
    return points.empty() ? head : head + ": " + points;
}

struct Runner {
    const PipelineConfig& cfg;
    llm::Provider& provider;
    const code::RepoIndex& source_index;
    const code::RepoIndex& target_index;
    const llm::Toolbox& toolbox;
    fs::path target_root;
    fs::path scratch;

    void add_transcript(FindingReport& fr, const std::string& role,
                        const llm::Transcript& transcript) const {
        std::string name = sanitize(fr.finding.cve_id) + "__" +
                           sanitize(fr.finding.target_file) + "__" +
                           sanitize(fr.finding.target_function) + "__" + role + ".txt";
        fr.transcripts.push_back({name, render_transcript(transcript)});
        fr.transcript_paths.push_back("transcripts/" + name);
    }

    static void quarantine(FindingReport& fr, const std::string& reason) {
        fr.effective = EffectiveStatus::Quarantined;
        fr.quarantine_reason = reason;
    }

    code::FunctionDef resolve_target_fn(const detect::Finding& finding) const {
        if (finding.target_function.empty()) {
            const std::string* content = target_index.file_content(finding.target_file);
            if (!content)
                throw std::runtime_error("flagged file missing from index: " +
                                         finding.target_file);
            code::FunctionDef def;
            def.name = finding.target_file;  // file-scope subject
            def.file_path = finding.target_file;
            def.body_source = *content;
            def.line_span = {1,
                             static_cast<int>(std::count(content->begin(), content->end(),
                                                         '\n')) +
                                 1};
            return def;
        }
        auto defs = target_index.find_function(finding.target_function);
        if (defs.empty())
            throw std::runtime_error("flagged function missing from index: " +
                                     finding.target_function);
        for (const auto& d : defs)
            if (d.file_path == finding.target_file) return d;
        return defs.front();
    }

    const vkb::VulnerableFunction& pick_source_vf(const vkb::VulnRecord& record,
                                                  const detect::Finding& finding) const {
        if (record.basic.vulnerable_functions.empty())
            throw std::runtime_error("record " + record.basic.cve_id +
                                     " carries no vulnerable function sources");
        for (const auto& vf : record.basic.vulnerable_functions)
            if (vf.function_name == finding.target_function) return vf;
        return record.basic.vulnerable_functions.front();
    }

    code::FunctionDef resolve_source_fn(const vkb::VulnerableFunction& vf) const {
        auto defs = source_index.find_function(vf.function_name);
        for (const auto& d : defs)
            if (d.file_path == vf.file_path) return d;
        if (!defs.empty()) return defs.front();
        // fall back to the recorded snapshot
        auto syms = code::extract_symbols(vf.pre_patch_source, vf.file_path);
        for (const auto& f : syms.functions)
            if (f.name == vf.function_name) return f;
        code::FunctionDef def;
        def.name = vf.function_name;
        def.file_path = vf.file_path;
        def.body_source = vf.pre_patch_source;
        def.line_span = {1, static_cast<int>(std::count(vf.pre_patch_source.begin(),
                                                        vf.pre_patch_source.end(), '\n')) +
                                1};
        return def;
    }

    FindingReport run(detect::Finding finding, const vkb::VulnRecord& record) const {
        FindingReport fr;
        fr.finding = std::move(finding);
        agents::AgentContext ctx{provider, cfg.provider, source_index, target_index};
        const bool file_level = fr.finding.target_function.empty();
        try {
            code::FunctionDef target_fn = resolve_target_fn(fr.finding);
            const auto& vf = pick_source_vf(record, fr.finding);
            code::FunctionDef source_fn = resolve_source_fn(vf);

            agents::PortedPointSet ported;
            agents::AnalysisVerdict verdict;
            if (cfg.confirmation) {
                ported = agents::port_points(record, fr.finding, source_fn, target_fn, ctx,
                                             cfg.use_vkb);
                add_transcript(fr, "porting", ported.transcript);
                verdict = agents::analyze(fr.finding, ported, target_fn, toolbox, ctx);
                if (!verdict.transcript.messages.empty())
                    add_transcript(fr, "analyzing", verdict.transcript);
                fr.verdict_summary = summarize_verdict(verdict);
                if (verdict.inconclusive) {
                    fr.effective = EffectiveStatus::Inconclusive;
                    return fr;
                }
                if (!verdict.is_vulnerable) {
                    fr.finding.status = detect::Status::Rejected;
                    fr.effective = EffectiveStatus::Rejected;
                    return fr;
                }
            } else {
                ported.finding_ref = agents::finding_ref(fr.finding);
                if (cfg.use_vkb && !record.points.empty()) {
                    ported.points = record.points;
                } else {
                    ported.points.push_back(
                        {1,
                         "Check whether the flaw described as \"" +
                             record.basic.description + "\" is present in `" +
                             target_fn.name + "`",
                         {target_fn.name}});
                }
                verdict.is_vulnerable = true;
                for (const auto& p : ported.points)
                    verdict.per_point_results.push_back(
                        {p.point_id, agents::PointOutcome::Holds, "confirmation skipped"});
                fr.verdict_summary = "confirmation skipped";
            }
            fr.finding.status = detect::Status::Confirmed;
            fr.effective = EffectiveStatus::Confirmed;

            if (file_level) {
                quarantine(fr, "file-level finding: no enclosing function to repair");
                return fr;
            }

            auto consistency = agents::check_consistency(record, target_index, source_index);
            fr.consistency_summary = consistency.summary;

            fs::path box = scratch / "sandbox" /
                           sanitize(fr.finding.cve_id + "_" + fr.finding.target_file + "_" +
                                    fr.finding.target_function);

            std::optional<std::string> feedback;
            for (int round = 1; round <= 2; ++round) {
                auto proposal =
                    agents::generate_fix(fr.finding, verdict, record, consistency, target_fn,
                                         toolbox, ctx, feedback, round);
                add_transcript(fr, "fixing-" + std::to_string(round), proposal.transcript);
                fr.finding.status = detect::Status::Patched;
                fr.effective = EffectiveStatus::Patched;
                fr.patch_diff = proposal.unified_diff;
                fr.patched_function_source = proposal.patched_function_source;

                patch::SandboxWorkspace ws(target_root, box / ("r" + std::to_string(round)));
                ws.apply_function_replacement(fr.finding.target_file, target_fn,
                                              proposal.patched_function_source);
                auto rescan = [&]() {
                    return patch::rescan_patched(ws, fr.finding, cfg.detector, record);
                };
                auto outcome = agents::validate(proposal, fr.finding, record, ported, rescan,
                                                toolbox, ctx, round);
                if (outcome.agent_verdict)
                    add_transcript(fr, "validation-" + std::to_string(round),
                                   outcome.agent_verdict->transcript);
                if (outcome.fixed) {
                    fr.validation_outcome =
                        outcome.detector_flagged
                            ? "fixed: validation agent refuted every analysis point"
                            : "fixed: detector reports the patched file clean";
                    fr.finding.status = detect::Status::Validated;
                    fr.effective = EffectiveStatus::Validated;
                    return fr;
                }
                fr.validation_outcome = "not fixed: " + outcome.feedback;
                feedback = outcome.feedback;
            }
            quarantine(fr, "patch not validated after one feedback round");
        } catch (const std::exception& e) {
            quarantine(fr, e.what());
        }
        return fr;
    }
};

}  // namespace

const char* to_string(EffectiveStatus s) {
    switch (s) {
        case EffectiveStatus::Inconclusive: return "Inconclusive";
        case EffectiveStatus::Rejected: return "Rejected";
        case EffectiveStatus::Confirmed: return "Confirmed";
        case EffectiveStatus::Patched: return "Patched";
        case EffectiveStatus::Validated: return "Validated";
        case EffectiveStatus::Quarantined: return "Quarantined";
    }
    return "?";
}

std::string render_transcript(const llm::Transcript& t) {
    std::ostringstream out;
    out << "tool_rounds: " << t.tool_round_count << "\n";
    out << "truncated: " << (t.truncated ? "true" : "false") << "\n";
    for (const auto& m : t.messages) {
        out << "\n[" << llm::to_string(m.role);
        if (m.tool_call) {
            out << " tool_call " << m.tool_call->id << " " << m.tool_call->tool_name;
        } else if (m.tool_result_for) {
            out << " result_for " << *m.tool_result_for;
        }
        out << "]\n";
        if (m.tool_call) {
            for (const auto& [k, v] : m.tool_call->arguments)
                out << k << " = " << v << "\n";
        }
        if (!m.content.empty()) out << m.content << "\n";
    }
    return out.str();
}

ManagementReport manage(const fs::path& target_repo_dir,
                        const std::vector<vkb::VulnRecord>& records, llm::Provider& provider,
                        const PipelineConfig& cfg) {
    ManagementReport report;
    report.target_repo = target_repo_dir.generic_string();
    report.version_label = !cfg.version_label.empty()
                               ? cfg.version_label
                               : target_repo_dir.filename().generic_string();

    auto target_index = code::RepoIndex::build(target_repo_dir, code::RepoLabel::Target);
    for (const auto& w : target_index.warnings()) report.warnings.push_back(w);
    if (records.empty()) return report;  // nothing to look for

    code::RepoIndex source_index = [&] {
        if (!cfg.source_root.empty())
            return code::RepoIndex::build(cfg.source_root, code::RepoLabel::Source);
        std::map<std::string, std::string> files;
        for (const auto& r : records)
            for (const auto& vf : r.basic.vulnerable_functions) {
                std::string& body = files[vf.file_path];
                if (!body.empty()) body += "\n";
                body += vf.pre_patch_source;
                if (body.empty() || body.back() != '\n') body += "\n";
            }
        return code::RepoIndex::from_memory(code::RepoLabel::Source, files,
                                            "<knowledge-base>");
    }();

    std::vector<std::string> det_warnings;
    auto findings = detect::detect(target_index, records, cfg.detector, &det_warnings);
    for (auto& w : det_warnings) report.warnings.push_back(std::move(w));

    std::map<std::string, const vkb::VulnRecord*> by_cve;
    for (const auto& r : records) by_cve[r.basic.cve_id] = &r;

    auto toolbox = agents::make_context_toolbox(source_index, target_index);
    Runner runner{cfg,     provider,       source_index, target_index,
                  toolbox, target_repo_dir, fresh_scratch_dir(cfg)};

    for (auto& f : findings) {
        auto it = by_cve.find(f.cve_id);
        if (it == by_cve.end()) {
            FindingReport fr;
            fr.finding = f;
            Runner::quarantine(fr, "no record for " + f.cve_id);
            report.findings.push_back(std::move(fr));
            continue;
        }
        report.findings.push_back(runner.run(f, *it->second));
    }

    for (const auto& fr : report.findings) {
        ++report.status_counts[to_string(fr.effective)];
        if (status_is_vulnerable(fr.finding.status)) report.any_vulnerable = true;
    }
    return report;
}

nlohmann::json report_to_json(const ManagementReport& report) {
    nlohmann::json findings = nlohmann::json::array();
    for (const auto& fr : report.findings) {
        nlohmann::json f;
        to_json(f["finding"], fr.finding);
        f["effective_status"] = to_string(fr.effective);
        f["verdict_summary"] = fr.verdict_summary;
        f["consistency_summary"] = fr.consistency_summary;
        f["patch_diff"] = fr.patch_diff;
        f["validation_outcome"] = fr.validation_outcome;
        f["quarantine_reason"] = fr.quarantine_reason;
        f["transcripts"] = fr.transcript_paths;
        findings.push_back(std::move(f));
    }
    return nlohmann::json{{"target_repo", report.target_repo},
                          {"version_label", report.version_label},
                          {"summary",
                           {{"any_vulnerable", report.any_vulnerable},
                            {"counts", report.status_counts}}},
                          {"findings", std::move(findings)},
                          {"warnings", report.warnings}};
}

void write_artifacts(const ManagementReport& report, const fs::path& out_dir) {
    fs::create_directories(out_dir / "patches");
    fs::create_directories(out_dir / "transcripts");

    auto dump = [](const fs::path& path, const std::string& text) {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + path.generic_string());
        out << text;
    };

    dump(out_dir / "report.json", report_to_json(report).dump(2) + "\n");

    nlohmann::json findings = nlohmann::json::array();
    for (const auto& fr : report.findings) {
        nlohmann::json f;
        to_json(f, fr.finding);
        findings.push_back(std::move(f));
    }
    dump(out_dir / "findings.json", findings.dump(2) + "\n");

    std::set<std::string> used;
    for (const auto& fr : report.findings) {
        if (fr.patch_diff.empty()) continue;
        std::string fn = fr.finding.target_function.empty() ? "file"
                                                            : fr.finding.target_function;
        std::string base = sanitize(fr.finding.cve_id) + "__" + sanitize(fn);
        std::string name = base + ".diff";
        for (int k = 2; !used.insert(name).second; ++k)
            name = base + "__" + std::to_string(k) + ".diff";
        dump(out_dir / "patches" / name, fr.patch_diff);
    }

    for (const auto& fr : report.findings)
        for (const auto& td : fr.transcripts) dump(out_dir / "transcripts" / td.name, td.text);

    nlohmann::json rejects = nlohmann::json::array();
    for (const auto& fr : report.findings) {
        if (fr.effective != EffectiveStatus::Quarantined) continue;
        rejects.push_back({{"finding", agents::finding_ref(fr.finding)},
                           {"reason", fr.quarantine_reason}});
    }
    dump(out_dir / "rejects.json", rejects.dump(2) + "\n");
}

// ---- evaluation harness ----

namespace {

std::string normalized_diff(const std::string& pre, const std::string& post) {
    std::string d = patch::render_unified_diff(pre, post, "a", "b");
    std::string out;
    for (const auto& l : text::normalize_lines(d)) {
        out += l;
        out.push_back('\n');
    }
    return out;
}

std::string first_function_name(const std::string& source, const std::string& what) {
    auto syms = code::extract_symbols(source, what);
    if (syms.functions.empty())
        throw std::runtime_error(what + ": no function definition found");
    return syms.functions.front().name;
}

}  // namespace

std::vector<PortingCase> load_cases(const fs::path& dataset_dir, std::vector<Reject>* rejects) {
    if (!fs::is_directory(dataset_dir))
        throw std::runtime_error("dataset directory not found: " +
                                 dataset_dir.generic_string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dataset_dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json")
            files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());

    std::vector<PortingCase> cases;
    for (const auto& path : files) {
        std::string case_file = path.filename().generic_string();
        try {
            std::ifstream in(path, std::ios::binary);
            if (!in) throw std::runtime_error("unreadable");
            nlohmann::json j = nlohmann::json::parse(in);
            PortingCase c;
            c.case_file = case_file;
            auto field = [&](const char* key) {
                if (!j.contains(key) || !j[key].is_string() ||
                    j[key].get<std::string>().empty())
                    throw std::runtime_error(std::string("missing field: ") + key);
                return j[key].get<std::string>();
            };
            c.cve_id = field("cve_id");
            c.commit_s = field("commit_s");
            c.commit_t = field("commit_t");
            c.repo_s = field("repo_s");
            c.repo_t = field("repo_t");
            c.f_opre = field("f_opre");
            c.f_opost = field("f_opost");
            c.f_tpre = field("f_tpre");
            c.f_tpost = field("f_tpost");
            if (c.f_tpre == c.f_tpost)
                throw std::runtime_error("f_tpre equals f_tpost");
            if (j.contains("meta")) {
                const auto& m = j["meta"];
                c.meta.file_path_s = m.value("file_path_s", c.meta.file_path_s);
                c.meta.file_path_t = m.value("file_path_t", c.meta.file_path_t);
                c.meta.changed_file_count_s = m.value("changed_file_count_s", -1);
                c.meta.changed_file_count_t = m.value("changed_file_count_t", -1);
                c.meta.orphan = m.value("orphan", false);
                c.meta.snapshot = m.value("snapshot", std::string());
                c.meta.description = m.value("description", std::string());
                c.meta.cwe_id = m.value("cwe_id", std::string());
            }
            cases.push_back(std::move(c));
        } catch (const std::exception& e) {
            if (rejects) rejects->push_back({case_file, e.what()});
        }
    }
    return cases;
}

std::vector<PortingCase> filter_cases(const std::vector<PortingCase>& cases,
                                      std::vector<Reject>* dropped) {
    std::vector<PortingCase> kept;
    for (const auto& c : cases) {
        auto drop = [&](const std::string& why) {
            if (dropped) dropped->push_back({c.case_file, why});
        };
        if (normalized_diff(c.f_opre, c.f_opost) == normalized_diff(c.f_tpre, c.f_tpost)) {
            drop("source and target patch diffs are identical");
            continue;
        }
        if (c.meta.changed_file_count_s >= 0 && c.meta.changed_file_count_t >= 0 &&
            c.meta.changed_file_count_s != c.meta.changed_file_count_t) {
            drop("changed-file counts differ: " +
                 std::to_string(c.meta.changed_file_count_s) + " vs " +
                 std::to_string(c.meta.changed_file_count_t));
            continue;
        }
        std::string ps = lower(c.meta.file_path_s), pt = lower(c.meta.file_path_t);
        if (ps.find("test") != std::string::npos || pt.find("test") != std::string::npos ||
            ps.find("version") != std::string::npos ||
            pt.find("version") != std::string::npos) {
            drop("file path contains a test/version keyword");
            continue;
        }
        if (c.meta.orphan) {
            drop("commit flagged as orphaned");
            continue;
        }
        kept.push_back(c);
    }
    return kept;
}

EquivalenceMode equivalence_from_string(const std::string& s) {
    if (s == "strict") return EquivalenceMode::Strict;
    if (s == "judge") return EquivalenceMode::Judge;
    throw std::runtime_error("unknown equivalence mode: " + s);
}

const char* to_string(EquivalenceMode m) {
    return m == EquivalenceMode::Strict ? "strict" : "judge";
}

bool judge_equivalence(const agents::PatchProposal& proposal, const std::string& ground_truth,
                       EquivalenceMode mode, llm::Provider* provider,
                       const llm::ProviderConfig* provider_cfg, const std::string& cve_id,
                       const std::string& description) {
    if (mode == EquivalenceMode::Strict)
        return text::lex_token_texts(proposal.patched_function_source) ==
               text::lex_token_texts(ground_truth);
    if (!provider || !provider_cfg)
        throw std::invalid_argument("judge mode requires a model provider");
    std::vector<llm::ChatMessage> messages = {
        llm::ChatMessage::system(std::string(prompts::kJudgeSystem)),
        llm::ChatMessage::user(prompts::fill(
            prompts::kJudgeUser, {{"description", description},
                                  {"candidate", proposal.patched_function_source},
                                  {"ground_truth", ground_truth}}))};
    auto reply = llm::complete(*provider, *provider_cfg, messages, {}, cve_id + "|judge");
    std::istringstream in(reply.content);
    std::string word;
    in >> word;
    for (char& ch : word) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    return word == "EQUIVALENT";
}

Metrics compute_metrics(int tp, int fp, int fn, int tpc) {
    Metrics m;
    m.tp = tp;
    m.fp = fp;
    m.fn = fn;
    m.tpc = tpc;
    if (tp + fp > 0) m.precision = static_cast<double>(tp) / (tp + fp);
    if (tp + fn > 0) m.recall = static_cast<double>(tp) / (tp + fn);
    if (m.precision && m.recall && (*m.precision + *m.recall) > 0)
        m.f1 = 2 * *m.precision * *m.recall / (*m.precision + *m.recall);
    if (tp > 0) m.tpc_over_tp = static_cast<double>(tpc) / tp;
    if (tp + fp > 0) m.repair_accuracy = static_cast<double>(tpc) / (tp + fp);
    return m;
}

vkb::VulnRecord record_from_case(const PortingCase& c) {
    vkb::VulnRecord r;
    r.basic.cve_id = c.cve_id;
    if (!c.meta.cwe_id.empty()) r.basic.cwe_id = c.meta.cwe_id;
    r.basic.description =
        !c.meta.description.empty()
            ? c.meta.description
            : c.cve_id + ": vulnerability fixed in " + c.repo_s + ", candidate recurrence in " +
                  c.repo_t;
    r.basic.repo_name = c.repo_s;
    r.basic.commit_url = c.commit_s;
    r.basic.commit_message = "fix commit " + c.commit_s;

    std::string fn_name = first_function_name(c.f_opre, c.case_file + "/f_opre");
    r.basic.patched_files.push_back(
        {c.meta.file_path_s,
         patch::render_unified_diff(c.f_opre, c.f_opost, "a/" + c.meta.file_path_s,
                                    "b/" + c.meta.file_path_s)});
    r.basic.vulnerable_functions.push_back(
        {c.meta.file_path_s, fn_name, c.f_opre, c.f_opost});

    r.report.vulnerability_description = r.basic.description;
    r.report.cwe_category = r.basic.cwe_id.value_or("unspecified");
    r.report.root_cause = "The flaw lives in `" + fn_name + "`; see the recorded fix diff.";
    r.report.trigger_chain =
        "Reaching `" + fn_name + "` with inputs the recorded fix guards against.";
    r.report.patch_analysis = "The fix rewrites `" + fn_name + "` as recorded in the diff.";

    r.points.push_back({1,
                        "Check whether the flaw fixed by the recorded patch is still present "
                        "in `" +
                            fn_name + "`",
                        {fn_name}});
    return r;
}

EvalOutcome evaluate(const std::vector<PortingCase>& cases, const fs::path& dataset_dir,
                     llm::Provider& provider, const PipelineConfig& cfg,
                     EquivalenceMode mode) {
    EvalOutcome out;
    fs::path scratch = fresh_scratch_dir(cfg);
    int tp = 0, fp = 0, fn = 0, tpc = 0;
    int case_no = 0;

    for (const auto& c : cases) {
        ++case_no;
        CaseVerdict cv;
        cv.cve_id = c.cve_id;
        cv.case_file = c.case_file;
        cv.equivalence_mode = to_string(mode);
        try {
            vkb::VulnRecord record = record_from_case(c);
            std::string gt_fn = first_function_name(c.f_tpre, c.case_file + "/f_tpre");
            std::string gt_file = c.meta.file_path_t;

            fs::path target_dir;
            if (!c.meta.snapshot.empty()) {
                target_dir = dataset_dir / c.meta.snapshot;
            } else {
                target_dir = scratch / "cases" /
                             (std::to_string(case_no) + "_" + sanitize(c.cve_id));
                fs::create_directories((target_dir / gt_file).parent_path());
                std::ofstream f(target_dir / gt_file, std::ios::binary | std::ios::trunc);
                f << c.f_tpre;
                if (!c.f_tpre.empty() && c.f_tpre.back() != '\n') f << "\n";
            }

            PipelineConfig per = cfg;
            per.scratch_dir = scratch / "work" / std::to_string(case_no);
            if (!cfg.out_dir.empty())
                per.out_dir = cfg.out_dir / "cases" /
                              (std::to_string(case_no) + "_" + sanitize(c.cve_id));
            auto report = manage(target_dir, {record}, provider, per);
            if (!per.out_dir.empty()) write_artifacts(report, per.out_dir);

            bool gt_confirmed = false;
            for (const auto& fr : report.findings) {
                if (!status_is_vulnerable(fr.finding.status)) continue;
                bool is_gt = fr.finding.target_file == gt_file &&
                             fr.finding.target_function == gt_fn;
                if (is_gt && !gt_confirmed) {
                    gt_confirmed = true;
                    cv.tp = 1;
                    if (!fr.patched_function_source.empty()) {
                        agents::PatchProposal p;
                        p.patched_function_source = fr.patched_function_source;
                        p.unified_diff = fr.patch_diff;
                        cv.equivalent =
                            judge_equivalence(p, c.f_tpost, mode, &provider, &cfg.provider,
                                              c.cve_id, record.basic.description);
                        if (cv.equivalent) cv.tpc = 1;
                    }
                } else {
                    ++cv.fp;
                    if (fr.finding.target_function.empty()) {
                        cv.file_level_ambiguity = true;
                        cv.note = "confirmed file-level finding scored as FP";
                    }
                }
            }
            if (!gt_confirmed) cv.fn = 1;
        } catch (const std::exception& e) {
            cv.note = e.what();
            cv.fn = 1;
        }
        tp += cv.tp;
        fp += cv.fp;
        fn += cv.fn;
        tpc += cv.tpc;
        out.per_case.push_back(std::move(cv));
    }
    out.metrics = compute_metrics(tp, fp, fn, tpc);
    return out;
}

nlohmann::json outcome_to_json(const EvalOutcome& outcome) {
    auto opt = [](const std::optional<double>& v) {
        return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
    };
    nlohmann::json per_case = nlohmann::json::array();
    for (const auto& cv : outcome.per_case) {
        per_case.push_back({{"cve_id", cv.cve_id},
                            {"case_file", cv.case_file},
                            {"tp", cv.tp},
                            {"fp", cv.fp},
                            {"fn", cv.fn},
                            {"tpc", cv.tpc},
                            {"equivalent", cv.equivalent},
                            {"equivalence_mode", cv.equivalence_mode},
                            {"file_level_ambiguity", cv.file_level_ambiguity},
                            {"note", cv.note}});
    }
    nlohmann::json rejects = nlohmann::json::array();
    for (const auto& r : outcome.rejects)
        rejects.push_back({{"case_file", r.case_file}, {"reason", r.reason}});
    const auto& m = outcome.metrics;
    return nlohmann::json{
        {"counts", {{"tp", m.tp}, {"fp", m.fp}, {"fn", m.fn}, {"tpc", m.tpc}}},
        {"metrics",
         {{"precision", opt(m.precision)},
          {"recall", opt(m.recall)},
          {"f1", opt(m.f1)},
          {"tpc_over_tp", opt(m.tpc_over_tp)},
          {"repair_accuracy", opt(m.repair_accuracy)}}},
        {"per_case", std::move(per_case)},
        {"rejects", std::move(rejects)}};
}

}  // namespace vulnmgr::pipeline
