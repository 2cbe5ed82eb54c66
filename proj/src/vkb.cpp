#include "vulnmgr/vkb.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <fstream>
#include <mutex>
#include <regex>
#include <set>
#include <sstream>
#include <stdexcept>

#include "vulnmgr/code_context.hpp"
#include "vulnmgr/diff.hpp"
#include "vulnmgr/prompts.hpp"
#include "vulnmgr/textnorm.hpp"

namespace vulnmgr::vkb {
namespace {

std::string read_file(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + p.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

nlohmann::json read_json(const std::filesystem::path& p) {
    try {
        return nlohmann::json::parse(read_file(p));
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error("malformed JSON in " + p.string() + ": " + e.what());
    }
}

std::string trim(std::string s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

bool valid_cve_id(const std::string& id) {
    static const std::regex re(R"(CVE-\d{4}-\d{4,})");
    return std::regex_match(id, re);
}

// In-process per-file store locks.
std::mutex& file_lock(const std::string& path) {
    static std::mutex registry_mu;
    static std::map<std::string, std::mutex> locks;
    std::lock_guard<std::mutex> g(registry_mu);
    return locks[path];
}

void write_atomically(const std::filesystem::path& path, const std::string& content) {
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << content;
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

// Heading cleanup: drop '#'s, list numbering, trailing colon; lowercase.
std::string canonical_heading(const std::string& line) {
    std::string s = trim(line);
    while (!s.empty() && s.front() == '#') s.erase(s.begin());
    s = trim(s);
    static const std::regex numbering(R"(^\(?\d+[.):]?\s+)");
    s = std::regex_replace(s, numbering, "");
    while (!s.empty() && (s.back() == ':' || s.back() == '.')) s.pop_back();
    s = trim(s);
    // markdown bold/emphasis wrappers
    while (s.size() >= 2 && (s.front() == '*' || s.front() == '_') &&
           (s.back() == '*' || s.back() == '_')) {
        s = trim(s.substr(1, s.size() - 2));
    }
    return lower(s);
}

int heading_slot(const std::string& canonical) {
    if (canonical == "vulnerability description") return 0;
    if (canonical == "cwe category") return 1;
    if (canonical == "root cause analysis" || canonical == "root cause") return 2;
    if (canonical == "vulnerability trigger chain analysis" ||
        canonical == "vulnerability trigger chain" ||
        canonical == "trigger chain analysis" || canonical == "trigger chain")
        return 3;
    if (canonical == "patch analysis") return 4;
    return -1;
}

std::string joined_patch_text(const VulnBasicInfo& basic) {
    std::string all;
    for (const auto& pf : basic.patched_files) all += pf.patch_hunks;
    return all;
}

}  // namespace

void to_json(nlohmann::json& j, const PatchedFile& v) {
    j = {{"file_path", v.file_path}, {"patch_hunks", v.patch_hunks}};
}
void from_json(const nlohmann::json& j, PatchedFile& v) {
    j.at("file_path").get_to(v.file_path);
    j.at("patch_hunks").get_to(v.patch_hunks);
}

void to_json(nlohmann::json& j, const VulnerableFunction& v) {
    j = {{"file_path", v.file_path},
         {"function_name", v.function_name},
         {"pre_patch_source", v.pre_patch_source},
         {"post_patch_source", v.post_patch_source}};
}
void from_json(const nlohmann::json& j, VulnerableFunction& v) {
    j.at("file_path").get_to(v.file_path);
    j.at("function_name").get_to(v.function_name);
    j.at("pre_patch_source").get_to(v.pre_patch_source);
    j.at("post_patch_source").get_to(v.post_patch_source);
}

void to_json(nlohmann::json& j, const VulnBasicInfo& v) {
    j = {{"cve_id", v.cve_id},
         {"cwe_id", v.cwe_id ? nlohmann::json(*v.cwe_id) : nlohmann::json(nullptr)},
         {"description", v.description},
         {"repo_name", v.repo_name},
         {"commit_url", v.commit_url},
         {"commit_message", v.commit_message},
         {"patched_files", v.patched_files},
         {"vulnerable_functions", v.vulnerable_functions},
         {"notes", v.notes}};
}
void from_json(const nlohmann::json& j, VulnBasicInfo& v) {
    j.at("cve_id").get_to(v.cve_id);
    if (j.contains("cwe_id") && !j.at("cwe_id").is_null())
        v.cwe_id = j.at("cwe_id").get<std::string>();
    else
        v.cwe_id.reset();
    j.at("description").get_to(v.description);
    j.at("repo_name").get_to(v.repo_name);
    j.at("commit_url").get_to(v.commit_url);
    j.at("commit_message").get_to(v.commit_message);
    j.at("patched_files").get_to(v.patched_files);
    j.at("vulnerable_functions").get_to(v.vulnerable_functions);
    v.notes = j.value("notes", "");
}

void to_json(nlohmann::json& j, const AnalysisReport& v) {
    j = {{"vulnerability_description", v.vulnerability_description},
         {"cwe_category", v.cwe_category},
         {"root_cause", v.root_cause},
         {"trigger_chain", v.trigger_chain},
         {"patch_analysis", v.patch_analysis}};
}
void from_json(const nlohmann::json& j, AnalysisReport& v) {
    j.at("vulnerability_description").get_to(v.vulnerability_description);
    j.at("cwe_category").get_to(v.cwe_category);
    j.at("root_cause").get_to(v.root_cause);
    j.at("trigger_chain").get_to(v.trigger_chain);
    j.at("patch_analysis").get_to(v.patch_analysis);
}

void to_json(nlohmann::json& j, const AnalysisPoint& v) {
    j = {{"point_id", v.point_id},
         {"directive", v.directive},
         {"symbols_of_interest", v.symbols_of_interest}};
}
void from_json(const nlohmann::json& j, AnalysisPoint& v) {
    j.at("point_id").get_to(v.point_id);
    j.at("directive").get_to(v.directive);
    j.at("symbols_of_interest").get_to(v.symbols_of_interest);
}

void to_json(nlohmann::json& j, const VulnRecord& v) {
    j = {{"basic", v.basic},
         {"report", v.report},
         {"points", v.points},
         {"created_at", v.created_at}};
}
void from_json(const nlohmann::json& j, VulnRecord& v) {
    j.at("basic").get_to(v.basic);
    j.at("report").get_to(v.report);
    j.at("points").get_to(v.points);
    j.at("created_at").get_to(v.created_at);
}

NvdInfo parse_nvd(const nlohmann::json& doc, const std::string& cve_id) {
    NvdInfo info;
    auto from_cve_object = [&](const nlohmann::json& cve) -> bool {
        std::string id = cve.value("id", cve.value("cve_id", ""));
        if (id != cve_id) return false;
        if (cve.contains("descriptions")) {
            for (const auto& d : cve.at("descriptions")) {
                if (d.value("lang", "") == "en") {
                    info.description = d.value("value", "");
                    break;
                }
            }
        } else {
            info.description = cve.value("description", "");
        }
        std::vector<std::string> cwes;
        if (cve.contains("weaknesses")) {
            for (const auto& w : cve.at("weaknesses"))
                for (const auto& d : w.value("description", nlohmann::json::array()))
                    if (d.value("lang", "") == "en") cwes.push_back(d.value("value", ""));
        } else if (cve.contains("cwe")) {
            cwes.push_back(cve.at("cwe").get<std::string>());
        }
        cwes.erase(std::remove_if(cwes.begin(), cwes.end(),
                                  [](const std::string& c) {
                                      return c.empty() || c.rfind("CWE-", 0) != 0;
                                  }),
                   cwes.end());
        if (!cwes.empty()) {
            info.cwe_id = cwes.front();
            info.extra_cwes.assign(cwes.begin() + 1, cwes.end());
        }
        return true;
    };

    if (doc.contains("vulnerabilities")) {
        for (const auto& entry : doc.at("vulnerabilities"))
            if (entry.contains("cve") && from_cve_object(entry.at("cve"))) return info;
    } else if (from_cve_object(doc)) {
        return info;
    }
    throw std::runtime_error(cve_id + " not found in NVD source");
}

std::string repo_name_from_url(const std::string& commit_url) {
    auto scheme = commit_url.find("://");
    std::string rest = scheme == std::string::npos ? commit_url : commit_url.substr(scheme + 3);
    auto host_end = rest.find('/');
    if (host_end == std::string::npos) return "";
    rest = rest.substr(host_end + 1);
    std::vector<std::string> segs;
    size_t pos = 0;
    while (pos < rest.size()) {
        auto slash = rest.find('/', pos);
        if (slash == std::string::npos) {
            segs.push_back(rest.substr(pos));
            break;
        }
        segs.push_back(rest.substr(pos, slash - pos));
        pos = slash + 1;
    }
    if (segs.size() < 2 || segs[0].empty() || segs[1].empty()) return "";
    std::string name = segs[1];
    if (name.size() > 4 && name.substr(name.size() - 4) == ".git")
        name = name.substr(0, name.size() - 4);
    return segs[0] + "/" + name;
}

VulnBasicInfo ingest_basic(const std::string& cve_id, const std::string& commit_url,
                           const std::filesystem::path& bundle_dir,
                           std::vector<std::string>* warnings) {
    if (!valid_cve_id(cve_id)) throw std::invalid_argument("not a CVE id: " + cve_id);
    if (commit_url.empty() || !std::filesystem::is_directory(bundle_dir))
        throw std::runtime_error("commit unreachable");
    auto warn = [&](const std::string& w) {
        if (warnings) warnings->push_back(w);
    };

    VulnBasicInfo basic;
    basic.cve_id = cve_id;
    basic.commit_url = commit_url;

    NvdInfo nvd = parse_nvd(read_json(bundle_dir / "nvd.json"), cve_id);
    basic.description = nvd.description;
    basic.cwe_id = nvd.cwe_id;
    if (!nvd.extra_cwes.empty()) {
        basic.notes = "additional CWEs:";
        for (const auto& c : nvd.extra_cwes) basic.notes += " " + c;
    }

    nlohmann::json commit = read_json(bundle_dir / "commit.json");
    basic.commit_message = commit.value("message", "");
    basic.repo_name = commit.value("repo_name", "");
    if (basic.repo_name.empty()) basic.repo_name = repo_name_from_url(commit_url);

    std::string diff_text = read_file(bundle_dir / "commit.diff");
    auto patches = diff::parse_unified(diff_text);
    if (patches.empty()) throw std::runtime_error("commit.diff contains no file patches");

    std::set<std::pair<std::string, std::string>> seen;  // (file, function)
    for (const auto& fp : patches) {
        std::string path = diff::strip_diff_prefix(fp.new_path);
        if (path.empty() || path == "/dev/null") path = diff::strip_diff_prefix(fp.old_path);
        basic.patched_files.push_back({path, diff::render_file_patch(fp)});

        auto pre_path = bundle_dir / "pre" / path;
        auto post_path = bundle_dir / "post" / path;
        if (!std::filesystem::exists(pre_path) || !std::filesystem::exists(post_path)) {
            warn("bundle lacks pre/post snapshots for " + path + "; function sources skipped");
            continue;
        }
        std::string pre_content = read_file(pre_path);
        std::string post_content = read_file(post_path);
        auto pre_syms = code::extract_symbols(pre_content, path);
        auto post_syms = code::extract_symbols(post_content, path);

        for (size_t h = 0; h < fp.hunks.size(); ++h) {
            const auto& hunk = fp.hunks[h];
            int anchor = hunk.old_start;
            int old_line = hunk.old_start;
            bool found_deleted = false;
            for (const auto& l : hunk.lines) {
                if (l[0] == '-') {
                    anchor = old_line;
                    found_deleted = true;
                    break;
                }
                if (l[0] != '+') ++old_line;
            }
            if (!found_deleted) anchor = hunk.old_start;

            const code::FunctionDef* pre_fn = code::enclosing(pre_syms.functions, anchor);
            if (!pre_fn) {
                warn(cve_id + ": hunk " + std::to_string(h + 1) + " in " + path +
                     " is not inside any function (file-level change)");
                continue;
            }
            if (!seen.insert({path, pre_fn->name}).second) continue;
            const code::FunctionDef* post_fn = nullptr;
            for (const auto& fn : post_syms.functions)
                if (fn.name == pre_fn->name) {
                    post_fn = &fn;
                    break;
                }
            if (!post_fn) {
                warn(cve_id + ": function " + pre_fn->name + " disappears in the patched " +
                     path + "; skipped");
                continue;
            }
            if (pre_fn->body_source == post_fn->body_source) {
                warn(cve_id + ": hunk anchor maps to " + pre_fn->name +
                     " but its source is unchanged; skipped");
                seen.erase({path, pre_fn->name});
                continue;
            }
            basic.vulnerable_functions.push_back(
                {path, pre_fn->name, pre_fn->body_source, post_fn->body_source});
        }
    }
    return basic;
}

std::optional<AnalysisReport> parse_report_sections(const std::string& text,
                                                    std::vector<std::string>* missing) {
    std::array<std::string, 5> sections;
    std::array<bool, 5> present{};
    int current = -1;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        int slot = heading_slot(canonical_heading(line));
        bool looks_like_heading = trim(line).rfind('#', 0) == 0 || slot >= 0;
        if (looks_like_heading && slot >= 0) {
            current = slot;
            present[static_cast<size_t>(slot)] = true;
            continue;
        }
        if (current >= 0) {
            auto& s = sections[static_cast<size_t>(current)];
            s += line;
            s.push_back('\n');
        }
    }
    static const char* names[5] = {"Vulnerability Description", "CWE Category",
                                   "Root Cause Analysis",
                                   "Vulnerability Trigger Chain Analysis", "Patch Analysis"};
    bool ok = true;
    for (size_t i = 0; i < 5; ++i) {
        sections[i] = trim(sections[i]);
        if (!present[i] || sections[i].empty()) {
            ok = false;
            if (missing) missing->push_back(names[i]);
        }
    }
    if (!ok) return std::nullopt;
    return AnalysisReport{sections[0], sections[1], sections[2], sections[3], sections[4]};
}

AnalysisReport generate_report(const VulnBasicInfo& basic, Gateway gw, int* reprompt_count) {
    std::map<std::string, std::string> vars = {
        {"cve_id", basic.cve_id},
        {"cwe_id", basic.cwe_id.value_or("unknown")},
        {"repo_name", basic.repo_name},
        {"description", basic.description},
        {"commit_url", basic.commit_url},
        {"commit_message", basic.commit_message},
        {"pre_patch",
         basic.vulnerable_functions.empty() ? ""
                                            : basic.vulnerable_functions[0].pre_patch_source},
        {"post_patch",
         basic.vulnerable_functions.empty() ? ""
                                            : basic.vulnerable_functions[0].post_patch_source},
        {"patch", joined_patch_text(basic)},
    };
    std::vector<llm::ChatMessage> messages = {
        llm::ChatMessage::system(std::string(prompts::kReportSystem)),
        llm::ChatMessage::user(prompts::fill(prompts::kReportUser, vars))};
    std::string session = basic.cve_id + "|report";
    if (reprompt_count) *reprompt_count = 0;

    for (int attempt = 0; attempt < 2; ++attempt) {
        llm::ChatMessage reply = llm::complete(gw.provider, gw.config, messages, {}, session);
        std::vector<std::string> missing;
        auto report = parse_report_sections(reply.content, &missing);
        if (report) return *report;
        if (attempt == 1) break;
        if (reprompt_count) ++*reprompt_count;
        std::string list;
        for (const auto& m : missing) {
            if (!list.empty()) list += ", ";
            list += m;
        }
        messages.push_back(reply);
        messages.push_back(llm::ChatMessage::user(
            prompts::fill(prompts::kReportReprompt, {{"missing", list}})));
    }
    throw std::runtime_error("template violation: report is missing required sections");
}

std::vector<AnalysisPoint> parse_points(const std::string& text) {
    std::vector<AnalysisPoint> points;
    static const std::regex item(R"(^\s*(?:POINT\s+)?(\d+)\s*[.):\-]\s+(.*\S)\s*$)",
                                 std::regex::icase);
    static const std::regex tick(R"(`([^`]+)`)");
    static const std::regex ident(R"([A-Za-z_][A-Za-z0-9_]*)");
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        std::smatch m;
        if (!std::regex_match(line, m, item)) continue;
        AnalysisPoint p;
        p.point_id = static_cast<int>(points.size()) + 1;
        p.directive = m[2].str();
        std::set<std::string> seen;
        for (auto it = std::sregex_iterator(p.directive.begin(), p.directive.end(), tick);
             it != std::sregex_iterator(); ++it) {
            std::string span = (*it)[1].str();
            for (auto id = std::sregex_iterator(span.begin(), span.end(), ident);
                 id != std::sregex_iterator(); ++id) {
                std::string sym = id->str();
                if (text::is_c_keyword(sym) || !seen.insert(sym).second) continue;
                p.symbols_of_interest.push_back(sym);
            }
        }
        points.push_back(std::move(p));
    }
    return points;
}

std::vector<AnalysisPoint> distill_points(const AnalysisReport& report,
                                          const std::string& cve_id, Gateway gw) {
    std::vector<llm::ChatMessage> messages = {
        llm::ChatMessage::system(std::string(prompts::kPointsSystem)),
        llm::ChatMessage::user(
            prompts::fill(prompts::kPointsUser, {{"report", render_report(report)}}))};
    llm::ChatMessage reply =
        llm::complete(gw.provider, gw.config, messages, {}, cve_id + "|points");
    auto points = parse_points(reply.content);
    if (points.empty())
        throw std::runtime_error("no analysis points could be parsed from the model output");
    return points;
}

std::string render_report(const AnalysisReport& report) {
    std::string out;
    out += "## Vulnerability Description\n" + report.vulnerability_description + "\n\n";
    out += "## CWE Category\n" + report.cwe_category + "\n\n";
    out += "## Root Cause Analysis\n" + report.root_cause + "\n\n";
    out += "## Vulnerability Trigger Chain Analysis\n" + report.trigger_chain + "\n\n";
    out += "## Patch Analysis\n" + report.patch_analysis + "\n";
    return out;
}

std::string render_points(const std::vector<AnalysisPoint>& points) {
    std::string out;
    for (const auto& p : points)
        out += std::to_string(p.point_id) + ". " + p.directive + "\n";
    return out;
}

Store::Store(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
}

std::filesystem::path Store::record_path(const std::string& cve_id) const {
    return dir_ / (cve_id + ".json");
}

void Store::store(const VulnRecord& record) {
    if (!valid_cve_id(record.basic.cve_id))
        throw std::invalid_argument("record has no valid cve_id");
    if (record.points.empty())
        throw std::invalid_argument("record has no analysis points");
    auto path = record_path(record.basic.cve_id);
    std::lock_guard<std::mutex> g(file_lock(path.string()));
    write_atomically(path, nlohmann::json(record).dump(2) + "\n");
    rewrite_index();
}

VulnRecord Store::load(const std::string& cve_id) const {
    auto path = record_path(cve_id);
    std::lock_guard<std::mutex> g(file_lock(path.string()));
    if (!std::filesystem::exists(path))
        throw std::runtime_error("no VKB record for " + cve_id);
    try {
        return read_json(path).get<VulnRecord>();
    } catch (const std::exception& e) {
        throw std::runtime_error("corrupt VKB record " + path.string() + ": " + e.what());
    }
}

std::vector<std::string> Store::list_records() const {
    std::vector<std::string> ids;
    if (!std::filesystem::exists(dir_)) return ids;
    for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
        if (!entry.is_regular_file() || entry.path().extension() != ".json") continue;
        std::string stem = entry.path().stem().string();
        if (valid_cve_id(stem)) ids.push_back(stem);
    }
    std::sort(ids.begin(), ids.end());
    return ids;
}

std::vector<VulnRecord> Store::load_all() const {
    std::vector<VulnRecord> out;
    for (const auto& id : list_records()) out.push_back(load(id));
    return out;
}

void Store::rewrite_index() const {
    nlohmann::json idx;
    idx["records"] = list_records();
    write_atomically(dir_ / "index.json", idx.dump(2) + "\n");
}

VulnRecord build_record(const std::string& cve_id, const std::string& commit_url,
                        const std::filesystem::path& bundle_dir, Gateway gw,
                        const std::string& created_at,
                        std::vector<std::string>* warnings) {
    VulnRecord record;
    record.basic = ingest_basic(cve_id, commit_url, bundle_dir, warnings);
    record.report = generate_report(record.basic, gw);
    record.points = distill_points(record.report, cve_id, gw);
    record.created_at = created_at;
    return record;
}

}  // namespace vulnmgr::vkb
