#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include "CLI11.hpp"

#include "vulnmgr/config.hpp"
#include "vulnmgr/detector.hpp"
#include "vulnmgr/gateway.hpp"
#include "vulnmgr/pipeline.hpp"
#include "vulnmgr/vkb.hpp"

namespace fs = std::filesystem;
using namespace vulnmgr;

namespace {

constexpr int kExitClean = 0;
constexpr int kExitVulnerable = 1;
constexpr int kExitError = 2;

struct Settings {
    // shared
    std::string config_path;
    std::string repo;
    std::string vkb_dir = "vkb";
    std::string out_dir = "out";
    std::string source_root;
    std::string provider_spec = "live";
    std::string model = "offline-scripted";
    std::string endpoint;
    std::string api_key_env = "VULN_LLM_API_KEY";
    int max_tool_rounds = 12;
    bool no_vkb = false;
    bool no_confirmation = false;
    // detector
    detect::DetectorConfig detector;
    // vkb build
    std::string cve;
    std::string commit;
    std::string offline_bundle;
    // eval
    std::string dataset;
    std::string equivalence = "strict";
    std::string version_label;
};

// --config is honored before CLI11 runs so flags can override file values.
void apply_config_file(Settings& s, int argc, char** argv) {
    for (int i = 1; i < argc - 1; ++i) {
        if (std::string(argv[i]) == "--config") s.config_path = argv[i + 1];
    }
    if (s.config_path.empty()) return;
    auto kv = config::parse_file(s.config_path);
    auto str = [&](const char* key, std::string& slot) {
        auto it = kv.find(key);
        if (it != kv.end()) slot = it->second;
    };
    auto flag = [&](const char* key, bool& slot) {
        auto it = kv.find(key);
        if (it != kv.end()) slot = config::to_bool(it->second);
    };
    str("repo", s.repo);
    str("vkb", s.vkb_dir);
    str("out", s.out_dir);
    str("source_root", s.source_root);
    str("provider", s.provider_spec);
    str("model", s.model);
    str("endpoint", s.endpoint);
    str("api_key_env", s.api_key_env);
    str("cve", s.cve);
    str("commit", s.commit);
    str("offline_bundle", s.offline_bundle);
    str("dataset", s.dataset);
    str("equivalence", s.equivalence);
    str("version_label", s.version_label);
    flag("no_vkb", s.no_vkb);
    flag("no_confirmation", s.no_confirmation);
    if (auto it = kv.find("max_tool_rounds"); it != kv.end())
        s.max_tool_rounds = config::to_int(it->second);
    for (const char* key : {"detector.window_w", "window"})
        if (auto it = kv.find(key); it != kv.end())
            s.detector.window_w = config::to_int(it->second);
    for (const char* key : {"detector.shingle_n", "shingle_n"})
        if (auto it = kv.find(key); it != kv.end())
            s.detector.shingle_n = config::to_int(it->second);
    for (const char* key : {"detector.theta", "theta"})
        if (auto it = kv.find(key); it != kv.end())
            s.detector.theta = config::to_double(it->second);
}

llm::ProviderConfig provider_config(const Settings& s) {
    llm::ProviderConfig cfg;
    cfg.kind = s.provider_spec.rfind("scripted:", 0) == 0 ? llm::ProviderConfig::Kind::Scripted
                                                          : llm::ProviderConfig::Kind::Live;
    cfg.model_id = s.model;
    cfg.max_tool_rounds = s.max_tool_rounds;
    cfg.endpoint = s.endpoint;
    cfg.api_key_env = s.api_key_env;
    return cfg;
}

std::unique_ptr<llm::Provider> open_provider(const Settings& s,
                                             const llm::ProviderConfig& cfg) {
    if (cfg.kind == llm::ProviderConfig::Kind::Scripted) {
        std::string path = s.provider_spec.substr(std::string("scripted:").size());
        if (path.empty()) throw std::runtime_error("scripted provider needs a script path");
        return llm::make_provider(cfg, path);
    }
    if (s.provider_spec != "live")
        throw std::runtime_error("provider must be 'live' or 'scripted:FILE', got '" +
                                 s.provider_spec + "'");
    return llm::make_provider(cfg);
}

pipeline::PipelineConfig pipeline_config(const Settings& s) {
    pipeline::PipelineConfig cfg;
    cfg.vkb_dir = s.vkb_dir;
    cfg.out_dir = s.out_dir;
    cfg.source_root = s.source_root;
    cfg.use_vkb = !s.no_vkb;
    cfg.confirmation = !s.no_confirmation;
    cfg.detector = s.detector;
    cfg.provider = provider_config(s);
    cfg.version_label = s.version_label;
    return cfg;
}

std::string utc_now_iso8601() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void require(bool ok, const std::string& what) {
    if (!ok) throw std::runtime_error(what);
}

int run_vkb_build(const Settings& s) {
    require(!s.cve.empty(), "--cve is required");
    require(!s.commit.empty(), "--commit is required");
    fs::path bundle = !s.offline_bundle.empty() ? fs::path(s.offline_bundle)
                      : fs::is_directory(s.commit) ? fs::path(s.commit)
                                                   : fs::path();
    auto cfg = provider_config(s);
    auto provider = open_provider(s, cfg);
    vkb::Gateway gw{*provider, cfg};
    std::vector<std::string> warnings;
    auto record = vkb::build_record(s.cve, s.commit, bundle, gw, utc_now_iso8601(), &warnings);
    vkb::Store store{fs::path(s.vkb_dir)};
    store.store(record);
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
    std::cout << "stored " << record.basic.cve_id << ": "
              << record.basic.vulnerable_functions.size() << " function(s), "
              << record.points.size() << " analysis point(s) -> "
              << (store.dir() / (record.basic.cve_id + ".json")).generic_string() << "\n";
    return kExitClean;
}

int run_scan(const Settings& s) {
    require(!s.repo.empty(), "--repo is required");
    vkb::Store store{fs::path(s.vkb_dir)};
    auto records = store.load_all();
    auto index = code::RepoIndex::build(s.repo, code::RepoLabel::Target);
    std::vector<std::string> warnings;
    auto findings = detect::detect(index, records, s.detector, &warnings);
    for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";

    nlohmann::json arr = nlohmann::json::array();
    for (const auto& f : findings) {
        nlohmann::json j;
        detect::to_json(j, f);
        arr.push_back(std::move(j));
    }
    if (!s.out_dir.empty()) {
        fs::create_directories(s.out_dir);
        std::ofstream out(fs::path(s.out_dir) / "findings.json",
                          std::ios::binary | std::ios::trunc);
        out << arr.dump(2) << "\n";
    }
    std::cout << arr.dump(2) << "\n";
    std::cerr << findings.size() << " candidate finding(s)\n";
    return kExitClean;
}

int run_manage(const Settings& s) {
    require(!s.repo.empty(), "--repo is required");
    vkb::Store store{fs::path(s.vkb_dir)};
    auto records = store.load_all();
    auto cfg = pipeline_config(s);
    auto provider = open_provider(s, cfg.provider);
    auto report = pipeline::manage(s.repo, records, *provider, cfg);
    if (!cfg.out_dir.empty()) pipeline::write_artifacts(report, cfg.out_dir);
    for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
    std::cout << pipeline::report_to_json(report)["summary"].dump(2) << "\n";
    std::cerr << report.findings.size() << " finding(s); any_vulnerable="
              << (report.any_vulnerable ? "true" : "false") << "\n";
    return report.any_vulnerable ? kExitVulnerable : kExitClean;
}

int run_eval(const Settings& s) {
    require(!s.dataset.empty(), "--dataset is required");
    auto mode = pipeline::equivalence_from_string(s.equivalence);
    auto cfg = pipeline_config(s);
    auto provider = open_provider(s, cfg.provider);

    std::vector<pipeline::Reject> rejects;
    auto cases = pipeline::load_cases(s.dataset, &rejects);
    std::vector<pipeline::Reject> dropped;
    auto kept = pipeline::filter_cases(cases, &dropped);
    std::cerr << cases.size() << " case(s) loaded, " << kept.size() << " retained, "
              << dropped.size() << " filtered, " << rejects.size() << " malformed\n";

    auto outcome = pipeline::evaluate(kept, s.dataset, *provider, cfg, mode);
    outcome.rejects = rejects;
    for (const auto& d : dropped) outcome.rejects.push_back({d.case_file, "filtered: " + d.reason});

    auto j = pipeline::outcome_to_json(outcome);
    if (!s.out_dir.empty()) {
        fs::create_directories(s.out_dir);
        std::ofstream out(fs::path(s.out_dir) / "eval.json",
                          std::ios::binary | std::ios::trunc);
        out << j.dump(2) << "\n";
    }
    std::cout << j.dump(2) << "\n";
    return kExitClean;
}

}  // namespace

int main(int argc, char** argv) {
    Settings s;
    try {
        apply_config_file(s, argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }

    CLI::App app{"Recurring-vulnerability management for C repositories"};
    app.require_subcommand(1);
    app.add_option("--config", s.config_path, "settings file (key=value)");

    auto add_provider_opts = [&](CLI::App* cmd) {
        cmd->add_option("--provider", s.provider_spec, "scripted:FILE or live");
        cmd->add_option("--model", s.model, "model id for the live provider");
        cmd->add_option("--endpoint", s.endpoint, "chat-completions endpoint URL");
        cmd->add_option("--api-key-env", s.api_key_env, "env var holding the API key");
        cmd->add_option("--max-tool-rounds", s.max_tool_rounds, "tool-call round cap");
    };
    auto add_detector_opts = [&](CLI::App* cmd) {
        cmd->add_option("--theta", s.detector.theta, "similarity threshold");
        cmd->add_option("--window", s.detector.window_w, "clone signature window length");
        cmd->add_option("--shingle-n", s.detector.shingle_n, "token shingle length");
    };

    auto* vkb_cmd = app.add_subcommand("vkb", "knowledge-base operations");
    auto* build_cmd = vkb_cmd->add_subcommand("build", "ingest one CVE + fixing commit");
    build_cmd->add_option("--cve", s.cve, "CVE id");
    build_cmd->add_option("--commit", s.commit, "fixing commit URL or bundle dir");
    build_cmd->add_option("--offline-bundle", s.offline_bundle, "offline commit bundle dir");
    build_cmd->add_option("--vkb", s.vkb_dir, "knowledge-base directory");
    add_provider_opts(build_cmd);
    vkb_cmd->require_subcommand(1);

    auto* scan_cmd = app.add_subcommand("scan", "run the static detectors");
    scan_cmd->add_option("--repo", s.repo, "target repository");
    scan_cmd->add_option("--vkb", s.vkb_dir, "knowledge-base directory");
    scan_cmd->add_option("--out", s.out_dir, "artifact directory");
    add_detector_opts(scan_cmd);

    auto* manage_cmd = app.add_subcommand("manage", "detect, confirm, repair, validate");
    manage_cmd->add_option("--repo", s.repo, "target repository");
    manage_cmd->add_option("--vkb", s.vkb_dir, "knowledge-base directory");
    manage_cmd->add_option("--out", s.out_dir, "artifact directory");
    manage_cmd->add_option("--source-root", s.source_root, "historical repository checkout");
    manage_cmd->add_option("--version-label", s.version_label, "target version label");
    manage_cmd->add_flag("--no-vkb", s.no_vkb, "agents see only basic info");
    manage_cmd->add_flag("--no-confirmation", s.no_confirmation,
                         "skip confirmation; detections go straight to repair");
    add_provider_opts(manage_cmd);
    add_detector_opts(manage_cmd);

    auto* eval_cmd = app.add_subcommand("eval", "run the evaluation harness");
    eval_cmd->add_option("--dataset", s.dataset, "dataset directory of case JSON files");
    eval_cmd->add_option("--equivalence", s.equivalence, "strict or judge");
    eval_cmd->add_option("--out", s.out_dir, "artifact directory");
    eval_cmd->add_option("--source-root", s.source_root, "historical repository checkout");
    eval_cmd->add_flag("--no-vkb", s.no_vkb, "agents see only basic info");
    eval_cmd->add_flag("--no-confirmation", s.no_confirmation,
                       "skip confirmation; detections go straight to repair");
    add_provider_opts(eval_cmd);
    add_detector_opts(eval_cmd);

    // accepted anywhere; its values were already applied before parsing
    for (CLI::App* cmd : {vkb_cmd, build_cmd, scan_cmd, manage_cmd, eval_cmd})
        cmd->add_option("--config", s.config_path, "settings file (key=value)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitClean : kExitError;
    }

    try {
        if (build_cmd->parsed()) return run_vkb_build(s);
        if (scan_cmd->parsed()) return run_scan(s);
        if (manage_cmd->parsed()) return run_manage(s);
        if (eval_cmd->parsed()) return run_eval(s);
        std::cerr << "error: no subcommand\n";
        return kExitError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
}
