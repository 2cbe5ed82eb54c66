#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "vulnmgr/agents.hpp"

#include <stdexcept>
#include <string>
#include <vector>

using namespace vulnmgr;
using namespace vulnmgr::agents;
using vulnmgr::llm::ProviderConfig;
using vulnmgr::llm::ScriptedProvider;
using nlohmann::json;

namespace {

const std::string kBundle = std::string(FIXTURES_DIR) + "/kvaser/bundle";
const std::string kTwins = std::string(FIXTURES_DIR) + "/kvaser/target_twins";
const std::string kSourceRepo = std::string(FIXTURES_DIR) + "/kvaser/source_repo";
const std::string kCve = "CVE-2019-19947";
const std::string kLeafFile = "drivers/net/can/usb/kvaser_usb_leaf.c";
const std::string kLeafFn = "kvaser_usb_leaf_send_simple_cmd";

ProviderConfig scripted_cfg(int max_rounds = 12) {
    ProviderConfig cfg;
    cfg.kind = ProviderConfig::Kind::Scripted;
    cfg.max_tool_rounds = max_rounds;
    return cfg;
}

vkb::VulnRecord kvaser_record() {
    vkb::VulnRecord rec;
    rec.basic = vkb::ingest_basic(kCve, "https://github.com/torvalds/linux/commit/31b6697",
                                  kBundle);
    rec.points = {
        {1, "Check whether `kvaser_cmd` is allocated without zeroing (`kmalloc`)",
         {"kvaser_cmd", "kmalloc"}},
        {2, "Check whether padding is cleared (`memset`/`kzalloc`) before the send",
         {"memset", "kzalloc"}},
    };
    return rec;
}

detect::Finding leaf_finding() {
    return {kCve, kLeafFile, kLeafFn, detect::Method::Clone, 1.0, detect::Status::Detected};
}

struct Rig {
    vkb::VulnRecord rec = kvaser_record();
    code::RepoIndex source = code::RepoIndex::build(kSourceRepo, code::RepoLabel::Source);
    code::RepoIndex target = code::RepoIndex::build(kTwins, code::RepoLabel::Target);
    llm::Toolbox toolbox = make_context_toolbox(source, target);
    code::FunctionDef source_fn = source.find_function("kvaser_usb_send_simple_cmd").at(0);
    code::FunctionDef target_fn = target.find_function(kLeafFn).at(0);
};

PortedPointSet two_ported_points() {
    PortedPointSet ported;
    ported.finding_ref = finding_ref(leaf_finding());
    ported.points = {
        {1, "Check whether `kvaser_cmd` padding is cleared", {"kvaser_cmd"}},
        {2, "Check whether the buffer comes from plain `kmalloc`", {"kmalloc"}},
    };
    return ported;
}

std::string leaf_fix_reply(const Rig& rig, const std::string& marker) {
    std::string body = rig.target_fn.body_source;
    auto pos = body.find("\tcmd->id");
    REQUIRE(pos != std::string::npos);
    body.insert(pos, "\tmemset(cmd, 0, sizeof(*cmd)); /* " + marker + " */\n");
    return "SUBSTITUTION: kzalloc -> memset\nRATIONALE: zero the buffer after allocation\n\n```c\n" +
           body + "\n```";
}

}  // namespace

TEST_CASE("finding_ref and session_label compose the scoping scheme") {
    auto f = leaf_finding();
    CHECK(finding_ref(f) == kCve + "|" + kLeafFile + "|" + kLeafFn);
    CHECK(session_label(f, "porting") == finding_ref(f) + "|porting");
    CHECK(session_label(f, "fixing|2") == finding_ref(f) + "|fixing|2");
}

TEST_CASE("the context toolbox serves definitions from both repositories") {
    Rig rig;
    for (const char* name : kContextToolNames) CHECK(rig.toolbox.has(name));
    CHECK(rig.toolbox.schemas().size() == 5);

    auto src_hit = rig.toolbox.invoke("find_function_in_source",
                                      {{"name", "kvaser_usb_send_simple_cmd"}});
    CHECK(src_hit.find("// drivers/net/can/usb/kvaser_usb_core.c:") == 0);
    CHECK(src_hit.find("kmalloc") != std::string::npos);

    auto tgt_hit = rig.toolbox.invoke("find_function_in_target", {{"name", kLeafFn}});
    CHECK(tgt_hit.find("// " + kLeafFile) == 0);

    auto miss = rig.toolbox.invoke("find_function_in_target",
                                   {{"name", "kvaser_usb_send_simple_cmd"}});
    CHECK(miss ==
          "MISSING: no function named 'kvaser_usb_send_simple_cmd' in the target repository");
    CHECK(rig.toolbox.invoke("find_struct_in_source", {{"name", "kvaser_cmd"}})
              .find("u8 data[24]") != std::string::npos);
    CHECK(rig.toolbox.invoke("find_struct_in_target", {{"name", "bogus"}})
              .find("MISSING") == 0);

    auto found = rig.toolbox.invoke("text_search",
                                    {{"pattern", "kmalloc"}, {"repo", "target"}});
    CHECK(found.find(kLeafFile + ":") != std::string::npos);
    CHECK(rig.toolbox.invoke("text_search", {{"pattern", "zzz_nothing"}, {"repo", "source"}}) ==
          "no matches");
    CHECK_THROWS(rig.toolbox.invoke("text_search", {{"pattern", "x"}, {"repo", "elsewhere"}}));
    CHECK_THROWS(rig.toolbox.invoke("find_function_in_source", {}));
}

TEST_CASE("text_search results are capped") {
    std::string big;
    for (int i = 0; i < 70; ++i) big += "int needle_" + std::to_string(i) + ";\n";
    auto src = code::RepoIndex::from_memory(code::RepoLabel::Source, {{"big.c", big}});
    auto tgt = code::RepoIndex::from_memory(code::RepoLabel::Target, {});
    auto tb = make_context_toolbox(src, tgt);
    auto out = tb.invoke("text_search", {{"pattern", "needle_"}, {"repo", "source"}});
    CHECK(out.find("(20 more matches)") != std::string::npos);
    CHECK(out.find("needle_49") != std::string::npos);
    CHECK(out.find("needle_50;") == std::string::npos);
}

TEST_CASE("port_points adapts record points through the porting session") {
    Rig rig;
    auto f = leaf_finding();
    auto provider = ScriptedProvider::from_json(json{
        {"sessions",
         {{session_label(f, "porting"),
           json::array({{{"text",
                          "1. Check whether `kvaser_cmd` padding is cleared before "
                          "`kvaser_usb_leaf_send_cmd` runs\n"
                          "2. Check whether `kmalloc` output is zeroed\n"
                          "Dropped nothing."}}})}}}});
    auto cfg = scripted_cfg();
    AgentContext ctx{provider, cfg, rig.source, rig.target};
    auto ported = port_points(rig.rec, f, rig.source_fn, rig.target_fn, ctx);
    CHECK(ported.finding_ref == finding_ref(f));
    REQUIRE(ported.points.size() == 2);
    CHECK(ported.points[0].symbols_of_interest[0] == "kvaser_cmd");
    CHECK(ported.points[1].point_id == 2);
    CHECK_FALSE(ported.transcript.messages.empty());
    // the prompt carried the original points and the target source
    const auto& calls = provider.received(session_label(f, "porting"));
    REQUIRE(calls.size() == 1);
    const std::string& user = calls[0][1].content;
    CHECK(user.find(rig.rec.points[0].directive) != std::string::npos);
    CHECK(user.find(kLeafFn) != std::string::npos);
}

TEST_CASE("port_points without knowledge-base points works from the patch alone") {
    Rig rig;
    auto f = leaf_finding();
    auto provider = ScriptedProvider::from_json(json{
        {"sessions",
         {{session_label(f, "porting"),
           json::array({{{"text", "1. Check whether `kmalloc` memory is zeroed"}}})}}}});
    auto cfg = scripted_cfg();
    AgentContext ctx{provider, cfg, rig.source, rig.target};
    auto ported = port_points(rig.rec, f, rig.source_fn, rig.target_fn, ctx,
                              /*use_vkb_points=*/false);
    REQUIRE(ported.points.size() == 1);
    const std::string& user = provider.received(session_label(f, "porting"))[0][1].content;
    // patch text is present, the recorded analysis points are not
    CHECK(user.find("-\tcmd = kmalloc(") != std::string::npos);
    CHECK(user.find(rig.rec.points[0].directive) == std::string::npos);

    // with the knowledge base enabled, empty record points are a caller error
    vkb::VulnRecord hollow = rig.rec;
    hollow.points.clear();
    CHECK_THROWS_AS(port_points(hollow, f, rig.source_fn, rig.target_fn, ctx),
                    std::invalid_argument);
}

TEST_CASE("port_points rejects replies without any points") {
    Rig rig;
    auto f = leaf_finding();
    auto provider = ScriptedProvider::from_json(json{
        {"sessions",
         {{session_label(f, "porting"),
           json::array({{{"text", "None of the points apply here."}}})}}}});
    auto cfg = scripted_cfg();
    AgentContext ctx{provider, cfg, rig.source, rig.target};
    try {
        port_points(rig.rec, f, rig.source_fn, rig.target_fn, ctx);
        FAIL("expected a porting error");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("no applicable points after porting") !=
              std::string::npos);
    }
}

TEST_CASE("analyze auto-resolves points whose functions are identical in both repos") {
    std::string helper = "int helper_fn(int a)\n{\n\treturn a + 1;\n}\n";
    auto src = code::RepoIndex::from_memory(code::RepoLabel::Source, {{"s.c", helper}});
    auto tgt = code::RepoIndex::from_memory(code::RepoLabel::Target,
                                            {{"t.c", "/* moved */\n" + helper}});
    auto tb = make_context_toolbox(src, tgt);
    auto provider = ScriptedProvider::from_json(json{{"sessions", json::object()}});
    auto cfg = scripted_cfg();
    AgentContext ctx{provider, cfg, src, tgt};

    detect::Finding f{"CVE-1", "t.c", "helper_fn", detect::Method::Clone, 1.0,
                      detect::Status::Detected};
    PortedPointSet ported;
    ported.finding_ref = finding_ref(f);
    ported.points = {{1, "Check `helper_fn` bounds", {"helper_fn"}}};
    auto target_fn = tgt.find_function("helper_fn").at(0);

    auto verdict = analyze(f, ported, target_fn, tb, ctx);
    CHECK(verdict.shortcut_used);
    CHECK(verdict.is_vulnerable);  // identical scene: the point holds as it did originally
    CHECK_FALSE(verdict.inconclusive);
    REQUIRE(verdict.per_point_results.size() == 1);
    CHECK(verdict.per_point_results[0].outcome == PointOutcome::Holds);
    CHECK(verdict.per_point_results[0].evidence.find("identical in both repositories") !=
          std::string::npos);
    CHECK(provider.total_calls() == 0);  // no model involvement at all
}

TEST_CASE("analyze drives the scripted agent and folds point outcomes") {
    Rig rig;
    auto f = leaf_finding();
    auto ported = two_ported_points();
    auto cfg = scripted_cfg();

    auto holds = ScriptedProvider::from_json(json{
        {"sessions",
         {{session_label(f, "analyzing"),
           json::array({{{"tool", "find_function_in_target"},
                         {"args", {{"name", "kvaser_usb_leaf_send_cmd"}}}},
                        {{"text", "POINT 1: HOLDS - nothing clears the padding\n"
                                  "POINT 2: HOLDS - plain kmalloc"}}})}}}});
    AgentContext ctx1{holds, cfg, rig.source, rig.target};
    auto v1 = analyze(f, ported, rig.target_fn, rig.toolbox, ctx1);
    CHECK(v1.is_vulnerable);
    CHECK_FALSE(v1.inconclusive);
    CHECK_FALSE(v1.shortcut_used);
    REQUIRE(v1.per_point_results.size() == 2);
    CHECK(v1.per_point_results[0].outcome == PointOutcome::Holds);
    CHECK(v1.transcript.tool_round_count == 1);

    auto refuted = ScriptedProvider::from_json(json{
        {"sessions",
         {{session_label(f, "analyzing"),
           json::array({{{"text", "POINT 1: REFUTED - memset clears it\n"
                                  "POINT 2: HOLDS - kmalloc"}}})}}}});
    AgentContext ctx2{refuted, cfg, rig.source, rig.target};
    auto v2 = analyze(f, ported, rig.target_fn, rig.toolbox, ctx2);
    CHECK_FALSE(v2.is_vulnerable);
    CHECK_FALSE(v2.inconclusive);

    auto partial = ScriptedProvider::from_json(json{
        {"sessions",
         {{session_label(f, "analyzing"),
           json::array({{{"text", "POINT 1: HOLDS - suspicious"}}})}}}});
    AgentContext ctx3{partial, cfg, rig.source, rig.target};
    auto v3 = analyze(f, ported, rig.target_fn, rig.toolbox, ctx3);
    CHECK(v3.inconclusive);
    CHECK_FALSE(v3.is_vulnerable);
    REQUIRE(v3.per_point_results.size() == 2);
    CHECK(v3.per_point_results[1].outcome == PointOutcome::Inconclusive);
}

TEST_CASE("a truncated analysis transcript is inconclusive, never a confirmation") {
    Rig rig;
    auto f = leaf_finding();
    auto ported = two_ported_points();
    auto spinner = ScriptedProvider::from_json(json{
        {"sessions",
         {{session_label(f, "analyzing"),
           json::array({{{"tool", "text_search"},
                         {"args", {{"pattern", "memset"}, {"repo", "target"}}}},
                        {{"tool", "text_search"},
                         {"args", {{"pattern", "kmalloc"}, {"repo", "target"}}}}})}}}});
    auto cfg = scripted_cfg(1);
    AgentContext ctx{spinner, cfg, rig.source, rig.target};
    auto v = analyze(f, ported, rig.target_fn, rig.toolbox, ctx);
    CHECK(v.transcript.truncated);
    CHECK(v.inconclusive);
    CHECK_FALSE(v.is_vulnerable);
}

TEST_CASE("called_identifiers finds call-like names, skipping keywords and macros") {
    auto ids = called_identifiers(
        "if (x) {\n"
        "\tret = helper_one(a, sizeof(*a));\n"
        "\thelper_two(b);\n"
        "\thelper_one(c);\n"           // duplicate
        "\twhile (check(p))\n"
        "\t\tn = ARRAY_SIZE(tab);\n"
        "\tlikely(flag);\n"
        "}\n");
    CHECK(ids == std::vector<std::string>{"helper_one", "helper_two", "check"});
    CHECK(called_identifiers("int x = y + z;").empty());
}

TEST_CASE("check_consistency compares patched functions and patch callees") {
    // source: the recorded function plus a helper the patch calls
    auto src = code::RepoIndex::from_memory(
        code::RepoLabel::Source,
        {{"s.c",
          "int check_ret(int a)\n{\n\treturn a;\n}\n\n"
          "void zero_buf(char *p)\n{\n\tp[0] = 0;\n}\n"}});
    // target: same name but different return type; the helper is missing
    auto tgt = code::RepoIndex::from_memory(
        code::RepoLabel::Target,
        {{"t.c", "long check_ret(int a)\n{\n\treturn a;\n}\n"}});

    vkb::VulnRecord rec;
    rec.basic.cve_id = "CVE-2023-5";
    rec.basic.patched_files = {
        {"s.c",
         "--- a/s.c\n+++ b/s.c\n@@ -2,2 +2,4 @@\n {\n+\tzero_buf(buf);\n"
         "+\tlibc_only(buf);\n \treturn a;\n"}};
    rec.basic.vulnerable_functions = {{"s.c", "check_ret", "int check_ret(int a)...", "..."}};
    rec.points = {{1, "x", {}}};

    auto report = check_consistency(rec, tgt, src);
    REQUIRE(report.entries.size() == 2);  // libc_only defined in neither: skipped
    CHECK(report.entries[0].function_name == "check_ret");
    CHECK_FALSE(report.entries[0].needed_by_patch);
    CHECK(report.entries[0].comparison.verdict == code::CompareVerdict::SignatureDiff);
    CHECK(report.entries[0].comparison.detail.find("return type differs") !=
          std::string::npos);
    CHECK(report.entries[1].function_name == "zero_buf");
    CHECK(report.entries[1].needed_by_patch);
    CHECK(report.entries[1].comparison.verdict == code::CompareVerdict::MissingInTarget);
    CHECK(report.summary.find("2 function(s) checked:") == 0);
    CHECK(report.summary.find("1 SignatureDiff") != std::string::npos);
    CHECK(report.summary.find("1 MissingInTarget") != std::string::npos);

    auto rendered = render_consistency(report);
    CHECK(rendered.find("- check_ret: SignatureDiff (return type differs") !=
          std::string::npos);
    CHECK(rendered.find("- zero_buf: MissingInTarget") != std::string::npos);
    CHECK(rendered.find("[called by the patch]") != std::string::npos);
}

TEST_CASE("generate_fix parses the structured reply into a proposal") {
    Rig rig;
    auto f = leaf_finding();
    AnalysisVerdict verdict;
    verdict.is_vulnerable = true;
    verdict.per_point_results = {{1, PointOutcome::Holds, "no memset"}};
    auto consistency = check_consistency(rig.rec, rig.target, rig.source);

    auto provider = ScriptedProvider::from_json(json{
        {"sessions",
         {{session_label(f, "fixing|1"),
           json::array({{{"text", leaf_fix_reply(rig, "fix1")}}})}}}});
    auto cfg = scripted_cfg();
    AgentContext ctx{provider, cfg, rig.source, rig.target};
    auto proposal = generate_fix(f, verdict, rig.rec, consistency, rig.target_fn,
                                 rig.toolbox, ctx);
    CHECK(proposal.finding_ref == finding_ref(f));
    CHECK(proposal.patched_function_source.find("memset(cmd, 0, sizeof(*cmd))") !=
          std::string::npos);
    CHECK(proposal.rationale == "zero the buffer after allocation");
    REQUIRE(proposal.substitutions.size() == 1);
    CHECK(proposal.substitutions[0].missing_symbol == "kzalloc");
    CHECK(proposal.substitutions[0].substitute_symbol == "memset");
    CHECK(proposal.unified_diff.find("--- a/" + kLeafFile) == 0);
    CHECK(proposal.unified_diff.find("+++ b/" + kLeafFile) != std::string::npos);
    CHECK(proposal.unified_diff.find("+\tmemset(cmd, 0, sizeof(*cmd));") != std::string::npos);
    // prompt carried the verdict trace and the consistency report
    const auto& user = provider.received(session_label(f, "fixing|1"))[0][1].content;
    CHECK(user.find("no memset") != std::string::npos);
    CHECK(user.find("function(s) checked") != std::string::npos);
    CHECK(user.find("failed validation") == std::string::npos);  // no feedback round 1

    AnalysisVerdict benign;
    CHECK_THROWS_AS(generate_fix(f, benign, rig.rec, consistency, rig.target_fn,
                                 rig.toolbox, ctx),
                    std::invalid_argument);
}

TEST_CASE("generate_fix reprompts once on malformed replies, then gives up") {
    Rig rig;
    auto f = leaf_finding();
    AnalysisVerdict verdict;
    verdict.is_vulnerable = true;
    auto consistency = check_consistency(rig.rec, rig.target, rig.source);
    auto cfg = scripted_cfg();

    auto recovered = ScriptedProvider::from_json(json{
        {"sessions",
         {{session_label(f, "fixing|1"),
           json::array({{{"text", "here is a fix but no code block"}},
                        {{"text", leaf_fix_reply(rig, "retry")}}})}}}});
    AgentContext ctx1{recovered, cfg, rig.source, rig.target};
    auto proposal = generate_fix(f, verdict, rig.rec, consistency, rig.target_fn,
                                 rig.toolbox, ctx1);
    CHECK(proposal.patched_function_source.find("retry") != std::string::npos);
    const auto& calls = recovered.received(session_label(f, "fixing|1"));
    REQUIRE(calls.size() == 2);
    CHECK(calls[1].back().content.find("not usable") != std::string::npos);

    auto hopeless = ScriptedProvider::from_json(json{
        {"sessions",
         {{session_label(f, "fixing|1"),
           json::array({{{"text", "no block"}},
                        {{"text", "```c\nint wrong_name(void)\n{\n\treturn 0;\n}\n```"}}})}}}});
    AgentContext ctx2{hopeless, cfg, rig.source, rig.target};
    try {
        generate_fix(f, verdict, rig.rec, consistency, rig.target_fn, rig.toolbox, ctx2);
        FAIL("expected malformed-patch error");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("malformed patch") != std::string::npos);
    }
}

TEST_CASE("generate_fix round two carries the validation feedback") {
    Rig rig;
    auto f = leaf_finding();
    AnalysisVerdict verdict;
    verdict.is_vulnerable = true;
    auto consistency = check_consistency(rig.rec, rig.target, rig.source);
    auto provider = ScriptedProvider::from_json(json{
        {"sessions",
         {{session_label(f, "fixing|2"),
           json::array({{{"text", leaf_fix_reply(rig, "round2")}}})}}}});
    auto cfg = scripted_cfg();
    AgentContext ctx{provider, cfg, rig.source, rig.target};
    auto proposal = generate_fix(f, verdict, rig.rec, consistency, rig.target_fn,
                                 rig.toolbox, ctx, std::string("POINT 1 still holds: kmalloc"),
                                 2);
    CHECK(proposal.patched_function_source.find("round2") != std::string::npos);
    const auto& user = provider.received(session_label(f, "fixing|2"))[0][1].content;
    CHECK(user.find("failed validation") != std::string::npos);
    CHECK(user.find("POINT 1 still holds: kmalloc") != std::string::npos);
}

TEST_CASE("validate short-circuits when the detector already reports clean") {
    Rig rig;
    auto f = leaf_finding();
    auto ported = two_ported_points();
    auto provider = ScriptedProvider::from_json(json{{"sessions", json::object()}});
    auto cfg = scripted_cfg();
    AgentContext ctx{provider, cfg, rig.source, rig.target};
    PatchProposal proposal;
    proposal.patched_function_source = "int f(void)\n{\n\treturn 0;\n}";

    auto result = validate(proposal, f, rig.rec, ported,
                           [] { return patch::RescanResult{false, "clone=clean"}; },
                           rig.toolbox, ctx);
    CHECK(result.fixed);
    CHECK_FALSE(result.detector_flagged);
    CHECK_FALSE(result.agent_verdict.has_value());
    CHECK(result.feedback.empty());
    CHECK(provider.total_calls() == 0);
}

TEST_CASE("validate consults the agent when the detector still flags") {
    Rig rig;
    auto f = leaf_finding();
    auto ported = two_ported_points();
    auto cfg = scripted_cfg();
    PatchProposal proposal;
    proposal.patched_function_source = rig.target_fn.body_source;
    auto flagged = [] { return patch::RescanResult{true, "clone=hit func_hash=clean"}; };

    auto all_refuted = ScriptedProvider::from_json(json{
        {"sessions",
         {{session_label(f, "validation|1"),
           json::array({{{"text", "POINT 1: REFUTED - memset added\n"
                                  "POINT 2: REFUTED - zeroed now"}}})}}}});
    AgentContext ctx1{all_refuted, cfg, rig.source, rig.target};
    auto ok = validate(proposal, f, rig.rec, ported, flagged, rig.toolbox, ctx1);
    CHECK(ok.fixed);
    CHECK(ok.detector_flagged);
    REQUIRE(ok.agent_verdict.has_value());
    CHECK_FALSE(ok.agent_verdict->is_vulnerable);
    CHECK(ok.feedback.empty());
    // the validator saw the patched source, not the original finding
    const auto& user = all_refuted.received(session_label(f, "validation|1"))[0][1].content;
    CHECK(user.find(proposal.patched_function_source) != std::string::npos);

    auto still_holds = ScriptedProvider::from_json(json{
        {"sessions",
         {{session_label(f, "validation|1"),
           json::array({{{"text", "POINT 1: HOLDS - padding still leaks\n"
                                  "POINT 2: REFUTED - allocation fine"}}})}}}});
    AgentContext ctx2{still_holds, cfg, rig.source, rig.target};
    auto bad = validate(proposal, f, rig.rec, ported, flagged, rig.toolbox, ctx2);
    CHECK_FALSE(bad.fixed);
    CHECK(bad.detector_flagged);
    CHECK(bad.feedback.find("POINT 1 still holds: padding still leaks") != std::string::npos);

    auto unresolved = ScriptedProvider::from_json(json{
        {"sessions",
         {{session_label(f, "validation|1"),
           json::array({{{"text", "POINT 1: REFUTED - ok"}}})}}}});
    AgentContext ctx3{unresolved, cfg, rig.source, rig.target};
    auto murky = validate(proposal, f, rig.rec, ported, flagged, rig.toolbox, ctx3);
    CHECK_FALSE(murky.fixed);
    CHECK(murky.feedback.find("POINT 2 unresolved") != std::string::npos);

    // round selects the session label
    auto round2 = ScriptedProvider::from_json(json{
        {"sessions",
         {{session_label(f, "validation|2"),
           json::array({{{"text", "POINT 1: REFUTED - a\nPOINT 2: REFUTED - b"}}})}}}});
    AgentContext ctx4{round2, cfg, rig.source, rig.target};
    auto second = validate(proposal, f, rig.rec, ported, flagged, rig.toolbox, ctx4, 2);
    CHECK(second.fixed);
}

TEST_CASE("fixed implies empty feedback and vice versa") {
    Rig rig;
    auto f = leaf_finding();
    auto ported = two_ported_points();
    auto cfg = scripted_cfg();
    PatchProposal proposal;
    proposal.patched_function_source = rig.target_fn.body_source;

    std::vector<std::string> replies = {
        "POINT 1: REFUTED - a\nPOINT 2: REFUTED - b",
        "POINT 1: HOLDS - a\nPOINT 2: REFUTED - b",
        "POINT 1: INCONCLUSIVE - unclear\nPOINT 2: REFUTED - b",
        "no structured outcome at all",
    };
    for (const auto& text : replies) {
        auto provider = ScriptedProvider::from_json(json{
            {"sessions",
             {{session_label(f, "validation|1"), json::array({{{"text", text}}})}}}});
        AgentContext ctx{provider, cfg, rig.source, rig.target};
        auto r = validate(proposal, f, rig.rec, ported,
                          [] { return patch::RescanResult{true, "clone=hit"}; },
                          rig.toolbox, ctx);
        CHECK(r.fixed == r.feedback.empty());
    }
}

TEST_CASE("point outcome names render for summaries") {
    CHECK(std::string(to_string(PointOutcome::Holds)) == "Holds");
    CHECK(std::string(to_string(PointOutcome::Refuted)) == "Refuted");
    CHECK(std::string(to_string(PointOutcome::Inconclusive)) == "Inconclusive");
}
