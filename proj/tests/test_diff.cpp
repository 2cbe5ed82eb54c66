#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "vulnmgr/diff.hpp"

#include <random>
#include <stdexcept>
#include <string>
#include <vector>

using namespace vulnmgr::diff;

TEST_CASE("split_lines and join_lines round-trip, tracking the final newline") {
    Lines a = split_lines("one\ntwo\n");
    CHECK(a.lines == std::vector<std::string>{"one", "two"});
    CHECK(a.final_newline);
    CHECK(join_lines(a) == "one\ntwo\n");

    Lines b = split_lines("one\ntwo");
    CHECK(b.lines == std::vector<std::string>{"one", "two"});
    CHECK_FALSE(b.final_newline);
    CHECK(join_lines(b) == "one\ntwo");

    Lines e = split_lines("");
    CHECK(e.lines.empty());
    CHECK(join_lines(e).empty());
}

TEST_CASE("render_unified emits labels, hunk headers and an empty string on no change") {
    std::string pre = "a\nb\nc\nd\ne\nf\ng\nh\n";
    std::string post = "a\nb\nc\nD\ne\nf\ng\nh\n";
    std::string d = render_unified(pre, post, "a/f.c", "b/f.c");
    CHECK(d.find("--- a/f.c\n") == 0);
    CHECK(d.find("+++ b/f.c\n") != std::string::npos);
    CHECK(d.find("@@ -1,7 +1,7 @@\n") != std::string::npos);
    CHECK(d.find("-d\n") != std::string::npos);
    CHECK(d.find("+D\n") != std::string::npos);
    CHECK(render_unified(pre, pre, "a", "b").empty());
}

TEST_CASE("nearby changes merge into one hunk, distant ones split") {
    std::string pre, post_near, post_far;
    for (int i = 1; i <= 30; ++i) pre += "line" + std::to_string(i) + "\n";
    post_near = post_far = pre;
    auto swap_line = [](std::string& text, const std::string& from, const std::string& to) {
        text.replace(text.find(from), from.size(), to);
    };
    swap_line(post_near, "line10\n", "ten\n");
    swap_line(post_near, "line13\n", "thirteen\n");  // 2 equal lines apart -> merged
    swap_line(post_far, "line5\n", "five\n");
    swap_line(post_far, "line25\n", "twentyfive\n");  // far apart -> two hunks

    auto count_hunks = [](const std::string& d) {
        int n = 0;
        for (auto& p : parse_unified(d)) n += static_cast<int>(p.hunks.size());
        return n;
    };
    CHECK(count_hunks(render_unified(pre, post_near, "a", "b")) == 1);
    CHECK(count_hunks(render_unified(pre, post_far, "a", "b")) == 2);
}

TEST_CASE("parse_unified reads git decoration, paths and hunks") {
    std::string text =
        "diff --git a/src/x.c b/src/x.c\n"
        "index 0123abc..4567def 100644\n"
        "--- a/src/x.c\n"
        "+++ b/src/x.c\n"
        "@@ -1,3 +1,3 @@\n"
        " int a;\n"
        "-int b;\n"
        "+long b;\n"
        " int c;\n";
    auto patches = parse_unified(text);
    REQUIRE(patches.size() == 1);
    CHECK(patches[0].old_path == "a/src/x.c");
    CHECK(patches[0].new_path == "b/src/x.c");
    REQUIRE(patches[0].hunks.size() == 1);
    const Hunk& h = patches[0].hunks[0];
    CHECK(h.old_start == 1);
    CHECK(h.old_count == 3);
    CHECK(h.new_count == 3);
    REQUIRE(h.lines.size() == 4);
    CHECK(h.lines[1] == "-int b;");
    CHECK(strip_diff_prefix(patches[0].old_path) == "src/x.c");
    CHECK(strip_diff_prefix("b/only") == "only");
    CHECK(strip_diff_prefix("plain/path.c") == "plain/path.c");
}

TEST_CASE("parse_unified splits multi-file diffs") {
    std::string text =
        "--- a/one.c\n+++ b/one.c\n@@ -1 +1 @@\n-x\n+y\n"
        "--- a/two.c\n+++ b/two.c\n@@ -1 +1 @@\n-p\n+q\n";
    auto patches = parse_unified(text);
    REQUIRE(patches.size() == 2);
    CHECK(patches[0].old_path == "a/one.c");
    CHECK(patches[1].new_path == "b/two.c");
}

TEST_CASE("no-newline markers survive parse, render and apply") {
    std::string pre = "a\nb";   // no trailing newline
    std::string post = "a\nc";  // still none
    std::string d = render_unified(pre, post, "a/f", "b/f");
    CHECK(d.find("\\ No newline at end of file") != std::string::npos);
    auto patches = parse_unified(d);
    REQUIRE(patches.size() == 1);
    CHECK(patches[0].old_ends_without_newline);
    CHECK(patches[0].new_ends_without_newline);
    CHECK(apply_patch(pre, patches[0]) == post);

    // newline added at EOF is itself a change
    std::string gained = render_unified("a\nb", "a\nb\n", "a/f", "b/f");
    auto gp = parse_unified(gained);
    REQUIRE(gp.size() == 1);
    CHECK(gp[0].old_ends_without_newline);
    CHECK_FALSE(gp[0].new_ends_without_newline);
    CHECK(apply_patch("a\nb", gp[0]) == "a\nb\n");
}

TEST_CASE("render_file_patch re-renders what parse_unified read") {
    std::string canonical =
        "--- a/x.c\n"
        "+++ b/x.c\n"
        "@@ -2,4 +2,5 @@\n"
        " keep\n"
        "-drop\n"
        "+add1\n"
        "+add2\n"
        " keep2\n"
        " keep3\n";
    auto patches = parse_unified(canonical);
    REQUIRE(patches.size() == 1);
    CHECK(render_file_patch(patches[0]) == canonical);
}

TEST_CASE("apply_patch rejects context and deletion mismatches") {
    std::string d = render_unified("a\nb\nc\n", "a\nB\nc\n", "a/f", "b/f");
    auto patches = parse_unified(d);
    REQUIRE(patches.size() == 1);
    CHECK(apply_patch("a\nb\nc\n", patches[0]) == "a\nB\nc\n");
    CHECK_THROWS_AS(apply_patch("a\nx\nc\n", patches[0]), std::runtime_error);
    CHECK_THROWS_AS(apply_patch("", patches[0]), std::runtime_error);
}

// Oracle: for generated (pre, post) pairs, applying the rendered diff must
// reproduce post exactly — byte-for-byte, trailing newline included.
TEST_CASE("randomized render/parse/apply round-trip") {
    std::mt19937 rng(20210 /* fixed seed */);
    auto make_text = [&](int n_lines, bool final_nl) {
        std::string t;
        for (int i = 0; i < n_lines; ++i) {
            t += "w" + std::to_string(rng() % 7);
            t += "\n";
        }
        if (!final_nl && !t.empty()) t.pop_back();
        return t;
    };
    for (int iter = 0; iter < 200; ++iter) {
        std::string pre = make_text(static_cast<int>(rng() % 12), rng() % 2 == 0);
        std::string post = make_text(static_cast<int>(rng() % 12), rng() % 2 == 0);
        std::string d = render_unified(pre, post, "a/t", "b/t", 1 + static_cast<int>(rng() % 3));
        if (d.empty()) {
            CHECK(pre == post);
            continue;
        }
        auto patches = parse_unified(d);
        REQUIRE(patches.size() == 1);
        CHECK(apply_patch(pre, patches[0]) == post);
    }
}
