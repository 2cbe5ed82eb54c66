#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "vulnmgr/code_context.hpp"

#include <map>
#include <string>
#include <vector>

using namespace vulnmgr::code;

namespace {

// Independent span oracle: body_source must equal the raw content's lines
// [start, end] joined with '\n'.
std::string slice(const std::string& content, LineSpan span) {
    std::vector<std::string> lines;
    std::string cur;
    for (char c : content) {
        if (c == '\n') {
            lines.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) lines.push_back(cur);
    std::string out;
    for (int l = span.start; l <= span.end && l <= static_cast<int>(lines.size()); ++l) {
        if (l > span.start) out += "\n";
        out += lines[static_cast<size_t>(l - 1)];
    }
    return out;
}

const std::string kUnit =
    "#include \"dep.h\"\n"                               // 1
    "\n"                                                  // 2
    "struct point {\n"                                    // 3
    "\tint x;\n"                                          // 4
    "\tint y;\n"                                          // 5
    "};\n"                                                // 6
    "\n"                                                  // 7
    "typedef struct pair { int a, b; } pair_t;\n"         // 8
    "\n"                                                  // 9
    "int norm1(const struct point *p);\n"                 // 10: prototype, not a def
    "\n"                                                  // 11
    "int norm1(const struct point *p)\n"                  // 12
    "{\n"                                                 // 13
    "\tint n = p->x + p->y;\n"                            // 14
    "\treturn n < 0 ? -n : n;\n"                          // 15
    "}\n"                                                 // 16
    "\n"                                                  // 17
    "static unsigned long scale(unsigned long v, int k)\n"  // 18
    "{\n"                                                 // 19
    "\tif (k > 0)\n"                                      // 20
    "\t\tv <<= k;\n"                                      // 21
    "\treturn v;\n"                                       // 22
    "}\n"                                                 // 23
    "\n"                                                  // 24
    "int g_counter = 0;\n"                                // 25
    "\n"                                                  // 26
    "void *make_buf(void)\n"                              // 27
    "{\n"                                                 // 28
    "\treturn 0;\n"                                       // 29
    "}\n";                                                // 30

}  // namespace

TEST_CASE("extract_symbols finds definitions, not prototypes or globals") {
    auto syms = extract_symbols(kUnit, "src/unit.c");
    CHECK(syms.warnings.empty());
    REQUIRE(syms.functions.size() == 3);
    CHECK(syms.functions[0].name == "norm1");
    CHECK(syms.functions[1].name == "scale");
    CHECK(syms.functions[2].name == "make_buf");

    const FunctionDef& f = syms.functions[0];
    CHECK(f.return_type == "int");
    REQUIRE(f.parameters.size() == 1);
    CHECK(f.parameters[0].name == "p");
    CHECK(f.parameters[0].type_text.find("struct point") != std::string::npos);
    CHECK(f.file_path == "src/unit.c");
    CHECK(f.line_span.start == 12);
    CHECK(f.line_span.end == 16);

    CHECK(syms.functions[1].return_type == "static unsigned long");
    CHECK(syms.functions[1].parameters.size() == 2);
    CHECK(syms.functions[2].return_type == "void *");
    CHECK(syms.functions[2].parameters.empty());  // (void)
}

TEST_CASE("every extracted span slices back to body_source") {
    auto syms = extract_symbols(kUnit, "u.c");
    for (const auto& fn : syms.functions) CHECK(fn.body_source == slice(kUnit, fn.line_span));
    for (const auto& sd : syms.structs) CHECK(sd.fields_source == slice(kUnit, sd.line_span));
}

TEST_CASE("struct extraction covers plain tags and typedef aliases") {
    auto syms = extract_symbols(kUnit, "u.c");
    REQUIRE(syms.structs.size() >= 2);
    CHECK(syms.structs[0].name == "point");
    CHECK(syms.structs[0].line_span.start == 3);
    CHECK(syms.structs[0].line_span.end == 6);
    bool has_pair = false, has_pair_t = false;
    for (auto& s : syms.structs) {
        if (s.name == "pair") has_pair = true;
        if (s.name == "pair_t") has_pair_t = true;
    }
    CHECK(has_pair);
    CHECK(has_pair_t);
}

TEST_CASE("malformed input yields a warning plus whatever parsed cleanly") {
    auto syms = extract_symbols("int ok(void)\n{\n\treturn 1;\n}\n\nint broken(void)\n{\n", "bad.c");
    REQUIRE(syms.functions.size() == 1);
    CHECK(syms.functions[0].name == "ok");
    REQUIRE_FALSE(syms.warnings.empty());
    CHECK(syms.warnings[0].find("bad.c:") == 0);
}

TEST_CASE("function signature renders return type, name and parameter types") {
    auto syms = extract_symbols(kUnit, "u.c");
    CHECK(syms.functions[1].signature().find("scale") != std::string::npos);
    CHECK(syms.functions[1].signature().find("unsigned long") != std::string::npos);
}

TEST_CASE("enclosing picks the innermost covering span") {
    auto syms = extract_symbols(kUnit, "u.c");
    const FunctionDef* hit = enclosing(syms.functions, 21);
    REQUIRE(hit != nullptr);
    CHECK(hit->name == "scale");
    CHECK(enclosing(syms.functions, 25) == nullptr);  // global, between functions
}

TEST_CASE("RepoIndex::build walks the fixture tree and indexes .c/.h only") {
    auto index = RepoIndex::build(std::string(FIXTURES_DIR) + "/kvaser/target_twins",
                                  RepoLabel::Target);
    CHECK(index.label() == RepoLabel::Target);
    REQUIRE(index.files().size() == 3);
    // sorted repo-relative paths
    CHECK(index.files()[0] == "drivers/net/can/usb/kvaser_usb.h");
    CHECK(index.files()[1] == "drivers/net/can/usb/kvaser_usb_hydra.c");
    CHECK(index.files()[2] == "drivers/net/can/usb/kvaser_usb_leaf.c");

    auto defs = index.find_function("kvaser_usb_leaf_send_simple_cmd");
    REQUIRE(defs.size() == 1);
    CHECK(defs[0].file_path == "drivers/net/can/usb/kvaser_usb_leaf.c");

    // prototypes in the header must not count as definitions
    CHECK(index.find_function("kmalloc").empty());

    auto structs = index.find_struct("kvaser_cmd");
    REQUIRE(structs.size() == 1);
    CHECK(structs[0].file_path == "drivers/net/can/usb/kvaser_usb.h");

    const std::string* content = index.file_content(defs[0].file_path);
    REQUIRE(content != nullptr);
    auto enc = index.enclosing_function(defs[0].file_path, defs[0].line_span.start + 1);
    REQUIRE(enc.has_value());
    CHECK(enc->name == "kvaser_usb_leaf_send_simple_cmd");
    CHECK_FALSE(index.enclosing_function(defs[0].file_path, 100000).has_value());
    CHECK(index.file_content("nope.c") == nullptr);
}

TEST_CASE("text_search returns matches ordered by path then line") {
    auto index = RepoIndex::build(std::string(FIXTURES_DIR) + "/kvaser/target_twins",
                                  RepoLabel::Target);
    auto hits = index.text_search("kmalloc");
    REQUIRE_FALSE(hits.empty());
    for (size_t i = 1; i < hits.size(); ++i) {
        bool ordered = hits[i - 1].file_path < hits[i].file_path ||
                       (hits[i - 1].file_path == hits[i].file_path &&
                        hits[i - 1].line_no < hits[i].line_no);
        CHECK(ordered);
    }
    for (auto& h : hits) CHECK(h.line_text.find("kmalloc") != std::string::npos);
    // regex patterns work too
    CHECK_FALSE(index.text_search("k[mz]alloc\\(").empty());
    CHECK(index.text_search("no_such_token_anywhere").empty());
}

TEST_CASE("from_memory builds an index without touching disk") {
    auto index = RepoIndex::from_memory(
        RepoLabel::Source,
        {{"a.c", "int one(void)\n{\n\treturn 1;\n}\n"},
         {"b.c", "int two(void)\n{\n\treturn 2;\n}\n"}},
        "<mem>");
    CHECK(index.root() == "<mem>");
    CHECK(index.files().size() == 2);
    CHECK(index.find_function("two").size() == 1);
}

TEST_CASE("compare_function verdict ladder") {
    auto src = RepoIndex::from_memory(
        RepoLabel::Source,
        {{"s.c",
          "int same(int a)\n{\n\treturn a;\n}\n\n"
          "int ret_kind(int a)\n{\n\treturn a;\n}\n\n"
          "int argc_kind(int a)\n{\n\treturn a;\n}\n\n"
          "int argt_kind(int a)\n{\n\treturn a;\n}\n\n"
          "int body_kind(int a)\n{\n\treturn a;\n}\n\n"
          "int src_only(void)\n{\n\treturn 0;\n}\n"}});
    auto tgt = RepoIndex::from_memory(
        RepoLabel::Target,
        {{"t.c",
          "int same(int a)\n{\n\t/* reflowed */ return  a ;\n}\n\n"
          "long ret_kind(int a)\n{\n\treturn a;\n}\n\n"
          "int argc_kind(int a, int b)\n{\n\treturn a + b;\n}\n\n"
          "int argt_kind(long a)\n{\n\treturn (int)a;\n}\n\n"
          "int body_kind(int a)\n{\n\treturn a + 1;\n}\n\n"
          "int tgt_only(void)\n{\n\treturn 0;\n}\n"}});

    CHECK(compare_function("same", src, tgt).verdict == CompareVerdict::Identical);

    auto ret = compare_function("ret_kind", src, tgt);
    CHECK(ret.verdict == CompareVerdict::SignatureDiff);
    CHECK(ret.detail.find("return type differs") != std::string::npos);

    auto argc = compare_function("argc_kind", src, tgt);
    CHECK(argc.verdict == CompareVerdict::SignatureDiff);
    CHECK(argc.detail.find("parameter count differs") != std::string::npos);

    auto argt = compare_function("argt_kind", src, tgt);
    CHECK(argt.verdict == CompareVerdict::SignatureDiff);
    CHECK(argt.detail.find("type differs") != std::string::npos);

    CHECK(compare_function("body_kind", src, tgt).verdict == CompareVerdict::BodyDiff);
    CHECK(compare_function("src_only", src, tgt).verdict == CompareVerdict::MissingInTarget);
    CHECK(compare_function("tgt_only", src, tgt).verdict == CompareVerdict::MissingInSource);
    // absent from both repositories reads as missing-in-target
    CHECK(compare_function("neither", src, tgt).verdict == CompareVerdict::MissingInTarget);
}

TEST_CASE("compare_function prefers shared paths and flags fallback pairs") {
    auto src = RepoIndex::from_memory(
        RepoLabel::Source, {{"x.c", "int dup(int a)\n{\n\treturn a;\n}\n"},
                            {"y.c", "int dup(int a)\n{\n\treturn a + 9;\n}\n"}});
    auto tgt = RepoIndex::from_memory(
        RepoLabel::Target, {{"y.c", "int dup(int a)\n{\n\treturn a + 9;\n}\n"}});
    // shared path y.c pairs the matching definitions
    CHECK(compare_function("dup", src, tgt).verdict == CompareVerdict::Identical);

    auto tgt2 = RepoIndex::from_memory(
        RepoLabel::Target, {{"z.c", "int dup(int a)\n{\n\treturn a;\n}\n"},
                            {"w.c", "int dup(int a)\n{\n\treturn a;\n}\n"}});
    auto cmp = compare_function("dup", src, tgt2);
    CHECK(cmp.detail.find("multiple definitions") != std::string::npos);
}

TEST_CASE("verdict names render for reports") {
    CHECK(std::string(to_string(CompareVerdict::Identical)) == "Identical");
    CHECK(std::string(to_string(CompareVerdict::MissingInTarget)) == "MissingInTarget");
    CHECK(std::string(to_string(RepoLabel::Source)) == "source");
}
