#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "vulnmgr/code_context.hpp"
#include "vulnmgr/vkb.hpp"

namespace vulnmgr::detect {

struct DetectorConfig {
    int window_w = 4;
    int shingle_n = 5;
    double theta = 0.8;
};

// Threshold preset that trades precision for coverage.
inline constexpr double kCoverageTheta = 0.6;

std::uint64_t fnv1a64(std::string_view data);

// Detection normal form of one raw line: comments stripped, lowercased, all
// whitespace removed; empty result means the line vanishes.
std::vector<std::string> normalize_source(std::string_view source);

struct CloneSignature {
    std::string cve_id;
    std::string source_hunk_id;       // "<cve>#<file>#h<n>"
    int window_len = 0;               // W, or the hunk length when shorter
    std::set<std::uint64_t> window_hashes;
};

struct FunctionFingerprint {
    std::string cve_id;
    std::string function_name;
    std::set<std::uint64_t> shingle_set;  // empty ⇒ excluded from matching
};

enum class Method { Clone, FuncHash, Both };
enum class Status { Detected, Confirmed, Rejected, Patched, Validated };

const char* to_string(Method m);
const char* to_string(Status s);
Method method_from_string(const std::string& s);
Status status_from_string(const std::string& s);

struct Finding {
    std::string cve_id;
    std::string target_file;
    std::string target_function;  // empty for file-level findings
    Method method = Method::Clone;
    double similarity = 1.0;
    Status status = Status::Detected;
};

void to_json(nlohmann::json& j, const Finding& f);
void from_json(const nlohmann::json& j, Finding& f);

// Hash of `count` consecutive normalized lines starting at `first`.
std::uint64_t hash_window(const std::vector<std::string>& lines, std::size_t first,
                          std::size_t count);

// One signature per patch hunk: deleted + context lines, normalized, windowed.
// Hunks shorter than W yield a single whole-hunk hash; add-only hunks yield an
// empty signature plus a warning.
std::vector<CloneSignature> build_clone_signatures(const vkb::VulnRecord& record, int window_w,
                                                   std::vector<std::string>* warnings = nullptr);

// Flags a file iff every window hash of a signature occurs among the file's
// normalized-line windows; the hit region is the first matching window, mapped
// to its enclosing function (empty function name when there is none).
std::vector<Finding> scan_clone(const code::RepoIndex& index,
                                const std::vector<CloneSignature>& signatures);

FunctionFingerprint build_function_fingerprint(std::string_view function_source, int shingle_n,
                                               const std::string& cve_id = "",
                                               const std::string& function_name = "");

double jaccard(const std::set<std::uint64_t>& a, const std::set<std::uint64_t>& b);

std::vector<Finding> scan_function_hash(const code::RepoIndex& index,
                                        const std::vector<FunctionFingerprint>& fingerprints,
                                        double theta, int shingle_n);

std::vector<FunctionFingerprint> build_fingerprints(const vkb::VulnRecord& record,
                                                    int shingle_n);

// Union of both detectors, deduplicated on (cve, file, function); overlapping
// hits become Method::Both. Sorted by cve_id, file, function.
std::vector<Finding> detect(const code::RepoIndex& target_index,
                            const std::vector<vkb::VulnRecord>& records,
                            const DetectorConfig& config,
                            std::vector<std::string>* warnings = nullptr);

}  // namespace vulnmgr::detect
