#include "vulnmgr/detector.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <stdexcept>
#include <tuple>

#include "vulnmgr/diff.hpp"
#include "vulnmgr/textnorm.hpp"

namespace vulnmgr::detect {
namespace {

constexpr char kSep = '\x1f';

std::string lower_copy(std::string s) {
    for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return s;
}

// Token stream for fingerprinting: comments irrelevant, case folded.
std::vector<std::string> fingerprint_tokens(std::string_view source) {
    std::vector<std::string> tokens = text::lex_token_texts(source);
    for (auto& t : tokens) t = lower_copy(std::move(t));
    return tokens;
}

struct FindingKey {
    std::string cve_id, file, function;
    bool operator<(const FindingKey& o) const {
        return std::tie(cve_id, file, function) < std::tie(o.cve_id, o.file, o.function);
    }
};

}  // namespace

std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::vector<std::string> normalize_source(std::string_view source) {
    return text::normalize_lines(source);
}

std::uint64_t hash_window(const std::vector<std::string>& lines, std::size_t first,
                          std::size_t count) {
    std::string joined;
    for (std::size_t i = first; i < first + count && i < lines.size(); ++i) {
        joined += lines[i];
        joined.push_back(kSep);
    }
    return fnv1a64(joined);
}

const char* to_string(Method m) {
    switch (m) {
        case Method::Clone: return "Clone";
        case Method::FuncHash: return "FuncHash";
        case Method::Both: return "Both";
    }
    return "?";
}

const char* to_string(Status s) {
    switch (s) {
        case Status::Detected: return "Detected";
        case Status::Confirmed: return "Confirmed";
        case Status::Rejected: return "Rejected";
        case Status::Patched: return "Patched";
        case Status::Validated: return "Validated";
    }
    return "?";
}

Method method_from_string(const std::string& s) {
    if (s == "Clone") return Method::Clone;
    if (s == "FuncHash") return Method::FuncHash;
    if (s == "Both") return Method::Both;
    throw std::invalid_argument("unknown detection method: " + s);
}

Status status_from_string(const std::string& s) {
    if (s == "Detected") return Status::Detected;
    if (s == "Confirmed") return Status::Confirmed;
    if (s == "Rejected") return Status::Rejected;
    if (s == "Patched") return Status::Patched;
    if (s == "Validated") return Status::Validated;
    throw std::invalid_argument("unknown finding status: " + s);
}

void to_json(nlohmann::json& j, const Finding& f) {
    j = {{"cve_id", f.cve_id},
         {"target_file", f.target_file},
         {"target_function", f.target_function},
         {"method", to_string(f.method)},
         {"similarity", f.similarity},
         {"status", to_string(f.status)}};
}

void from_json(const nlohmann::json& j, Finding& f) {
    j.at("cve_id").get_to(f.cve_id);
    j.at("target_file").get_to(f.target_file);
    j.at("target_function").get_to(f.target_function);
    f.method = method_from_string(j.at("method").get<std::string>());
    f.similarity = j.at("similarity").get<double>();
    f.status = status_from_string(j.at("status").get<std::string>());
}

std::vector<CloneSignature> build_clone_signatures(const vkb::VulnRecord& record, int window_w,
                                                   std::vector<std::string>* warnings) {
    if (window_w < 1) throw std::invalid_argument("window size must be >= 1");
    std::vector<CloneSignature> out;
    for (const auto& pf : record.basic.patched_files) {
        auto patches = diff::parse_unified(pf.patch_hunks);
        int hunk_no = 0;
        for (const auto& fp : patches) {
            for (const auto& hunk : fp.hunks) {
                ++hunk_no;
                CloneSignature sig;
                sig.cve_id = record.basic.cve_id;
                sig.source_hunk_id =
                    record.basic.cve_id + "#" + pf.file_path + "#h" + std::to_string(hunk_no);

                // deleted + context lines, in hunk order
                std::vector<std::string> sig_lines;
                for (const auto& l : hunk.lines) {
                    if (l[0] == '+') continue;
                    for (auto& norm : text::normalize_lines(std::string_view(l).substr(1)))
                        sig_lines.push_back(std::move(norm));
                }
                const auto L = sig_lines.size();
                const auto W = static_cast<std::size_t>(window_w);
                if (L == 0) {
                    if (warnings)
                        warnings->push_back(sig.source_hunk_id +
                                            ": add-only hunk produces no clone signature");
                    sig.window_len = 0;
                } else if (L < W) {
                    sig.window_len = static_cast<int>(L);
                    sig.window_hashes.insert(hash_window(sig_lines, 0, L));
                } else {
                    sig.window_len = window_w;
                    for (std::size_t i = 0; i + W <= L; ++i)
                        sig.window_hashes.insert(hash_window(sig_lines, i, W));
                }
                out.push_back(std::move(sig));
            }
        }
    }
    return out;
}

std::vector<Finding> scan_clone(const code::RepoIndex& index,
                                const std::vector<CloneSignature>& signatures) {
    std::map<FindingKey, Finding> hits;
    for (const auto& path : index.files()) {
        const std::string* content = index.file_content(path);
        if (!content) continue;
        auto norm = text::normalize_lines_mapped(*content);
        std::vector<std::string> lines;
        lines.reserve(norm.size());
        for (const auto& nl : norm) lines.push_back(nl.text);

        // window hashes per requested length, computed lazily
        std::map<int, std::map<std::uint64_t, std::size_t>> by_len;
        auto windows_of = [&](int len) -> const std::map<std::uint64_t, std::size_t>& {
            auto it = by_len.find(len);
            if (it != by_len.end()) return it->second;
            auto& table = by_len[len];
            const auto L = static_cast<std::size_t>(len);
            if (lines.size() >= L && len > 0) {
                for (std::size_t i = 0; i + L <= lines.size(); ++i) {
                    // keep the earliest position for deterministic mapping
                    table.emplace(hash_window(lines, i, L), i);
                }
            }
            return table;
        };

        for (const auto& sig : signatures) {
            if (sig.window_hashes.empty()) continue;
            const auto& table = windows_of(sig.window_len);
            bool all_present = true;
            std::size_t first_pos = lines.size();
            for (auto h : sig.window_hashes) {
                auto it = table.find(h);
                if (it == table.end()) {
                    all_present = false;
                    break;
                }
                first_pos = std::min(first_pos, it->second);
            }
            if (!all_present) continue;

            int source_line = norm[first_pos].source_line;
            auto fn = index.enclosing_function(path, source_line);
            FindingKey key{sig.cve_id, path, fn ? fn->name : ""};
            auto [it, inserted] = hits.try_emplace(key);
            if (inserted) {
                it->second =
                    Finding{sig.cve_id, path, key.function, Method::Clone, 1.0,
                            Status::Detected};
            }
        }
    }
    std::vector<Finding> out;
    out.reserve(hits.size());
    for (auto& [_, f] : hits) out.push_back(std::move(f));
    return out;
}

FunctionFingerprint build_function_fingerprint(std::string_view function_source, int shingle_n,
                                               const std::string& cve_id,
                                               const std::string& function_name) {
    if (shingle_n < 1) throw std::invalid_argument("shingle size must be >= 1");
    FunctionFingerprint fp;
    fp.cve_id = cve_id;
    fp.function_name = function_name;
    auto tokens = fingerprint_tokens(function_source);
    const auto n = static_cast<std::size_t>(shingle_n);
    if (tokens.size() < n) return fp;  // too short: excluded from matching
    for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
        std::string joined;
        for (std::size_t k = i; k < i + n; ++k) {
            joined += tokens[k];
            joined.push_back(kSep);
        }
        fp.shingle_set.insert(fnv1a64(joined));
    }
    return fp;
}

double jaccard(const std::set<std::uint64_t>& a, const std::set<std::uint64_t>& b) {
    if (a.empty() && b.empty()) return 0.0;
    std::size_t inter = 0;
    auto ia = a.begin();
    auto ib = b.begin();
    while (ia != a.end() && ib != b.end()) {
        if (*ia < *ib) ++ia;
        else if (*ib < *ia) ++ib;
        else ++inter, ++ia, ++ib;
    }
    std::size_t uni = a.size() + b.size() - inter;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

std::vector<Finding> scan_function_hash(const code::RepoIndex& index,
                                        const std::vector<FunctionFingerprint>& fingerprints,
                                        double theta, int shingle_n) {
    if (theta <= 0.0 || theta > 1.0) throw std::invalid_argument("theta must be in (0,1]");
    std::map<FindingKey, Finding> hits;
    for (const auto& fn : index.all_functions()) {
        auto target_fp = build_function_fingerprint(fn.body_source, shingle_n);
        if (target_fp.shingle_set.empty()) continue;
        for (const auto& vfp : fingerprints) {
            if (vfp.shingle_set.empty()) continue;
            double sim = jaccard(target_fp.shingle_set, vfp.shingle_set);
            if (sim < theta) continue;
            FindingKey key{vfp.cve_id, fn.file_path, fn.name};
            auto it = hits.find(key);
            if (it == hits.end()) {
                hits.emplace(key, Finding{vfp.cve_id, fn.file_path, fn.name, Method::FuncHash,
                                          sim, Status::Detected});
            } else if (sim > it->second.similarity) {
                it->second.similarity = sim;
            }
        }
    }
    std::vector<Finding> out;
    out.reserve(hits.size());
    for (auto& [_, f] : hits) out.push_back(std::move(f));
    return out;
}

std::vector<FunctionFingerprint> build_fingerprints(const vkb::VulnRecord& record,
                                                    int shingle_n) {
    std::vector<FunctionFingerprint> out;
    for (const auto& vf : record.basic.vulnerable_functions) {
        out.push_back(build_function_fingerprint(vf.pre_patch_source, shingle_n,
                                                 record.basic.cve_id, vf.function_name));
    }
    return out;
}

std::vector<Finding> detect(const code::RepoIndex& target_index,
                            const std::vector<vkb::VulnRecord>& records,
                            const DetectorConfig& config,
                            std::vector<std::string>* warnings) {
    std::vector<CloneSignature> signatures;
    std::vector<FunctionFingerprint> fingerprints;
    for (const auto& record : records) {
        auto sigs = build_clone_signatures(record, config.window_w, warnings);
        signatures.insert(signatures.end(), std::make_move_iterator(sigs.begin()),
                          std::make_move_iterator(sigs.end()));
        auto fps = build_fingerprints(record, config.shingle_n);
        fingerprints.insert(fingerprints.end(), std::make_move_iterator(fps.begin()),
                            std::make_move_iterator(fps.end()));
    }

    std::map<FindingKey, Finding> merged;
    for (auto& f : scan_clone(target_index, signatures))
        merged.emplace(FindingKey{f.cve_id, f.target_file, f.target_function}, std::move(f));
    for (auto& f : scan_function_hash(target_index, fingerprints, config.theta,
                                      config.shingle_n)) {
        FindingKey key{f.cve_id, f.target_file, f.target_function};
        auto it = merged.find(key);
        if (it == merged.end()) {
            merged.emplace(key, std::move(f));
        } else {
            it->second.method = Method::Both;
            it->second.similarity = f.similarity;
        }
    }
    std::vector<Finding> out;
    out.reserve(merged.size());
    for (auto& [_, f] : merged) out.push_back(std::move(f));
    return out;  // map order == (cve_id, file, function)
}

}  // namespace vulnmgr::detect
