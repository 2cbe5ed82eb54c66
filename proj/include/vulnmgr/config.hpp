#pragma once

#include <map>
#include <string>

namespace vulnmgr::config {

// Flat key=value settings file. '#' and ';' start comments, blank lines are
// skipped, values may be single- or double-quoted, and a [section] header
// prefixes the keys that follow with "section." (so `window_w = 4` under
// `[detector]` reads back as detector.window_w).
std::map<std::string, std::string> parse_text(const std::string& text);
std::map<std::string, std::string> parse_file(const std::string& path);  // throws if unreadable

bool to_bool(const std::string& value);      // true/false, yes/no, on/off, 1/0
int to_int(const std::string& value);        // throws on trailing garbage
double to_double(const std::string& value);  // throws on trailing garbage

}  // namespace vulnmgr::config
