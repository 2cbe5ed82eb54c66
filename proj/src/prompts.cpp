#include "vulnmgr/prompts.hpp"

namespace vulnmgr::prompts {

std::string fill(std::string_view tmpl, const std::map<std::string, std::string>& vars) {
    std::string out;
    out.reserve(tmpl.size());
    size_t pos = 0;
    while (pos < tmpl.size()) {
        size_t open = tmpl.find('{', pos);
        if (open == std::string_view::npos) {
            out += tmpl.substr(pos);
            break;
        }
        size_t close = tmpl.find('}', open);
        if (close == std::string_view::npos) {
            out += tmpl.substr(pos);
            break;
        }
        out += tmpl.substr(pos, open - pos);
        std::string key(tmpl.substr(open + 1, close - open - 1));
        auto it = vars.find(key);
        if (it != vars.end()) {
            out += it->second;
        } else {
            out += tmpl.substr(open, close - open + 1);  // leave unknown keys alone
        }
        pos = close + 1;
    }
    return out;
}

}  // namespace vulnmgr::prompts
