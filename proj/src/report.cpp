#include "tractforge/report.hpp"

#include <cstdio>
#include <sstream>

namespace tractforge {

std::string fmt17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

nlohmann::json CertLine::to_json() const {
    nlohmann::json j = {{"id", id},
                        {"claim", claim},
                        {"lhs", lhs},
                        {"rhs", rhs},
                        {"lhs_value", lhs_value},
                        {"rhs_value", rhs_value},
                        {"tolerance", tolerance},
                        {"pass", pass}};
    if (!note.empty()) j["note"] = note;
    if (!steps.empty()) {
        j["steps"] = nlohmann::json::array();
        for (auto& s : steps) j["steps"].push_back(s.to_json());
    }
    return j;
}

bool CertReport::pass() const {
    for (auto& l : lines)
        if (!l.pass) return false;
    return true;
}

std::vector<std::string> CertReport::failed_ids() const {
    std::vector<std::string> out;
    for (auto& l : lines)
        if (!l.pass) out.push_back(l.id);
    return out;
}

nlohmann::json CertReport::to_json() const {
    nlohmann::json j = {{"title", title}, {"pass", pass()}};
    j["lines"] = nlohmann::json::array();
    for (auto& l : lines) j["lines"].push_back(l.to_json());
    j["constants"] = nlohmann::json::object();
    for (auto& [k, v] : constants) j["constants"][k] = v;
    return j;
}

std::string CertReport::to_text() const {
    std::ostringstream os;
    os << title << ": " << (pass() ? "PASS" : "FAIL") << "\n";
    for (auto& l : lines) {
        os << (l.pass ? "  pass " : "  FAIL ") << l.id << "  " << l.claim << "  [" << l.lhs << " vs " << l.rhs << "]";
        if (!l.note.empty()) os << "  " << l.note;
        os << "\n";
    }
    for (auto& [k, v] : constants) os << "  " << k << " = " << fmt17(v) << "\n";
    return os.str();
}

}  // namespace tractforge
