#pragma once

#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace tractforge {

// one checked inequality, both sides kept
struct CertLine {
    std::string id;
    std::string claim;
    std::string lhs;
    std::string rhs;
    double lhs_value = 0.0;
    double rhs_value = 0.0;
    double tolerance = 0.0;
    bool pass = false;
    std::string note;
    std::vector<CertLine> steps;

    nlohmann::json to_json() const;
};

struct CertReport {
    std::string title;
    std::vector<CertLine> lines;
    std::map<std::string, double> constants;

    bool pass() const;
    std::vector<std::string> failed_ids() const;
    nlohmann::json to_json() const;
    std::string to_text() const;
};

std::string fmt17(double x);

}  // namespace tractforge
