#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "tractforge/errors.hpp"
#include "tractforge/report.hpp"
#include "tractforge/tract.hpp"

namespace tractforge {

struct RunConfig {
    std::string command;  // datum, theta, toy, map, shoot, certify or growth
    std::string profile = "loglog:1";
    std::string r0 = "1e6";
    double C = 30.0;
    double nu0 = 60.0;
    int N = 25;
    std::vector<ToyWiggleParams> toy;
    double nu0_toy = 0.25;
    double x_close = 0;  // 0: last R + 12
    std::string targets = "forward";  // "forward" or a comma separated list of moduli
    double tol = 1e-3;
    double accuracy = 1e-10;
    std::string out;
    std::string format = "json";
    std::uint64_t seed = 1;
};

RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const RunConfig& c);
RunConfig config_load(const std::string& path);
void config_save(const RunConfig& c, const std::string& path);

// sorted keys, two-space indent, doubles with 17 significant digits
std::string canonical_json(const nlohmann::json& j);

enum class ReportFormat { json, csv, text };
ReportFormat format_parse(const std::string& s);

// header of the CSV rendering of a CertReport
extern const char* const kReportCsvHeader;
std::string report_csv(const CertReport& r);
std::string render_report(const CertReport& r, ReportFormat f);
void export_report(const CertReport& r, ReportFormat f, const std::string& path);
void write_file(const std::string& path, const std::string& text);

// TRACTFORGE_THREADS, at least 1
int thread_cap();

// exit code: 0 all checks pass, 1 some check fails, 2 usage or runtime error
int cmd_dispatch(int argc, char** argv);
int cmd_dispatch(const std::vector<std::string>& args);

}  // namespace tractforge
