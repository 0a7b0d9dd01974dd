#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "tractforge/cli.hpp"

using namespace tractforge;
namespace fs = std::filesystem;

namespace {

fs::path scratch() {
    fs::path d = fs::temp_directory_path() / "tractforge_cli_test";
    fs::create_directories(d);
    return d;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

int run(std::vector<std::string> args) {
    args.insert(args.begin(), "tractforge");
    return cmd_dispatch(args);
}

CertReport sample_report() {
    CertReport r;
    r.title = "sample";
    CertLine a;
    a.id = "a";
    a.claim = "x < y";
    a.lhs = "x";
    a.rhs = "y";
    a.lhs_value = 0.1;
    a.rhs_value = 1.0 / 3;
    a.pass = true;
    CertLine b = a;
    b.id = "b[2]";
    b.claim = "y, with a comma";
    b.lhs_value = 2;
    b.pass = false;
    r.lines = {a, b};
    r.constants["C_emp"] = 2.5;
    return r;
}

}  // namespace

TEST_CASE("config defaults and validation") {
    RunConfig c = config_from_json({{"command", "datum"}, {"profile", {{"kind", "loglog_alpha"}, {"alpha", 1.0}}}, {"r0", "1e6"}});
    CHECK(c.C == 30.0);
    CHECK(c.nu0 == 60.0);
    CHECK(c.tol == 1e-3);
    CHECK(c.command == "datum");

    try {
        config_from_json({{"command", "datum"}, {"tol", -1.0}});
        FAIL("negative tol accepted");
    } catch (const ConfigError& e) {
        CHECK(e.field == "tol");
    }
    CHECK_THROWS_AS(config_from_json({{"command", "nope"}}), ConfigError);
    CHECK_THROWS_AS(config_from_json({{"r0", "not a number"}}), ConfigError);
    CHECK_THROWS_AS(config_from_json({{"toy", {{{"r", 8}, {"R", 4}, {"eps", 0.5}}}}}), ConfigError);
    CHECK_THROWS_AS(config_load((scratch() / "missing.json").string()), IoError);
}

TEST_CASE("config round trip is canonical") {
    RunConfig c;
    c.command = "shoot";
    c.toy = {{8, 16, 0.3}, {20, 28, 0.5}};
    c.r0 = "exp^2(21.3)";
    c.seed = 42;
    auto p = scratch() / "cfg.json";
    config_save(c, p.string());
    std::string first = slurp(p);
    config_save(config_load(p.string()), p.string());
    CHECK(slurp(p) == first);
    CHECK(config_to_json(config_load(p.string())) == config_to_json(c));
}

TEST_CASE("canonical json formatting") {
    nlohmann::json j = {{"b", 0.1}, {"a", {1, 2.5, "s"}}, {"c", nlohmann::json::object()}};
    std::string s = canonical_json(j);
    CHECK(s.find("\"a\"") < s.find("\"b\""));
    CHECK(s.find("0.10000000000000001") != std::string::npos);
    CHECK(nlohmann::json::parse(s) == j);
}

TEST_CASE("report export") {
    CertReport r = sample_report();
    auto p = scratch() / "rep";
    for (auto f : {ReportFormat::json, ReportFormat::csv, ReportFormat::text}) {
        export_report(r, f, p.string());
        std::string once = slurp(p);
        export_report(r, f, p.string());
        CHECK(slurp(p) == once);
    }
    std::string csv = report_csv(r);
    CHECK(csv.substr(0, csv.find('\n')) == kReportCsvHeader);
    CHECK(csv.find("\"y, with a comma\"") != std::string::npos);
    CHECK(csv.find("0.33333333333333331") != std::string::npos);
    std::string text = render_report(r, ReportFormat::text);
    for (const auto& id : r.failed_ids()) CHECK(text.find(id) != std::string::npos);
    CHECK_THROWS_AS(export_report(r, ReportFormat::json, "/nonexistent/dir/x.json"), IoError);
    CHECK_THROWS_AS(format_parse("xml"), ConfigError);
}

TEST_CASE("datum pipeline is deterministic") {
    auto a = scratch() / "d1.json", b = scratch() / "d2.json";
    CHECK(run({"datum", "gen", "--profile", "loglog:1", "--r0", "1e6", "--n", "25", "--out", a.string()}) == 0);
    CHECK(run({"datum", "gen", "--profile", "loglog:1", "--r0", "1e6", "--n", "25", "--out", b.string()}) == 0);
    CHECK(slurp(a) == slurp(b));
    auto j = nlohmann::json::parse(slurp(a));
    CHECK(j["datum"]["terms"].size() == 25);
    CHECK(run({"datum", "validate", "--in", a.string()}) == 0);
    CHECK(run({"certify", "range", "--in", a.string()}) == 0);
}

TEST_CASE("theta csv carries every property") {
    auto p = scratch() / "theta.csv";
    run({"theta", "check", "--alpha", "1", "--grid", "geometric:20:1e2:1e40", "--format", "csv", "--out", p.string()});
    std::string csv = slurp(p);
    std::string header = csv.substr(0, csv.find('\n'));
    for (const char* c : {"a_", "b_", "c_", "d_", "e_"}) CHECK(header.find(c) != std::string::npos);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 21);
}

TEST_CASE("toy, shoot and certify pipeline") {
    auto toy = scratch() / "toy.json", gates = scratch() / "g.json";
    CHECK(run({"toy", "build", "--wiggles", "8:16:0.3", "--nu0-toy", "0.25", "--out", toy.string()}) == 0);
    CHECK(run({"shoot", "solve", "--toy", toy.string(), "--targets", "forward", "--tol", "1e-3", "--out",
               gates.string()}) == 0);
    auto j = nlohmann::json::parse(slurp(gates));
    CHECK(j["delta"]["residual"].get<double>() <= 1e-3);
    CHECK(j["gates"]["eps"][0].get<double>() == doctest::Approx(0.3).epsilon(1e-2));
    CHECK(run({"certify", "toy", "--toy", toy.string()}) == 0);
    CHECK(run({"map", "eval", "--toy", toy.string(), "--point", "6,0"}) == 0);
}

TEST_CASE("usage errors and dry runs") {
    CHECK(run({"bogus"}) == 2);
    CHECK(run({"datum", "gen", "--nope"}) == 2);
    CHECK(run({"datum", "gen", "--r0", "garbage"}) == 2);
    CHECK(run({"shoot", "solve", "--wiggles", "8:16:0.3", "--targets", "1,2"}) == 2);
    CHECK(run({"certify", "toy", "--toy", (scratch() / "missing.json").string()}) == 2);
    auto toy = scratch() / "toy_dry.json";
    CHECK(run({"toy", "build", "--wiggles", "8:16:0.3", "--out", toy.string()}) == 0);
    const std::vector<std::vector<std::string>> cmds = {
        {"datum", "gen"},
        {"theta", "check"},
        {"toy", "build", "--wiggles", "8:16:0.3"},
        {"map", "build", "--toy", toy.string()},
        {"shoot", "solve", "--toy", toy.string()},
        {"certify", "doubling", "--toy", toy.string(), "--levels", "0"},
        {"growth", "report", "--toy", toy.string()},
    };
    for (auto c : cmds) {
        c.push_back("--dry-run");
        CHECK(run(c) == 0);
    }
    CHECK(run({"certify", "doubling", "--toy", toy.string(), "--levels", "3", "--dry-run"}) == 2);
    auto cfg = scratch() / "bad.json";
    spit(cfg, R"({"command": "datum", "tol": -1})");
    CHECK(run({"--config", cfg.string(), "datum", "gen"}) == 2);
}

TEST_CASE("thread cap from the environment") {
    setenv("TRACTFORGE_THREADS", "3", 1);
    CHECK(thread_cap() == 3);
    setenv("TRACTFORGE_THREADS", "zero", 1);
    CHECK(thread_cap() == 1);
    unsetenv("TRACTFORGE_THREADS");
    CHECK(thread_cap() == 1);
}
