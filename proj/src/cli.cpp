#include "tractforge/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "tractforge/certify.hpp"
#include "tractforge/conformal.hpp"
#include "tractforge/gate_solver.hpp"
#include "tractforge/growth.hpp"

namespace tractforge {

namespace {

const std::set<std::string> kCommands = {"datum", "theta", "toy", "map", "shoot", "certify", "growth"};

template <class T>
T field(const nlohmann::json& j, const char* name, T fallback) {
    if (!j.contains(name)) return fallback;
    try {
        return j.at(name).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(name);
    }
}

std::string scalar_string(const nlohmann::json& j, const char* name, const std::string& fallback) {
    if (!j.contains(name)) return fallback;
    const auto& v = j.at(name);
    if (v.is_string()) return v.get<std::string>();
    if (v.is_number()) return fmt17(v.get<double>());
    throw ConfigError(name);
}

std::vector<ToyWiggleParams> wiggles_parse(const std::string& s) {
    std::vector<ToyWiggleParams> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        ToyWiggleParams p;
        char c1 = 0, c2 = 0;
        std::stringstream is(item);
        if (!(is >> p.r >> c1 >> p.R >> c2 >> p.eps) || c1 != ':' || c2 != ':') throw ConfigError("toy");
        out.push_back(p);
    }
    return out;
}

std::vector<double> numbers_parse(const std::string& s, const char* name) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(item, &used));
            if (used != item.size()) throw ConfigError(name);
        } catch (const std::logic_error&) {
            throw ConfigError(name);
        }
    }
    return out;
}

void validate(const RunConfig& c) {
    if (!c.command.empty() && !kCommands.count(c.command)) throw ConfigError("command");
    if (!(c.tol > 0)) throw ConfigError("tol");
    if (!(c.accuracy > 0)) throw ConfigError("accuracy");
    if (!(c.C > 0)) throw ConfigError("C");
    if (!(c.nu0 > 0)) throw ConfigError("nu0");
    if (!(c.nu0_toy > 0)) throw ConfigError("nu0_toy");
    if (c.N < 1) throw ConfigError("N");
    if (c.x_close < 0) throw ConfigError("x_close");
    try {
        profile_parse(c.profile);
    } catch (const Error&) {
        throw ConfigError("profile");
    }
    try {
        tower_parse(c.r0);
    } catch (const Error&) {
        throw ConfigError("r0");
    }
    for (const auto& w : c.toy)
        if (!(w.R > w.r) || !(w.eps > 0 && w.eps <= 1)) throw ConfigError("toy");
    if (c.targets != "forward") numbers_parse(c.targets, "targets");
    format_parse(c.format);
}

void write_json(const std::string& path, const nlohmann::json& j) {
    if (!path.empty()) write_file(path, canonical_json(j));
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

nlohmann::json read_json(const std::string& path) {
    try {
        return nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw IoError(path + ": " + e.what());
    }
}

void dump_number(std::ostringstream& os, const nlohmann::json& j) {
    if (j.is_number_float()) {
        double x = j.get<double>();
        if (std::isfinite(x)) os << fmt17(x);
        else os << "null";
    } else {
        os << j.dump();
    }
}

void dump(std::ostringstream& os, const nlohmann::json& j, int indent) {
    const std::string pad(indent + 2, ' '), end(indent, ' ');
    if (j.is_object()) {
        if (j.empty()) {
            os << "{}";
            return;
        }
        os << "{\n";
        bool first = true;
        for (auto it = j.begin(); it != j.end(); ++it) {
            if (!first) os << ",\n";
            first = false;
            os << pad << nlohmann::json(it.key()).dump() << ": ";
            dump(os, it.value(), indent + 2);
        }
        os << "\n" << end << "}";
    } else if (j.is_array()) {
        if (j.empty()) {
            os << "[]";
            return;
        }
        os << "[\n";
        for (std::size_t i = 0; i < j.size(); ++i) {
            if (i) os << ",\n";
            os << pad;
            dump(os, j[i], indent + 2);
        }
        os << "\n" << end << "]";
    } else {
        dump_number(os, j);
    }
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
}

void csv_lines(std::ostringstream& os, const CertLine& l) {
    os << csv_field(l.id) << ',' << csv_field(l.claim) << ',' << csv_field(l.lhs) << ',' << fmt17(l.lhs_value) << ','
       << csv_field(l.rhs) << ',' << fmt17(l.rhs_value) << ',' << fmt17(l.tolerance) << ','
       << (l.pass ? "pass" : "fail") << ',' << csv_field(l.note) << '\n';
    for (const auto& s : l.steps) csv_lines(os, s);
}

// ---- commands ------------------------------------------------------------------

struct Ctx {
    RunConfig cfg;
    std::string sub;
    std::string in;
    std::string toy_path;
    std::string wiggles;
    std::string point = "5,0";
    std::string grid = "geometric:20:1e2:1e40";
    double alpha = 1.0;
    int levels = 3;
    int samples = 200;
    bool dry = false;
};

ToyTract load_toy(const Ctx& c) {
    if (!c.toy_path.empty()) return toy_from_json(read_json(c.toy_path));
    if (c.cfg.toy.empty()) throw ConfigError("toy");
    double xc = c.cfg.x_close > 0 ? c.cfg.x_close : c.cfg.toy.back().R + 12;
    return toy_tract_build(c.cfg.toy, c.cfg.nu0_toy, xc);
}

std::vector<double> gate_eps(const ToyTract& t) {
    std::vector<double> e;
    for (const auto& w : t.wiggles) e.push_back(w.eps);
    return e;
}

std::vector<double> load_targets(const Ctx& c, const ToyTract& t) {
    if (c.cfg.targets == "forward") return forward_targets(t, gate_eps(t));
    auto v = numbers_parse(c.cfg.targets, "targets");
    if (v.size() != t.wiggles.size()) throw ConfigError("targets");
    return v;
}

TractDatum load_datum(const Ctx& c) {
    if (!c.in.empty()) {
        auto j = read_json(c.in);
        return datum_from_json(j.contains("datum") ? j["datum"] : j);
    }
    return datum_generate(profile_parse(c.cfg.profile), tower_parse(c.cfg.r0), c.cfg.C, c.cfg.nu0, c.cfg.N);
}

int finish_report(const Ctx& c, const CertReport& r, const std::string& summary) {
    if (!c.cfg.out.empty()) export_report(r, format_parse(c.cfg.format), c.cfg.out);
    std::cout << summary << ": " << (r.pass() ? "pass" : "fail");
    auto failed = r.failed_ids();
    if (!failed.empty()) std::cout << " (" << failed.size() << " failed, first " << failed.front() << ")";
    std::cout << "\n";
    return r.pass() ? 0 : 1;
}

CertReport from_validation(const ValidationReport& v, const std::string& title) {
    CertReport r;
    r.title = title;
    r.lines = v.checks;
    return r;
}

int run_datum(const Ctx& c) {
    if (c.sub == "gen") {
        if (c.dry) return 0;
        TractDatum d = load_datum(c);
        ValidationReport v = datum_validate(d);
        write_json(c.cfg.out, {{"datum", datum_to_json(d)}, {"validation", v.to_json()}});
        std::cout << "datum: " << d.terms.size() << " terms, validation " << (v.pass() ? "pass" : "fail") << "\n";
        return v.pass() ? 0 : 1;
    }
    if (c.in.empty()) throw ConfigError("in");
    if (c.dry) return 0;
    Ctx k = c;
    TractDatum d = load_datum(k);
    return finish_report(c, from_validation(datum_validate(d), "datum validation"), "datum validation");
}

int run_theta(const Ctx& c) {
    auto grid = grid_parse(c.grid);
    if (c.dry) return 0;
    LawReport r = theta_properties(GrowthProfile::loglog(c.alpha), grid);
    if (!c.cfg.out.empty()) {
        if (format_parse(c.cfg.format) == ReportFormat::csv) write_file(c.cfg.out, r.to_csv());
        else write_json(c.cfg.out, r.to_json());
    }
    std::cout << "theta " << r.profile << ": properties " << (r.pass ? "pass" : "fail") << "\n";
    return r.pass ? 0 : 1;
}

int run_toy(const Ctx& c) {
    ToyTract t = load_toy(c);
    if (c.dry) return 0;
    write_json(c.cfg.out, t.to_json());
    std::cout << "toy: " << t.wiggles.size() << " wiggles, trusted up to re z = " << fmt17(t.trusted_right()) << "\n";
    return 0;
}

int run_map(const Ctx& c) {
    ToyTract t = load_toy(c);
    auto p = numbers_parse(c.point, "point");
    if (p.size() != 2) throw ConfigError("point");
    if (c.dry) return 0;
    MapHandle h = map_build(t, c.cfg.accuracy);
    if (c.sub == "eval") {
        MapValue v = map_eval(h, cplx(p[0], p[1]));
        write_json(c.cfg.out, {{"z", {p[0], p[1]}}, {"w", {v.w.real(), v.w.imag()}}, {"truncation_warning", v.truncation_warning}});
        std::cout << "F(" << fmt17(p[0]) << " + " << fmt17(p[1]) << "i) = " << fmt17(v.w.real()) << " + "
                  << fmt17(v.w.imag()) << "i" << (v.truncation_warning ? " (beyond trusted region)" : "") << "\n";
        return 0;
    }
    write_json(c.cfg.out, h.to_json());
    std::cout << "map: residual " << fmt17(h.residual) << " after " << h.iterations << " iterations\n";
    return 0;
}

int run_shoot(const Ctx& c) {
    ToyTract t = load_toy(c);
    if (c.cfg.targets != "forward" && numbers_parse(c.cfg.targets, "targets").size() != t.wiggles.size())
        throw ConfigError("targets");
    if (c.dry) return 0;
    auto targets = load_targets(c, t);
    try {
        ShootResult r = shoot_solve(t, targets, c.cfg.tol);
        nlohmann::json out = {{"gates", r.gates.to_json()},
                              {"delta", r.delta.to_json()},
                              {"targets", targets},
                              {"builds", r.builds},
                              {"faces", r.faces.to_json()},
                              {"transcript", r.transcript}};
        write_json(c.cfg.out, out);
        std::cout << "shoot: residual " << fmt17(r.delta.residual) << " eps " << r.gates.to_json()["eps"].dump() << "\n";
        return 0;
    } catch (const NonConvergence& e) {
        write_json(c.cfg.out, {{"error", e.what()}, {"best", e.best.to_json()}, {"history", e.history}});
        std::cout << "shoot: " << e.what() << "\n";
        return 1;
    }
}

int run_certify(const Ctx& c) {
    if (c.sub == "range") {
        if (c.dry) return 0;
        TractDatum d = load_datum(c);
        CertReport r = from_validation(datum_validate(d), "tower-scale certification");
        for (int j = 0; j < static_cast<int>(d.terms.size()); ++j) r.lines.push_back(range_bounds_certify(d, j));
        return finish_report(c, r, "certify range");
    }
    ToyTract t = load_toy(c);
    if (c.sub == "doubling" && (c.levels < 0 || c.levels >= static_cast<int>(t.wiggles.size())))
        throw ConfigError("levels");
    if (c.dry) return 0;
    MapHandle h = map_build(t, c.cfg.accuracy);
    CertReport r;
    if (c.sub == "doubling") {
        r.title = "arc doubling";
        DoublingResult d = arc_doubling(h, h.tract, c.levels);
        for (std::size_t k = 0; k + 1 < d.counts.size(); ++k) {
            CertLine l;
            l.id = "doubling[" + std::to_string(k) + "]";
            l.claim = "pull-back at least doubles the arc count";
            l.lhs = "counts[k+1]";
            l.rhs = "2 counts[k]";
            l.lhs_value = d.counts[k + 1];
            l.rhs_value = 2.0 * d.counts[k];
            l.pass = l.lhs_value >= l.rhs_value;
            r.lines.push_back(l);
        }
        for (std::size_t k = 0; k < d.counts.size(); ++k) r.constants["counts[" + std::to_string(k) + "]"] = d.counts[k];
        return finish_report(c, r, "certify doubling");
    }
    r.title = "toy counterexample conditions";
    auto targets = load_targets(c, t);
    for (int j = 0; j < static_cast<int>(t.wiggles.size()); ++j) {
        r.lines.push_back(gate_condition_check(h, h.tract, j, targets[j], c.cfg.tol));
        r.lines.push_back(chain_check(h, h.tract, j, targets[j]));
    }
    return finish_report(c, r, "certify toy");
}

int run_growth(const Ctx& c) {
    ToyTract t = load_toy(c);
    if (c.samples < 1) throw ConfigError("samples");
    if (c.dry) return 0;
    MapHandle h = map_build(t, c.cfg.accuracy);
    CertReport r = growth_report(h, h.tract, c.samples, c.cfg.seed);
    int code = finish_report(c, r, "growth");
    std::cout << "C_emp = " << fmt17(r.constants.at("C_emp")) << "\n";
    return code;
}

}  // namespace

RunConfig config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("config");
    RunConfig c;
    c.command = field<std::string>(j, "command", "");
    if (j.contains("profile")) {
        const auto& p = j["profile"];
        c.profile = p.is_string() ? p.get<std::string>() : p.dump();
    }
    c.r0 = scalar_string(j, "r0", c.r0);
    c.C = field<double>(j, "C", c.C);
    c.nu0 = field<double>(j, "nu0", c.nu0);
    c.N = field<int>(j, "N", c.N);
    if (j.contains("toy")) {
        if (!j["toy"].is_array()) throw ConfigError("toy");
        for (const auto& w : j["toy"]) {
            if (!w.is_object()) throw ConfigError("toy");
            c.toy.push_back({field<double>(w, "r", 0), field<double>(w, "R", 0), field<double>(w, "eps", 1)});
        }
    }
    c.nu0_toy = field<double>(j, "nu0_toy", c.nu0_toy);
    c.x_close = field<double>(j, "x_close", c.x_close);
    c.targets = field<std::string>(j, "targets", c.targets);
    c.tol = field<double>(j, "tol", c.tol);
    c.accuracy = field<double>(j, "accuracy", c.accuracy);
    c.out = field<std::string>(j, "out", c.out);
    c.format = field<std::string>(j, "format", c.format);
    c.seed = field<std::uint64_t>(j, "seed", c.seed);
    validate(c);
    return c;
}

nlohmann::json config_to_json(const RunConfig& c) {
    nlohmann::json toy = nlohmann::json::array();
    for (const auto& w : c.toy) toy.push_back({{"r", w.r}, {"R", w.R}, {"eps", w.eps}});
    return {{"command", c.command}, {"profile", c.profile}, {"r0", c.r0},       {"C", c.C},
            {"nu0", c.nu0},         {"N", c.N},             {"toy", toy},       {"nu0_toy", c.nu0_toy},
            {"x_close", c.x_close}, {"targets", c.targets}, {"tol", c.tol},     {"accuracy", c.accuracy},
            {"out", c.out},         {"format", c.format},   {"seed", c.seed}};
}

RunConfig config_load(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error&) {
        throw ConfigError("config");
    }
    return config_from_json(j);
}

void config_save(const RunConfig& c, const std::string& path) { write_file(path, canonical_json(config_to_json(c))); }

std::string canonical_json(const nlohmann::json& j) {
    std::ostringstream os;
    dump(os, j, 0);
    os << "\n";
    return os.str();
}

ReportFormat format_parse(const std::string& s) {
    if (s == "json") return ReportFormat::json;
    if (s == "csv") return ReportFormat::csv;
    if (s == "text") return ReportFormat::text;
    throw ConfigError("format");
}

const char* const kReportCsvHeader = "id,claim,lhs,lhs_value,rhs,rhs_value,tolerance,pass,note";

std::string report_csv(const CertReport& r) {
    std::ostringstream os;
    os << kReportCsvHeader << '\n';
    for (const auto& l : r.lines) csv_lines(os, l);
    return os.str();
}

std::string render_report(const CertReport& r, ReportFormat f) {
    switch (f) {
        case ReportFormat::json:
            return canonical_json(r.to_json());
        case ReportFormat::csv:
            return report_csv(r);
        case ReportFormat::text:
            break;
    }
    return r.to_text();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out << text;
    out.close();
    if (!out) throw IoError("write failed for " + path);
}

void export_report(const CertReport& r, ReportFormat f, const std::string& path) { write_file(path, render_report(r, f)); }

int thread_cap() {
    const char* s = std::getenv("TRACTFORGE_THREADS");
    if (!s) return 1;
    int n = std::atoi(s);
    return n >= 1 ? n : 1;
}

int cmd_dispatch(const std::vector<std::string>& args) {
    std::vector<char*> argv;
    for (const auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
    return cmd_dispatch(static_cast<int>(argv.size()), argv.data());
}

int cmd_dispatch(int argc, char** argv) {
    Ctx c;
    // a config file supplies defaults that flags then override
    for (int i = 1; i + 1 < argc; ++i)
        if (std::string(argv[i]) == "--config") {
            try {
                c.cfg = config_load(argv[i + 1]);
            } catch (const Error& e) {
                std::cerr << "error: " << e.what() << "\n";
                return 2;
            }
        }

    CLI::App app{"tractforge: tract data, toy conformal models, gate shooting and certification"};
    app.require_subcommand(1);
    app.fallthrough();
    std::string config_path, wiggles;
    app.add_option("--config", config_path, "JSON run configuration");
    app.add_option("--out", c.cfg.out, "output path");
    app.add_option("--format", c.cfg.format, "json, csv or text")->check(CLI::IsMember({"json", "csv", "text"}));
    app.add_option("--seed", c.cfg.seed, "random seed");
    app.add_flag("--dry-run", c.dry, "validate inputs without computing");

    auto toy_opts = [&](CLI::App* s) {
        s->add_option("--toy", c.toy_path, "toy tract JSON");
        s->add_option("--wiggles", wiggles, "r:R:eps,... toy wiggles");
        s->add_option("--nu0-toy", c.cfg.nu0_toy, "toy band width");
        s->add_option("--x-close", c.cfg.x_close, "truncation abscissa");
        s->add_option("--accuracy", c.cfg.accuracy, "map build accuracy");
    };

    auto* datum = app.add_subcommand("datum", "generate or validate tract data");
    datum->require_subcommand(1);
    auto* dgen = datum->add_subcommand("gen", "generate a tract datum");
    dgen->add_option("--profile", c.cfg.profile, "growth profile, e.g. loglog:1");
    dgen->add_option("--r0", c.cfg.r0, "first wiggle start (tower syntax allowed)");
    dgen->add_option("--n", c.cfg.N, "number of wiggles");
    dgen->add_option("--C", c.cfg.C, "growth constant");
    dgen->add_option("--nu0", c.cfg.nu0, "geodesic diameter bound");
    auto* dval = datum->add_subcommand("validate", "validate a datum JSON");
    dval->add_option("--in", c.in, "datum JSON")->required();

    auto* theta = app.add_subcommand("theta", "growth law properties");
    theta->require_subcommand(1);
    auto* tcheck = theta->add_subcommand("check", "check the log-log law on a grid");
    tcheck->add_option("--alpha", c.alpha, "law parameter");
    tcheck->add_option("--grid", c.grid, "geometric:n:lo:hi or loglog:n:lo:hi");

    auto* toy = app.add_subcommand("toy", "desk-scale toy tracts");
    toy->require_subcommand(1);
    toy_opts(toy->add_subcommand("build", "build a toy tract"));

    auto* map = app.add_subcommand("map", "conformal map of a toy tract");
    map->require_subcommand(1);
    toy_opts(map->add_subcommand("build", "solve the map and dump its parameters"));
    auto* meval = map->add_subcommand("eval", "evaluate the map at a point");
    toy_opts(meval);
    meval->add_option("--point", c.point, "x,y");

    auto* shoot = app.add_subcommand("shoot", "gate shooting");
    shoot->require_subcommand(1);
    auto* ssolve = shoot->add_subcommand("solve", "solve for the gate sizes");
    toy_opts(ssolve);
    ssolve->add_option("--targets", c.cfg.targets, "forward or comma separated moduli");
    ssolve->add_option("--tol", c.cfg.tol, "residual tolerance");

    auto* cert = app.add_subcommand("certify", "certification reports");
    cert->require_subcommand(1);
    auto* crange = cert->add_subcommand("range", "tower-scale certification of a datum");
    crange->add_option("--in", c.in, "datum JSON (generated from flags when absent)");
    crange->add_option("--profile", c.cfg.profile, "growth profile");
    crange->add_option("--r0", c.cfg.r0, "first wiggle start");
    crange->add_option("--n", c.cfg.N, "number of wiggles");
    auto* ctoy = cert->add_subcommand("toy", "gate condition and ordering chain on a toy");
    toy_opts(ctoy);
    ctoy->add_option("--targets", c.cfg.targets, "forward or comma separated moduli");
    ctoy->add_option("--tol", c.cfg.tol, "gate tolerance in units of nu0_toy");
    auto* cdbl = cert->add_subcommand("doubling", "arc doubling under pull-back");
    toy_opts(cdbl);
    cdbl->add_option("--levels", c.levels, "pull-back levels");

    auto* growth = app.add_subcommand("growth", "growth comparability");
    growth->require_subcommand(1);
    auto* grep = growth->add_subcommand("report", "sample log|F| ratios");
    toy_opts(grep);
    grep->add_option("--samples", c.samples, "samples per region");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (!wiggles.empty()) c.cfg.toy = wiggles_parse(wiggles);
        for (auto* s : app.get_subcommands()) {
            c.cfg.command = s->get_name();
            for (auto* leaf : s->get_subcommands()) c.sub = leaf->get_name();
        }
        validate(c.cfg);
        thread_cap();
        if (c.dry) {
            // every command checks its inputs before any computation
            int code = c.cfg.command == "datum"     ? run_datum(c)
                       : c.cfg.command == "theta"   ? run_theta(c)
                       : c.cfg.command == "toy"     ? run_toy(c)
                       : c.cfg.command == "map"     ? run_map(c)
                       : c.cfg.command == "shoot"   ? run_shoot(c)
                       : c.cfg.command == "certify" ? run_certify(c)
                                                    : run_growth(c);
            std::cout << "dry run: " << c.cfg.command << " " << c.sub << " inputs ok\n";
            return code;
        }
        if (c.cfg.command == "datum") return run_datum(c);
        if (c.cfg.command == "theta") return run_theta(c);
        if (c.cfg.command == "toy") return run_toy(c);
        if (c.cfg.command == "map") return run_map(c);
        if (c.cfg.command == "shoot") return run_shoot(c);
        if (c.cfg.command == "certify") return run_certify(c);
        return run_growth(c);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace tractforge
