#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cli.hpp"

namespace {

struct CliResult {
    int code;
    std::string out;
    std::string err;
};

CliResult run(std::vector<std::string> args) {
    args.insert(args.begin(), "eqrc");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out;
    std::ostringstream err;
    const int code = eqrc::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::vector<std::string> lines(const std::string& s) {
    std::vector<std::string> v;
    std::istringstream is(s);
    for (std::string l; std::getline(is, l);) v.push_back(l);
    return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> v;
    std::istringstream is(s);
    for (std::string f; std::getline(is, f, sep);) v.push_back(f);
    return v;
}

}  // namespace

TEST_CASE("cli usage errors exit 1") {
    CHECK(run({}).code == 1);
    CHECK(run({"frobnicate"}).code == 1);
    CHECK(run({"run", "--right", "1,0", "--bogus"}).code == 1);

    const auto bad_vec = run({"run", "--right", "0,0"});
    CHECK(bad_vec.code == 1);
    CHECK(bad_vec.err.find("invalid vector") != std::string::npos);
    CHECK(run({"run", "--right", "abc"}).code == 1);
    CHECK(run({"run", "--right", "1,0", "--gauge", "rademacher:j=0"}).code == 1);
    CHECK(run({"run", "--right", "1,0", "-n", "0"}).code == 1);

    const auto no_key = run({"station", "--id", "L", "--key", "/nonexistent/key.json", "--source", "127.0.0.1:1",
                             "--collator", "127.0.0.1:2"});
    CHECK(no_key.code == 1);
    CHECK(no_key.err.find("key file") != std::string::npos);
}

TEST_CASE("cli run reproduces the singlet value") {
    const auto r = run({"run", "--pairs", "1000000", "--right", "0.5,0.8660254", "--seed", "42", "--gauge",
                        "rademacher:j=3"});
    REQUIRE(r.code == 0);
    const auto ls = lines(r.out);
    REQUIRE(ls.size() == 3);
    CHECK(ls[0].rfind("# schema=eqrc.run,v=1", 0) == 0);
    const auto cols = split(ls[1], ',');
    const auto vals = split(ls[2], ',');
    REQUIRE(cols.size() == vals.size());
    CHECK(cols[4] == "expectation");
    CHECK(std::abs(std::stod(vals[4]) + 0.5) <= 0.0045);
}

TEST_CASE("cli output is reproducible apart from the header line") {
    const std::vector<std::string> args{"run", "-n", "5000", "--right", "0.3,0.7", "--right", "-1,0", "--seed", "9"};
    const auto a = run(args);
    const auto b = run(args);
    auto la = lines(a.out);
    auto lb = lines(b.out);
    REQUIRE(la.size() == 4);
    la.erase(la.begin());
    lb.erase(lb.begin());
    CHECK(la == lb);
    CHECK(run({"run", "-n", "5000", "--right", "0.3,0.7", "--seed", "10"}).out != a.out);
}

TEST_CASE("cli seed falls back to the environment") {
    ::setenv("EQRC_SEED", "9", 1);
    const auto env = run({"run", "-n", "5000", "--right", "0.3,0.7", "--right", "-1,0"});
    ::unsetenv("EQRC_SEED");
    const auto flag = run({"run", "-n", "5000", "--right", "0.3,0.7", "--right", "-1,0", "--seed", "9"});
    CHECK(lines(env.out)[2] == lines(flag.out)[2]);
    ::setenv("EQRC_SEED", "nine", 1);
    CHECK(run({"run", "-n", "10", "--right", "1,0"}).code == 1);
    ::unsetenv("EQRC_SEED");
}

TEST_CASE("cli canonicalizes a non-canonical left setting with a notice") {
    const auto r = run({"run", "-n", "1000", "--left", "0,1", "--right", "0,1", "--format", "jsonl"});
    REQUIRE(r.code == 0);
    CHECK(r.err.find("notice") != std::string::npos);
    CHECK(r.out.find("\"expectation\":-1") != std::string::npos);
}

TEST_CASE("cli triples") {
    const auto r = run({"triples", "--n", "1000000", "--seed", "7"});
    REQUIRE(r.code == 0);
    double abc = -1;
    double acb = -1;
    for (const auto& l : lines(r.out)) {
        const auto f = split(l, ',');
        if (f.size() != 7 || f[1] != "1" || f[2] != "1" || f[3] != "1") continue;
        (f[0] == "abc'" ? abc : acb) = std::stod(f[5]);
    }
    CHECK(std::abs(abc - 0.375) <= 0.005);
    CHECK(std::abs(acb - 0.125) <= 0.005);
}

TEST_CASE("cli cyclic-demo") {
    const auto r = run({"cyclic-demo"});
    REQUIRE(r.code == 0);
    const auto ls = lines(r.out);
    int rows = 0;
    for (const auto& l : ls) {
        if (l.empty() || l[0] == '#' || l[0] == 'A') continue;
        ++rows;
        CHECK(l.substr(l.rfind(',') + 1) == "true");
    }
    CHECK(rows == 8);
    CHECK(ls.back().find("satisfied=8/8") != std::string::npos);
    CHECK(ls.back().find("violated=false") != std::string::npos);
}

TEST_CASE("cli inequality commands report violation in machine-readable form") {
    for (const char* cmd : {"bell", "chsh", "wigner"}) {
        CAPTURE(cmd);
        const auto r = run({cmd, "-n", "20000"});
        REQUIRE(r.code == 0);
        const auto ls = lines(r.out);
        CHECK(ls.size() >= 2);
        for (const auto& l : ls) {
            const auto j = nlohmann::json::parse(l);
            CHECK(j.at("violated").is_boolean());
            if (j.at("mode") == "simulated-single-space") CHECK(j.at("violated") == false);
            if (j.at("mode") == "analytic") CHECK(j.at("violated") == true);
        }
        const auto csv = run({cmd, "-n", "2000", "--format", "csv"});
        CHECK(lines(csv.out)[0] == "name,mode,lhs,rhs,lhs_std_error,rhs_std_error,sigma,violated");
    }
}

TEST_CASE("cli sweep and dataset files") {
    const auto dir = std::filesystem::temp_directory_path() / ("eqrc_cli_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir);
    const auto sweep = (dir / "sweep.csv").string();
    REQUIRE(run({"sweep", "-n", "1000", "--steps", "12", "--out", sweep}).code == 0);
    std::ifstream is(sweep);
    std::stringstream ss;
    ss << is.rdbuf();
    const auto ls = lines(ss.str());
    REQUIRE(ls.size() == 14);
    CHECK(ls[1] == "theta_radians,expectation,std_error,n");
    CHECK(ls[2].rfind("0,-1,", 0) == 0);

    const auto ds = (dir / "ds.jsonl").string();
    REQUIRE(run({"run", "-n", "100", "--right", "1,0", "--right", "0,1", "--switching", "random", "--dataset", ds}).code ==
            0);
    CHECK(std::filesystem::file_size(ds) > 0);
    const auto key = (dir / "key.json").string();
    CHECK(run({"keygen", "--gauge", "rademacher-rarb:j=2,seed=5", "--out", key}).code == 0);
    CHECK(std::filesystem::exists(key));
    std::filesystem::remove_all(dir);
}

TEST_CASE("cli offline collate") {
    CHECK(run({"collate", "--left-log", "/nonexistent"}).code == 1);
    CHECK(run({"collate", "--left-log", "/nonexistent", "--right-log", "/nonexistent"}).code == 1);
}
