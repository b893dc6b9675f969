// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <fcntl.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "eqrc/experiments.hpp"
#include "eqrc/inequalities.hpp"
#include "eqrc/io.hpp"
#include "eqrc/stations.hpp"

extern char** environ;

using namespace eqrc;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kN = 1'000'000;
const double kTol = 4.5 / std::sqrt(static_cast<double>(kN));  // 0.0045

struct Outcome_ {
    bool pass = true;
    std::string detail;
};

using Check = std::function<Outcome_()>;

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

// 1
Outcome_ correlation_grid() {
    Outcome_ r;
    ExperimentSpec spec{{}, kN, 101, GaugeKey::rademacher(3), Switching::fixed};
    std::vector<double> thetas;
    for (int k = 0; k < 12; ++k) {
        thetas.push_back(2.0 * std::numbers::pi * k / 12.0);
        spec.setting_pairs.push_back(SettingPair{Setting::canonical(), Setting::from_angle(thetas.back())});
    }
    const auto est = estimate_experiment(spec);
    double worst = 0.0;
    for (std::size_t k = 0; k < est.size(); ++k) worst = std::max(worst, std::abs(est[k].value + std::cos(thetas[k])));
    r.pass = worst <= kTol;
    r.detail = "max |E_sim + cos theta| = " + fmt(worst) + " over 12 angles (tol " + fmt(kTol) + ")";
    return r;
}

// 2
Outcome_ marginals() {
    Outcome_ r;
    double worst = 0.0;
    const Setting b(0.5, std::numbers::sqrt3 / 2);
    for (unsigned j = 1; j <= 6; ++j) {
        ExperimentSpec spec{{SettingPair{Setting::canonical(), b}}, kN, 200 + j, GaugeKey::rademacher(j),
                            Switching::fixed};
        const auto m = estimate_marginals(run_experiment(spec).group_records(0));
        worst = std::max({worst, std::abs(m.left.value), std::abs(m.right.value)});
    }
    ExperimentSpec flat{{SettingPair{Setting::canonical(), b}}, kN, 7, GaugeKey::constant(), Switching::fixed};
    const double left_one = estimate_marginals(run_experiment(flat).group_records(0)).left.value;
    r.pass = worst <= kTol && left_one == 1.0;
    r.detail = "max |E_left|,|E_right| over j=1..6 = " + fmt(worst) + "; gauge one E_left = " + fmt(left_one);
    return r;
}

// 3
Outcome_ anti_correlation() {
    Outcome_ r;
    std::uint64_t bad = 0;
    std::uint64_t checked = 0;
    const Setting a = Setting::canonical();
    for (const auto& key : {GaugeKey::constant(), GaugeKey::rademacher(3), GaugeKey::rademacher_rarb(5, 99)}) {
        for (std::uint64_t seed : {1ULL, 42ULL, 0xdeadbeefULL}) {
            ExperimentSpec spec{{SettingPair{a, a}}, kN, seed, key, Switching::fixed};
            const auto recs = run_experiment(spec).group_records(0);
            for (const auto& p : join_pairs(recs)) {
                bad += value(p.left.outcome) * value(p.right.outcome) != -1 ? 1 : 0;
                ++checked;
            }
        }
    }
    r.pass = bad == 0 && checked == 9 * kN;
    r.detail = std::to_string(checked) + " pairs over 3 gauges x 3 seeds, " + std::to_string(bad) + " not -1";
    return r;
}

// 4
Outcome_ bell_per_space() {
    const auto rep = run_bell_suite(4, kN, GaugeKey::rademacher(3));
    Outcome_ r;
    r.pass = rep.violated && rep.margin() >= 0.4;
    r.detail = "lhs=" + fmt(rep.lhs) + " rhs=" + fmt(rep.rhs) + " margin=" + fmt(rep.margin()) +
               " sigma=" + fmt(rep.significance());
    return r;
}

// 5
Outcome_ chsh() {
    const auto rep = run_chsh_suite(5, kN, GaugeKey::rademacher(3));
    Outcome_ r;
    const double dev = std::abs(rep.lhs - 2.0 * std::numbers::sqrt2);
    r.pass = rep.violated && dev <= 0.01;
    r.detail = "lhs=" + fmt(rep.lhs) + " |lhs - 2 sqrt2|=" + fmt(dev) + " violated=" + (rep.violated ? "true" : "false");
    return r;
}

// 6
Outcome_ triples() {
    const auto events = sample_pair_stream(6, kN);
    const auto v = bell_vectors();
    const auto key = GaugeKey::rademacher(3);
    const auto abc = build_triple_table(TripleKind::abc_prime, events, key, v);
    const auto acb = build_triple_table(TripleKind::ab_prime_c, events, key, v);
    const auto P = eqrc::Outcome::plus;
    const double f1 = abc.fraction(P, P, P);
    const double f2 = acb.fraction(P, P, P);
    const double se = std::hypot(abc.fraction_std_error(P, P, P), acb.fraction_std_error(P, P, P));
    Outcome_ r;
    r.pass = std::abs(f1 - 0.375) <= 0.005 && std::abs(f2 - 0.125) <= 0.005 && std::abs(f1 - f2) > 4.0 * se;
    r.detail = "abc'=" + fmt(f1) + " ab'c=" + fmt(f2) + " difference=" + fmt((f1 - f2) / se) + " sigma";
    return r;
}

// 7
Outcome_ cyclic() {
    int oracle_ok = 0;
    for (const auto& row : cyclic_oracle()) oracle_ok += row.satisfied && row.lhs <= row.rhs ? 1 : 0;
    int violated = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
        const auto rows = cyclic_concatenate(sample_pair_stream(seed * 7919, 10'000), GaugeKey::rademacher(3),
                                             bell_vectors());
        violated += bell_check_single_space(rows).violated ? 1 : 0;
    }
    Outcome_ r;
    r.pass = oracle_ok == 8 && violated == 0;
    r.detail = "oracle " + std::to_string(oracle_ok) + "/8 satisfied; " + std::to_string(violated) +
               "/100 single-space runs violated";
    return r;
}

pid_t spawn(const std::vector<std::string>& args, const fs::path& log) {
    std::vector<char*> argv;
    for (const auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
    argv.push_back(nullptr);
    posix_spawn_file_actions_t fa;
    posix_spawn_file_actions_init(&fa);
    posix_spawn_file_actions_addopen(&fa, 1, log.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    posix_spawn_file_actions_addopen(&fa, 2, (log.string() + ".err").c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
    pid_t pid = -1;
    if (posix_spawn(&pid, argv[0], &fa, nullptr, argv.data(), environ) != 0) pid = -1;
    posix_spawn_file_actions_destroy(&fa);
    return pid;
}

std::string wait_for_port(const fs::path& p) {
    for (int i = 0; i < 500; ++i) {
        std::ifstream is(p);
        std::string port;
        if (is >> port) return port;
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    return {};
}

// 8
Outcome_ distributed() {
    Outcome_ r;
    const fs::path dir = fs::temp_directory_path() / ("eqrc_acceptance_" + std::to_string(::getpid()));
    fs::create_directories(dir);
    const std::string bin = EQRC_CLI_PATH;
    const std::uint64_t seed = 2024;
    const std::uint64_t n = 100'000;
    const auto v = bell_vectors();
    const std::string key = (dir / "key.json").string();
    write_key_file(key, GaugeKey::rademacher(3));

    const auto setting_arg = [](const Setting& s) { return format_double(s.b2()) + "," + format_double(s.b3()); };
    std::vector<pid_t> pids;
    pids.push_back(spawn({bin, "collate", "--port-file", (dir / "cport").string(), "--match", "pair-id", "--out",
                          (dir / "collated.jsonl").string()},
                         dir / "collate.out"));
    pids.push_back(spawn({bin, "source", "--port-file", (dir / "sport").string(), "--seed", std::to_string(seed),
                          "--pairs", std::to_string(n), "--sessions", "3"},
                         dir / "source.out"));
    const std::string cport = wait_for_port(dir / "cport");
    const std::string sport = wait_for_port(dir / "sport");
    pids.push_back(spawn({bin, "station", "--id", "L", "--setting", setting_arg(v.a), "--key", key, "--source",
                          "127.0.0.1:" + sport, "--collator", "127.0.0.1:" + cport},
                         dir / "left.out"));
    // Right wing: b, c, and the canonical form of (b;c).
    const auto bc = rotate_to_canonical(SettingPair{v.b, v.c});
    pids.push_back(spawn({bin, "station", "--id", "R", "--setting", setting_arg(v.b), "--setting", setting_arg(v.c),
                          "--setting", setting_arg(bc.right), "--key", key, "--source", "127.0.0.1:" + sport,
                          "--collator", "127.0.0.1:" + cport},
                         dir / "right.out"));
    bool clean = !cport.empty() && !sport.empty();
    for (pid_t pid : pids) {
        int status = 0;
        if (pid < 0 || ::waitpid(pid, &status, 0) < 0 || !WIFEXITED(status) || WEXITSTATUS(status) != 0) clean = false;
    }

    ExperimentSpec spec{{SettingPair{v.a, v.b}, SettingPair{v.a, v.c}, SettingPair{v.a, bc.right}},
                        n, seed, GaugeKey::rademacher(3), Switching::fixed};
    const auto expected = dataset_payload(run_experiment(spec));
    std::vector<std::string> got;
    if (std::ifstream is(dir / "collated.jsonl"); is) got = dataset_payload(read_dataset(is));
    r.pass = clean && got == expected;
    r.detail = "4 processes exited " + std::string(clean ? "cleanly" : "with errors") + "; " +
               std::to_string(got.size()) + " vs " + std::to_string(expected.size()) + " record lines, " +
               (got == expected ? "bit-identical" : "DIFFERENT");
    fs::remove_all(dir);
    return r;
}

// 9
Outcome_ pairing_fragility() {
    const Setting b(0.5, std::numbers::sqrt3 / 2);
    ExperimentSpec spec{{SettingPair{Setting::canonical(), b}}, kN, 9, GaugeKey::rademacher(3), Switching::fixed};
    const auto ds = run_experiment(spec);
    auto left = reports_from_dataset(ds, Station::left);
    const auto right = reports_from_dataset(ds, Station::right);
    left = inject_fault(FaultSpec{FaultKind::drop, kN / 2, 2}, std::move(left));

    const auto seq = collate(left, right, MatchStrategy::sequence_order);
    ExpectationAccumulator tail;
    for (const auto& p : join_pairs(seq.dataset.group_records(0))) {
        if (p.pair_index > kN / 2) tail.add(p.left.outcome, p.right.outcome);
    }
    const auto pid = collate(left, right, MatchStrategy::pair_id);
    const auto kept = estimate_expectation(pid.dataset.group_records(0));

    Outcome_ r;
    const double t = tail.estimate().value;
    r.pass = std::abs(t) < 0.1 && std::abs(kept.value + 0.5) <= kTol && pid.incomplete.size() == 1;
    r.detail = "sequence-order tail E=" + fmt(t) + " (" + std::to_string(tail.count()) + " pairs); pair-id E=" +
               fmt(kept.value) + " on " + std::to_string(kept.n_samples) + " pairs, " +
               std::to_string(pid.incomplete.size()) + " orphan";
    return r;
}

// 10
Outcome_ sweep_shape() {
    std::ostringstream csv;
    write_sweep_csv(csv, sweep_angle(10, kN, kDefaultSweepSteps, GaugeKey::rademacher(3)));
    std::istringstream is(csv.str());
    std::string line;
    std::size_t rows = 0;
    double worst = 0.0;
    bool header = false;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header) {
            header = line == "theta_radians,expectation,std_error,n";
            continue;
        }
        std::istringstream fields(line);
        std::string theta;
        std::string e;
        std::getline(fields, theta, ',');
        std::getline(fields, e, ',');
        worst = std::max(worst, std::abs(std::stod(e) + std::cos(std::stod(theta))));
        ++rows;
    }
    Outcome_ r;
    r.pass = header && rows == 72 && worst <= kTol;
    r.detail = std::to_string(rows) + " rows, max |E + cos theta| = " + fmt(worst);
    return r;
}

}  // namespace

int main() {
    const std::vector<std::pair<const char*, Check>> criteria{
        {"correlation reproduction on a 12-angle grid", correlation_grid},
        {"vanishing marginals", marginals},
        {"perfect anti-correlation at equal settings", anti_correlation},
        {"Bell violation across separate sample spaces", bell_per_space},
        {"CHSH at the canonical pairs", chsh},
        {"triple probabilities 3/8 and 1/8", triples},
        {"single-space cyclic oracle", cyclic},
        {"distributed run equals in-process run", distributed},
        {"pairing fragility under a dropped report", pairing_fragility},
        {"72-step sweep shape", sweep_shape},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome_ o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::printf("%s criterion %zu (%s): %s [%.2fs]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                    o.detail.c_str(), secs);
        std::fflush(stdout);
        failed += o.pass ? 0 : 1;
    }
    std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
