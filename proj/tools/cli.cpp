#include "cli.hpp"

#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "eqrc/error.hpp"
#include "eqrc/experiments.hpp"
#include "eqrc/inequalities.hpp"
#include "eqrc/io.hpp"
#include "eqrc/model.hpp"
#include "eqrc/random.hpp"
#include "eqrc/stations.hpp"
#include "eqrc/statistics.hpp"

namespace eqrc::cli {

namespace {

constexpr std::uint64_t kDefaultSeed = 1;
constexpr const char* kDefaultGauge = "rademacher:j=3";

// Raised for bad user input that CLI11 cannot catch (vectors, env vars, key files).
struct UsageError : Error {
    using Error::Error;
};

Setting parse_setting(const std::string& text) {
    const auto comma = text.find(',');
    if (comma == std::string::npos) throw UsageError("setting must be 'x,y', got '" + text + "'");
    const auto num = [&](std::string_view s) {
        double v = 0.0;
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
            throw UsageError("invalid vector component '" + std::string(s) + "' in '" + text + "'");
        }
        return v;
    };
    const std::string_view sv(text);
    try {
        return Setting(num(sv.substr(0, comma)), num(sv.substr(comma + 1)));
    } catch (const InvalidArgument& e) {
        throw UsageError("invalid vector '" + text + "': " + e.what());
    }
}

GaugeKey parse_gauge(const std::string& text) {
    try {
        return GaugeKey::parse(text);
    } catch (const InvalidArgument& e) {
        throw UsageError(e.what());
    }
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
    if (flag) return *flag;
    if (const char* env = std::getenv("EQRC_SEED"); env && *env) {
        std::uint64_t v = 0;
        const std::string_view s(env);
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || ptr != s.data() + s.size()) throw UsageError("EQRC_SEED is not an unsigned integer");
        return v;
    }
    return kDefaultSeed;
}

// Writes to --out when given, otherwise to the command's stdout stream.
class Output {
public:
    Output(const std::string& path, std::ostream& fallback) : os_(&fallback) {
        if (!path.empty()) {
            file_.open(path);
            if (!file_) throw UsageError("cannot open output file " + path);
            os_ = &file_;
        }
    }
    std::ostream& operator*() { return *os_; }

private:
    std::ofstream file_;
    std::ostream* os_;
};

void write_port_file(const std::string& path, std::uint16_t port) {
    if (path.empty()) return;
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp);
        os << port << '\n';
    }
    std::filesystem::rename(tmp, path);
}

void write_reports(std::ostream& os, const std::vector<InequalityReport>& reports, const std::string& format) {
    if (format == "csv") {
        os << "name,mode,lhs,rhs,lhs_std_error,rhs_std_error,sigma,violated\n";
        for (const auto& r : reports) {
            os << to_string(r.kind) << ',' << to_string(r.mode) << ',' << format_double(r.lhs) << ','
               << format_double(r.rhs) << ',' << format_double(r.lhs_std_error) << ','
               << format_double(r.rhs_std_error) << ',' << format_double(r.significance()) << ','
               << (r.violated ? "true" : "false") << '\n';
        }
        return;
    }
    for (const auto& r : reports) os << report_line(r) << '\n';
}

// Events for single-space rows, independent of the per-setting-pair streams.
std::vector<PairEvent> single_space_events(std::uint64_t seed, std::uint64_t n) {
    return sample_pair_stream(derive_seed(seed, 0x5151515151515151ULL), n);
}

struct Common {
    std::uint64_t pairs = 100000;
    std::optional<std::uint64_t> seed;
    std::string gauge = kDefaultGauge;
    std::string format;
    std::string out;
};

void add_common(CLI::App* cmd, Common& c, const std::string& default_format, std::uint64_t default_pairs) {
    c.format = default_format;
    c.pairs = default_pairs;
    cmd->add_option("-n,--pairs,--n", c.pairs, "Pairs per setting pair")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", c.seed, "Master seed (default: $EQRC_SEED, else 1)");
    cmd->add_option("--gauge", c.gauge, "one | rademacher:j=K | rademacher-rarb:j=K,seed=S");
    cmd->add_option("--format", c.format, "Output format")->check(CLI::IsMember({"csv", "jsonl"}));
    cmd->add_option("--out", c.out, "Output path (default: stdout)");
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Local-model EPRB spin-correlation laboratory", "eqrc"};
    app.require_subcommand(1);

    // run
    Common run_opts;
    std::string run_left = "1,0";
    std::vector<std::string> run_rights;
    std::string run_dataset;
    std::string run_switching = "fixed";
    auto* run_cmd = app.add_subcommand("run", "Simulate one or more setting pairs and estimate E(a,b)");
    add_common(run_cmd, run_opts, "csv", 100000);
    run_cmd->add_option("--left", run_left, "Left setting x,y (rotated to [1,0])");
    run_cmd->add_option("--right", run_rights, "Right setting x,y (repeatable)")->required();
    run_cmd->add_option("--dataset", run_dataset, "Also write the full JSON-lines dataset here");
    run_cmd->add_option("--switching", run_switching, "fixed | random")->check(CLI::IsMember({"fixed", "random"}));

    // sweep
    Common sweep_opts;
    std::size_t sweep_steps = kDefaultSweepSteps;
    auto* sweep_cmd = app.add_subcommand("sweep", "Left fixed at [1,0], right swept over [0, 2pi)");
    add_common(sweep_cmd, sweep_opts, "csv", 100000);
    sweep_cmd->add_option("--steps", sweep_steps, "Grid points")->check(CLI::Range(std::size_t{2}, std::size_t{1} << 20));

    Common bell_opts;
    auto* bell_cmd = app.add_subcommand("bell", "Bell inequality at the Bell vectors");
    add_common(bell_cmd, bell_opts, "jsonl", 100000);

    Common chsh_opts;
    auto* chsh_cmd = app.add_subcommand("chsh", "CHSH inequality at the canonical CHSH pairs");
    add_common(chsh_cmd, chsh_opts, "jsonl", 100000);

    Common wigner_opts;
    auto* wigner_cmd = app.add_subcommand("wigner", "Wigner count inequality, per-space and single-space");
    add_common(wigner_cmd, wigner_opts, "jsonl", 100000);

    Common triples_opts;
    auto* triples_cmd = app.add_subcommand("triples", "abc' and ab'c triple tables at the Bell vectors");
    add_common(triples_cmd, triples_opts, "csv", 1000000);

    Common cyclic_opts;
    auto* cyclic_cmd = app.add_subcommand("cyclic-demo", "Exhaustive single-space table and a single-space run");
    add_common(cyclic_cmd, cyclic_opts, "csv", 10000);

    // source
    std::uint16_t source_port = 0;
    std::string source_port_file;
    std::optional<std::uint64_t> source_seed;
    std::uint64_t source_pairs = 10000;
    std::size_t source_sessions = 1;
    std::string source_log;
    auto* source_cmd = app.add_subcommand("source", "Broadcast pair events to stations L and R");
    source_cmd->add_option("--port", source_port, "Listen port (0 picks one)");
    source_cmd->add_option("--port-file", source_port_file, "Write the bound port here");
    source_cmd->add_option("--seed", source_seed, "Master seed (default: $EQRC_SEED, else 1)");
    source_cmd->add_option("-n,--pairs,--n", source_pairs, "Pairs per session");
    source_cmd->add_option("--sessions", source_sessions, "Number of setting sessions")->check(CLI::PositiveNumber);
    source_cmd->add_option("--log", source_log, "Emission log (JSON-lines)");

    // station
    std::string station_id;
    std::vector<std::string> station_settings{"1,0"};
    std::string station_key;
    std::string station_source;
    std::string station_collator;
    std::string station_inject;
    std::string station_log;
    auto* station_cmd = app.add_subcommand("station", "One measuring wing");
    station_cmd->add_option("--id", station_id, "L or R")->required()->check(CLI::IsMember({"L", "R"}));
    station_cmd->add_option("--setting", station_settings, "Own setting x,y, one per session (last repeats)");
    station_cmd->add_option("--key", station_key, "Gauge key file")->required();
    station_cmd->add_option("--source", station_source, "Source HOST:PORT")->required();
    station_cmd->add_option("--collator", station_collator, "Collator HOST:PORT")->required();
    station_cmd->add_option("--inject", station_inject, "Fault on the outgoing reports: kind@pos");
    station_cmd->add_option("--log", station_log, "Report log (JSON-lines)");

    // collate
    std::uint16_t collate_port = 0;
    std::string collate_port_file;
    std::string collate_match = "pair-id";
    std::size_t collate_hwm = std::size_t{1} << 16;
    std::string collate_left_log;
    std::string collate_right_log;
    std::string collate_inject;
    std::string collate_out;
    auto* collate_cmd = app.add_subcommand("collate", "Join L and R reports (live server, or offline from logs)");
    collate_cmd->add_option("--port", collate_port, "Listen port (0 picks one)");
    collate_cmd->add_option("--port-file", collate_port_file, "Write the bound port here");
    collate_cmd->add_option("--match", collate_match, "pair-id | sequence")->check(CLI::IsMember({"pair-id", "sequence"}));
    collate_cmd->add_option("--hwm", collate_hwm, "Unmatched-report high-water mark")->check(CLI::PositiveNumber);
    collate_cmd->add_option("--left-log", collate_left_log, "Offline: station L report log");
    collate_cmd->add_option("--right-log", collate_right_log, "Offline: station R report log");
    collate_cmd->add_option("--inject", collate_inject, "Offline fault: [L:|R:]kind@pos (default L)");
    collate_cmd->add_option("--out", collate_out, "Dataset output (JSON-lines)");

    // keygen
    std::string keygen_gauge = kDefaultGauge;
    std::string keygen_out;
    auto* keygen_cmd = app.add_subcommand("keygen", "Write a gauge key file for the stations");
    keygen_cmd->add_option("--gauge", keygen_gauge, "one | rademacher:j=K | rademacher-rarb:j=K,seed=S");
    keygen_cmd->add_option("--out", keygen_out, "Key file path")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*run_cmd) {
            const Setting left = parse_setting(run_left);
            if (!(left == Setting::canonical())) {
                err << "notice: left setting " << to_string(left)
                    << " is not [1, 0]; each pair is rotated to the canonical frame\n";
            }
            ExperimentSpec spec;
            for (const auto& r : run_rights) spec.setting_pairs.push_back(SettingPair{left, parse_setting(r)});
            spec.pairs_per_setting = run_opts.pairs;
            spec.seed = resolve_seed(run_opts.seed);
            spec.key = parse_gauge(run_opts.gauge);
            spec.switching = run_switching == "random" ? Switching::random_switched : Switching::fixed;

            RunDataset ds = run_experiment(spec);
            if (!run_dataset.empty()) {
                Output d(run_dataset, out);
                write_dataset(*d, ds, WriteOptions{utc_now()});
            }
            const RunDataset sorted = ds.grouped ? ds : sort_wigner_sets(ds);
            std::vector<SettingRun> rows;
            for (std::size_t g = 0; g < sorted.group_count(); ++g) {
                const auto recs = sorted.group_records(g);
                rows.push_back(SettingRun{spec.setting_pairs[g], estimate_expectation(recs), estimate_marginals(recs)});
            }
            Output o(run_opts.out, out);
            if (run_opts.format == "csv") {
                write_run_csv(*o, rows, WriteOptions{utc_now()});
            } else {
                for (const auto& r : rows) *o << run_json_line(r) << '\n';
            }
            return kExitOk;
        }

        if (*sweep_cmd) {
            const auto points =
                sweep_angle(resolve_seed(sweep_opts.seed), sweep_opts.pairs, sweep_steps, parse_gauge(sweep_opts.gauge));
            Output o(sweep_opts.out, out);
            if (sweep_opts.format == "csv") {
                write_sweep_csv(*o, points, WriteOptions{utc_now()});
            } else {
                for (const auto& p : points) {
                    *o << nlohmann::json{{"schema", "eqrc.sweep"}, {"v", kFileSchemaVersion}, {"theta_radians", p.theta},
                                         {"expectation", p.estimate.value}, {"std_error", p.estimate.std_error},
                                         {"n", p.estimate.n_samples}}
                              .dump()
                       << '\n';
                }
            }
            return kExitOk;
        }

        if (*bell_cmd) {
            const auto seed = resolve_seed(bell_opts.seed);
            const auto key = parse_gauge(bell_opts.gauge);
            const auto v = bell_vectors();
            std::vector<InequalityReport> reports;
            reports.push_back(bell_check(analytic_expectation(v.a, v.b), analytic_expectation(v.a, v.c),
                                         analytic_expectation(v.b, v.c)));
            reports.push_back(run_bell_suite(seed, bell_opts.pairs, key));
            const auto events = single_space_events(seed, bell_opts.pairs);
            reports.push_back(bell_check_single_space(cyclic_concatenate(events, key, v)));
            Output o(bell_opts.out, out);
            write_reports(*o, reports, bell_opts.format);
            return kExitOk;
        }

        if (*chsh_cmd) {
            const auto pairs = chsh_setting_pairs();
            std::vector<InequalityReport> reports;
            reports.push_back(chsh_check(analytic_expectation(pairs[0].left, pairs[0].right),
                                         analytic_expectation(pairs[1].left, pairs[1].right),
                                         analytic_expectation(pairs[2].left, pairs[2].right),
                                         analytic_expectation(pairs[3].left, pairs[3].right)));
            reports.push_back(run_chsh_suite(resolve_seed(chsh_opts.seed), chsh_opts.pairs, parse_gauge(chsh_opts.gauge)));
            Output o(chsh_opts.out, out);
            write_reports(*o, reports, chsh_opts.format);
            return kExitOk;
        }

        if (*wigner_cmd) {
            const auto seed = resolve_seed(wigner_opts.seed);
            const auto key = parse_gauge(wigner_opts.gauge);
            const auto v = wigner_vectors();
            std::vector<InequalityReport> reports;
            reports.push_back(wigner_check_analytic(v));
            reports.push_back(run_wigner_suite(seed, wigner_opts.pairs, key));
            const auto rows = cyclic_concatenate(single_space_events(seed, wigner_opts.pairs), key, v);
            reports.push_back(wigner_check(wigner_counts_single_space(rows), EvaluationMode::simulated_single_space));
            Output o(wigner_opts.out, out);
            write_reports(*o, reports, wigner_opts.format);
            return kExitOk;
        }

        if (*triples_cmd) {
            const auto key = parse_gauge(triples_opts.gauge);
            const auto events = sample_pair_stream(resolve_seed(triples_opts.seed), triples_opts.pairs);
            const auto v = bell_vectors();
            const auto abc = build_triple_table(TripleKind::abc_prime, events, key, v);
            const auto acb = build_triple_table(TripleKind::ab_prime_c, events, key, v);
            Output o(triples_opts.out, out);
            write_triples_csv(*o, abc, acb, WriteOptions{utc_now()});
            return kExitOk;
        }

        if (*cyclic_cmd) {
            const auto table = cyclic_oracle();
            Output o(cyclic_opts.out, out);
            *o << "# schema=eqrc.cyclic,v=" << kFileSchemaVersion << '\n';
            *o << "A_a,A_b,A_c,E_ab,E_ac,E_bc,lhs,rhs,satisfied\n";
            std::size_t satisfied = 0;
            for (const auto& r : table) {
                const int a = value(r.a), b = value(r.b), c = value(r.c);
                *o << a << ',' << b << ',' << c << ',' << -a * b << ',' << -a * c << ',' << -b * c << ',' << r.lhs
                   << ',' << r.rhs << ',' << (r.satisfied ? "true" : "false") << '\n';
                satisfied += r.satisfied ? 1 : 0;
            }
            const auto key = parse_gauge(cyclic_opts.gauge);
            const auto rows = cyclic_concatenate(single_space_events(resolve_seed(cyclic_opts.seed), cyclic_opts.pairs),
                                                 key, bell_vectors());
            const auto rep = bell_check_single_space(rows);
            *o << "# satisfied=" << satisfied << "/8 single_space_rows=" << rows.size()
               << " lhs=" << format_double(rep.lhs) << " rhs=" << format_double(rep.rhs)
               << " violated=" << (rep.violated ? "true" : "false") << '\n';
            return kExitOk;
        }

        if (*keygen_cmd) {
            write_key_file(keygen_out, parse_gauge(keygen_gauge));
            return kExitOk;
        }

        if (*source_cmd) {
            SourceConfig cfg;
            cfg.seed = resolve_seed(source_seed);
            cfg.count = source_pairs;
            cfg.sessions = source_sessions;
            cfg.port = source_port;
            std::ofstream log;
            if (!source_log.empty()) {
                log.open(source_log);
                if (!log) throw UsageError("cannot open log file " + source_log);
                cfg.log = &log;
            }
            cfg.on_listening = [&](std::uint16_t port) {
                err << "source listening on " << cfg.host << ':' << port << '\n';
                write_port_file(source_port_file, port);
            };
            const auto emitted = source_run(cfg);
            err << "source emitted " << emitted.emits.size() << " pairs in " << emitted.sessions.size()
                << " session(s)\n";
            return kExitOk;
        }

        if (*station_cmd) {
            StationConfig cfg;
            cfg.id = station_from_string(station_id);
            cfg.settings.clear();
            for (const auto& s : station_settings) cfg.settings.push_back(parse_setting(s));
            if (!std::filesystem::exists(station_key)) {
                throw UsageError("key file " + station_key + " not found; station refuses to start");
            }
            cfg.key_file = station_key;
            try {
                cfg.source = net::Endpoint::parse(station_source);
                cfg.collator = net::Endpoint::parse(station_collator);
                if (!station_inject.empty()) cfg.inject = FaultSpec::parse(station_inject);
            } catch (const InvalidArgument& e) {
                throw UsageError(e.what());
            }
            std::ofstream log;
            if (!station_log.empty()) {
                log.open(station_log);
                if (!log) throw UsageError("cannot open log file " + station_log);
                cfg.log = &log;
            }
            cfg.errors = &err;
            const auto result = station_run(cfg);
            err << "station " << station_id << " sent " << result.reports_sent << " reports\n";
            return kExitOk;
        }

        if (*collate_cmd) {
            const MatchStrategy strategy = match_strategy_from_string(collate_match);
            CollationResult collation;
            const bool offline = !collate_left_log.empty() || !collate_right_log.empty();
            if (offline) {
                if (collate_left_log.empty() || collate_right_log.empty()) {
                    throw UsageError("offline collation needs both --left-log and --right-log");
                }
                const auto load = [](const std::string& path) {
                    std::ifstream is(path);
                    if (!is) throw UsageError("cannot read report log " + path);
                    return read_report_log(is);
                };
                auto left = load(collate_left_log);
                auto right = load(collate_right_log);
                if (!collate_inject.empty()) {
                    std::string_view spec = collate_inject;
                    bool on_right = false;
                    if (spec.starts_with("L:") || spec.starts_with("R:")) {
                        on_right = spec[0] == 'R';
                        spec.remove_prefix(2);
                    }
                    FaultSpec fault;
                    try {
                        fault = FaultSpec::parse(spec);
                        auto& target = on_right ? right : left;
                        target = inject_fault(fault, std::move(target));
                    } catch (const InvalidArgument& e) {
                        throw UsageError(e.what());
                    }
                }
                collation = collate(left, right, strategy);
            } else {
                if (!collate_inject.empty()) throw UsageError("--inject on collate applies to offline logs only");
                CollatorConfig cfg;
                cfg.port = collate_port;
                cfg.strategy = strategy;
                cfg.high_water_mark = collate_hwm;
                cfg.on_listening = [&](std::uint16_t port) {
                    err << "collator listening on " << cfg.host << ':' << port << '\n';
                    write_port_file(collate_port_file, port);
                };
                collation = collator_run(cfg).collation;
            }

            if (!collate_out.empty()) {
                Output d(collate_out, out);
                write_dataset(*d, collation.dataset, WriteOptions{utc_now()});
            }
            out << "group,left_b2,left_b3,right_b2,right_b3,expectation,std_error,n\n";
            const auto& ds = collation.dataset;
            for (std::size_t g = 0; g < ds.group_count(); ++g) {
                const auto recs = ds.group_records(g);
                if (recs.empty()) continue;
                const auto est = estimate_expectation(recs);
                const auto& p = ds.canonical_pairs[g];
                out << g << ',' << format_double(p.left.b2()) << ',' << format_double(p.left.b3()) << ','
                    << format_double(p.right.b2()) << ',' << format_double(p.right.b3()) << ','
                    << format_double(est.value) << ',' << format_double(est.std_error) << ',' << est.n_samples << '\n';
            }
            err << "collated " << ds.records.size() / 2 << " pairs; incomplete=" << collation.incomplete.size()
                << " unpaired_left=" << collation.unpaired_left << " unpaired_right=" << collation.unpaired_right
                << '\n';
            return kExitOk;
        }
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const InvalidArgument& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "runtime error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitUsage;
}

}  // namespace eqrc::cli
