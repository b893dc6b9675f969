#include "eqrc/io.hpp"

#include <charconv>
#include <chrono>
#include <ctime>
#include <istream>
#include <ostream>

#include "eqrc/error.hpp"

namespace eqrc {

using nlohmann::json;

namespace {

constexpr const char* kDatasetSchema = "eqrc.dataset";

std::string_view switching_name(Switching s) { return s == Switching::fixed ? "fixed" : "random-switched"; }

Switching switching_from(std::string_view s) {
    if (s == "fixed") return Switching::fixed;
    if (s == "random-switched") return Switching::random_switched;
    throw FormatError("unknown switching mode '" + std::string(s) + "'");
}

json pair_to_json(const SettingPair& p) {
    return json{{"left", setting_to_json(p.left)}, {"right", setting_to_json(p.right)}};
}

SettingPair pair_from_json(const json& j) {
    return SettingPair{setting_from_json(j.at("left")), setting_from_json(j.at("right"))};
}

void schema_comment(std::ostream& os, std::string_view schema, const WriteOptions& opts) {
    os << "# schema=" << schema << ",v=" << kFileSchemaVersion;
    if (!opts.created_utc.empty()) os << ",created_utc=" << opts.created_utc;
    os << '\n';
}

}  // namespace

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc{}) throw FormatError("cannot format double");
    return std::string(buf, ptr);
}

std::string utc_now() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

json setting_to_json(const Setting& s) { return json::array({s.b2(), s.b3()}); }

Setting setting_from_json(const json& j) {
    if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number()) {
        throw FormatError("setting must be a [b2, b3] number pair");
    }
    return Setting(j[0].get<double>(), j[1].get<double>());
}

json gauge_to_json(const GaugeKey& key) {
    json j;
    switch (key.mode) {
        case GaugeMode::constant_plus_one: j["mode"] = "one"; break;
        case GaugeMode::rademacher: j["mode"] = "rademacher"; break;
        case GaugeMode::rademacher_times_rarb: j["mode"] = "rademacher-rarb"; break;
    }
    j["j"] = key.j;
    j["rarb_seed"] = key.rarb_seed ? json(*key.rarb_seed) : json(nullptr);
    return j;
}

GaugeKey gauge_from_json(const json& j) {
    GaugeKey key;
    const auto mode = j.at("mode").get<std::string>();
    if (mode == "one") {
        key.mode = GaugeMode::constant_plus_one;
    } else if (mode == "rademacher") {
        key.mode = GaugeMode::rademacher;
    } else if (mode == "rademacher-rarb") {
        key.mode = GaugeMode::rademacher_times_rarb;
    } else {
        throw FormatError("unknown gauge mode '" + mode + "'");
    }
    key.j = j.at("j").get<unsigned>();
    if (j.contains("rarb_seed") && !j.at("rarb_seed").is_null()) key.rarb_seed = j.at("rarb_seed").get<std::uint64_t>();
    validate(key);
    return key;
}

std::string record_line(const TaggedRecord& r) {
    std::string s;
    s.reserve(96);
    s += "{\"n\":";
    s += std::to_string(r.record.pair_index);
    s += ",\"group\":";
    s += r.group ? std::to_string(*r.group) : std::string("null");
    s += ",\"station\":\"";
    s += to_string(r.record.station);
    s += "\",\"setting\":[";
    s += format_double(r.record.setting.b2());
    s += ',';
    s += format_double(r.record.setting.b3());
    s += "],\"outcome\":";
    s += r.record.outcome == Outcome::plus ? "1" : "-1";
    s += '}';
    return s;
}

TaggedRecord parse_record_line(const std::string& line) {
    try {
        const json j = json::parse(line);
        TaggedRecord r;
        if (j.contains("group") && !j.at("group").is_null()) r.group = j.at("group").get<std::size_t>();
        r.record.pair_index = j.at("n").get<std::uint64_t>();
        r.record.station = station_from_string(j.at("station").get<std::string>());
        r.record.setting = setting_from_json(j.at("setting"));
        r.record.outcome = outcome_from_int(j.at("outcome").get<int>());
        return r;
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed dataset record: ") + e.what());
    } catch (const InvalidArgument& e) {
        throw FormatError(std::string("malformed dataset record: ") + e.what());
    }
}

void write_dataset(std::ostream& os, const RunDataset& ds, const WriteOptions& opts) {
    json header;
    header["schema"] = kDatasetSchema;
    header["v"] = RunDataset::kSchemaVersion;
    if (!opts.created_utc.empty()) header["created_utc"] = opts.created_utc;
    header["seed"] = ds.spec.seed;
    header["pairs_per_setting"] = ds.spec.pairs_per_setting;
    header["gauge"] = gauge_to_json(ds.spec.key);
    header["switching"] = switching_name(ds.spec.switching);
    header["grouped"] = ds.grouped;
    json pairs = json::array();
    for (const auto& p : ds.spec.setting_pairs) pairs.push_back(pair_to_json(p));
    header["setting_pairs"] = std::move(pairs);
    json canonical = json::array();
    for (const auto& p : ds.canonical_pairs) canonical.push_back(pair_to_json(p));
    header["canonical_pairs"] = std::move(canonical);
    os << header.dump() << '\n';
    for (const auto& r : ds.records) os << record_line(r) << '\n';
}

RunDataset read_dataset(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw FormatError("empty dataset file");
    RunDataset ds;
    try {
        const json h = json::parse(line);
        if (h.value("schema", "") != kDatasetSchema) throw FormatError("not an eqrc dataset (schema field)");
        if (h.at("v").get<int>() != RunDataset::kSchemaVersion) throw FormatError("unsupported dataset version");
        ds.spec.seed = h.at("seed").get<std::uint64_t>();
        ds.spec.pairs_per_setting = h.at("pairs_per_setting").get<std::uint64_t>();
        ds.spec.key = gauge_from_json(h.at("gauge"));
        ds.spec.switching = switching_from(h.at("switching").get<std::string>());
        ds.grouped = h.at("grouped").get<bool>();
        for (const auto& p : h.at("setting_pairs")) ds.spec.setting_pairs.push_back(pair_from_json(p));
        for (const auto& p : h.at("canonical_pairs")) ds.canonical_pairs.push_back(pair_from_json(p));
    } catch (const json::exception& e) {
        throw FormatError(std::string("malformed dataset header: ") + e.what());
    }
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        ds.records.push_back(parse_record_line(line));
    }
    return ds;
}

std::vector<std::string> dataset_payload(const RunDataset& ds) {
    std::vector<std::string> out;
    out.reserve(ds.records.size());
    for (const auto& r : ds.records) out.push_back(record_line(r));
    return out;
}

json report_to_json(const InequalityReport& r) {
    json j;
    j["schema"] = "eqrc.report";
    j["v"] = kFileSchemaVersion;
    j["name"] = to_string(r.kind);
    j["mode"] = to_string(r.mode);
    j["lhs"] = r.lhs;
    j["rhs"] = r.rhs;
    j["lhs_std_error"] = r.lhs_std_error;
    j["rhs_std_error"] = r.rhs_std_error;
    j["margin"] = r.margin();
    j["sigma"] = r.significance();
    j["violated"] = r.violated;
    json inputs = json::array();
    for (const auto& t : r.terms) {
        json in{{"label", t.label}, {"value", t.value}, {"std_error", t.std_error}, {"n", t.n}};
        if (t.settings) in["settings"] = pair_to_json(*t.settings);
        inputs.push_back(std::move(in));
    }
    j["inputs"] = std::move(inputs);
    return j;
}

std::string report_line(const InequalityReport& r) { return report_to_json(r).dump(); }

void write_sweep_csv(std::ostream& os, std::span<const SweepPoint> points, const WriteOptions& opts) {
    schema_comment(os, "eqrc.sweep", opts);
    os << "theta_radians,expectation,std_error,n\n";
    for (const auto& p : points) {
        os << format_double(p.theta) << ',' << format_double(p.estimate.value) << ','
           << format_double(p.estimate.std_error) << ',' << p.estimate.n_samples << '\n';
    }
}

void write_run_csv(std::ostream& os, std::span<const SettingRun> rows, const WriteOptions& opts) {
    schema_comment(os, "eqrc.run", opts);
    os << "left_b2,left_b3,right_b2,right_b3,expectation,std_error,n,marginal_left,marginal_right\n";
    for (const auto& r : rows) {
        os << format_double(r.settings.left.b2()) << ',' << format_double(r.settings.left.b3()) << ','
           << format_double(r.settings.right.b2()) << ',' << format_double(r.settings.right.b3()) << ','
           << format_double(r.estimate.value) << ',' << format_double(r.estimate.std_error) << ','
           << r.estimate.n_samples << ',';
        if (r.marginals) os << format_double(r.marginals->left.value) << ',' << format_double(r.marginals->right.value);
        else os << ',';
        os << '\n';
    }
}

std::string run_json_line(const SettingRun& row) {
    json j{{"schema", "eqrc.run"},
           {"v", kFileSchemaVersion},
           {"settings", pair_to_json(row.settings)},
           {"expectation", row.estimate.value},
           {"std_error", row.estimate.std_error},
           {"n", row.estimate.n_samples}};
    if (row.marginals) {
        j["marginal_left"] = row.marginals->left.value;
        j["marginal_right"] = row.marginals->right.value;
    }
    return j.dump();
}

void write_triples_csv(std::ostream& os, const TripleTable& abc_prime, const TripleTable& ab_prime_c,
                       const WriteOptions& opts) {
    schema_comment(os, "eqrc.triples", opts);
    os << "table,s1,s2,s3,count,fraction,std_error\n";
    const auto emit = [&](std::string_view name, const TripleTable& t) {
        for (int s1 : {1, -1}) {
            for (int s2 : {1, -1}) {
                for (int s3 : {1, -1}) {
                    const Outcome o1 = outcome_from_int(s1);
                    const Outcome o2 = outcome_from_int(s2);
                    const Outcome o3 = outcome_from_int(s3);
                    os << name << ',' << s1 << ',' << s2 << ',' << s3 << ',' << t.count(o1, o2, o3) << ','
                       << format_double(t.fraction(o1, o2, o3)) << ',' << format_double(t.fraction_std_error(o1, o2, o3))
                       << '\n';
                }
            }
        }
    };
    emit("abc'", abc_prime);
    emit("ab'c", ab_prime_c);
}

}  // namespace eqrc
