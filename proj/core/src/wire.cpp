#include "eqrc/wire.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

#include "eqrc/error.hpp"
#include "eqrc/io.hpp"

namespace eqrc::wire {

using nlohmann::json;

namespace {

const std::map<std::string, std::vector<std::string>>& all_schemas() {
    static const std::map<std::string, std::vector<std::string>> schemas{
        {"session", {"session", "first_n", "count"}},
        {"emit", {"n", "lambda", "t"}},
        {"session_end", {"session"}},
        {"shutdown", {}},
        {"hello", {"station"}},
        {"key_digest", {"station", "digest_hex"}},
        {"key_ack", {"ok"}},
        {"report", {"n", "station", "setting", "outcome", "clock_ns"}},
        {"end", {"station"}},
    };
    return schemas;
}

json header(std::string_view type) { return json{{"v", kVersion}, {"type", type}}; }

// Parses and checks the envelope and exact member set; returns (type, body).
std::pair<std::string, json> parse_strict(std::string_view payload) {
    json j;
    try {
        j = json::parse(payload);
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("message is not JSON: ") + e.what());
    }
    if (!j.is_object()) throw FormatError("message must be a JSON object");
    if (!j.contains("v") || !j["v"].is_number_integer() || j["v"].get<int>() != kVersion) {
        throw FormatError("message has missing or unsupported schema version");
    }
    if (!j.contains("type") || !j["type"].is_string()) throw FormatError("message has no type");
    const auto type = j["type"].get<std::string>();
    const auto& schemas = all_schemas();
    const auto it = schemas.find(type);
    if (it == schemas.end()) throw FormatError("unknown message type '" + type + "'");

    const auto& fields = it->second;
    for (const auto& [key, _] : j.items()) {
        if (key == "v" || key == "type") continue;
        if (std::find(fields.begin(), fields.end(), key) == fields.end()) {
            throw FormatError("unexpected member '" + key + "' in " + type + " message");
        }
    }
    for (const auto& f : fields) {
        if (!j.contains(f)) throw FormatError("missing member '" + f + "' in " + type + " message");
    }
    return {type, std::move(j)};
}

template <typename T>
T get_as(const json& j, const char* key) {
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw FormatError(std::string("bad member '") + key + "': " + e.what());
    }
}

std::uint64_t get_index(const json& j, const char* key) {
    if (!j.at(key).is_number_unsigned()) throw FormatError(std::string("member '") + key + "' must be unsigned");
    return j.at(key).get<std::uint64_t>();
}

double get_unit(const json& j, const char* key) {
    if (!j.at(key).is_number()) throw FormatError(std::string("member '") + key + "' must be a number");
    const double v = j.at(key).get<double>();
    if (!(v >= 0.0 && v < 1.0)) throw FormatError(std::string("member '") + key + "' outside [0,1)");
    return v;
}

Station get_station(const json& j) {
    try {
        return station_from_string(get_as<std::string>(j, "station"));
    } catch (const InvalidArgument& e) {
        throw FormatError(e.what());
    }
}

SessionStart session_from(const json& j) {
    SessionStart m{get_index(j, "session"), get_index(j, "first_n"), get_index(j, "count")};
    if (m.first_n == 0) throw FormatError("session first_n must be positive");
    return m;
}

}  // namespace

std::string encode(const SessionStart& m) {
    auto j = header("session");
    j["session"] = m.session;
    j["first_n"] = m.first_n;
    j["count"] = m.count;
    return j.dump();
}

std::string encode(const SourceEmit& m) {
    // Built by hand so the floats are the shortest round-trip decimal.
    std::string s = "{\"v\":1,\"type\":\"emit\",\"n\":";
    s += std::to_string(m.n);
    s += ",\"lambda\":";
    s += format_double(m.lambda);
    s += ",\"t\":";
    s += format_double(m.t);
    s += '}';
    return s;
}

std::string encode(const SessionEnd& m) {
    auto j = header("session_end");
    j["session"] = m.session;
    return j.dump();
}

std::string encode(const Shutdown&) { return header("shutdown").dump(); }

std::string encode(const Hello& m) {
    auto j = header("hello");
    j["station"] = to_string(m.station);
    return j.dump();
}

std::string encode(const KeyDigest& m) {
    auto j = header("key_digest");
    j["station"] = to_string(m.station);
    j["digest_hex"] = m.digest_hex;
    return j.dump();
}

std::string encode(const KeyAck& m) {
    auto j = header("key_ack");
    j["ok"] = m.ok;
    return j.dump();
}

std::string encode(const StationReport& m) {
    std::string s = "{\"v\":1,\"type\":\"report\",\"n\":";
    s += std::to_string(m.n);
    s += ",\"station\":\"";
    s += to_string(m.station);
    s += "\",\"setting\":[";
    s += format_double(m.setting.b2());
    s += ',';
    s += format_double(m.setting.b3());
    s += "],\"outcome\":";
    s += m.outcome == Outcome::plus ? "1" : "-1";
    s += ",\"clock_ns\":";
    s += std::to_string(m.clock_ns);
    s += '}';
    return s;
}

std::string encode(const StationEnd& m) {
    auto j = header("end");
    j["station"] = to_string(m.station);
    return j.dump();
}

std::string encode(const SourceMessage& m) {
    return std::visit([](const auto& x) { return encode(x); }, m);
}

SourceMessage decode_source_message(std::string_view payload) {
    const auto [type, j] = parse_strict(payload);
    if (type == "session") return session_from(j);
    if (type == "emit") {
        SourceEmit m{get_index(j, "n"), get_unit(j, "lambda"), get_unit(j, "t")};
        if (m.n == 0) throw FormatError("emit pair index must be positive");
        return m;
    }
    if (type == "session_end") return SessionEnd{get_index(j, "session")};
    if (type == "shutdown") return Shutdown{};
    throw FormatError("message type '" + type + "' is not sent by a source");
}

KeyAck decode_key_ack(std::string_view payload) {
    const auto [type, j] = parse_strict(payload);
    if (type != "key_ack") throw FormatError("expected key_ack, got '" + type + "'");
    if (!j.at("ok").is_boolean()) throw FormatError("key_ack.ok must be boolean");
    return KeyAck{j.at("ok").get<bool>()};
}

Hello decode_hello(std::string_view payload) {
    const auto [type, j] = parse_strict(payload);
    if (type != "hello") throw FormatError("expected hello, got '" + type + "'");
    return Hello{get_station(j)};
}

CollatorInbound decode_collator_inbound(std::string_view payload) {
    const auto [type, j] = parse_strict(payload);
    if (type == "key_digest") return KeyDigest{get_station(j), get_as<std::string>(j, "digest_hex")};
    if (type == "session") return session_from(j);
    if (type == "end") return StationEnd{get_station(j)};
    if (type == "report") {
        StationReport m;
        m.n = get_index(j, "n");
        m.station = get_station(j);
        try {
            m.setting = setting_from_json(j.at("setting"));
            m.outcome = outcome_from_int(get_as<int>(j, "outcome"));
        } catch (const InvalidArgument& e) {
            throw FormatError(e.what());
        }
        m.clock_ns = get_as<std::int64_t>(j, "clock_ns");
        return m;
    }
    throw FormatError("message type '" + type + "' is not sent by a station");
}

PairEvent to_event(const SourceEmit& m) { return PairEvent{m.n, m.lambda, m.t}; }
SourceEmit to_emit(const PairEvent& e) { return SourceEmit{e.n, e.lambda, e.t}; }

const std::map<std::string, std::vector<std::string>>& station_inbound_schema() {
    static const auto schema = [] {
        std::map<std::string, std::vector<std::string>> s;
        for (const char* type : {"session", "emit", "session_end", "shutdown", "key_ack"}) {
            s[type] = all_schemas().at(type);
        }
        return s;
    }();
    return schema;
}

}  // namespace eqrc::wire
