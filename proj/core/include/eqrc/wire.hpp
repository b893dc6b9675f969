#pragma once

// Wire schema of the distributed harness, version 1.
//
// Every message is one JSON object with "v" and "type" members. Decoders are
// strict: the member set of each type is fixed, so an unknown or extra member
// (for instance a remote "setting") makes the message malformed.
//
//   source  -> station : session, emit, session_end, shutdown
//   station -> source  : hello
//   station -> collator: key_digest, session, report, end
//   collator-> station : key_ack

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "eqrc/model.hpp"

namespace eqrc::wire {

inline constexpr int kVersion = 1;

struct SessionStart {
    std::size_t session = 0;
    std::uint64_t first_n = 1;
    std::uint64_t count = 0;
    friend bool operator==(const SessionStart&, const SessionStart&) = default;
};

struct SourceEmit {
    std::uint64_t n = 0;
    double lambda = 0.0;
    double t = 0.0;
    friend bool operator==(const SourceEmit&, const SourceEmit&) = default;
};

struct SessionEnd {
    std::size_t session = 0;
    friend bool operator==(const SessionEnd&, const SessionEnd&) = default;
};

struct Shutdown {
    friend bool operator==(const Shutdown&, const Shutdown&) = default;
};

struct Hello {
    Station station = Station::left;
};

struct KeyDigest {
    Station station = Station::left;
    std::string digest_hex;
};

struct KeyAck {
    bool ok = false;
};

struct StationReport {
    std::uint64_t n = 0;
    Station station = Station::left;
    Setting setting = Setting::canonical();
    Outcome outcome = Outcome::plus;
    std::int64_t clock_ns = 0;
    friend bool operator==(const StationReport&, const StationReport&) = default;
};

struct StationEnd {
    Station station = Station::left;
};

using SourceMessage = std::variant<SessionStart, SourceEmit, SessionEnd, Shutdown>;
using CollatorInbound = std::variant<KeyDigest, SessionStart, StationReport, StationEnd>;

std::string encode(const SessionStart& m);
std::string encode(const SourceEmit& m);
std::string encode(const SessionEnd& m);
std::string encode(const Shutdown& m);
std::string encode(const Hello& m);
std::string encode(const KeyDigest& m);
std::string encode(const KeyAck& m);
std::string encode(const StationReport& m);
std::string encode(const StationEnd& m);
std::string encode(const SourceMessage& m);

// All throw FormatError on anything outside the schema.
SourceMessage decode_source_message(std::string_view payload);
KeyAck decode_key_ack(std::string_view payload);
Hello decode_hello(std::string_view payload);
CollatorInbound decode_collator_inbound(std::string_view payload);

PairEvent to_event(const SourceEmit& m);
SourceEmit to_emit(const PairEvent& e);

// Message type -> member names, for every message a station can receive.
const std::map<std::string, std::vector<std::string>>& station_inbound_schema();

}  // namespace eqrc::wire
