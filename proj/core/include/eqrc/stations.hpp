#pragma once

// Distributed realization of the model: one source process broadcasting pair
// events, two stations that each see only their own setting and a locally
// stored gauge key, and a collator that joins the two report streams.
//
// Topology (every arrow is one TCP connection opened by the station):
//
//   station L ──> source <── station R
//   station L ──> collator <── station R

#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "eqrc/experiments.hpp"
#include "eqrc/model.hpp"
#include "eqrc/net.hpp"
#include "eqrc/wire.hpp"

namespace eqrc {

// ---------------------------------------------------------------------------
// Key file

inline constexpr int kKeyFileVersion = 1;

void write_key_file(const std::filesystem::path& path, const GaugeKey& key);
// Throws Error if the file is missing or malformed.
GaugeKey read_key_file(const std::filesystem::path& path);
// Hex digest of the canonical key content; equal keys give equal digests.
std::string key_digest(const GaugeKey& key);

// ---------------------------------------------------------------------------
// Source

// Emissions of session `session`: the same events run_experiment feeds to
// setting pair `session` in fixed mode.
std::vector<wire::SourceEmit> session_emissions(std::uint64_t seed, std::uint64_t count, std::size_t session);

struct SourceConfig {
    std::uint64_t seed = 0;
    std::uint64_t count = 0;  // pairs per session
    std::size_t sessions = 1;
    std::uint16_t port = 0;
    std::string host = "127.0.0.1";
    // Called with the bound port once the source accepts connections.
    std::function<void(std::uint16_t)> on_listening;
    // Emission log (JSON-lines of the broadcast messages); may be null.
    std::ostream* log = nullptr;
};

struct EmissionLog {
    std::vector<wire::SessionStart> sessions;
    std::vector<wire::SourceEmit> emits;
    bool partial = false;
};

// Waits for stations L and R, then broadcasts every session. A station
// disconnect writes a "partial" marker to the log and throws NetworkError.
EmissionLog source_run(const SourceConfig& config);

// ---------------------------------------------------------------------------
// Fault injection and collation

enum class FaultKind { drop, duplicate, reorder };

struct FaultSpec {
    FaultKind kind = FaultKind::drop;
    std::size_t position = 0;
    std::size_t window = 2;  // reorder only: reverse `window` reports starting at `position`

    // "drop@K", "duplicate@K", "reorder@K" or "reorder@K:W".
    static FaultSpec parse(std::string_view text);
};

// A report with the session it belongs to.
struct ReportItem {
    std::size_t session = 0;
    wire::StationReport report;
    friend bool operator==(const ReportItem&, const ReportItem&) = default;
};

// Positions index reports (0-based). Throws InvalidArgument when out of range.
std::vector<ReportItem> inject_fault(const FaultSpec& fault, std::vector<ReportItem> stream);

enum class MatchStrategy { pair_id, sequence_order };

MatchStrategy match_strategy_from_string(std::string_view s);

struct CollationResult {
    RunDataset dataset;
    // pair_id: indices reported by only one station.
    std::vector<std::uint64_t> incomplete;
    // sequence_order: reports left over once the shorter stream ran out.
    std::size_t unpaired_left = 0;
    std::size_t unpaired_right = 0;
};

// Incremental join of two report streams. pair_id joins on the pair index and
// rejects duplicates; sequence_order zips in arrival order and numbers the
// pairs 1, 2, 3, ... (a drop silently shifts every later pair).
class Collator {
public:
    explicit Collator(MatchStrategy strategy) : strategy_(strategy) {}

    void push(Station from, const ReportItem& item);
    // Reports from `from` held while waiting for a partner.
    std::size_t buffered(Station from) const noexcept;
    CollationResult finish();

private:
    struct Matched {
        std::uint64_t pair_index;
        std::size_t session;
        wire::StationReport left;
        wire::StationReport right;
    };

    void emit(std::uint64_t pair_index, const ReportItem& left, const ReportItem& right);

    MatchStrategy strategy_;
    std::vector<Matched> matched_;
    // pair_id state
    std::unordered_map<std::uint64_t, std::pair<Station, ReportItem>> pending_;
    std::unordered_set<std::uint64_t> completed_;
    std::size_t pending_left_ = 0;
    std::size_t pending_right_ = 0;
    // sequence_order state
    std::deque<ReportItem> queue_left_;
    std::deque<ReportItem> queue_right_;
};

CollationResult collate(std::span<const ReportItem> left, std::span<const ReportItem> right, MatchStrategy strategy);

// Report logs: the station->collator messages as JSON-lines (session markers
// and reports).
void write_report_log_line(std::ostream& os, const std::string& payload);
std::vector<ReportItem> read_report_log(std::istream& is);

// Reports -> dataset records, as the in-process experiment would emit them.
std::vector<ReportItem> reports_from_dataset(const RunDataset& ds, Station station);

// ---------------------------------------------------------------------------
// Station

// Pure per-station state machine; the networked station_run wraps it.
class StationCore {
public:
    StationCore(Station id, std::vector<Setting> settings, GaugeKey key);

    // Setting used in `session` (the last listed setting repeats).
    const Setting& setting_for(std::size_t session) const noexcept;
    void begin_session(const wire::SessionStart& s);
    wire::StationReport measure(const wire::SourceEmit& e, std::int64_t clock_ns) const;
    std::size_t session() const noexcept { return session_; }
    Station id() const noexcept { return id_; }

private:
    Station id_;
    std::vector<Setting> settings_;
    GaugeKey key_;
    std::size_t session_ = 0;
};

struct StationConfig {
    Station id = Station::left;
    std::vector<Setting> settings{Setting::canonical()};
    std::filesystem::path key_file;
    net::Endpoint source;
    net::Endpoint collator;
    std::optional<FaultSpec> inject;
    std::ostream* log = nullptr;      // report log (what was sent to the collator)
    std::ostream* errors = nullptr;   // rejected messages
};

struct StationResult {
    std::size_t reports_sent = 0;
    bool fault_applied = false;
    std::size_t rejected_messages = 0;
    // Every endpoint this station opened a connection to, in order.
    std::vector<net::Endpoint> connections;
};

// Refuses to start without a readable key file. Connects to the collator,
// exchanges key digests, then connects to the source and measures until
// shutdown.
StationResult station_run(const StationConfig& config);

// ---------------------------------------------------------------------------
// Collator server

struct CollatorConfig {
    std::uint16_t port = 0;
    std::string host = "127.0.0.1";
    MatchStrategy strategy = MatchStrategy::pair_id;
    // A station whose unmatched backlog reaches this many reports is not read
    // until its partner catches up; TCP flow control then stalls it and, in
    // turn, the source.
    std::size_t high_water_mark = 1U << 16;
    std::function<void(std::uint16_t)> on_listening;
};

struct CollatorRunResult {
    CollationResult collation;
    std::string key_digest;
    std::size_t peak_buffered = 0;
};

// Accepts both stations, checks their key digests agree (a mismatch is
// refused and throws), then collates until both stations end.
CollatorRunResult collator_run(const CollatorConfig& config);

}  // namespace eqrc
