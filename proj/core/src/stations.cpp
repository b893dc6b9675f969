#include "eqrc/stations.hpp"

#include <poll.h>

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <variant>
#include <ostream>

#include <nlohmann/json.hpp>

#include "eqrc/error.hpp"
#include "eqrc/io.hpp"
#include "eqrc/random.hpp"

namespace eqrc {

using nlohmann::json;

namespace {

std::int64_t clock_now_ns() {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

std::size_t parse_size(std::string_view text, std::string_view what) {
    std::size_t v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size() || text.empty()) {
        throw InvalidArgument("invalid " + std::string(what) + " '" + std::string(text) + "'");
    }
    return v;
}

void log_line(std::ostream* os, const std::string& payload) {
    if (os) *os << payload << '\n';
}

// Streaming form of inject_fault for a live report stream.
class FaultInjector {
public:
    explicit FaultInjector(std::optional<FaultSpec> spec) : spec_(spec) {}

    template <typename Send>
    void push(const wire::StationReport& r, Send&& send) {
        const std::size_t idx = seen_++;
        if (!spec_) return send(r);
        switch (spec_->kind) {
            case FaultKind::drop:
                if (idx == spec_->position) {
                    applied_ = true;
                    return;
                }
                return send(r);
            case FaultKind::duplicate:
                send(r);
                if (idx == spec_->position) {
                    applied_ = true;
                    send(r);
                }
                return;
            case FaultKind::reorder:
                if (idx >= spec_->position && idx < spec_->position + spec_->window) {
                    held_.push_back(r);
                    if (held_.size() == spec_->window) release(send);
                    return;
                }
                return send(r);
        }
    }

    template <typename Send>
    void finish(Send&& send) {
        if (!held_.empty()) release(send);
    }

    bool applied() const noexcept { return applied_; }

private:
    template <typename Send>
    void release(Send&& send) {
        applied_ = held_.size() == spec_->window;
        for (auto it = held_.rbegin(); it != held_.rend(); ++it) send(*it);
        held_.clear();
    }

    std::optional<FaultSpec> spec_;
    std::size_t seen_ = 0;
    bool applied_ = false;
    std::vector<wire::StationReport> held_;
};

}  // namespace

// ---------------------------------------------------------------------------
// Key file

void write_key_file(const std::filesystem::path& path, const GaugeKey& key) {
    validate(key);
    json j = gauge_to_json(key);
    j["schema"] = "eqrc.key";
    j["v"] = kKeyFileVersion;
    std::ofstream os(path);
    if (!os) throw Error("cannot write key file " + path.string());
    os << j.dump() << '\n';
}

GaugeKey read_key_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw Error("key file " + path.string() + " not found; refusing to start");
    try {
        const json j = json::parse(is);
        if (j.value("schema", "") != "eqrc.key" || j.value("v", 0) != kKeyFileVersion) {
            throw FormatError("key file " + path.string() + " has an unknown schema");
        }
        return gauge_from_json(j);
    } catch (const json::exception& e) {
        throw FormatError("malformed key file " + path.string() + ": " + e.what());
    } catch (const InvalidArgument& e) {
        throw FormatError("invalid key in " + path.string() + ": " + e.what());
    }
}

std::string key_digest(const GaugeKey& key) {
    const std::string canonical = gauge_to_json(key).dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (unsigned char c : canonical) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(mix64(h)));
    return buf;
}

// ---------------------------------------------------------------------------
// Source

std::vector<wire::SourceEmit> session_emissions(std::uint64_t seed, std::uint64_t count, std::size_t session) {
    const PairStream stream(group_seed(seed, session), group_first_index(count, session));
    std::vector<wire::SourceEmit> out;
    out.reserve(count);
    for (std::uint64_t k = 0; k < count; ++k) out.push_back(wire::to_emit(stream.at(k)));
    return out;
}

EmissionLog source_run(const SourceConfig& config) {
    net::Listener listener(config.port, config.host);
    if (config.on_listening) config.on_listening(listener.port());

    std::optional<net::FrameConnection> left;
    std::optional<net::FrameConnection> right;
    while (!left || !right) {
        net::FrameConnection conn(listener.accept());
        const auto hello = conn.recv();
        if (!hello) continue;
        wire::Hello h;
        try {
            h = wire::decode_hello(*hello);
        } catch (const FormatError&) {
            continue;
        }
        auto& slot = h.station == Station::left ? left : right;
        if (!slot) slot.emplace(std::move(conn));
    }

    EmissionLog log;
    const auto broadcast = [&](const std::string& payload) {
        try {
            left->send(payload);
            right->send(payload);
        } catch (const NetworkError& e) {
            log.partial = true;
            log_line(config.log, json{{"v", wire::kVersion}, {"type", "partial"}, {"reason", e.what()}}.dump());
            if (config.log) config.log->flush();
            throw;
        }
        log_line(config.log, payload);
    };
    const auto flush_both = [&] {
        try {
            left->flush();
            right->flush();
        } catch (const NetworkError& e) {
            log.partial = true;
            log_line(config.log, json{{"v", wire::kVersion}, {"type", "partial"}, {"reason", e.what()}}.dump());
            throw;
        }
    };

    if (config.count > 0) {
        for (std::size_t s = 0; s < config.sessions; ++s) {
            const wire::SessionStart start{s, group_first_index(config.count, s), config.count};
            broadcast(wire::encode(start));
            log.sessions.push_back(start);
            for (const auto& emit : session_emissions(config.seed, config.count, s)) {
                broadcast(wire::encode(emit));
                log.emits.push_back(emit);
            }
            broadcast(wire::encode(wire::SessionEnd{s}));
            flush_both();
        }
    }
    broadcast(wire::encode(wire::Shutdown{}));
    flush_both();
    return log;
}

// ---------------------------------------------------------------------------
// Faults and collation

FaultSpec FaultSpec::parse(std::string_view text) {
    const auto at = text.find('@');
    if (at == std::string_view::npos) throw InvalidArgument("fault must be KIND@POS, got '" + std::string(text) + "'");
    const auto kind = text.substr(0, at);
    auto pos = text.substr(at + 1);
    FaultSpec f;
    if (kind == "drop") {
        f.kind = FaultKind::drop;
    } else if (kind == "duplicate") {
        f.kind = FaultKind::duplicate;
    } else if (kind == "reorder") {
        f.kind = FaultKind::reorder;
        if (const auto colon = pos.find(':'); colon != std::string_view::npos) {
            f.window = parse_size(pos.substr(colon + 1), "reorder window");
            pos = pos.substr(0, colon);
            if (f.window < 2) throw InvalidArgument("reorder window must be at least 2");
        }
    } else {
        throw InvalidArgument("unknown fault kind '" + std::string(kind) + "' (drop | duplicate | reorder)");
    }
    f.position = parse_size(pos, "fault position");
    return f;
}

std::vector<ReportItem> inject_fault(const FaultSpec& fault, std::vector<ReportItem> stream) {
    const std::size_t span = fault.kind == FaultKind::reorder ? fault.window : 1;
    if (fault.position >= stream.size() || stream.size() - fault.position < span) {
        throw InvalidArgument("fault position " + std::to_string(fault.position) + " out of range for a stream of " +
                              std::to_string(stream.size()) + " reports");
    }
    const auto at = stream.begin() + static_cast<std::ptrdiff_t>(fault.position);
    switch (fault.kind) {
        case FaultKind::drop:
            stream.erase(at);
            break;
        case FaultKind::duplicate: {
            const ReportItem copy = *at;
            stream.insert(at + 1, copy);
            break;
        }
        case FaultKind::reorder:
            std::reverse(at, at + static_cast<std::ptrdiff_t>(fault.window));
            break;
    }
    return stream;
}

MatchStrategy match_strategy_from_string(std::string_view s) {
    if (s == "pair-id") return MatchStrategy::pair_id;
    if (s == "sequence" || s == "sequence-order") return MatchStrategy::sequence_order;
    throw InvalidArgument("unknown match strategy '" + std::string(s) + "' (pair-id | sequence)");
}

void Collator::emit(std::uint64_t pair_index, const ReportItem& left, const ReportItem& right) {
    matched_.push_back(Matched{pair_index, left.session, left.report, right.report});
}

void Collator::push(Station from, const ReportItem& item) {
    if (item.report.station != from) {
        throw FormatError("station " + std::string(to_string(from)) + " sent a report labelled " +
                          std::string(to_string(item.report.station)));
    }
    if (strategy_ == MatchStrategy::sequence_order) {
        (from == Station::left ? queue_left_ : queue_right_).push_back(item);
        while (!queue_left_.empty() && !queue_right_.empty()) {
            emit(matched_.size() + 1, queue_left_.front(), queue_right_.front());
            queue_left_.pop_front();
            queue_right_.pop_front();
        }
        return;
    }

    const std::uint64_t n = item.report.n;
    if (completed_.contains(n)) throw PairingError("duplicate report for pair_index " + std::to_string(n));
    const auto it = pending_.find(n);
    if (it == pending_.end()) {
        pending_.emplace(n, std::make_pair(from, item));
        ++(from == Station::left ? pending_left_ : pending_right_);
        return;
    }
    if (it->second.first == from) throw PairingError("duplicate report for pair_index " + std::to_string(n));
    const ReportItem& other = it->second.second;
    if (other.session != item.session) {
        throw PairingError("pair_index " + std::to_string(n) + " reported in different sessions by L and R");
    }
    if (from == Station::left) {
        emit(n, item, other);
        --pending_right_;
    } else {
        emit(n, other, item);
        --pending_left_;
    }
    pending_.erase(it);
    completed_.insert(n);
}

std::size_t Collator::buffered(Station from) const noexcept {
    if (strategy_ == MatchStrategy::sequence_order) {
        return from == Station::left ? queue_left_.size() : queue_right_.size();
    }
    return from == Station::left ? pending_left_ : pending_right_;
}

CollationResult Collator::finish() {
    CollationResult result;
    std::stable_sort(matched_.begin(), matched_.end(),
                     [](const Matched& x, const Matched& y) { return x.pair_index < y.pair_index; });

    std::map<std::size_t, SettingPair> session_pairs;
    std::map<std::size_t, std::uint64_t> session_sizes;
    for (const auto& m : matched_) {
        session_pairs.try_emplace(m.session, SettingPair{m.left.setting, m.right.setting});
        ++session_sizes[m.session];
    }
    const std::size_t groups = session_pairs.empty() ? 0 : session_pairs.rbegin()->first + 1;

    RunDataset& ds = result.dataset;
    ds.canonical_pairs.assign(groups, SettingPair{});
    for (const auto& [s, p] : session_pairs) ds.canonical_pairs[s] = p;
    ds.spec.setting_pairs = ds.canonical_pairs;
    ds.spec.key = GaugeKey::constant();
    for (const auto& [s, size] : session_sizes) ds.spec.pairs_per_setting = std::max(ds.spec.pairs_per_setting, size);
    ds.grouped = true;
    ds.records.reserve(2 * matched_.size());
    for (const auto& m : matched_) {
        ds.records.push_back(TaggedRecord{m.session, MeasurementRecord{m.pair_index, Station::left, m.left.setting,
                                                                        m.left.outcome}});
        ds.records.push_back(TaggedRecord{m.session, MeasurementRecord{m.pair_index, Station::right, m.right.setting,
                                                                        m.right.outcome}});
    }

    for (const auto& [n, _] : pending_) result.incomplete.push_back(n);
    std::sort(result.incomplete.begin(), result.incomplete.end());
    result.unpaired_left = queue_left_.size();
    result.unpaired_right = queue_right_.size();
    return result;
}

CollationResult collate(std::span<const ReportItem> left, std::span<const ReportItem> right, MatchStrategy strategy) {
    Collator c(strategy);
    // Interleave so sequence-order buffers stay small; the result does not
    // depend on the interleaving.
    const std::size_t n = std::max(left.size(), right.size());
    for (std::size_t i = 0; i < n; ++i) {
        if (i < left.size()) c.push(Station::left, left[i]);
        if (i < right.size()) c.push(Station::right, right[i]);
    }
    return c.finish();
}

void write_report_log_line(std::ostream& os, const std::string& payload) { os << payload << '\n'; }

std::vector<ReportItem> read_report_log(std::istream& is) {
    std::vector<ReportItem> out;
    std::size_t session = 0;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto msg = wire::decode_collator_inbound(line);
        if (const auto* s = std::get_if<wire::SessionStart>(&msg)) {
            session = s->session;
        } else if (const auto* r = std::get_if<wire::StationReport>(&msg)) {
            out.push_back(ReportItem{session, *r});
        }
    }
    return out;
}

std::vector<ReportItem> reports_from_dataset(const RunDataset& ds, Station station) {
    std::vector<ReportItem> out;
    out.reserve(ds.records.size() / 2);
    for (const auto& r : ds.records) {
        if (r.record.station != station) continue;
        out.push_back(ReportItem{r.group.value_or(0), wire::StationReport{r.record.pair_index, station,
                                                                          r.record.setting, r.record.outcome, 0}});
    }
    return out;
}

// ---------------------------------------------------------------------------
// Station

StationCore::StationCore(Station id, std::vector<Setting> settings, GaugeKey key)
    : id_(id), settings_(std::move(settings)), key_(key) {
    if (settings_.empty()) throw InvalidArgument("station needs at least one setting");
    validate(key_);
}

const Setting& StationCore::setting_for(std::size_t session) const noexcept {
    return settings_[std::min(session, settings_.size() - 1)];
}

void StationCore::begin_session(const wire::SessionStart& s) { session_ = s.session; }

wire::StationReport StationCore::measure(const wire::SourceEmit& e, std::int64_t clock_ns) const {
    const Setting& own = setting_for(session_);
    const PairEvent ev = wire::to_event(e);
    const Outcome o = id_ == Station::left ? measure_left(own, ev, key_) : measure_right(own, ev, key_);
    return wire::StationReport{e.n, id_, own, o, clock_ns};
}

StationResult station_run(const StationConfig& config) {
    const GaugeKey key = read_key_file(config.key_file);
    StationCore core(config.id, config.settings, key);
    StationResult result;

    result.connections.push_back(config.collator);
    net::FrameConnection collator(net::connect_to(config.collator));
    collator.send(wire::encode(wire::KeyDigest{config.id, key_digest(key)}));
    collator.flush();
    const auto ack_frame = collator.recv();
    if (!ack_frame) throw NetworkError("collator closed the connection during key agreement");
    if (!wire::decode_key_ack(*ack_frame).ok) throw Error("collator rejected the key digest (keys differ)");

    result.connections.push_back(config.source);
    net::FrameConnection source(net::connect_to(config.source));
    source.send(wire::encode(wire::Hello{config.id}));
    source.flush();

    FaultInjector injector(config.inject);
    const auto send_report = [&](const wire::StationReport& r) {
        const std::string payload = wire::encode(r);
        collator.send(payload);
        log_line(config.log, payload);
        ++result.reports_sent;
    };

    for (;;) {
        const auto frame = source.recv([&] { collator.flush(); });
        if (!frame) throw NetworkError("source closed the connection before shutdown");
        wire::SourceMessage msg;
        try {
            msg = wire::decode_source_message(*frame);
        } catch (const FormatError& e) {
            ++result.rejected_messages;
            if (config.errors) *config.errors << "rejected source message: " << e.what() << '\n';
            continue;
        }
        if (const auto* s = std::get_if<wire::SessionStart>(&msg)) {
            injector.finish(send_report);
            core.begin_session(*s);
            const std::string payload = wire::encode(*s);
            collator.send(payload);
            log_line(config.log, payload);
        } else if (const auto* e = std::get_if<wire::SourceEmit>(&msg)) {
            injector.push(core.measure(*e, clock_now_ns()), send_report);
        } else if (std::holds_alternative<wire::Shutdown>(msg)) {
            injector.finish(send_report);
            collator.send(wire::encode(wire::StationEnd{config.id}));
            collator.flush();
            break;
        }
    }
    result.fault_applied = injector.applied();
    if (config.inject && !result.fault_applied && config.errors) {
        *config.errors << "fault position " << config.inject->position << " was never reached\n";
    }
    return result;
}

// ---------------------------------------------------------------------------
// Collator server

CollatorRunResult collator_run(const CollatorConfig& config) {
    net::Listener listener(config.port, config.host);
    if (config.on_listening) config.on_listening(listener.port());

    std::optional<net::FrameConnection> conns[2];
    std::string digests[2];
    while (!conns[0] || !conns[1]) {
        net::FrameConnection conn(listener.accept());
        const auto frame = conn.recv();
        if (!frame) continue;
        const auto msg = wire::decode_collator_inbound(*frame);
        const auto* kd = std::get_if<wire::KeyDigest>(&msg);
        if (!kd) throw FormatError("station must open with a key_digest message");
        const auto idx = static_cast<std::size_t>(kd->station);
        if (conns[idx]) throw FormatError("two stations claim to be " + std::string(to_string(kd->station)));
        digests[idx] = kd->digest_hex;
        conns[idx].emplace(std::move(conn));
    }

    const bool agree = digests[0] == digests[1];
    for (auto& c : conns) {
        c->send(wire::encode(wire::KeyAck{agree}));
        c->flush();
    }
    if (!agree) throw Error("station key digests differ (" + digests[0] + " vs " + digests[1] + "); run refused");

    Collator collator(config.strategy);
    CollatorRunResult result;
    result.key_digest = digests[0];
    bool ended[2] = {false, false};
    std::size_t session[2] = {0, 0};

    const auto drain = [&](std::size_t idx) {
        const auto st = static_cast<Station>(idx);
        while (auto frame = conns[idx]->pop_frame()) {
            const auto msg = wire::decode_collator_inbound(*frame);
            if (const auto* s = std::get_if<wire::SessionStart>(&msg)) {
                session[idx] = s->session;
            } else if (const auto* r = std::get_if<wire::StationReport>(&msg)) {
                collator.push(st, ReportItem{session[idx], *r});
                result.peak_buffered = std::max(result.peak_buffered, collator.buffered(st));
            } else if (std::holds_alternative<wire::StationEnd>(msg)) {
                ended[idx] = true;
            } else {
                throw FormatError("unexpected key_digest after key agreement");
            }
        }
    };

    while (!ended[0] || !ended[1]) {
        pollfd fds[2];
        std::size_t map[2];
        nfds_t nfds = 0;
        const bool over[2] = {collator.buffered(Station::left) >= config.high_water_mark,
                              collator.buffered(Station::right) >= config.high_water_mark};
        for (std::size_t i = 0; i < 2; ++i) {
            if (ended[i]) continue;
            // Throttle a station that is ahead, unless its partner cannot help.
            if (over[i] && !ended[1 - i] && !over[1 - i]) continue;
            fds[nfds] = pollfd{conns[i]->fd(), POLLIN, 0};
            map[nfds++] = i;
        }
        if (::poll(fds, nfds, -1) < 0) {
            if (errno == EINTR) continue;
            throw NetworkError("poll failed");
        }
        for (nfds_t k = 0; k < nfds; ++k) {
            if (!(fds[k].revents & (POLLIN | POLLHUP | POLLERR))) continue;
            const std::size_t i = map[k];
            const bool open = conns[i]->read_available();
            drain(i);
            if (!open) ended[i] = true;
        }
    }
    result.collation = collator.finish();
    return result;
}

}  // namespace eqrc
