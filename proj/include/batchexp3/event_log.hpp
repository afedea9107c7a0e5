#pragma once

#include "text_io.hpp"

#include <cstddef>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace batchexp3 {

/// One placed bid and its aggregated outcome.
struct EventRow
{
    std::uint64_t round = 0;
    std::size_t period = 0;
    std::size_t item = 0;
    int bid_cents = 0;
    std::size_t bid_index = 0;
    double sampling_prob = 0.0;
    std::int64_t contest_size = 0;
    std::int64_t clicks = 0;
    std::int64_t payment_cents = 0;
    std::int64_t gain_cents = 0;
    std::uint64_t snapshot_version = 0;
    std::uint64_t release_batch = 0; // 0: falls in the unobserved tail

    friend bool operator==(const EventRow&, const EventRow&) = default;
};

enum class UpdateKind { commit, noop, failed, reset, param_change };

inline const char* to_string(UpdateKind k)
{
    switch (k) {
    case UpdateKind::commit: return "commit";
    case UpdateKind::noop: return "noop";
    case UpdateKind::failed: return "failed";
    case UpdateKind::reset: return "reset";
    case UpdateKind::param_change: return "param_change";
    }
    return "?";
}

inline UpdateKind parse_update_kind(std::string_view s)
{
    for (auto k : {UpdateKind::commit, UpdateKind::noop, UpdateKind::failed, UpdateKind::reset,
                   UpdateKind::param_change})
        if (s == to_string(k))
            return k;
    throw std::invalid_argument("unknown update kind '" + std::string(s) + "'");
}

/// Update-stream event: a batch-boundary update attempt, a reset or a
/// parameter change.
struct UpdateEvent
{
    std::uint64_t round = 0;
    std::uint64_t batch = 0;
    UpdateKind kind = UpdateKind::noop;
    std::uint64_t released_batch = 0;
    std::size_t released_count = 0;
    std::uint64_t snapshot_version = 0;
    double eta = 0.0;
    std::string detail;

    friend bool operator==(const UpdateEvent&, const UpdateEvent&) = default;
};

struct EventLog
{
    std::string config_hash;
    std::string code_version;
    std::vector<EventRow> rows;       // ordered by (round, item)
    std::vector<UpdateEvent> updates; // in execution order

    friend bool operator==(const EventLog&, const EventLog&) = default;
};

inline constexpr const char* kEventsHeader =
    "round,period,item,bid,bid_index,sampling_prob,contest_size,clicks,payment,gain,snapshot_version,release_batch";
inline constexpr const char* kUpdatesHeader =
    "round,batch,kind,released_batch,released_count,snapshot_version,eta,detail";

namespace detail {

inline std::string sanitize(std::string s)
{
    for (char& c : s)
        if (c == ',' || c == '\n' || c == '\r')
            c = ';';
    return s;
}

inline void write_meta(std::ostream& out, const EventLog& log, const char* kind)
{
    out << "# batchexp3 " << kind << " v1\n";
    out << "# config_hash=" << log.config_hash << "\n";
    out << "# code_version=" << log.code_version << "\n";
}

inline void read_meta(std::istream& in, EventLog& log, const std::string& path)
{
    std::string line;
    for (int i = 0; i < 3; ++i) {
        if (!std::getline(in, line) || line.rfind("# ", 0) != 0)
            throw std::invalid_argument(path + ": missing metadata header");
        if (line.rfind("# config_hash=", 0) == 0)
            log.config_hash = line.substr(14);
        else if (line.rfind("# code_version=", 0) == 0)
            log.code_version = line.substr(15);
    }
}

} // namespace detail

inline void write_events_csv(std::ostream& out, const EventLog& log)
{
    detail::write_meta(out, log, "events");
    out << kEventsHeader << '\n';
    for (const auto& r : log.rows)
        out << r.round << ',' << r.period << ',' << r.item << ',' << r.bid_cents << ',' << r.bid_index << ','
            << text::shortest(r.sampling_prob) << ',' << r.contest_size << ',' << r.clicks << ','
            << r.payment_cents << ',' << r.gain_cents << ',' << r.snapshot_version << ',' << r.release_batch
            << '\n';
}

inline void write_updates_csv(std::ostream& out, const EventLog& log)
{
    detail::write_meta(out, log, "updates");
    out << kUpdatesHeader << '\n';
    for (const auto& u : log.updates)
        out << u.round << ',' << u.batch << ',' << to_string(u.kind) << ',' << u.released_batch << ','
            << u.released_count << ',' << u.snapshot_version << ',' << text::shortest(u.eta) << ','
            << detail::sanitize(u.detail) << '\n';
}

inline void write_event_log(const EventLog& log, const std::string& events_path, const std::string& updates_path)
{
    std::ofstream ev(events_path, std::ios::binary);
    std::ofstream up(updates_path, std::ios::binary);
    if (!ev || !up)
        throw std::runtime_error("cannot write event log files");
    write_events_csv(ev, log);
    write_updates_csv(up, log);
}

inline EventLog read_event_log(const std::string& events_path, const std::string& updates_path)
{
    EventLog log;
    std::ifstream ev(events_path, std::ios::binary);
    if (!ev)
        throw std::invalid_argument("cannot open " + events_path);
    detail::read_meta(ev, log, events_path);
    std::string line;
    if (!std::getline(ev, line) || line != kEventsHeader)
        throw std::invalid_argument(events_path + ": unexpected column header");
    while (std::getline(ev, line)) {
        if (line.empty())
            continue;
        const auto f = text::split(line, ',');
        if (f.size() != 12)
            throw std::invalid_argument(events_path + ": malformed row '" + line + "'");
        EventRow r;
        r.round = text::to_int<std::uint64_t>(f[0]);
        r.period = text::to_int<std::size_t>(f[1]);
        r.item = text::to_int<std::size_t>(f[2]);
        r.bid_cents = text::to_int<int>(f[3]);
        r.bid_index = text::to_int<std::size_t>(f[4]);
        r.sampling_prob = text::to_double(f[5]);
        r.contest_size = text::to_int<std::int64_t>(f[6]);
        r.clicks = text::to_int<std::int64_t>(f[7]);
        r.payment_cents = text::to_int<std::int64_t>(f[8]);
        r.gain_cents = text::to_int<std::int64_t>(f[9]);
        r.snapshot_version = text::to_int<std::uint64_t>(f[10]);
        r.release_batch = text::to_int<std::uint64_t>(f[11]);
        log.rows.push_back(r);
    }

    std::ifstream up(updates_path, std::ios::binary);
    if (!up)
        throw std::invalid_argument("cannot open " + updates_path);
    EventLog meta;
    detail::read_meta(up, meta, updates_path);
    if (meta.config_hash != log.config_hash)
        throw std::invalid_argument("events and updates logs belong to different configs");
    if (!std::getline(up, line) || line != kUpdatesHeader)
        throw std::invalid_argument(updates_path + ": unexpected column header");
    while (std::getline(up, line)) {
        if (line.empty())
            continue;
        const auto f = text::split(line, ',');
        if (f.size() != 8)
            throw std::invalid_argument(updates_path + ": malformed row '" + line + "'");
        UpdateEvent u;
        u.round = text::to_int<std::uint64_t>(f[0]);
        u.batch = text::to_int<std::uint64_t>(f[1]);
        u.kind = parse_update_kind(f[2]);
        u.released_batch = text::to_int<std::uint64_t>(f[3]);
        u.released_count = text::to_int<std::size_t>(f[4]);
        u.snapshot_version = text::to_int<std::uint64_t>(f[5]);
        u.eta = text::to_double(f[6]);
        u.detail = std::string(f[7]);
        log.updates.push_back(u);
    }
    return log;
}

} // namespace batchexp3
