#pragma once

#include "bandit_core.hpp"
#include "feedback_pipeline.hpp"
#include "text_io.hpp"

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace batchexp3 {

inline constexpr const char* kSnapshotMagic = "batchexp3-snapshot v1";

/// Versioned key-value snapshot of a run in progress. Doubles are written in
/// shortest round-trip form, so save/load is lossless. The last line is an
/// FNV-1a checksum of everything above it.
struct Snapshot
{
    std::string config_hash;
    std::string code_version;
    std::vector<int> bid_space;
    double eta = 0.0;
    std::uint64_t batch_size = 0;
    std::uint64_t delay = 0;
    std::uint64_t horizon = 0;
    std::uint64_t version = 0;
    std::uint64_t next_round = 1;
    std::uint64_t last_boundary = 0;
    std::size_t enqueued = 0;
    std::size_t released = 0;
    ScoreTable scores;
    std::vector<std::uint64_t> stream_positions;
    std::vector<PendingRecord> pending;
};

class SnapshotError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

inline Snapshot take_snapshot(const ScheduleState& st, const BidSpace& bids, std::string config_hash,
                              std::string code_version)
{
    Snapshot s;
    s.config_hash = std::move(config_hash);
    s.code_version = std::move(code_version);
    s.bid_space = bids.cents();
    s.eta = st.policy.eta;
    const BatchGrid& g = st.queue.grid();
    s.batch_size = g.batch_size();
    s.delay = g.delay();
    s.horizon = g.horizon();
    s.version = st.version;
    s.next_round = st.next_round;
    s.last_boundary = st.queue.last_boundary();
    s.enqueued = st.queue.enqueued();
    s.released = st.queue.released();
    s.scores = st.scores;
    for (const auto& stream : st.bid_streams)
        s.stream_positions.push_back(stream.position());
    s.pending = st.queue.pending();
    return s;
}

inline ScheduleState restore_state(const Snapshot& s, std::uint64_t seed)
{
    const BatchGrid grid(s.batch_size, s.delay, s.horizon);
    std::vector<Stream> streams;
    for (std::size_t j = 0; j < s.stream_positions.size(); ++j)
        streams.emplace_back(seed, "bid", j, 0, s.stream_positions[j]);
    return {s.scores,
            policy_from_scores(s.scores, s.eta),
            s.version,
            std::move(streams),
            DelayQueue::restore(grid, s.last_boundary, s.pending, s.enqueued, s.released),
            s.next_round};
}

inline std::string format_snapshot(const Snapshot& s)
{
    std::ostringstream out;
    out << kSnapshotMagic << '\n';
    out << "config_hash " << s.config_hash << '\n';
    out << "code_version " << s.code_version << '\n';
    out << "bid_space";
    for (int b : s.bid_space)
        out << ' ' << b;
    out << '\n';
    out << "eta " << text::shortest(s.eta) << '\n';
    out << "items " << s.scores.items << '\n';
    out << "batch_size " << s.batch_size << '\n';
    out << "delay " << s.delay << '\n';
    out << "horizon " << s.horizon << '\n';
    out << "round " << s.scores.round << '\n';
    out << "next_round " << s.next_round << '\n';
    out << "version " << s.version << '\n';
    out << "last_boundary " << s.last_boundary << '\n';
    out << "enqueued " << s.enqueued << '\n';
    out << "released " << s.released << '\n';
    for (std::size_t j = 0; j < s.scores.items; ++j) {
        out << "score " << j;
        for (double v : s.scores.row(j))
            out << ' ' << text::shortest(v);
        out << '\n';
    }
    for (std::size_t j = 0; j < s.stream_positions.size(); ++j)
        out << "stream " << j << ' ' << s.stream_positions[j] << '\n';
    for (const auto& p : s.pending) {
        const auto& o = p.outcome;
        out << "pending " << p.placed.round << ' ' << p.placed.item << ' ' << p.placed.bid_index << ' '
            << text::shortest(p.placed.sampling_prob) << ' ' << o.bid_cents << ' ' << o.contest_size << ' '
            << o.clicks << ' ' << o.payment_cents << ' ' << o.gain_cents << '\n';
    }
    std::string body = out.str();
    return body + "checksum " + text::hex64(fnv1a64(body)) + "\n";
}

inline Snapshot parse_snapshot(const std::string& content)
{
    const auto pos = content.rfind("checksum ");
    if (pos == std::string::npos || (pos > 0 && content[pos - 1] != '\n'))
        throw SnapshotError("snapshot has no checksum line");
    const std::string body = content.substr(0, pos);
    std::string stated = content.substr(pos + 9);
    while (!stated.empty() && (stated.back() == '\n' || stated.back() == '\r'))
        stated.pop_back();
    if (stated != text::hex64(fnv1a64(body)))
        throw SnapshotError("snapshot checksum mismatch: file was modified or truncated");

    std::istringstream in(body);
    std::string line;
    if (!std::getline(in, line) || line != kSnapshotMagic)
        throw SnapshotError("not a batchexp3 snapshot or unsupported version");

    Snapshot s;
    std::size_t items = 0;
    std::uint64_t round = 0;
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        auto fail = [&] { throw SnapshotError("malformed snapshot line: " + line); };
        auto word = [&] {
            std::string w;
            if (!(ls >> w))
                fail();
            return w;
        };
        try {
            if (key == "config_hash")
                s.config_hash = word();
            else if (key == "code_version")
                s.code_version = word();
            else if (key == "bid_space") {
                std::string w;
                while (ls >> w)
                    s.bid_space.push_back(text::to_int<int>(w));
            } else if (key == "eta")
                s.eta = text::to_double(word());
            else if (key == "items")
                items = text::to_int<std::size_t>(word());
            else if (key == "batch_size")
                s.batch_size = text::to_int<std::uint64_t>(word());
            else if (key == "delay")
                s.delay = text::to_int<std::uint64_t>(word());
            else if (key == "horizon")
                s.horizon = text::to_int<std::uint64_t>(word());
            else if (key == "round")
                round = text::to_int<std::uint64_t>(word());
            else if (key == "next_round")
                s.next_round = text::to_int<std::uint64_t>(word());
            else if (key == "version")
                s.version = text::to_int<std::uint64_t>(word());
            else if (key == "last_boundary")
                s.last_boundary = text::to_int<std::uint64_t>(word());
            else if (key == "enqueued")
                s.enqueued = text::to_int<std::size_t>(word());
            else if (key == "released")
                s.released = text::to_int<std::size_t>(word());
            else if (key == "score") {
                const auto j = text::to_int<std::size_t>(word());
                if (j != rows.size())
                    fail();
                std::vector<double> row;
                std::string w;
                while (ls >> w)
                    row.push_back(text::to_double(w));
                rows.push_back(std::move(row));
            } else if (key == "stream") {
                const auto j = text::to_int<std::size_t>(word());
                if (j != s.stream_positions.size())
                    fail();
                s.stream_positions.push_back(text::to_int<std::uint64_t>(word()));
            } else if (key == "pending") {
                PendingRecord p;
                p.placed.round = text::to_int<std::uint64_t>(word());
                p.placed.item = text::to_int<std::size_t>(word());
                p.placed.bid_index = text::to_int<std::size_t>(word());
                p.placed.sampling_prob = text::to_double(word());
                p.outcome.round = p.placed.round;
                p.outcome.item = p.placed.item;
                p.outcome.bid_cents = text::to_int<int>(word());
                p.outcome.contest_size = text::to_int<std::int64_t>(word());
                p.outcome.clicks = text::to_int<std::int64_t>(word());
                p.outcome.payment_cents = text::to_int<std::int64_t>(word());
                p.outcome.gain_cents = text::to_int<std::int64_t>(word());
                s.pending.push_back(p);
            } else {
                fail();
            }
        } catch (const std::invalid_argument&) {
            fail();
        }
    }

    const std::size_t bids = s.bid_space.size();
    if (items == 0 || rows.size() != items || s.stream_positions.size() != items || bids < 2)
        throw SnapshotError("snapshot is incomplete");
    s.scores = ScoreTable(items, bids);
    s.scores.round = round;
    for (std::size_t j = 0; j < items; ++j) {
        if (rows[j].size() != bids)
            throw SnapshotError("score row " + std::to_string(j) + " has the wrong length");
        std::copy(rows[j].begin(), rows[j].end(), s.scores.row(j).begin());
    }
    return s;
}

inline void save_snapshot(const std::string& path, const Snapshot& s)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write snapshot " + path);
    out << format_snapshot(s);
}

inline Snapshot load_snapshot(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw SnapshotError("cannot open snapshot " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_snapshot(ss.str());
}

} // namespace batchexp3
