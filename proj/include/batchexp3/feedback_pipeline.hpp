#pragma once

#include "auction_sim.hpp"
#include "bandit_core.hpp"
#include "event_log.hpp"

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace batchexp3 {

/// J(t) = ceil(t / q) for t >= 1.
inline std::uint64_t batch_index(std::uint64_t round, std::uint64_t q)
{
    if (round < 1 || q < 1)
        throw std::out_of_range("batch_index needs t >= 1 and q >= 1");
    return (round + q - 1) / q;
}

/// Equal batches of q rounds over a horizon T = q M, feedback delayed by
/// delta batches.
class BatchGrid
{
public:
    BatchGrid(std::uint64_t q, std::uint64_t delta, std::uint64_t horizon) : q_(q), delta_(delta), horizon_(horizon)
    {
        if (q_ < 1)
            throw std::invalid_argument("batch size must be positive");
        if (horizon_ < 1 || horizon_ % q_ != 0)
            throw std::invalid_argument("horizon must be a positive multiple of the batch size");
    }

    std::uint64_t batch_size() const noexcept { return q_; }
    std::uint64_t delay() const noexcept { return delta_; }
    std::uint64_t horizon() const noexcept { return horizon_; }
    std::uint64_t batches() const noexcept { return horizon_ / q_; }

    std::uint64_t batch_of(std::uint64_t round) const
    {
        if (round < 1 || round > horizon_)
            throw std::out_of_range("round " + std::to_string(round) + " outside 1.." + std::to_string(horizon_));
        return batch_index(round, q_);
    }

    /// Position of the round within its batch, 1..q.
    std::size_t period_of(std::uint64_t round) const
    {
        batch_of(round);
        return static_cast<std::size_t>((round - 1) % q_ + 1);
    }

    bool is_boundary(std::uint64_t round) const { return round >= 1 && round % q_ == 0; }

    std::uint64_t last_round_of(std::uint64_t batch) const { return batch * q_; }

    /// Boundary at which a round's outcome is released, 0 if beyond the horizon.
    std::uint64_t release_batch_of(std::uint64_t round) const
    {
        const auto k = batch_of(round) + delta_;
        return k <= batches() ? k : 0;
    }

    friend bool operator==(const BatchGrid&, const BatchGrid&) = default;

private:
    std::uint64_t q_;
    std::uint64_t delta_;
    std::uint64_t horizon_;
};

struct PendingRecord
{
    PlacedBid placed;
    AggregatedOutcome outcome;
    double normalized_reward = 0.0; // filled at release time
};

/// Delay queue keyed by batch index. Records of batch k leave the queue at
/// boundary k + delta.
class DelayQueue
{
public:
    explicit DelayQueue(BatchGrid grid) : grid_(grid) {}

    const BatchGrid& grid() const noexcept { return grid_; }
    std::uint64_t last_boundary() const noexcept { return last_boundary_; }
    std::uint64_t executing_batch() const noexcept { return last_boundary_ + 1; }

    void enqueue(PendingRecord record)
    {
        const auto k = grid_.batch_of(record.placed.round);
        if (k != executing_batch())
            throw std::invalid_argument("round " + std::to_string(record.placed.round) +
                                        " does not belong to the executing batch " +
                                        std::to_string(executing_batch()));
        const auto key = std::make_pair(record.placed.round, record.placed.item);
        if (!keys_.insert(key).second)
            throw std::invalid_argument("duplicate record for round " + std::to_string(key.first) + ", item " +
                                        std::to_string(key.second));
        by_batch_[k].push_back(std::move(record));
        ++enqueued_;
    }

    bool releasable(const PendingRecord& record, std::uint64_t boundary) const
    {
        return boundary >= grid_.batch_of(record.placed.round) + grid_.delay();
    }

    /// Must be called once per boundary in increasing order.
    std::vector<PendingRecord> release_at_boundary(std::uint64_t k)
    {
        if (k != last_boundary_ + 1)
            throw std::logic_error("boundary " + std::to_string(k) + " out of order; expected " +
                                   std::to_string(last_boundary_ + 1));
        if (k > grid_.batches())
            throw std::out_of_range("boundary beyond the horizon");
        last_boundary_ = k;
        if (k <= grid_.delay())
            return {};
        auto node = by_batch_.extract(k - grid_.delay());
        if (node.empty())
            return {};
        std::vector<PendingRecord> out = std::move(node.mapped());
        std::sort(out.begin(), out.end(), [](const PendingRecord& a, const PendingRecord& b) {
            return std::pair(a.placed.round, a.placed.item) < std::pair(b.placed.round, b.placed.item);
        });
        for (const auto& r : out)
            keys_.erase({r.placed.round, r.placed.item});
        released_ += out.size();
        return out;
    }

    /// Records still held, in (round, item) order. After the last boundary this
    /// is the unobserved tail.
    std::vector<PendingRecord> pending() const
    {
        std::vector<PendingRecord> out;
        for (const auto& [k, records] : by_batch_)
            out.insert(out.end(), records.begin(), records.end());
        std::sort(out.begin(), out.end(), [](const PendingRecord& a, const PendingRecord& b) {
            return std::pair(a.placed.round, a.placed.item) < std::pair(b.placed.round, b.placed.item);
        });
        return out;
    }

    std::size_t size() const noexcept { return keys_.size(); }
    std::size_t enqueued() const noexcept { return enqueued_; }
    std::size_t released() const noexcept { return released_; }

    /// Rebuilds a queue from persisted state.
    static DelayQueue restore(BatchGrid grid, std::uint64_t last_boundary, std::vector<PendingRecord> records,
                              std::size_t enqueued, std::size_t released)
    {
        DelayQueue q(grid);
        q.last_boundary_ = last_boundary;
        for (auto& r : records) {
            const auto k = grid.batch_of(r.placed.round);
            if (k + grid.delay() <= last_boundary || k > last_boundary + 1)
                throw std::invalid_argument("persisted record for round " + std::to_string(r.placed.round) +
                                            " is inconsistent with boundary " + std::to_string(last_boundary));
            if (!q.keys_.insert({r.placed.round, r.placed.item}).second)
                throw std::invalid_argument("duplicate persisted record");
            q.by_batch_[k].push_back(std::move(r));
        }
        if (enqueued != released + q.keys_.size())
            throw std::invalid_argument("persisted queue counters do not balance");
        q.enqueued_ = enqueued;
        q.released_ = released;
        return q;
    }

private:
    BatchGrid grid_;
    std::uint64_t last_boundary_ = 0;
    std::map<std::uint64_t, std::vector<PendingRecord>> by_batch_;
    std::set<std::pair<std::uint64_t, std::size_t>> keys_;
    std::size_t enqueued_ = 0;
    std::size_t released_ = 0;
};

struct ResetEvent
{
    std::uint64_t round = 0; // first round sampled after the reset
    double eta = 0.0;
};

struct ScheduleOptions
{
    BatchGrid grid;
    std::optional<ResetEvent> reset;
    std::uint64_t stop_after = 0; // 0: run to the horizon
    unsigned workers = 1;
};

/// Everything needed to continue a run: learner, committed snapshot, bid
/// streams and the delay queue.
struct ScheduleState
{
    ScoreTable scores;
    PolicyMatrix policy; // committed snapshot read by the bid stream
    std::uint64_t version = 0;
    std::vector<Stream> bid_streams;
    DelayQueue queue;
    std::uint64_t next_round = 1;

    static ScheduleState fresh(const BidSpace& bids, double eta, std::size_t items, const BatchGrid& grid,
                               std::uint64_t seed)
    {
        Learner learner = init_learner(bids, eta, items);
        std::vector<Stream> streams;
        streams.reserve(items);
        for (std::size_t j = 0; j < items; ++j)
            streams.emplace_back(seed, "bid", j);
        return {std::move(learner.scores), std::move(learner.policy), 0, std::move(streams), DelayQueue(grid), 1};
    }
};

struct NullObserver
{
};

namespace detail {

template <class Observer>
void notify_commit(Observer& obs, std::uint64_t round, const ScheduleState& st)
{
    if constexpr (requires { obs.on_commit(round, st.scores, st.policy); })
        obs.on_commit(round, st.scores, st.policy);
}

template <class Observer>
void notify_round(Observer& obs, std::uint64_t round, const std::vector<EventRow>& rows)
{
    if constexpr (requires { obs.on_round(round, rows); })
        obs.on_round(round, rows);
}

struct ItemChunk
{
    std::vector<PendingRecord> records;
};

template <class Env>
void simulate_items(ScheduleState& st, const BatchGrid& grid, const BidSpace& bids, const Env& env,
                    std::uint64_t first, std::uint64_t last, std::size_t item_begin, std::size_t item_end,
                    std::vector<ItemChunk>& chunks)
{
    for (std::size_t j = item_begin; j < item_end; ++j) {
        auto& out = chunks[j].records;
        out.clear();
        for (std::uint64_t t = first; t <= last; ++t) {
            const PlacedBid placed = sample_bid(st.policy, t, j, st.bid_streams[j]);
            out.push_back({placed, env.run_contest(j, bids[placed.bid_index], t, grid.period_of(t)), 0.0});
        }
    }
}

} // namespace detail

/// Deterministic event loop over the two streams.
///
/// The bid stream samples every round from the last committed policy and runs
/// the contests; at each batch boundary the update stream normalizes and
/// releases batch J(t) - delta, applies the importance-weighted update to a
/// copy of the scores and commits a new snapshot. A failed update keeps the
/// previous snapshot in force. At a midnight that is both a boundary and a
/// bid tick, the update commits first.
///
/// Within one batch the policy is constant, so with workers > 1 the rounds of
/// a batch are simulated for disjoint item shards in parallel; results are
/// identical to the single-threaded run.
template <class Env, class Normalizer, class Observer = NullObserver>
void run_schedule(ScheduleState& st, const ScheduleOptions& opt, const BidSpace& bids, const Env& env,
                  const Normalizer& normalize, EventLog& log, Observer&& obs = {})
{
    const BatchGrid& grid = opt.grid;
    const std::size_t items = st.scores.items;
    const std::uint64_t end = opt.stop_after == 0 ? grid.horizon() : std::min(opt.stop_after, grid.horizon());
    std::vector<detail::ItemChunk> chunks(items);

    while (st.next_round <= end) {
        const std::uint64_t first = st.next_round;
        const std::uint64_t batch = grid.batch_of(first);
        const std::uint64_t last = std::min(grid.last_round_of(batch), end);

        if (opt.reset && opt.reset->round == first) {
            validate_eta(opt.reset->eta);
            st.scores = ScoreTable(items, bids.size());
            st.scores.round = first - 1;
            st.policy = policy_from_scores(st.scores, opt.reset->eta);
            ++st.version;
            log.updates.push_back(
                {first, batch, UpdateKind::reset, 0, 0, st.version, opt.reset->eta, "scores zeroed"});
            detail::notify_commit(obs, first - 1, st);
        }

        const unsigned workers = std::max(1u, std::min<unsigned>(opt.workers, static_cast<unsigned>(items)));
        if (workers == 1) {
            detail::simulate_items(st, grid, bids, env, first, last, 0, items, chunks);
        } else {
            std::vector<std::jthread> pool;
            std::vector<std::exception_ptr> errors(workers);
            for (unsigned w = 0; w < workers; ++w) {
                const std::size_t b = items * w / workers;
                const std::size_t e = items * (w + 1) / workers;
                pool.emplace_back([&, w, b, e] {
                    try {
                        detail::simulate_items(st, grid, bids, env, first, last, b, e, chunks);
                    } catch (...) {
                        errors[w] = std::current_exception();
                    }
                });
            }
            pool.clear();
            for (auto& e : errors)
                if (e)
                    std::rethrow_exception(e);
        }

        std::vector<EventRow> round_rows;
        for (std::uint64_t t = first; t <= last; ++t) {
            round_rows.clear();
            for (std::size_t j = 0; j < items; ++j) {
                PendingRecord& rec = chunks[j].records[t - first];
                const AggregatedOutcome& o = rec.outcome;
                round_rows.push_back({t, grid.period_of(t), j, o.bid_cents, rec.placed.bid_index,
                                      rec.placed.sampling_prob, o.contest_size, o.clicks, o.payment_cents,
                                      o.gain_cents, st.version, grid.release_batch_of(t)});
                st.queue.enqueue(std::move(rec));
            }
            log.rows.insert(log.rows.end(), round_rows.begin(), round_rows.end());
            detail::notify_round(obs, t, round_rows);
        }
        st.next_round = last + 1;
        st.scores.round = last;

        if (!grid.is_boundary(last))
            continue;

        std::vector<PendingRecord> released = st.queue.release_at_boundary(batch);
        if (released.empty()) {
            log.updates.push_back({last, batch, UpdateKind::noop, 0, 0, st.version, st.policy.eta, ""});
            continue;
        }
        const std::uint64_t released_batch = batch - grid.delay();
        try {
            std::vector<ReleasedReward> rewards;
            rewards.reserve(released.size());
            for (auto& rec : released) {
                rec.normalized_reward = normalize(rec.placed.item, grid.period_of(rec.placed.round),
                                                  static_cast<double>(profit(rec.outcome)));
                rewards.push_back({rec.placed, rec.normalized_reward});
            }
            ScoreTable next = st.scores;
            apply_batch_update(next, rewards);
            if (!next.all_finite())
                throw std::runtime_error("score overflow");
            PolicyMatrix policy = policy_from_scores(next, st.policy.eta);
            st.scores = std::move(next);
            st.policy = std::move(policy);
            ++st.version;
            log.updates.push_back({last, batch, UpdateKind::commit, released_batch, released.size(), st.version,
                                   st.policy.eta, ""});
            detail::notify_commit(obs, last, st);
        } catch (const std::exception& e) {
            log.updates.push_back({last, batch, UpdateKind::failed, released_batch, released.size(), st.version,
                                   st.policy.eta, e.what()});
        }
    }
}

/// Checks the information-flow contract of a log: the snapshot read at round
/// t only contains batches <= J(t-1) - delta, and versions never decrease.
inline std::vector<std::string> audit_information_flow(const EventLog& log, const BatchGrid& grid)
{
    std::vector<std::string> violations;
    std::map<std::uint64_t, std::uint64_t> newest_batch_in_version{{0, 0}};
    std::uint64_t newest = 0;
    for (const auto& u : log.updates) {
        if (u.kind == UpdateKind::commit)
            newest = std::max(newest, u.released_batch);
        newest_batch_in_version[u.snapshot_version] = newest;
    }
    std::uint64_t previous_version = 0;
    for (const auto& r : log.rows) {
        if (r.snapshot_version < previous_version)
            violations.push_back("round " + std::to_string(r.round) + ": snapshot version decreased");
        previous_version = r.snapshot_version;
        const auto it = newest_batch_in_version.find(r.snapshot_version);
        if (it == newest_batch_in_version.end()) {
            violations.push_back("round " + std::to_string(r.round) + ": unknown snapshot version " +
                                 std::to_string(r.snapshot_version));
            continue;
        }
        const std::uint64_t observed = r.round > 1 ? batch_index(r.round - 1, grid.batch_size()) : 0;
        const std::int64_t allowed = static_cast<std::int64_t>(observed) - static_cast<std::int64_t>(grid.delay());
        if (it->second > 0 && static_cast<std::int64_t>(it->second) > allowed)
            violations.push_back("round " + std::to_string(r.round) + ": uses batch " + std::to_string(it->second) +
                                 " but only batches <= " + std::to_string(allowed) + " are observable");
    }
    return violations;
}

} // namespace batchexp3
