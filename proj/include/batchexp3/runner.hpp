#pragma once

#include "auction_sim.hpp"
#include "bandit_core.hpp"
#include "config.hpp"
#include "event_log.hpp"
#include "feedback_pipeline.hpp"
#include "metrics.hpp"
#include "normalization.hpp"
#include "snapshot.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace batchexp3 {

inline constexpr const char* kCodeVersion = "1.0.0";

/// Uniform-random-bid history for fitting normalization constants. Uses its
/// own environment stream tag, so it never shares draws with the live run.
inline std::vector<HistoryRow> simulate_history(const ExperimentConfig& c, std::uint64_t days)
{
    const AuctionEnvironment env(c.item_environments(), c.seed, "history");
    const BidSpace bids(c.bid_space);
    std::vector<HistoryRow> rows;
    const std::uint64_t rounds = days * c.batch_size;
    rows.reserve(rounds * c.items);
    for (std::size_t j = 0; j < c.items; ++j) {
        Stream pick(c.seed, "history-bid", j);
        for (std::uint64_t t = 1; t <= rounds; ++t) {
            const auto period = static_cast<std::size_t>((t - 1) % c.batch_size + 1);
            const int bid = bids[static_cast<std::size_t>(pick.uniform_int(0, bids.size() - 1))];
            const AggregatedOutcome o = env.run_contest(j, bid, t, period);
            rows.push_back({j, period, static_cast<double>(profit(o)), static_cast<double>(o.contest_size)});
        }
    }
    return rows;
}

/// A configured experiment: environment, normalizer and grid, ready to
/// start or continue schedules.
class Experiment
{
public:
    explicit Experiment(ExperimentConfig config, const std::filesystem::path& base_dir = {})
        : config_(std::move(config)), bids_(config_.bid_space), grid_(config_.grid()),
          env_(config_.item_environments(), config_.seed), normalizer_(resolve_normalization(base_dir))
    {
    }

    const ExperimentConfig& config() const noexcept { return config_; }
    const BidSpace& bids() const noexcept { return bids_; }
    const BatchGrid& grid() const noexcept { return grid_; }
    const AuctionEnvironment& environment() const noexcept { return env_; }
    const RewardNormalizer& normalizer() const noexcept { return normalizer_; }
    const std::vector<HistoryRow>& simulated_history() const noexcept { return history_; }
    std::string hash() const { return config_hash(config_); }

    ScheduleState fresh_state() const
    {
        return ScheduleState::fresh(bids_, config_.eta, config_.items, grid_, config_.seed);
    }

    EventLog empty_log() const { return {hash(), kCodeVersion, {}, {}}; }

    /// Learning rate in force at the start of round t.
    double eta_at(std::uint64_t round) const
    {
        return config_.reset && config_.reset->round <= round ? config_.reset->eta : config_.eta;
    }

    template <class Observer = NullObserver>
    void advance(ScheduleState& st, EventLog& log, std::uint64_t stop_after = 0, unsigned workers = 1,
                 Observer&& obs = {}) const
    {
        ScheduleOptions opt{grid_, config_.reset, stop_after, workers};
        run_schedule(st, opt, bids_, env_, normalizer_, log, std::forward<Observer>(obs));
    }

    CounterfactualTable profit_table(const EventLog& log) const
    {
        return build_counterfactuals(log, env_, bids_, grid_.horizon());
    }

    CounterfactualTable reward_table(const EventLog& log) const
    {
        return build_counterfactuals(log, env_, bids_, grid_.horizon(),
                                     [this](std::size_t item, std::size_t period, double p) {
                                         return normalizer_(item, period, p);
                                     });
    }

private:
    RewardNormalizer resolve_normalization(const std::filesystem::path& base_dir)
    {
        const auto& src = config_.normalization;
        switch (src.kind) {
        case NormalizationSource::Kind::constants:
            return RewardNormalizer(src.constants);
        case NormalizationSource::Kind::history_file: {
            std::filesystem::path p(src.history_file);
            if (p.is_relative() && !base_dir.empty())
                p = base_dir / p;
            try {
                const auto rows = read_history_csv(p.string());
                return RewardNormalizer(fit_normalization(rows, config_.items, config_.batch_size));
            } catch (const std::invalid_argument& e) {
                throw ValidationError(std::string("normalization.history_file: ") + e.what());
            }
        }
        case NormalizationSource::Kind::simulated_history:
            history_ = simulate_history(config_, src.history_days);
            try {
                return RewardNormalizer(fit_normalization(history_, config_.items, config_.batch_size));
            } catch (const std::invalid_argument& e) {
                throw ValidationError(std::string("normalization.simulated_history: ") + e.what());
            }
        }
        throw ValidationError("normalization: unknown source");
    }

    ExperimentConfig config_;
    BidSpace bids_;
    BatchGrid grid_;
    AuctionEnvironment env_;
    std::vector<HistoryRow> history_;
    RewardNormalizer normalizer_;
};

struct RunOptions
{
    std::optional<std::string> out_dir;
    std::optional<std::uint64_t> seed;
    unsigned parallel = 1;
    std::uint64_t stop_at = 0; // 0: run to the horizon
};

struct RunResult
{
    EventLog log;
    ScheduleState state;
    bool complete = false;
    std::filesystem::path out_dir;
};

namespace detail {

/// Stages artifacts as temporary files and moves them into place on commit;
/// without a commit every staged file is removed.
class ArtifactWriter
{
public:
    explicit ArtifactWriter(std::filesystem::path dir) : dir_(std::move(dir))
    {
        if (!std::filesystem::exists(dir_)) {
            std::error_code ec;
            std::filesystem::create_directories(dir_, ec);
            if (ec)
                throw std::runtime_error("cannot create output directory " + dir_.string());
            created_dir_ = true;
        }
    }
    ArtifactWriter(const ArtifactWriter&) = delete;
    ArtifactWriter& operator=(const ArtifactWriter&) = delete;

    ~ArtifactWriter()
    {
        if (committed_)
            return;
        std::error_code ec;
        for (const auto& [staged, final_path] : files_)
            std::filesystem::remove(staged, ec);
        if (created_dir_)
            std::filesystem::remove_all(dir_, ec);
    }

    std::string path(const std::string& name)
    {
        const auto final_path = dir_ / name;
        std::filesystem::create_directories(final_path.parent_path());
        auto staged = final_path;
        staged += ".partial";
        files_.emplace_back(staged, final_path);
        return staged.string();
    }

    void commit()
    {
        for (const auto& [staged, final_path] : files_)
            std::filesystem::rename(staged, final_path);
        committed_ = true;
    }

private:
    std::filesystem::path dir_;
    std::vector<std::pair<std::filesystem::path, std::filesystem::path>> files_;
    bool created_dir_ = false;
    bool committed_ = false;
};

inline void write_text(const std::string& path, const std::string& content)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write " + path);
    out << content;
}

inline void write_artifacts(const Experiment& exp, const EventLog& log, const ScheduleState& st, bool complete,
                            ArtifactWriter& w)
{
    const auto& c = exp.config();
    write_text(w.path("config.json"), serialize_config(c));
    write_event_log(log, w.path("events.csv"), w.path("updates.csv"));
    save_snapshot(w.path("snapshot.txt"), take_snapshot(st, exp.bids(), exp.hash(), kCodeVersion));
    if (!exp.simulated_history().empty())
        write_history_csv(w.path("history.csv"), exp.simulated_history());

    std::ostringstream summary;
    summary << "config_hash=" << exp.hash() << "\n";
    summary << "code_version=" << kCodeVersion << "\n";
    summary << "rounds_completed=" << st.next_round - 1 << "\n";
    summary << "complete=" << (complete ? "true" : "false") << "\n";
    summary << "snapshot_version=" << st.version << "\n";
    summary << "enqueued=" << st.queue.enqueued() << "\n";
    summary << "released=" << st.queue.released() << "\n";
    summary << (complete ? "unreleased_tail=" : "pending=") << st.queue.size() << "\n";

    if (complete) {
        const auto profits = exp.profit_table(log);
        const auto rewards = exp.reward_table(log);
        RegretReport profit_regret = compute_regret(log, profits, exp.bids());
        RegretReport reward_regret = compute_regret(log, rewards, exp.bids());
        reward_regret.bound = regret_bound(c.items, c.batch_size, c.horizon, exp.bids().size(), c.delay);
        write_regret_csv(w.path("regret.csv"), profit_regret, reward_regret);
        summary << "regret_profit_cents=" << text::fixed6(profit_regret.total_regret) << "\n";
        summary << "regret_reward=" << text::fixed6(reward_regret.total_regret) << "\n";
        summary << "regret_bound=" << text::fixed6(reward_regret.bound) << "\n";

        const GroupSummary groups = group_summary(log, c.items, c.groups);
        write_group_summary_csv(w.path("groups.csv"), groups);
        const auto heatmaps = export_heatmaps(log, exp.bids(), c.batch_size, exp.grid().batches(), c.items,
                                              groups.assignment);
        for (const auto& list : {heatmaps.per_item, heatmaps.per_group})
            for (const auto& h : list) {
                write_heatmap_csv(w.path("heatmaps/" + h.name + "_profit.csv"), h, false);
                write_heatmap_csv(w.path("heatmaps/" + h.name + "_placement.csv"), h, true);
            }
    }
    write_text(w.path("run_summary.txt"), summary.str());
}

inline ExperimentConfig apply_overrides(ExperimentConfig c, const RunOptions& opt)
{
    if (opt.seed)
        c.seed = *opt.seed;
    if (opt.out_dir)
        c.output_dir = *opt.out_dir;
    return c;
}

} // namespace detail

/// Runs a configured experiment from round 1 and writes its artifacts. With
/// stop_at before the horizon only the log, config and snapshot are written.
inline RunResult run_experiment(const ExperimentConfig& config, const RunOptions& opt = {},
                                const std::filesystem::path& base_dir = {})
{
    const ExperimentConfig c = detail::apply_overrides(config, opt);
    validate(c);
    if (opt.stop_at > c.horizon)
        throw ValidationError("stop_at: beyond the horizon");
    const Experiment exp(c, base_dir);
    RunResult result{exp.empty_log(), exp.fresh_state(), false, c.output_dir};
    detail::ArtifactWriter writer(result.out_dir);
    exp.advance(result.state, result.log, opt.stop_at, opt.parallel);
    result.complete = result.state.next_round > c.horizon;
    detail::write_artifacts(exp, result.log, result.state, result.complete, writer);
    writer.commit();
    return result;
}

/// Continues a run from its snapshot. The log written so far is read from the
/// output directory and extended, so a stopped-then-resumed run produces the
/// same files as an uninterrupted one. A learning rate that differs from the
/// snapshot's is adopted and logged as a parameter change.
inline RunResult resume_experiment(const std::string& snapshot_path, const ExperimentConfig& config,
                                   const RunOptions& opt = {}, const std::filesystem::path& base_dir = {})
{
    const ExperimentConfig c = detail::apply_overrides(config, opt);
    validate(c);
    const Snapshot snap = load_snapshot(snapshot_path);
    if (snap.code_version != kCodeVersion)
        throw SnapshotError("snapshot written by code version " + snap.code_version + ", this is " + kCodeVersion);
    const Experiment exp(c, base_dir);
    if (snap.config_hash != exp.hash())
        throw SnapshotError("snapshot config hash " + snap.config_hash + " does not match config hash " + exp.hash());

    RunResult result{{}, restore_state(snap, c.seed), false, c.output_dir};
    const auto events = (result.out_dir / "events.csv").string();
    const auto updates = (result.out_dir / "updates.csv").string();
    result.log = read_event_log(events, updates);
    if (result.log.config_hash != exp.hash())
        throw SnapshotError("existing event log belongs to a different config");
    std::erase_if(result.log.rows, [&](const EventRow& r) { return r.round >= snap.next_round; });
    std::erase_if(result.log.updates, [&](const UpdateEvent& u) { return u.round >= snap.next_round; });
    if (result.log.rows.size() != (snap.next_round - 1) * c.items)
        throw SnapshotError("existing event log is shorter than the snapshot");

    ScheduleState& st = result.state;
    if (st.next_round <= c.horizon) {
        const double eta = exp.eta_at(st.next_round);
        const bool reset_now = c.reset && c.reset->round == st.next_round;
        if (!reset_now && eta != st.policy.eta) {
            const double old = st.policy.eta;
            st.policy = policy_from_scores(st.scores, eta);
            ++st.version;
            result.log.updates.push_back({st.next_round, exp.grid().batch_of(st.next_round),
                                          UpdateKind::param_change, 0, 0, st.version, eta,
                                          "eta " + text::shortest(old) + " -> " + text::shortest(eta)});
        }
    }

    detail::ArtifactWriter writer(result.out_dir);
    exp.advance(st, result.log, opt.stop_at, opt.parallel);
    result.complete = st.next_round > c.horizon;
    detail::write_artifacts(exp, result.log, st, result.complete, writer);
    writer.commit();
    return result;
}

} // namespace batchexp3
