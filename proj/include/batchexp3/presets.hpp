#pragma once

#include "bandit_core.hpp"
#include "config.hpp"
#include "metrics.hpp"
#include "reference/textbook_exp3.hpp"
#include "runner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace batchexp3 {

struct CriterionResult
{
    std::string name;
    bool passed = false;
    std::string detail;
};

struct PresetReport
{
    std::string preset;
    std::vector<CriterionResult> criteria;

    bool passed() const
    {
        return std::all_of(criteria.begin(), criteria.end(), [](const CriterionResult& c) { return c.passed; });
    }

    std::string format() const
    {
        std::string out = "preset " + preset + "\n";
        for (const auto& c : criteria)
            out += std::string(c.passed ? "PASS " : "FAIL ") + c.name + ": " + c.detail + "\n";
        out += std::string("result ") + (passed() ? "PASS" : "FAIL") + "\n";
        return out;
    }
};

namespace presets {

inline std::vector<double> flat_factors(std::size_t q) { return std::vector<double>(q, 1.0); }

/// Evening-heavy day profile over eight 3-hour periods.
inline std::vector<double> daily_factors() { return {0.15, 0.1, 0.35, 0.7, 0.8, 0.85, 1.0, 0.6}; }

/// Second-price market with a sharply peaked profit curve: competitors
/// cluster at 14-22 cents and a click is worth 20 cents, so the 20-cent bid
/// is the unique best fixed bid.
inline ItemEnvironment benchmark_environment(std::size_t q)
{
    ItemEnvironment env;
    env.mechanism.kind = MechanismKind::second_price;
    env.mechanism.competitor = CentsDistribution::discrete_over({{14, 0.3}, {16, 0.3}, {18, 0.2}, {22, 0.2}});
    env.mechanism.click_prob = 0.5;
    env.valuation.conversion_prob = 1.0;
    env.valuation.value = CentsDistribution::constant_at(20);
    env.traffic.base_rate = 40.0;
    env.traffic.period_factors = flat_factors(q);
    return env;
}

/// Sparse-reward market: 2% of clicks convert, at a high value.
inline ItemEnvironment sparse_environment()
{
    ItemEnvironment env;
    env.mechanism.kind = MechanismKind::second_price;
    env.mechanism.competitor = CentsDistribution::lognormal_with(12.0, 0.6);
    env.mechanism.click_prob = 0.3;
    env.valuation.conversion_prob = 0.02;
    env.valuation.value = CentsDistribution::uniform_on(1000, 2000);
    env.traffic.base_rate = 30.0;
    env.traffic.period_factors = daily_factors();
    return env;
}

inline ExperimentConfig bench_regret_config(std::uint64_t seed)
{
    ExperimentConfig c;
    c.items = 1;
    c.batch_size = 8;
    c.delay = 1;
    c.horizon = 8000;
    c.eta = theorem_learning_rate(c.bid_space.size(), c.horizon);
    c.environments = {benchmark_environment(c.batch_size)};
    c.normalization.kind = NormalizationSource::Kind::simulated_history;
    c.normalization.history_days = 30;
    c.seed = seed;
    return c;
}

inline ExperimentConfig snowball_config(std::uint64_t seed, double eta)
{
    ExperimentConfig c;
    c.items = 1;
    c.batch_size = 8;
    c.delay = 2;
    c.horizon = 8 * 44;
    c.eta = eta;
    c.environments = {sparse_environment()};
    c.normalization.kind = NormalizationSource::Kind::simulated_history;
    c.normalization.history_days = 60;
    c.seed = seed;
    return c;
}

inline ExperimentConfig exp3_equiv_config(std::uint64_t seed)
{
    ExperimentConfig c;
    c.items = 1;
    c.batch_size = 1;
    c.delay = 0;
    c.horizon = 1000;
    c.eta = 0.1;
    ItemEnvironment env = sparse_environment();
    env.valuation.conversion_prob = 0.1;
    env.traffic.period_factors = {1.0};
    c.environments = {env};
    c.normalization.kind = NormalizationSource::Kind::simulated_history;
    c.normalization.history_days = 200;
    c.seed = seed;
    return c;
}

inline double median(std::vector<double> v)
{
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct BenchRun
{
    double regret_full = 0.0;
    double regret_half = 0.0;
    std::vector<double> mean_reward; // per bid, over all rounds
};

inline BenchRun bench_regret_run(std::uint64_t seed)
{
    const Experiment exp(bench_regret_config(seed));
    ScheduleState st = exp.fresh_state();
    EventLog log = exp.empty_log();
    exp.advance(st, log);
    const auto table = exp.reward_table(log);
    const auto T = exp.grid().horizon();
    BenchRun run;
    run.regret_full = compute_regret(log, table, exp.bids()).total_regret;
    run.regret_half = compute_regret(log, table, exp.bids(), T / 2).total_regret;
    run.mean_reward.assign(exp.bids().size(), 0.0);
    for (std::uint64_t t = 1; t <= T; ++t) {
        const auto row = table.at(t, 0);
        for (std::size_t i = 0; i < row.size(); ++i)
            run.mean_reward[i] += row[i] / static_cast<double>(T);
    }
    return run;
}

/// Empirical regret vs. the batch regret bound on the peaked benchmark.
inline PresetReport bench_regret(std::uint64_t base_seed = 1000, std::size_t seeds = 20)
{
    PresetReport report{"bench-regret", {}};
    const auto cfg = bench_regret_config(base_seed);
    const std::size_t B = cfg.bid_space.size();
    const double bound = regret_bound(1, cfg.batch_size, cfg.horizon, B, cfg.delay);
    double full = 0.0, half = 0.0;
    std::vector<double> mean_reward(B, 0.0);
    for (std::size_t s = 0; s < seeds; ++s) {
        const BenchRun run = bench_regret_run(base_seed + s);
        full += run.regret_full / static_cast<double>(seeds);
        half += run.regret_half / static_cast<double>(seeds);
        for (std::size_t i = 0; i < B; ++i)
            mean_reward[i] += run.mean_reward[i] / static_cast<double>(seeds);
    }
    std::vector<double> sorted = mean_reward;
    std::sort(sorted.rbegin(), sorted.rend());
    const double gap = sorted[0] - sorted[1];
    report.criteria.push_back({"profitability gap >= 0.05", gap >= 0.05, "gap " + text::fixed6(gap)});
    report.criteria.push_back({"mean regret <= bound", full <= bound,
                               "regret " + text::fixed6(full) + " bound " + text::fixed6(bound) + " ratio " +
                                   text::fixed6(full / bound)});
    const double T = static_cast<double>(cfg.horizon);
    report.criteria.push_back({"regret/T decreasing", full / T < half / (T / 2),
                               "regret/T at T " + text::fixed6(full / T) + " at T/2 " + text::fixed6(half / (T / 2))});
    return report;
}

/// Per-seed trace of the sparse-reward run.
struct SnowballRun
{
    std::uint64_t collapse_round = 0; // first commit with entropy < 0.5 log|B|, horizon + 1 if none
    bool pathology = false;
    std::string pathology_detail;
};

inline SnowballRun snowball_run(std::uint64_t seed, double eta)
{
    const Experiment exp(snowball_config(seed, eta));
    const auto& grid = exp.grid();
    const std::size_t B = exp.bids().size();
    const double threshold = 0.5 * std::log(static_cast<double>(B));

    struct Commit
    {
        std::uint64_t round;
        std::vector<double> scores;
    };
    struct Recorder
    {
        double threshold;
        std::uint64_t collapse = 0;
        std::vector<Commit> commits;
        void on_commit(std::uint64_t round, const ScoreTable& scores, const PolicyMatrix& policy)
        {
            if (collapse == 0 && policy_entropy(policy.row(0)) < threshold)
                collapse = round;
            commits.push_back({round, std::vector<double>(scores.row(0).begin(), scores.row(0).end())});
        }
    } rec{threshold, 0, {}};

    ScheduleState st = exp.fresh_state();
    EventLog log = exp.empty_log();
    exp.advance(st, log, 0, 1, rec);

    SnowballRun run;
    run.collapse_round = rec.collapse ? rec.collapse : grid.horizon() + 1;

    // Bids never placed before the first feedback arrived.
    const std::uint64_t blind = (grid.delay() + 1) * grid.batch_size();
    std::vector<bool> placed_early(B, false);
    for (const auto& r : log.rows)
        if (r.round <= blind)
            placed_early[r.bid_index] = true;

    const auto table = exp.profit_table(log);
    std::vector<double> cumulative(B, 0.0);
    std::uint64_t t = 0;
    for (const auto& c : rec.commits) {
        for (; t < c.round; ++t) {
            const auto row = table.at(t + 1, 0);
            for (std::size_t i = 0; i < B; ++i)
                cumulative[i] += row[i];
        }
        const auto top = static_cast<std::size_t>(std::max_element(c.scores.begin(), c.scores.end()) -
                                                  c.scores.begin());
        const bool unique = std::count(c.scores.begin(), c.scores.end(), c.scores[top]) == 1;
        const double best_mean = *std::max_element(cumulative.begin(), cumulative.end());
        if (unique && !placed_early[top] && cumulative[top] < best_mean) {
            run.pathology = true;
            run.pathology_detail = "seed " + std::to_string(seed) + " round " + std::to_string(c.round) + ": bid " +
                                   std::to_string(exp.bids()[top]) + "c leads the scores with mean profit " +
                                   text::fixed6(cumulative[top] / static_cast<double>(c.round)) + " vs best " +
                                   text::fixed6(best_mean / static_cast<double>(c.round));
            break;
        }
    }
    return run;
}

/// Entropy collapse and loss-driven overconfidence under sparse rewards.
inline PresetReport snowball(std::uint64_t base_seed = 2000, std::size_t seeds = 20)
{
    PresetReport report{"snowball", {}};
    std::vector<double> fast, slow;
    std::string example;
    for (std::size_t s = 0; s < seeds; ++s) {
        const SnowballRun hot = snowball_run(base_seed + s, 1.0);
        const SnowballRun cool = snowball_run(base_seed + s, 0.1);
        fast.push_back(static_cast<double>(hot.collapse_round));
        slow.push_back(static_cast<double>(cool.collapse_round));
        if (hot.pathology && example.empty())
            example = hot.pathology_detail;
    }
    const double m_fast = median(fast), m_slow = median(slow);
    report.criteria.push_back({"entropy collapse faster with eta=1", m_fast < m_slow,
                               "median collapse round eta=1 " + text::fixed6(m_fast) + ", eta=0.1 " +
                                   text::fixed6(m_slow)});
    report.criteria.push_back({"snowballing pathology observed", !example.empty(),
                               example.empty() ? "no seed showed an initially unplaced, worse bid leading" : example});
    return report;
}

struct Exp3Comparison
{
    std::uint64_t rounds = 0;
    bool identical = false;
    double max_deviation = 0.0;
};

/// Runs the batch learner with q = 1, delta = 0 and the textbook EXP3 on the
/// same reward stream and seed, comparing policies and scores every round.
inline Exp3Comparison compare_with_textbook_exp3(std::uint64_t seed)
{
    const Experiment exp(exp3_equiv_config(seed));
    const std::size_t B = exp.bids().size();

    struct Recorder
    {
        std::vector<std::vector<double>> scores;
        std::vector<std::vector<double>> policies;
        void on_commit(std::uint64_t, const ScoreTable& s, const PolicyMatrix& p)
        {
            scores.emplace_back(s.values);
            policies.emplace_back(p.probs);
        }
    } rec;

    ScheduleState st = exp.fresh_state();
    std::vector<double> initial = st.policy.probs;
    EventLog log = exp.empty_log();
    exp.advance(st, log, 0, 1, rec);

    const auto& env = exp.environment();
    const auto& norm = exp.normalizer();
    const auto reward = [&](std::uint64_t t, std::size_t arm) {
        const auto profits = env.counterfactual_profits(0, t, 1, std::vector<int>{exp.bids()[arm]});
        return norm(0, 1, static_cast<double>(profits[0]));
    };
    const auto trace = reference::run_textbook_exp3(B, exp.config().eta, exp.grid().horizon(),
                                                    Stream(seed, "bid", 0), reward);

    Exp3Comparison cmp;
    cmp.rounds = trace.size();
    cmp.identical = rec.scores.size() == trace.size();
    auto compare = [&](const std::vector<double>& a, const std::vector<double>& b) {
        if (a.size() != b.size()) {
            cmp.identical = false;
            return;
        }
        for (std::size_t i = 0; i < a.size(); ++i) {
            if (a[i] != b[i])
                cmp.identical = false;
            cmp.max_deviation = std::max(cmp.max_deviation, std::abs(a[i] - b[i]));
        }
    };
    for (std::size_t t = 0; t < trace.size() && t < rec.scores.size(); ++t) {
        compare(t == 0 ? initial : rec.policies[t - 1], trace[t].probs);
        compare(rec.scores[t], trace[t].scores);
        if (log.rows[t].bid_index != trace[t].arm)
            cmp.identical = false;
    }
    return cmp;
}

inline PresetReport exp3_equiv(std::uint64_t seed = 3000)
{
    PresetReport report{"exp3-equiv", {}};
    const Exp3Comparison cmp = compare_with_textbook_exp3(seed);
    report.criteria.push_back({"bit-identical to textbook EXP3", cmp.identical,
                               std::to_string(cmp.rounds) + " rounds, max trajectory deviation " +
                                   text::shortest(cmp.max_deviation)});
    return report;
}

} // namespace presets

} // namespace batchexp3
