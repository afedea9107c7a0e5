// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <batchexp3/batchexp3.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

using namespace batchexp3;
namespace fs = std::filesystem;

namespace {

struct Outcome
{
    bool passed = false;
    std::string detail;
};

std::string num(double x)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// 1
Outcome uniform_initialization()
{
    const Learner l = init_learner(BidSpace::standard(), 0.1, 1);
    double worst = 0.0;
    for (double p : l.policy.probs)
        worst = std::max(worst, std::abs(p - 1.0 / 14.0));
    return {l.policy.bids == 14 && worst <= 1e-12,
            std::to_string(l.policy.bids) + " bids, max |pi - 1/14| = " + num(worst)};
}

// 2
Outcome estimator_unbiasedness()
{
    Stream gen(2024, "acceptance-policies");
    const int pairs = 50;
    const int draws = 100000;
    double exact_err = 0.0, mc_err = 0.0, iid_err = 0.0;
    for (int k = 0; k < pairs; ++k) {
        const std::size_t B = static_cast<std::size_t>(gen.uniform_int(2, 14));
        // min entry 0.05, the remaining mass spread at random
        std::vector<double> w(B);
        double total = 0.0;
        for (double& x : w)
            total += x = gen.uniform();
        const double spare = 1.0 - 0.05 * static_cast<double>(B);
        std::vector<double> pi(B);
        for (std::size_t i = 0; i < B; ++i)
            pi[i] = 0.05 + spare * w[i] / total;
        std::vector<double> loss(B);
        for (double& x : loss)
            x = gen.uniform();

        // brute force over every possible sampled bid
        for (std::size_t i = 0; i < B; ++i) {
            double e = 0.0;
            for (std::size_t b = 0; b < B; ++b)
                e += pi[b] * (b == i ? loss[i] / pi[i] : 0.0);
            exact_err = std::max(exact_err, std::abs(e - loss[i]));
        }

        // Monte Carlo through the production sampler. Draw n uses a uniform
        // from stratum n, so each draw is still distributed as pi.
        std::vector<double> strat(B, 0.0), iid(B, 0.0);
        Stream s(2024, "acceptance-draws", static_cast<std::uint64_t>(k));
        for (int n = 0; n < draws; ++n) {
            const double u = (static_cast<double>(n) + s.uniform()) / draws;
            const std::size_t b = sample_index(pi, u);
            strat[b] += loss[b] / pi[b];
            const std::size_t c = sample_index(pi, s.uniform());
            iid[c] += loss[c] / pi[c];
        }
        for (std::size_t i = 0; i < B; ++i) {
            mc_err = std::max(mc_err, std::abs(strat[i] / draws - loss[i]));
            iid_err = std::max(iid_err, std::abs(iid[i] / draws - loss[i]));
        }
    }
    return {exact_err <= 1e-15 && mc_err <= 0.01,
            "exact max error " + num(exact_err) + ", Monte Carlo max error " + num(mc_err) +
                " (plain iid draws, informational: " + num(iid_err) + ")"};
}

// 3
Outcome exp3_reduction()
{
    const auto cmp = presets::compare_with_textbook_exp3(3000);
    return {cmp.identical && cmp.rounds == 1000,
            std::to_string(cmp.rounds) + " rounds, max deviation " + num(cmp.max_deviation)};
}

Outcome from_report(const PresetReport& r)
{
    Outcome o{r.passed(), ""};
    for (const auto& c : r.criteria)
        o.detail += (o.detail.empty() ? "" : "; ") + std::string(c.passed ? "" : "FAILED ") + c.name + " (" +
                    c.detail + ")";
    return o;
}

// 4
Outcome regret_bound_check() { return from_report(presets::bench_regret()); }

// 5
Outcome delay_accounting()
{
    int checked = 0;
    std::string problems;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        ExperimentConfig c = presets::snowball_config(seed, 1.0);
        c.items = 2;
        c.horizon = 80;
        c.environments[0].valuation.conversion_prob = 0.3;
        const Experiment exp(c);
        struct Watch
        {
            std::vector<double> initial;
            std::uint64_t first_change = 0;
            void on_commit(std::uint64_t round, const ScoreTable& s, const PolicyMatrix&)
            {
                if (first_change == 0 && s.values != initial)
                    first_change = round;
            }
        } watch;
        ScheduleState st = exp.fresh_state();
        watch.initial = st.scores.values;
        EventLog log = exp.empty_log();
        exp.advance(st, log, 0, 1, watch);
        const auto violations = audit_information_flow(log, exp.grid());
        const std::uint64_t expected = 3 * c.batch_size;
        if (watch.first_change != expected)
            problems += " seed " + std::to_string(seed) + " first change at round " +
                        std::to_string(watch.first_change);
        if (!violations.empty())
            problems += " seed " + std::to_string(seed) + ": " + violations.front();
        ++checked;
    }
    return {problems.empty(), problems.empty() ? std::to_string(checked) +
                                                     " runs: first score change at the third boundary (round 24), "
                                                     "audit clean"
                                               : problems};
}

// 6
Outcome snowballing() { return from_report(presets::snowball()); }

// 7
Outcome normalization_contract()
{
    std::vector<double> h;
    for (int i = 0; i <= 100; ++i)
        h.push_back(i);
    const auto q = fit_quantiles(h);
    const bool quantiles = std::abs(q.r_min - 5.0) <= 1e-12 && std::abs(q.r_max - 95.0) <= 1e-12;

    Stream rng(7, "acceptance-normalization");
    bool bounded = true;
    bool alpha_one = true;
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::vector<double>> volumes(8);
        for (auto& v : volumes)
            for (int k = 0; k < 10; ++k)
                v.push_back(1.0 + 500.0 * rng.uniform());
        const auto alphas = fit_alphas(volumes);
        alpha_one &= *std::max_element(alphas.begin(), alphas.end()) == 1.0;
        const double lo = 1000.0 * (rng.uniform() - 0.5);
        const RewardNormalizer norm({alphas, {{lo, lo + 1.0 + 500.0 * rng.uniform()}}});
        for (int k = 0; k < 200; ++k) {
            const double x = std::ldexp(rng.uniform() - 0.5, static_cast<int>(rng.uniform_int(0, 60)));
            for (std::size_t l = 1; l <= 8; ++l) {
                const double r = norm(0, l, x);
                bounded &= r >= 0.0 && r <= 1.0;
            }
        }
        for (double x : {-HUGE_VAL, HUGE_VAL, -1e300, 1e300, 0.0})
            for (std::size_t l = 1; l <= 8; ++l) {
                const double r = norm(0, l, x);
                bounded &= r >= 0.0 && r <= 1.0;
            }
    }
    return {quantiles && bounded && alpha_one,
            "quantiles (" + num(q.r_min) + ", " + num(q.r_max) + "), composed output in [0,1]: " +
                (bounded ? "yes" : "no") + ", max alpha exactly 1: " + (alpha_one ? "yes" : "no")};
}

// 8
Outcome pipeline_conservation()
{
    Stream rng(8, "acceptance-fuzz");
    const std::vector<std::uint64_t> qs{1, 2, 4, 5, 8, 10, 16, 20, 25, 40};
    std::string problems;
    std::size_t total_enqueued = 0;
    const int runs = 6;
    for (int run = 0; run < runs; ++run) {
        ExperimentConfig c = presets::snowball_config(100 + run, 0.05 + rng.uniform());
        c.batch_size = qs[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(qs.size()) - 1))];
        c.delay = static_cast<std::uint64_t>(rng.uniform_int(0, 5));
        c.items = static_cast<std::size_t>(rng.uniform_int(1, 3));
        c.horizon = 10000;
        c.environments[0].traffic.period_factors.assign(c.batch_size, 1.0);
        c.environments[0].valuation.conversion_prob = 0.2 * rng.uniform();
        c.normalization.history_days = 400;
        const Experiment exp(c);
        const BatchGrid grid = exp.grid();

        // randomly failing update stream on top of the real normalizer
        struct Flaky
        {
            const RewardNormalizer* inner;
            Stream* coin;
            double operator()(std::size_t item, std::size_t period, double p) const
            {
                if (coin->uniform() < 0.002)
                    throw std::runtime_error("injected failure");
                return (*inner)(item, period, p);
            }
        } flaky{&exp.normalizer(), &rng};
        ScheduleState st = exp.fresh_state();
        EventLog log = exp.empty_log();
        run_schedule(st, ScheduleOptions{grid, std::nullopt, 0, 1}, exp.bids(), exp.environment(), flaky, log);

        std::size_t released_by_log = 0;
        for (const auto& u : log.updates)
            if (u.kind == UpdateKind::commit || u.kind == UpdateKind::failed)
                released_by_log += u.released_count;
        const auto tail = static_cast<std::size_t>(
            std::count_if(log.rows.begin(), log.rows.end(), [](const EventRow& r) { return r.release_batch == 0; }));
        const std::size_t enq = st.queue.enqueued();
        total_enqueued += enq;
        const std::string tag = " [q=" + std::to_string(c.batch_size) + " delta=" + std::to_string(c.delay) +
                                " n=" + std::to_string(c.items) + "]";
        if (enq != log.rows.size() || st.queue.released() + st.queue.size() != enq ||
            released_by_log != st.queue.released() || tail != st.queue.size() ||
            tail != c.items * std::min(c.delay, grid.batches()) * c.batch_size)
            problems += " conservation broken" + tag;
        if (!audit_information_flow(log, grid).empty())
            problems += " audit failed" + tag;

        const auto groups = group_summary(log, c.items, c.groups);
        const auto maps = export_heatmaps(log, exp.bids(), c.batch_size, grid.batches(), c.items, groups.assignment);
        for (const auto& h : maps.per_item)
            for (std::size_t d = 0; d < h.days; ++d) {
                std::int64_t col = 0;
                for (std::size_t i = 0; i < h.bid_cents.size(); ++i)
                    col += h.placements_at(i, d);
                if (col != static_cast<std::int64_t>(c.batch_size)) {
                    problems += " heatmap column " + std::to_string(d + 1) + " sums to " + std::to_string(col) + tag;
                    break;
                }
            }
    }
    return {problems.empty(), problems.empty() ? std::to_string(runs) + " fuzz runs of 10000 rounds, " +
                                                     std::to_string(total_enqueued) +
                                                     " records: released + tail = enqueued, heatmap columns = q"
                                               : problems};
}

// 9
Outcome determinism_and_resume()
{
    const fs::path root = fs::temp_directory_path() / "batchexp3_acceptance";
    fs::remove_all(root);
    const auto config = load_config(std::string(BATCHEXP3_CONFIG_DIR) + "/reset.json");
    auto to = [&](const std::string& name, std::uint64_t stop = 0) {
        RunOptions o;
        o.out_dir = (root / name).string();
        o.stop_at = stop;
        return o;
    };
    run_experiment(config, to("a"));
    run_experiment(config, to("b"));
    run_experiment(config, to("split", config.horizon / 2));
    resume_experiment((root / "split" / "snapshot.txt").string(), config, to("split"));

    std::string problems;
    for (const char* f : {"events.csv", "updates.csv", "snapshot.txt", "regret.csv", "groups.csv"}) {
        const std::string a = slurp(root / "a" / f);
        if (a.empty())
            problems += std::string(" missing ") + f;
        if (a != slurp(root / "b" / f))
            problems += std::string(" repeat differs in ") + f;
        if (a != slurp(root / "split" / f))
            problems += std::string(" resume differs in ") + f;
    }
    const auto bytes = fs::file_size(root / "a" / "events.csv");
    fs::remove_all(root);
    return {problems.empty(), problems.empty() ? "repeat and stop-at-T/2 + resume byte-identical (events.csv " +
                                                     std::to_string(bytes) + " bytes)"
                                               : problems};
}

} // namespace

int main()
{
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"uniform initialization", uniform_initialization},
        {"estimator unbiasedness", estimator_unbiasedness},
        {"EXP3 reduction", exp3_reduction},
        {"regret bound", regret_bound_check},
        {"delay accounting", delay_accounting},
        {"snowballing", snowballing},
        {"normalization contract", normalization_contract},
        {"pipeline conservation", pipeline_conservation},
        {"determinism and resume", determinism_and_resume},
    };
    int failed = 0;
    int index = 0;
    for (const auto& [name, check] : criteria) {
        ++index;
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = check();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("%s [%d] %s: %s (%.2f s)\n", o.passed ? "PASS" : "FAIL", index, name.c_str(), o.detail.c_str(),
                    secs);
        std::fflush(stdout);
        failed += o.passed ? 0 : 1;
    }
    std::printf("%d/%d criteria passed\n", index - failed, index);
    return failed == 0 ? 0 : 1;
}
