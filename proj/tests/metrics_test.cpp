#include <batchexp3/metrics.hpp>
#include <batchexp3/rng.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

using namespace batchexp3;

namespace {

EventRow row(std::uint64_t round, std::size_t item, std::size_t bid_index, const BidSpace& bids,
             std::int64_t clicks = 0, std::int64_t payment = 0, std::int64_t gain = 0)
{
    EventRow r;
    r.round = round;
    r.item = item;
    r.bid_index = bid_index;
    r.bid_cents = bids[bid_index];
    r.clicks = clicks;
    r.payment_cents = payment;
    r.gain_cents = gain;
    r.sampling_prob = 1.0 / static_cast<double>(bids.size());
    return r;
}

// Random log with one row per (round, item).
EventLog random_log(std::size_t items, std::uint64_t rounds, const BidSpace& bids, std::uint64_t seed)
{
    Stream rng(seed, "log");
    EventLog log;
    for (std::uint64_t t = 1; t <= rounds; ++t)
        for (std::size_t j = 0; j < items; ++j) {
            const auto i = static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(bids.size()) - 1));
            const auto clicks = rng.uniform_int(0, 5);
            log.rows.push_back(row(t, j, i, bids, clicks, clicks * bids[i] / 2, rng.uniform_int(0, 3) * 20 * clicks));
        }
    return log;
}

} // namespace

TEST(Regret, WorkedExample)
{
    const BidSpace bids({5, 10});
    CounterfactualTable table(2, 1, 2);
    table.set(1, 0, std::vector<double>{4, 12});
    table.set(2, 0, std::vector<double>{6, 18});
    EventLog log;
    log.rows = {row(1, 0, 1, bids), row(2, 0, 0, bids)};
    const auto rep = compute_regret(log, table, bids);
    ASSERT_EQ(rep.items.size(), 1u);
    EXPECT_EQ(rep.items[0].hindsight, 30.0);
    EXPECT_EQ(rep.items[0].realized, 18.0);
    EXPECT_EQ(rep.items[0].regret, 12.0);
    EXPECT_EQ(rep.items[0].best_bid_cents, 10);
    EXPECT_EQ(rep.total_regret, 12.0);
}

TEST(Regret, ZeroWhenAlwaysPlayingHindsightBest)
{
    const BidSpace bids({5, 10, 15});
    CounterfactualTable table(3, 1, 3);
    EventLog log;
    for (std::uint64_t t = 1; t <= 3; ++t) {
        table.set(t, 0, std::vector<double>{1.0 * t, 3.0 * t, -1.0});
        log.rows.push_back(row(t, 0, 1, bids));
    }
    EXPECT_EQ(compute_regret(log, table, bids).total_regret, 0.0);
}

TEST(Regret, AdditiveOverItemsAndNonNegative)
{
    const BidSpace bids = BidSpace::standard();
    const EventLog log = random_log(4, 50, bids, 3);
    CounterfactualTable table(50, 4, bids.size());
    Stream rng(4, "cf");
    for (std::uint64_t t = 1; t <= 50; ++t)
        for (std::size_t j = 0; j < 4; ++j) {
            std::vector<double> v(bids.size());
            for (double& x : v)
                x = 100.0 * rng.uniform() - 30.0;
            table.set(t, j, v);
        }
    const auto rep = compute_regret(log, table, bids);
    double sum = 0.0;
    for (const auto& ir : rep.items) {
        EXPECT_GE(ir.regret, 0.0);
        sum += ir.regret;
    }
    EXPECT_DOUBLE_EQ(rep.total_regret, sum);
    // per-item recomputation from scratch
    for (std::size_t j = 0; j < 4; ++j) {
        std::vector<double> sums(bids.size(), 0.0);
        double realized = 0.0;
        for (const auto& r : log.rows)
            if (r.item == j) {
                for (std::size_t i = 0; i < bids.size(); ++i)
                    sums[i] += table.at(r.round, j)[i];
                realized += table.at(r.round, j)[r.bid_index];
            }
        EXPECT_DOUBLE_EQ(rep.items[j].regret, *std::max_element(sums.begin(), sums.end()) - realized);
    }
}

TEST(Regret, MissingRowsRejected)
{
    const BidSpace bids({5, 10});
    CounterfactualTable table(2, 1, 2);
    table.set(1, 0, std::vector<double>{1, 2});
    EventLog log;
    log.rows = {row(1, 0, 0, bids), row(2, 0, 0, bids)};
    EXPECT_THROW(compute_regret(log, table, bids), std::out_of_range);
}

TEST(Regret, BoundFormula)
{
    const double b = 14.0;
    EXPECT_DOUBLE_EQ(regret_bound(1, 8, 8000, 14, 1), 2.0 * std::sqrt(8.0 * 8000.0 * b * std::log(b)) + 1.0);
    EXPECT_DOUBLE_EQ(regret_bound(3, 8, 8000, 14, 2), 3.0 * (2.0 * std::sqrt(8.0 * 8000.0 * b * std::log(b)) + 2.0));
}

TEST(Entropy, Examples)
{
    EXPECT_NEAR(policy_entropy(std::vector<double>(14, 1.0 / 14.0)), std::log(14.0), 1e-12);
    EXPECT_NEAR(std::log(14.0), 2.639, 1e-3);
    std::vector<double> deg(14, 0.0);
    deg[3] = 1.0;
    EXPECT_EQ(policy_entropy(deg), 0.0);
    std::vector<double> half(14, 0.0);
    half[0] = half[1] = 0.5;
    EXPECT_NEAR(policy_entropy(half), std::log(2.0), 1e-12);
    EXPECT_NEAR(policy_entropy(half), 0.693, 1e-3);
}

TEST(GroupSummary, SingleGroupHoldsEverything)
{
    const BidSpace bids = BidSpace::standard();
    EventLog log;
    log.rows = {row(1, 0, 3, bids, 4, 20, 100), row(1, 1, 5, bids, 2, 10, 60)};
    const auto s = group_summary(log, 2, {0.0, 1.0});
    for (const auto& g : s.shares) {
        if (g.group == ProductGroup::profitable) {
            EXPECT_EQ(g.products, 2u);
            EXPECT_DOUBLE_EQ(g.pct_products, 100.0);
            EXPECT_DOUBLE_EQ(g.pct_clicks, 100.0);
            EXPECT_DOUBLE_EQ(g.pct_costs, 100.0);
            EXPECT_DOUBLE_EQ(g.pct_gain, 100.0);
        } else {
            EXPECT_EQ(g.products, 0u);
            EXPECT_EQ(g.pct_clicks, 0.0);
        }
    }
}

TEST(GroupSummary, ColumnsSumToHundred)
{
    const BidSpace bids = BidSpace::standard();
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        const EventLog log = random_log(12, 10, bids, seed);
        const auto s = group_summary(log, 12, {22.0, 1.2});
        double p = 0, c = 0, k = 0, g = 0;
        for (const auto& sh : s.shares) {
            p += sh.pct_products;
            c += sh.pct_clicks;
            k += sh.pct_costs;
            g += sh.pct_gain;
        }
        EXPECT_NEAR(p, 100.0, 0.1);
        EXPECT_NEAR(c, 100.0, 0.1);
        EXPECT_NEAR(k, 100.0, 0.1);
        EXPECT_NEAR(g, 100.0, 0.1);
    }
}

TEST(GroupSummary, ThresholdsAssignGroups)
{
    const BidSpace bids = BidSpace::standard();
    EventLog log;
    log.rows = {row(1, 0, 3, bids, 10, 50, 200), row(1, 1, 3, bids, 10, 100, 50), row(1, 2, 3, bids, 1, 5, 0)};
    const auto s = group_summary(log, 3, {5.0, 1.0});
    EXPECT_EQ(s.assignment, (std::vector<ProductGroup>{ProductGroup::profitable, ProductGroup::unprofitable,
                                                      ProductGroup::low_traffic}));
    EXPECT_NEAR(s.shares[0].pct_products, 100.0 / 3.0, 1e-12);
    EXPECT_NEAR(s.shares[1].pct_costs, 100.0 * 100.0 / 155.0, 1e-12);
    EXPECT_NEAR(s.shares[2].pct_gain, 0.0, 1e-12);
}

TEST(GroupSummary, EmptyLogReportsZeros)
{
    const auto s = group_summary(EventLog{}, 2, {1.0, 1.0});
    ASSERT_EQ(s.shares.size(), 3u);
    EXPECT_EQ(s.shares[2].products, 2u);
    EXPECT_EQ(s.shares[2].pct_clicks, 0.0);
}

TEST(Heatmap, OneBidAllDay)
{
    const BidSpace bids = BidSpace::standard();
    EventLog log;
    for (std::uint64_t t = 1; t <= 8; ++t)
        log.rows.push_back(row(t, 0, 6, bids, 1, 13, 40));
    const auto h = export_heatmaps(log, bids, 8, 1, 1, {ProductGroup::profitable});
    ASSERT_EQ(h.per_item.size(), 1u);
    for (std::size_t i = 0; i < bids.size(); ++i)
        EXPECT_EQ(h.per_item[0].placements_at(i, 0), i == 6 ? 8 : 0);
    EXPECT_EQ(h.per_item[0].profit_at(6, 0), 1.0);
}

TEST(Heatmap, CostOnlyDayIsNonPositive)
{
    const BidSpace bids = BidSpace::standard();
    EventLog log;
    Stream rng(2, "cost");
    for (std::uint64_t t = 1; t <= 16; ++t)
        log.rows.push_back(row(t, 0, static_cast<std::size_t>(rng.uniform_int(0, 13)), bids, 0,
                               rng.uniform_int(0, 50), 0));
    const auto h = export_heatmaps(log, bids, 8, 2, 1, {ProductGroup::unprofitable});
    for (double v : h.per_item[0].profit)
        EXPECT_LE(v, 0.0);
}

TEST(Heatmap, ColumnsSumToQAndAggregateBounded)
{
    const BidSpace bids = BidSpace::standard();
    const std::size_t m = 5;
    const EventLog log = random_log(m, 40, bids, 6);
    const std::vector<ProductGroup> all(m, ProductGroup::low_traffic);
    const auto h = export_heatmaps(log, bids, 8, 5, m, all);
    for (const auto& map : h.per_item)
        for (std::size_t d = 0; d < 5; ++d) {
            std::int64_t col = 0;
            for (std::size_t i = 0; i < bids.size(); ++i) {
                EXPECT_LE(map.placements_at(i, d), 8);
                col += map.placements_at(i, d);
            }
            EXPECT_EQ(col, 8);
        }
    const Heatmap& agg = h.per_group[2];
    for (std::size_t d = 0; d < 5; ++d) {
        std::int64_t col = 0;
        for (std::size_t i = 0; i < bids.size(); ++i) {
            EXPECT_LE(agg.placements_at(i, d), static_cast<std::int64_t>(m * 8));
            col += agg.placements_at(i, d);
        }
        EXPECT_EQ(col, static_cast<std::int64_t>(m * 8));
    }
    for (const auto& map : h.per_item)
        for (double v : map.profit)
            EXPECT_TRUE(v >= -1.0 && v <= 1.0);

    // one item always on one bid: the aggregate cell reaches m q
    EventLog same;
    for (std::uint64_t t = 1; t <= 8; ++t)
        for (std::size_t j = 0; j < m; ++j)
            same.rows.push_back(row(t, j, 2, bids));
    const auto hs = export_heatmaps(same, bids, 8, 1, m, all);
    EXPECT_EQ(hs.per_group[2].placements_at(2, 0), static_cast<std::int64_t>(m * 8));
}

TEST(Exports, CsvFormats)
{
    const BidSpace bids({5, 10});
    const auto dir = std::filesystem::temp_directory_path() / "batchexp3_metrics_test";
    std::filesystem::create_directories(dir);
    EventLog log;
    log.rows = {row(1, 0, 0, bids, 2, 10, 30), row(2, 0, 1, bids, 1, 5, 0)};
    const auto h = export_heatmaps(log, bids, 2, 1, 1, {ProductGroup::profitable});
    write_heatmap_csv((dir / "p.csv").string(), h.per_item[0], true);
    write_heatmap_csv((dir / "v.csv").string(), h.per_item[0], false);
    write_group_summary_csv((dir / "g.csv").string(), group_summary(log, 1, {0.0, 1.0}));
    auto slurp = [](const std::filesystem::path& p) {
        std::ifstream in(p);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    EXPECT_EQ(slurp(dir / "p.csv"), "bid_cents,day_1\n5,1\n10,1\n");
    EXPECT_EQ(slurp(dir / "v.csv"), "bid_cents,day_1\n5,1.000000\n10,-0.250000\n");
    EXPECT_EQ(slurp(dir / "g.csv"), "group,products,pct_products,pct_clicks,pct_costs,pct_gain\n"
                                    "profitable,1,100.000000,100.000000,100.000000,100.000000\n"
                                    "unprofitable,0,0.000000,0.000000,0.000000,0.000000\n"
                                    "low_traffic,0,0.000000,0.000000,0.000000,0.000000\n");
    std::filesystem::remove_all(dir);
}
