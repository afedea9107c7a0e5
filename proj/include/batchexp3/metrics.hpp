#pragma once

#include "auction_sim.hpp"
#include "bandit_core.hpp"
#include "event_log.hpp"
#include "text_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace batchexp3 {

/// Value of every bid at every (round, item) of a run, e.g. counterfactual
/// profit or counterfactual normalized reward.
class CounterfactualTable
{
public:
    CounterfactualTable(std::uint64_t rounds, std::size_t items, std::size_t bids)
        : rounds_(rounds), items_(items), bids_(bids), values_(rounds * items * bids, 0.0),
          present_(rounds * items, false)
    {
    }

    std::uint64_t rounds() const noexcept { return rounds_; }
    std::size_t items() const noexcept { return items_; }
    std::size_t bids() const noexcept { return bids_; }

    void set(std::uint64_t round, std::size_t item, std::span<const double> values)
    {
        check(round, item);
        if (values.size() != bids_)
            throw std::invalid_argument("counterfactual row has wrong length");
        std::copy(values.begin(), values.end(), values_.begin() + offset(round, item));
        present_[(round - 1) * items_ + item] = true;
    }

    bool has(std::uint64_t round, std::size_t item) const
    {
        return round >= 1 && round <= rounds_ && item < items_ && present_[(round - 1) * items_ + item];
    }

    std::span<const double> at(std::uint64_t round, std::size_t item) const
    {
        if (!has(round, item))
            throw std::out_of_range("missing counterfactual row for round " + std::to_string(round) + ", item " +
                                    std::to_string(item));
        return {values_.data() + offset(round, item), bids_};
    }

private:
    void check(std::uint64_t round, std::size_t item) const
    {
        if (round < 1 || round > rounds_ || item >= items_)
            throw std::out_of_range("counterfactual index out of range");
    }
    std::size_t offset(std::uint64_t round, std::size_t item) const
    {
        return ((round - 1) * items_ + item) * bids_;
    }

    std::uint64_t rounds_;
    std::size_t items_;
    std::size_t bids_;
    std::vector<double> values_;
    std::vector<bool> present_;
};

/// Counterfactual table for every logged (round, item), replaying the same
/// contest draws under each bid. transform maps (item, period, profit) to the
/// tabulated value; pass nullptr to keep raw profit in cents.
inline CounterfactualTable build_counterfactuals(
    const EventLog& log, const AuctionEnvironment& env, const BidSpace& bids, std::uint64_t rounds,
    const std::function<double(std::size_t, std::size_t, double)>& transform = nullptr)
{
    CounterfactualTable table(rounds, env.items(), bids.size());
    std::vector<double> row(bids.size());
    for (const auto& r : log.rows) {
        const auto profits = env.counterfactual_profits(r.item, r.round, r.period, bids.cents());
        for (std::size_t i = 0; i < profits.size(); ++i) {
            const auto p = static_cast<double>(profits[i]);
            row[i] = transform ? transform(r.item, r.period, p) : p;
        }
        table.set(r.round, r.item, row);
    }
    return table;
}

struct ItemRegret
{
    std::size_t best_bid_index = 0;
    int best_bid_cents = 0;
    double hindsight = 0.0;
    double realized = 0.0;
    double regret = 0.0;
};

struct RegretReport
{
    std::vector<ItemRegret> items;
    double total_regret = 0.0;
    double bound = 0.0; // n (2 sqrt(q T |B| log|B|) + delta)
};

/// n (2 sqrt(q T |B| log |B|) + delta).
inline double regret_bound(std::size_t items, std::uint64_t q, std::uint64_t horizon, std::size_t bids,
                           std::uint64_t delta)
{
    const double b = static_cast<double>(bids);
    const double per_item =
        2.0 * std::sqrt(static_cast<double>(q) * static_cast<double>(horizon) * b * std::log(b)) +
        static_cast<double>(delta);
    return static_cast<double>(items) * per_item;
}

/// Regret against the best fixed bid per item in hindsight over the logged
/// rounds up to last_round (0: all). Realized values are read from the table
/// at the placed bid.
inline RegretReport compute_regret(const EventLog& log, const CounterfactualTable& table, const BidSpace& bids,
                                   std::uint64_t last_round = 0)
{
    const std::size_t n = table.items();
    std::vector<std::vector<double>> sums(n, std::vector<double>(bids.size(), 0.0));
    std::vector<double> realized(n, 0.0);
    for (const auto& r : log.rows) {
        if (last_round != 0 && r.round > last_round)
            continue;
        const auto values = table.at(r.round, r.item);
        for (std::size_t i = 0; i < values.size(); ++i)
            sums[r.item][i] += values[i];
        realized[r.item] += values[r.bid_index];
    }
    RegretReport report;
    for (std::size_t j = 0; j < n; ++j) {
        const auto best = std::max_element(sums[j].begin(), sums[j].end());
        ItemRegret ir;
        ir.best_bid_index = static_cast<std::size_t>(best - sums[j].begin());
        ir.best_bid_cents = bids[ir.best_bid_index];
        ir.hindsight = *best;
        ir.realized = realized[j];
        ir.regret = ir.hindsight - ir.realized;
        report.total_regret += ir.regret;
        report.items.push_back(ir);
    }
    return report;
}

/// Shannon entropy in nats.
inline double policy_entropy(std::span<const double> probs)
{
    double h = 0.0;
    for (double p : probs)
        if (p > 0.0)
            h -= p * std::log(p);
    return std::max(h, 0.0);
}

struct GroupThresholds
{
    double low_traffic_clicks = 0.0; // items with fewer total clicks are low-traffic
    double gain_to_cost_cutoff = 1.0; // high-traffic items at or above are profitable
};

enum class ProductGroup { profitable, unprofitable, low_traffic };

inline const char* to_string(ProductGroup g)
{
    switch (g) {
    case ProductGroup::profitable: return "profitable";
    case ProductGroup::unprofitable: return "unprofitable";
    case ProductGroup::low_traffic: return "low_traffic";
    }
    return "?";
}

inline constexpr ProductGroup kAllGroups[] = {ProductGroup::profitable, ProductGroup::unprofitable,
                                              ProductGroup::low_traffic};

struct GroupShare
{
    ProductGroup group;
    std::size_t products = 0;
    double pct_products = 0.0;
    double pct_clicks = 0.0;
    double pct_costs = 0.0;
    double pct_gain = 0.0;
};

struct GroupSummary
{
    std::vector<ProductGroup> assignment; // per item
    std::vector<GroupShare> shares;       // one per group, fixed order
};

/// Partitions items by traffic and gain-to-cost ratio and reports each
/// group's share of products, clicks, costs and gain. A column whose total is
/// zero is reported as all zeros.
inline GroupSummary group_summary(const EventLog& log, std::size_t items, const GroupThresholds& thresholds)
{
    std::vector<double> clicks(items, 0.0), costs(items, 0.0), gains(items, 0.0);
    for (const auto& r : log.rows) {
        if (r.item >= items)
            throw std::out_of_range("log row references unknown item");
        clicks[r.item] += static_cast<double>(r.clicks);
        costs[r.item] += static_cast<double>(r.payment_cents);
        gains[r.item] += static_cast<double>(r.gain_cents);
    }
    GroupSummary summary;
    for (std::size_t j = 0; j < items; ++j) {
        if (clicks[j] < thresholds.low_traffic_clicks) {
            summary.assignment.push_back(ProductGroup::low_traffic);
            continue;
        }
        const double ratio = costs[j] > 0.0 ? gains[j] / costs[j]
                                            : (gains[j] > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
        summary.assignment.push_back(ratio >= thresholds.gain_to_cost_cutoff ? ProductGroup::profitable
                                                                             : ProductGroup::unprofitable);
    }

    auto total = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v)
            s += x;
        return s;
    };
    const double tc = total(clicks), tk = total(costs), tg = total(gains);
    auto pct = [](double part, double whole) { return whole > 0.0 ? 100.0 * part / whole : 0.0; };
    for (ProductGroup g : kAllGroups) {
        GroupShare s{g};
        double c = 0.0, k = 0.0, v = 0.0;
        for (std::size_t j = 0; j < items; ++j) {
            if (summary.assignment[j] != g)
                continue;
            ++s.products;
            c += clicks[j];
            k += costs[j];
            v += gains[j];
        }
        s.pct_products = pct(static_cast<double>(s.products), static_cast<double>(items));
        s.pct_clicks = pct(c, tc);
        s.pct_costs = pct(k, tk);
        s.pct_gain = pct(v, tg);
        summary.shares.push_back(s);
    }
    return summary;
}

/// Bid x day grids. profit holds the mean profit per placement rescaled by the
/// grid's max-abs into [-1, 1]; placements counts placed periods.
struct Heatmap
{
    std::string name;
    std::vector<int> bid_cents;
    std::size_t days = 0;
    std::vector<double> profit;     // bids x days, row-major
    std::vector<std::int64_t> placements;

    double profit_at(std::size_t bid, std::size_t day) const { return profit.at(bid * days + day); }
    std::int64_t placements_at(std::size_t bid, std::size_t day) const { return placements.at(bid * days + day); }
};

struct HeatmapExport
{
    std::vector<Heatmap> per_item;
    std::vector<Heatmap> per_group;
};

namespace detail {

inline Heatmap accumulate_heatmap(std::string name, const EventLog& log, const BidSpace& bids, std::uint64_t q,
                                  std::size_t days, const std::function<bool(std::size_t)>& include)
{
    Heatmap h{std::move(name), bids.cents(), days, std::vector<double>(bids.size() * days, 0.0),
              std::vector<std::int64_t>(bids.size() * days, 0)};
    std::vector<double> sums(bids.size() * days, 0.0);
    for (const auto& r : log.rows) {
        if (!include(r.item))
            continue;
        const std::size_t day = static_cast<std::size_t>((r.round - 1) / q);
        if (day >= days)
            continue;
        const std::size_t cell = r.bid_index * days + day;
        sums[cell] += static_cast<double>(r.gain_cents - r.payment_cents);
        ++h.placements[cell];
    }
    double max_abs = 0.0;
    for (std::size_t c = 0; c < sums.size(); ++c) {
        if (h.placements[c] > 0)
            h.profit[c] = sums[c] / static_cast<double>(h.placements[c]);
        max_abs = std::max(max_abs, std::abs(h.profit[c]));
    }
    if (max_abs > 0.0)
        for (double& v : h.profit)
            v /= max_abs;
    return h;
}

} // namespace detail

/// One heatmap pair per item and per product group. Days are batches of q
/// rounds.
inline HeatmapExport export_heatmaps(const EventLog& log, const BidSpace& bids, std::uint64_t q, std::size_t days,
                                     std::size_t items, const std::vector<ProductGroup>& assignment)
{
    HeatmapExport out;
    for (std::size_t j = 0; j < items; ++j)
        out.per_item.push_back(detail::accumulate_heatmap("item" + std::to_string(j), log, bids, q, days,
                                                          [j](std::size_t item) { return item == j; }));
    for (ProductGroup g : kAllGroups)
        out.per_group.push_back(detail::accumulate_heatmap(
            std::string("group_") + to_string(g), log, bids, q, days,
            [&](std::size_t item) { return item < assignment.size() && assignment[item] == g; }));
    return out;
}

inline void write_heatmap_csv(const std::string& path, const Heatmap& h, bool placements)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write " + path);
    out << "bid_cents";
    for (std::size_t d = 0; d < h.days; ++d)
        out << ",day_" << (d + 1);
    out << '\n';
    for (std::size_t b = 0; b < h.bid_cents.size(); ++b) {
        out << h.bid_cents[b];
        for (std::size_t d = 0; d < h.days; ++d) {
            out << ',';
            if (placements)
                out << h.placements_at(b, d);
            else
                out << text::fixed6(h.profit_at(b, d));
        }
        out << '\n';
    }
}

inline void write_group_summary_csv(const std::string& path, const GroupSummary& s)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write " + path);
    out << "group,products,pct_products,pct_clicks,pct_costs,pct_gain\n";
    for (const auto& g : s.shares)
        out << to_string(g.group) << ',' << g.products << ',' << text::fixed6(g.pct_products) << ','
            << text::fixed6(g.pct_clicks) << ',' << text::fixed6(g.pct_costs) << ',' << text::fixed6(g.pct_gain)
            << '\n';
}

/// Two sections: regret in cents of profit and in normalized reward units.
inline void write_regret_csv(const std::string& path, const RegretReport& profit_report,
                             const RegretReport& reward_report)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw std::runtime_error("cannot write " + path);
    out << "item,best_bid_cents,hindsight_profit,realized_profit,regret_profit,best_reward_bid_cents,"
           "hindsight_reward,realized_reward,regret_reward\n";
    for (std::size_t j = 0; j < profit_report.items.size(); ++j) {
        const auto& p = profit_report.items[j];
        const auto& r = reward_report.items.at(j);
        out << j << ',' << p.best_bid_cents << ',' << text::fixed6(p.hindsight) << ',' << text::fixed6(p.realized)
            << ',' << text::fixed6(p.regret) << ',' << r.best_bid_cents << ',' << text::fixed6(r.hindsight) << ','
            << text::fixed6(r.realized) << ',' << text::fixed6(r.regret) << '\n';
    }
    out << "total,,,," << text::fixed6(profit_report.total_regret) << ",,,," << text::fixed6(reward_report.total_regret)
        << '\n';
    out << "bound,,,,,,,," << text::fixed6(reward_report.bound) << '\n';
}

} // namespace batchexp3
